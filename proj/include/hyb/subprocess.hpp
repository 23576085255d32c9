#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "transport.hpp"

extern char** environ;

// Subprocess transport.
//
// The device runs as a separate process connected over a loopback stream
// socket. Frames are exactly encode_frame() output. The host side applies the
// link model in both directions (outbound before writing, inbound after
// reading) so the device process needs no link parameters.

namespace hyb {

namespace detail {

inline void write_all(int fd, std::span<const std::byte> bytes) {
  std::size_t done = 0;
  while(done < bytes.size()) {
    const auto n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if(n < 0) {
      if(errno == EINTR) {
        continue;
      }
      throw PeerClosed(std::string("socket write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

// Returns false on clean EOF before the first byte.
inline bool read_all(int fd, std::span<std::byte> out) {
  std::size_t done = 0;
  while(done < out.size()) {
    const auto n = ::recv(fd, out.data() + done, out.size() - done, 0);
    if(n == 0) {
      if(done == 0) {
        return false;
      }
      throw PeerClosed("socket closed mid-frame");
    }
    if(n < 0) {
      if(errno == EINTR) {
        continue;
      }
      throw PeerClosed(std::string("socket read failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

inline bool is_bulk_kind(MessageKind k) {
  return k == MessageKind::work_block || k == MessageKind::result_block ||
         k == MessageKind::functor_state;
}

}  // end of namespace detail ------------------------------------------------

// SocketEndpoint
class SocketEndpoint : public Endpoint {

  public:

    SocketEndpoint(int fd, std::optional<LinkConfig> config, pid_t child = -1) :
      _fd{fd}, _child{child} {

      int one = 1;
      ::setsockopt(_fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

      auto inbox = std::make_shared<MessageQueue>();
      _inbox = inbox;
      _inbound = std::make_unique<DelayLine>(config, [inbox](Message&& m) { inbox->push(std::move(m)); });
      _link = std::make_unique<QueueEndpoint>(
        config,
        [fd](Message&& m) { detail::write_all(fd, encode_frame(m)); },
        inbox,
        [fd]{ ::shutdown(fd, SHUT_WR); }
      );
      _reader = std::thread([this]{ _read_loop(); });
    }

    ~SocketEndpoint() override { close(); }

    void send_message(Message m) override { _link->send_message(std::move(m)); }

    Completion bulk_transfer(Message m) override { return _link->bulk_transfer(std::move(m)); }

    Message receive_message() override { return _link->receive_message(); }

    std::optional<Message> receive_message_for(std::chrono::milliseconds timeout) override {
      return _link->receive_message_for(timeout);
    }

    void close() override {
      if(_closed.exchange(true)) {
        return;
      }
      _link->close();
      // give the peer a moment to finish its side before tearing down reads
      {
        std::unique_lock lock(_reader_mutex);
        if(!_reader_cv.wait_for(lock, std::chrono::seconds(10), [&]{ return _reader_done; })) {
          ::shutdown(_fd, SHUT_RDWR);
        }
      }
      if(_reader.joinable()) {
        _reader.join();
      }
      ::close(_fd);
      _reap_child();
    }

    LinkCounters counters() const override { return _link->counters(); }

  private:

    void _read_loop() {
      try {
        for(;;) {
          std::array<std::byte, frame_header_size> header;
          if(!detail::read_all(_fd, header)) {
            break;
          }
          const auto [kind, len] = decode_frame_header(header);
          Message m{kind, Bytes(static_cast<std::size_t>(len))};
          if(len > 0 && !detail::read_all(_fd, m.payload)) {
            break;
          }
          _inbound->submit(std::move(m), detail::is_bulk_kind(kind));
        }
      }
      catch(const Error&) {
        // peer vanished or sent garbage; surfaces as PeerClosed to receivers
      }
      _inbound->close();
      _inbox->close();
      {
        std::scoped_lock lock(_reader_mutex);
        _reader_done = true;
      }
      _reader_cv.notify_all();
    }

    void _reap_child() {
      if(_child <= 0) {
        return;
      }
      for(int i = 0; i < 500; ++i) {
        int status = 0;
        const auto r = ::waitpid(_child, &status, WNOHANG);
        if(r == _child || r < 0) {
          _child = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(_child, SIGKILL);
      ::waitpid(_child, nullptr, 0);
      _child = -1;
    }

    int _fd;
    pid_t _child;
    std::shared_ptr<MessageQueue> _inbox;
    std::unique_ptr<DelayLine> _inbound;
    std::unique_ptr<QueueEndpoint> _link;
    std::thread _reader;
    std::mutex _reader_mutex;
    std::condition_variable _reader_cv;
    bool _reader_done {false};
    std::atomic<bool> _closed {false};
};

// Procedure: spawn_device_process
//
// Launches `executable --connect 127.0.0.1:<port> --workers <n>` and accepts
// its connection. The HELLO exchange is left to the caller.
inline std::unique_ptr<Endpoint> spawn_device_process(
  const std::string& executable,
  const LinkConfig& config,
  std::uint32_t workers,
  std::chrono::milliseconds timeout = std::chrono::seconds(10)
) {
  config.validate();
  if(::access(executable.c_str(), X_OK) != 0) {
    throw SpawnFailure("device executable not launchable: " + executable);
  }

  const int listener = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if(listener < 0) {
    throw SpawnFailure(std::string("socket: ") + std::strerror(errno));
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t addr_len = sizeof(addr);
  if(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
     ::listen(listener, 1) != 0 ||
     ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &addr_len) != 0) {
    ::close(listener);
    throw SpawnFailure(std::string("listen: ") + std::strerror(errno));
  }

  const std::string target = "127.0.0.1:" + std::to_string(ntohs(addr.sin_port));
  const std::string worker_arg = std::to_string(workers);
  std::vector<std::string> args{executable, "--connect", target, "--workers", worker_arg};
  std::vector<char*> argv;
  for(auto& a : args) {
    argv.push_back(a.data());
  }
  argv.push_back(nullptr);

  pid_t pid = -1;
  if(const int rc = ::posix_spawn(&pid, executable.c_str(), nullptr, nullptr, argv.data(), environ); rc != 0) {
    ::close(listener);
    throw SpawnFailure("posix_spawn " + executable + ": " + std::strerror(rc));
  }

  const auto deadline = Clock::now() + timeout;
  int fd = -1;
  while(fd < 0) {
    pollfd p{listener, POLLIN, 0};
    const int r = ::poll(&p, 1, 20);
    if(r > 0) {
      fd = ::accept4(listener, nullptr, nullptr, SOCK_CLOEXEC);
      continue;
    }
    int status = 0;
    if(::waitpid(pid, &status, WNOHANG) == pid) {
      ::close(listener);
      throw SpawnFailure("device process exited before connecting: " + executable);
    }
    if(Clock::now() > deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      ::close(listener);
      throw HandshakeTimeout("device process did not connect within timeout");
    }
  }
  ::close(listener);
  return std::make_unique<SocketEndpoint>(fd, config, pid);
}

// Procedure: connect_to_host
//
// Device side; `target` is "host:port". No link model is applied here.
inline std::unique_ptr<Endpoint> connect_to_host(const std::string& target) {
  const auto colon = target.rfind(':');
  if(colon == std::string::npos) {
    throw Error("connect target must be host:port, got " + target);
  }
  const std::string host = target.substr(0, colon);
  const int port = std::stoi(target.substr(colon + 1));

  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if(fd < 0) {
    throw Error(std::string("socket: ") + std::strerror(errno));
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if(::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw Error("bad host address " + host);
  }
  if(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw Error(std::string("connect: ") + std::strerror(errno));
  }
  return std::make_unique<SocketEndpoint>(fd, std::nullopt);
}

}  // end of namespace hyb ----------------------------------------------------
