#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "error.hpp"
#include "serialization.hpp"

// Host/device link.
//
// A link is a full-duplex pair of ordered message streams. Each direction is
// driven by a DelayLine that models the interconnect: small messages pay the
// latency only, bulk transfers additionally pay bytes/bandwidth and are
// serialized per direction (one DMA engine each way). Delivery is FIFO per
// direction regardless of kind.

namespace hyb {

using Clock = std::chrono::steady_clock;
using Seconds = std::chrono::duration<double>;

inline constexpr std::uint32_t protocol_version = 1;

enum class MessageKind : std::uint32_t {
  hello         = 0,
  functor_state = 1,
  work_block    = 2,
  result_block  = 3,
  no_more_work  = 4,
  shutdown      = 5,
  block_ack     = 6,
};

inline const char* to_string(MessageKind k) {
  switch(k) {
    case MessageKind::hello:         return "HELLO";
    case MessageKind::functor_state: return "FUNCTOR_STATE";
    case MessageKind::work_block:    return "WORK_BLOCK";
    case MessageKind::result_block:  return "RESULT_BLOCK";
    case MessageKind::no_more_work:  return "NO_MORE_WORK";
    case MessageKind::shutdown:      return "SHUTDOWN";
    case MessageKind::block_ack:     return "BLOCK_ACK";
  }
  return "UNKNOWN";
}

struct Message {
  MessageKind kind {MessageKind::hello};
  Bytes payload;
};

// Frame header on the wire: kind u32, payload length u64.
inline constexpr std::size_t frame_header_size = 12;

// Procedure: encode_frame
inline Bytes encode_frame(const Message& m) {
  Bytes out;
  out.reserve(frame_header_size + m.payload.size());
  ByteWriter w(out);
  w.write(static_cast<std::uint32_t>(m.kind));
  w.write(static_cast<std::uint64_t>(m.payload.size()));
  w.write_bytes(m.payload);
  return out;
}

// Procedure: decode_frame_header
inline std::pair<MessageKind, std::uint64_t> decode_frame_header(std::span<const std::byte> header) {
  ByteReader r(header);
  const auto kind = r.read<std::uint32_t>();
  const auto len = r.read<std::uint64_t>();
  if(kind > static_cast<std::uint32_t>(MessageKind::block_ack)) {
    throw MalformedBlock("unknown message kind " + std::to_string(kind));
  }
  return {static_cast<MessageKind>(kind), len};
}

enum class TransportKind { in_process, subprocess };

// LinkConfig
struct LinkConfig {
  double bandwidth {1024.0 * 1024.0 * 1024.0};  // bytes per second
  double latency {10e-6};                       // seconds
  TransportKind transport {TransportKind::in_process};

  void validate() const {
    if(!(bandwidth > 0.0)) {
      throw Error("link bandwidth must be positive");
    }
    if(!(latency >= 0.0)) {
      throw Error("link latency must be non-negative");
    }
  }
};

// Procedure: link_time
//
// Simulated duration of moving `bytes` across one direction of the link.
inline Seconds link_time(std::size_t bytes, const LinkConfig& cfg) {
  return Seconds(cfg.latency + static_cast<double>(bytes) / cfg.bandwidth);
}

// ----------------------------------------------------------------------------
// MessageQueue
// ----------------------------------------------------------------------------

// Blocking FIFO inbox. pop() drains remaining messages after close() and then
// reports closure with an empty optional.
class MessageQueue {

  public:

    void push(Message m) {
      {
        std::scoped_lock lock(_mutex);
        if(_closed) {
          return;
        }
        _items.push_back(std::move(m));
      }
      _cv.notify_one();
    }

    std::optional<Message> pop() {
      std::unique_lock lock(_mutex);
      _cv.wait(lock, [&]{ return !_items.empty() || _closed; });
      return pop_locked();
    }

    // Returns nullopt on timeout or closure; closed() tells the two apart.
    template <typename Rep, typename Period>
    std::optional<Message> pop_for(std::chrono::duration<Rep, Period> timeout) {
      std::unique_lock lock(_mutex);
      _cv.wait_for(lock, timeout, [&]{ return !_items.empty() || _closed; });
      return pop_locked();
    }

    void close() {
      {
        std::scoped_lock lock(_mutex);
        _closed = true;
      }
      _cv.notify_all();
    }

    bool closed() const {
      std::scoped_lock lock(_mutex);
      return _closed && _items.empty();
    }

  private:

    std::optional<Message> pop_locked() {
      if(_items.empty()) {
        return std::nullopt;
      }
      auto m = std::move(_items.front());
      _items.pop_front();
      return m;
    }

    mutable std::mutex _mutex;
    std::condition_variable _cv;
    std::deque<Message> _items;
    bool _closed {false};
};

// ----------------------------------------------------------------------------
// DelayLine
// ----------------------------------------------------------------------------

using Completion = std::shared_future<void>;

// One direction of a simulated link. Submitted messages are handed to the
// sink in submission order once their simulated delivery time has passed.
// Without a config the line is a pass-through (delivery as soon as possible).
class DelayLine {

  public:

    using Sink = std::function<void(Message&&)>;

    DelayLine(std::optional<LinkConfig> config, Sink sink) :
      _config{config}, _sink{std::move(sink)} {
      _thread = std::thread([this]{ _run(); });
    }

    DelayLine(const DelayLine&) = delete;
    DelayLine& operator=(const DelayLine&) = delete;

    ~DelayLine() { close(); }

    Completion submit(Message m, bool bulk) {
      std::promise<void> done;
      Completion handle = done.get_future().share();
      {
        std::scoped_lock lock(_mutex);
        if(_closing || _broken) {
          throw PeerClosed();
        }
        const auto now = Clock::now();
        auto due = now;
        if(_config) {
          if(bulk) {
            const auto start = std::max(now, _bulk_busy_until);
            due = start + std::chrono::duration_cast<Clock::duration>(link_time(m.payload.size(), *_config));
            _bulk_busy_until = std::max(due, _bulk_busy_until);
          }
          else {
            due = now + std::chrono::duration_cast<Clock::duration>(Seconds(_config->latency));
          }
        }
        due = std::max(due, _last_due);
        _last_due = due;
        _bytes += m.payload.size();
        _pending.push_back(Pending{due, std::move(m), std::move(done)});
      }
      _cv.notify_one();
      return handle;
    }

    // Delivers everything already submitted, then stops the line.
    void close() {
      {
        std::scoped_lock lock(_mutex);
        _closing = true;
      }
      _cv.notify_all();
      std::scoped_lock join_lock(_join_mutex);
      if(_thread.joinable()) {
        _thread.join();
      }
    }

    std::uint64_t bytes_submitted() const {
      std::scoped_lock lock(_mutex);
      return _bytes;
    }

  private:

    struct Pending {
      Clock::time_point due;
      Message message;
      std::promise<void> done;
    };

    void _run() {
      std::unique_lock lock(_mutex);
      for(;;) {
        _cv.wait(lock, [&]{ return !_pending.empty() || _closing; });
        if(_pending.empty()) {
          return;
        }
        const auto due = _pending.front().due;
        if(Clock::now() < due) {
          lock.unlock();
          std::this_thread::sleep_until(due);
          lock.lock();
        }
        Pending p = std::move(_pending.front());
        _pending.pop_front();
        const bool broken = _broken;
        lock.unlock();
        if(broken) {
          p.done.set_exception(std::make_exception_ptr(PeerClosed()));
        }
        else {
          try {
            _sink(std::move(p.message));
            p.done.set_value();
          }
          catch(...) {
            p.done.set_exception(std::current_exception());
            lock.lock();
            _broken = true;
            lock.unlock();
          }
        }
        lock.lock();
      }
    }

    std::optional<LinkConfig> _config;
    Sink _sink;

    mutable std::mutex _mutex;
    std::mutex _join_mutex;
    std::condition_variable _cv;
    std::deque<Pending> _pending;
    Clock::time_point _last_due {};
    Clock::time_point _bulk_busy_until {};
    std::uint64_t _bytes {0};
    bool _closing {false};
    bool _broken {false};
    std::thread _thread;
};

// ----------------------------------------------------------------------------
// Endpoint
// ----------------------------------------------------------------------------

struct LinkCounters {
  std::uint64_t bytes_sent {0};
  std::uint64_t bytes_received {0};
};

// Endpoint
//
// One side of a link. The send side and the receive side may be driven from
// two different threads, but each side from one thread at a time.
class Endpoint {

  public:

    virtual ~Endpoint() = default;

    // Small control message; pays latency only.
    virtual void send_message(Message m) = 0;

    // Bulk transfer; completes asynchronously after the simulated link time.
    virtual Completion bulk_transfer(Message m) = 0;

    // Blocks until a message arrives; throws PeerClosed once the peer is gone
    // and all of its messages were consumed.
    virtual Message receive_message() = 0;

    // Like receive_message but gives up after `timeout` with nullopt.
    virtual std::optional<Message> receive_message_for(std::chrono::milliseconds timeout) = 0;

    // Flushes pending outbound messages and closes this side.
    virtual void close() = 0;

    virtual LinkCounters counters() const = 0;
};

// QueueEndpoint
//
// Endpoint whose outbound side is a DelayLine feeding an arbitrary sink and
// whose inbound side is a MessageQueue filled by someone else.
class QueueEndpoint : public Endpoint {

  public:

    QueueEndpoint(
      std::optional<LinkConfig> outbound,
      DelayLine::Sink sink,
      std::shared_ptr<MessageQueue> inbox,
      std::function<void()> on_close = {}
    ) :
      _inbox{std::move(inbox)},
      _on_close{std::move(on_close)},
      _out{std::make_unique<DelayLine>(outbound, std::move(sink))} {}

    ~QueueEndpoint() override { close(); }

    void send_message(Message m) override {
      _out->submit(std::move(m), false);
    }

    Completion bulk_transfer(Message m) override {
      return _out->submit(std::move(m), true);
    }

    Message receive_message() override {
      auto m = _inbox->pop();
      if(!m) {
        throw PeerClosed();
      }
      _received += m->payload.size();
      return std::move(*m);
    }

    std::optional<Message> receive_message_for(std::chrono::milliseconds timeout) override {
      auto m = _inbox->pop_for(timeout);
      if(!m && _inbox->closed()) {
        throw PeerClosed();
      }
      if(m) {
        _received += m->payload.size();
      }
      return m;
    }

    void close() override {
      if(_closed.exchange(true)) {
        return;
      }
      _out->close();
      if(_on_close) {
        _on_close();
      }
    }

    LinkCounters counters() const override {
      return {_out->bytes_submitted(), _received.load()};
    }

  private:

    std::shared_ptr<MessageQueue> _inbox;
    std::function<void()> _on_close;
    std::unique_ptr<DelayLine> _out;
    std::atomic<std::uint64_t> _received {0};
    std::atomic<bool> _closed {false};
};

struct LinkPair {
  std::unique_ptr<Endpoint> host;
  std::unique_ptr<Endpoint> device;
};

// Procedure: make_in_process_link
//
// Both directions apply the link model. Closing either endpoint closes the
// peer's inbox once everything already sent has been delivered.
inline LinkPair make_in_process_link(const LinkConfig& config) {
  config.validate();
  auto to_device = std::make_shared<MessageQueue>();
  auto to_host = std::make_shared<MessageQueue>();
  LinkPair pair;
  pair.host = std::make_unique<QueueEndpoint>(
    config,
    [to_device](Message&& m) { to_device->push(std::move(m)); },
    to_host,
    [to_device]{ to_device->close(); }
  );
  pair.device = std::make_unique<QueueEndpoint>(
    config,
    [to_host](Message&& m) { to_host->push(std::move(m)); },
    to_device,
    [to_host]{ to_host->close(); }
  );
  return pair;
}

// ----------------------------------------------------------------------------
// handshake
// ----------------------------------------------------------------------------

// HELLO payload: protocol version u32, device worker count u32.
inline Message make_hello(std::uint32_t worker_count, std::uint32_t version = protocol_version) {
  Message m{MessageKind::hello, {}};
  ByteWriter w(m.payload);
  w.write(version);
  w.write(worker_count);
  return m;
}

// Procedure: await_hello
//
// Host side of the handshake; returns the device's worker count.
inline std::uint32_t await_hello(Endpoint& host, std::chrono::milliseconds timeout) {
  auto m = host.receive_message_for(timeout);
  if(!m) {
    throw HandshakeTimeout("no HELLO from device within timeout");
  }
  if(m->kind != MessageKind::hello) {
    throw MalformedBlock(std::string("expected HELLO, got ") + to_string(m->kind));
  }
  ByteReader r(m->payload);
  const auto version = r.read<std::uint32_t>();
  const auto workers = r.read<std::uint32_t>();
  if(version != protocol_version) {
    throw VersionMismatch(
      "device speaks protocol " + std::to_string(version) + ", host " + std::to_string(protocol_version)
    );
  }
  if(workers == 0) {
    throw MalformedBlock("device reported zero workers");
  }
  return workers;
}

}  // end of namespace hyb ----------------------------------------------------
