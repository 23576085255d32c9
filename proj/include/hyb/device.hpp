#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "block.hpp"
#include "transport.hpp"

// Device side of the runtime.
//
// A device process (or thread, for the in-process transport) knows functor
// types only through the kernel registry: FUNCTOR_STATE starts with the
// 64-bit id of the functor's kernel_name, followed by the serialized functor.

namespace hyb {

// Procedure: kernel_id
//
// FNV-1a over the kernel name.
constexpr std::uint64_t kernel_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for(char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Functor usable with hybrid_for_each over items of type Item.
template <typename F, typename Item>
concept OffloadFunctor =
  Serializable<F> && Serializable<Item> && std::copy_constructible<F> &&
  std::default_initializable<F> && std::default_initializable<Item> &&
  std::invocable<const F&, Item&> &&
  requires { { F::kernel_name } -> std::convertible_to<std::string_view>; };

// BlockJob
//
// One received WORK_BLOCK: the deserialized items, each applied exactly once
// by some device worker, then written back into the block's own storage.
class BlockJob {

  public:

    virtual ~BlockJob() = default;

    virtual std::size_t item_count() const = 0;
    virtual void apply(std::size_t slot) = 0;

    // Serializes all results as a RESULT_BLOCK payload, reusing `storage`.
    virtual Bytes finish(Bytes&& storage) = 0;

    std::uint64_t block_id {0};
    Bytes storage;
    std::atomic<std::size_t> completed {0};
};

class DeviceKernel {

  public:

    virtual ~DeviceKernel() = default;
    virtual std::unique_ptr<BlockJob> open_block(Bytes&& payload) const = 0;
};

namespace detail {

template <typename F, typename Item>
class TypedBlockJob : public BlockJob {

  public:

    TypedBlockJob(const F& functor, ByteReader& r, std::uint32_t count) : _functor{functor} {
      _indices.resize(count);
      _items.resize(count);
      for(std::uint32_t i = 0; i < count; ++i) {
        _indices[i] = r.read<std::uint64_t>();
        deserialize_into(r, _items[i]);
      }
      if(r.remaining() != 0) {
        throw MalformedBlock("trailing bytes after last item of block");
      }
    }

    std::size_t item_count() const override { return _items.size(); }

    void apply(std::size_t slot) override { _functor(_items[slot]); }

    Bytes finish(Bytes&& out) override {
      out.clear();
      write_block_header(out, {block_id, static_cast<std::uint32_t>(_items.size())});
      ByteWriter w(out);
      for(std::size_t i = 0; i < _items.size(); ++i) {
        w.write(_indices[i]);
        serialize(_items[i], w);
      }
      return std::move(out);
    }

  private:

    const F& _functor;
    std::vector<std::uint64_t> _indices;
    std::vector<Item> _items;
};

template <typename F, typename Item>
class TypedKernel : public DeviceKernel {

  public:

    explicit TypedKernel(ByteReader& r) {
      deserialize_into(r, _functor);
    }

    std::unique_ptr<BlockJob> open_block(Bytes&& payload) const override {
      ByteReader r(payload);
      const auto header = read_block_header(r);
      auto job = std::make_unique<TypedBlockJob<F, Item>>(_functor, r, header.item_count);
      job->block_id = header.block_id;
      job->storage = std::move(payload);
      return job;
    }

  private:

    F _functor;
};

}  // end of namespace detail ------------------------------------------------

// KernelRegistry
class KernelRegistry {

  public:

    using Factory = std::function<std::unique_ptr<DeviceKernel>(ByteReader&)>;

    static KernelRegistry& global() {
      static KernelRegistry registry;
      return registry;
    }

    template <typename F, typename Item>
    requires OffloadFunctor<F, Item>
    void add() {
      const auto id = kernel_id(F::kernel_name);
      std::scoped_lock lock(_mutex);
      _factories.try_emplace(id, [](ByteReader& r) -> std::unique_ptr<DeviceKernel> {
        return std::make_unique<detail::TypedKernel<F, Item>>(r);
      });
    }

    std::unique_ptr<DeviceKernel> create(std::uint64_t id, ByteReader& r) const {
      Factory f;
      {
        std::scoped_lock lock(_mutex);
        auto it = _factories.find(id);
        if(it == _factories.end()) {
          throw UnknownKernel("no kernel registered for id " + std::to_string(id));
        }
        f = it->second;
      }
      return f(r);
    }

  private:

    mutable std::mutex _mutex;
    std::map<std::uint64_t, Factory> _factories;
};

// Procedure: make_functor_state
template <typename F>
Message make_functor_state(const F& functor) {
  Message m{MessageKind::functor_state, {}};
  m.payload.reserve(8 + serialized_size(functor));
  ByteWriter w(m.payload);
  w.write(kernel_id(F::kernel_name));
  serialize(functor, w);
  return m;
}

struct DeviceOptions {
  // Test hook: drop the link without replying after this many WORK_BLOCKs.
  std::optional<std::size_t> drop_after_blocks;
};

// Procedure: serve_device
//
// Device main loop: HELLO, then any number of sessions of
// FUNCTOR_STATE, WORK_BLOCK*, NO_MORE_WORK, ended by SHUTDOWN or peer close.
// `workers` threads apply items; the last one to finish a block sends its
// RESULT_BLOCK, written into the block's own storage.
inline void serve_device(
  Endpoint& endpoint,
  std::uint32_t workers,
  const KernelRegistry& registry = KernelRegistry::global(),
  DeviceOptions options = {}
) {
  struct Task {
    std::shared_ptr<BlockJob> job;
    std::size_t slot;
  };

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Task> tasks;
  std::size_t open_blocks = 0;
  bool stopping = false;

  auto worker_loop = [&]{
    for(;;) {
      Task t;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&]{ return !tasks.empty() || stopping; });
        if(tasks.empty()) {
          return;
        }
        t = std::move(tasks.front());
        tasks.pop_front();
      }
      t.job->apply(t.slot);
      if(t.job->completed.fetch_add(1) + 1 == t.job->item_count()) {
        Message result{MessageKind::result_block, t.job->finish(std::move(t.job->storage))};
        try {
          endpoint.bulk_transfer(std::move(result));
        }
        catch(const PeerClosed&) {
        }
        {
          std::scoped_lock lock(mutex);
          --open_blocks;
        }
        cv.notify_all();
      }
    }
  };

  std::vector<std::thread> pool;
  auto stop_pool = [&]{
    {
      std::unique_lock lock(mutex);
      cv.wait(lock, [&]{ return open_blocks == 0; });
      stopping = true;
    }
    cv.notify_all();
    for(auto& t : pool) {
      t.join();
    }
    pool.clear();
    stopping = false;
  };

  std::unique_ptr<DeviceKernel> kernel;
  std::size_t blocks_seen = 0;

  auto fail = [&](const std::string& why) {
    {
      std::scoped_lock lock(mutex);
      tasks.clear();
      open_blocks = 0;
    }
    stop_pool();
    Message bye{MessageKind::shutdown, {}};
    for(char c : why) {
      bye.payload.push_back(static_cast<std::byte>(c));
    }
    try {
      endpoint.send_message(std::move(bye));
    }
    catch(const PeerClosed&) {
    }
    endpoint.close();
  };

  endpoint.send_message(make_hello(workers));

  for(;;) {
    Message m;
    try {
      m = endpoint.receive_message();
    }
    catch(const PeerClosed&) {
      stop_pool();
      endpoint.close();
      return;
    }

    try {
      switch(m.kind) {
        case MessageKind::functor_state: {
          stop_pool();
          ByteReader r(m.payload);
          const auto id = r.read<std::uint64_t>();
          kernel = registry.create(id, r);
          for(std::uint32_t i = 0; i < workers; ++i) {
            pool.emplace_back(worker_loop);
          }
          break;
        }
        case MessageKind::work_block: {
          if(!kernel) {
            throw MalformedBlock("WORK_BLOCK before FUNCTOR_STATE");
          }
          if(options.drop_after_blocks && blocks_seen == *options.drop_after_blocks) {
            {
              std::scoped_lock lock(mutex);
              tasks.clear();
              open_blocks = 0;
              stopping = true;
            }
            cv.notify_all();
            for(auto& t : pool) {
              t.join();
            }
            endpoint.close();
            return;
          }
          ++blocks_seen;
          std::shared_ptr<BlockJob> job = kernel->open_block(std::move(m.payload));
          if(job->item_count() == 0) {
            throw MalformedBlock("empty WORK_BLOCK");
          }
          {
            std::scoped_lock lock(mutex);
            ++open_blocks;
            for(std::size_t i = 0; i < job->item_count(); ++i) {
              tasks.push_back({job, i});
            }
          }
          cv.notify_all();
          break;
        }
        case MessageKind::no_more_work:
          stop_pool();
          kernel.reset();
          break;
        case MessageKind::shutdown:
          stop_pool();
          endpoint.close();
          return;
        default:
          throw MalformedBlock(std::string("unexpected message ") + to_string(m.kind));
      }
    }
    catch(const Error& e) {
      fail(e.what());
      return;
    }
  }
}

}  // end of namespace hyb ----------------------------------------------------
