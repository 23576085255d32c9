#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <vector>

#include "serialization.hpp"

namespace hyb {

// TransferBuffer
//
// Byte buffer for one block of framed items. `capacity` is the logical byte
// limit enforced while packing; `identity` survives pool round trips so tests
// can observe reuse.
struct TransferBuffer {
  std::uint64_t identity {0};
  std::size_t capacity {0};
  Bytes bytes;
  std::uint64_t block_id {0};
  std::uint32_t item_count {0};

  std::size_t used() const { return bytes.size(); }

  void reset() {
    bytes.clear();
    block_id = 0;
    item_count = 0;
  }
};

// BufferPool
//
// Thread-safe free list of transfer buffers. acquire() hands out a pooled
// buffer of sufficient capacity or allocates a new one; allocations() counts
// the latter. Buffers that arrive from the link are adopted without counting
// as allocations.
class BufferPool {

  public:

    explicit BufferPool(std::size_t max_pooled = 8) : _max_pooled{max_pooled} {}

    TransferBuffer acquire(std::size_t min_capacity) {
      {
        std::scoped_lock lock(_mutex);
        for(auto it = _free.begin(); it != _free.end(); ++it) {
          if(it->capacity >= min_capacity) {
            TransferBuffer b = std::move(*it);
            _free.erase(it);
            b.reset();
            return b;
          }
        }
        ++_allocations;
      }
      TransferBuffer b;
      b.identity = _next_identity.fetch_add(1);
      b.capacity = min_capacity;
      b.bytes.reserve(min_capacity);
      return b;
    }

    void release(TransferBuffer&& b) {
      b.reset();
      std::scoped_lock lock(_mutex);
      if(_free.size() < _max_pooled) {
        _free.push_back(std::move(b));
      }
    }

    // Wraps storage received from the link so it can re-enter the pool.
    TransferBuffer adopt(Bytes&& storage, std::size_t capacity) {
      TransferBuffer b;
      b.identity = _next_identity.fetch_add(1);
      b.capacity = capacity;
      b.bytes = std::move(storage);
      return b;
    }

    std::size_t allocations() const {
      std::scoped_lock lock(_mutex);
      return _allocations;
    }

    std::size_t pooled() const {
      std::scoped_lock lock(_mutex);
      return _free.size();
    }

  private:

    mutable std::mutex _mutex;
    std::vector<TransferBuffer> _free;
    std::size_t _max_pooled;
    std::size_t _allocations {0};
    inline static std::atomic<std::uint64_t> _next_identity {1};
};

}  // end of namespace hyb ----------------------------------------------------
