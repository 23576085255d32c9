#pragma once

#include <cstddef>
#include <deque>
#include <mutex>
#include <span>
#include <vector>

// Work queue shared by host workers and device controllers.
//
// Low-priority work is the untouched tail of the sequence and is represented
// by a counter alone. High-priority work is what was taken and then handed
// back; it is held in an explicit FIFO list and always served first.

namespace hyb {

// One linearized queue operation, recorded when a trace is attached.
struct QueueEvent {
  enum class Op { take, put_back } op;
  std::vector<std::size_t> indices;
  std::size_t high_priority_before {0};   // pending put-backs when the op began
  std::size_t from_high_priority {0};     // take only: how many came from that list
};

class WorkQueue {

  public:

    explicit WorkQueue(std::size_t end) : _end{end} {}

    WorkQueue(const WorkQueue&) = delete;
    WorkQueue& operator=(const WorkQueue&) = delete;

    // Returns min(k, remaining) indices: put-backs first in list order, then
    // ascending counter indices. An empty result means the queue is drained.
    std::vector<std::size_t> take(std::size_t k) {
      std::vector<std::size_t> out;
      take_into(k, out);
      return out;
    }

    void take_into(std::size_t k, std::vector<std::size_t>& out) {
      out.clear();
      std::scoped_lock lock(_mutex);
      const std::size_t hp_before = _high_priority.size();
      while(out.size() < k && !_high_priority.empty()) {
        out.push_back(_high_priority.front());
        _high_priority.pop_front();
      }
      const std::size_t from_hp = out.size();
      while(out.size() < k && _next < _end) {
        out.push_back(_next++);
      }
      if(_trace) {
        _trace->push_back({QueueEvent::Op::take, out, hp_before, from_hp});
      }
    }

    void put_back(std::span<const std::size_t> indices) {
      if(indices.empty()) {
        return;
      }
      std::scoped_lock lock(_mutex);
      const std::size_t hp_before = _high_priority.size();
      _high_priority.insert(_high_priority.end(), indices.begin(), indices.end());
      if(_trace) {
        _trace->push_back({QueueEvent::Op::put_back, {indices.begin(), indices.end()}, hp_before, 0});
      }
    }

    bool empty() const {
      std::scoped_lock lock(_mutex);
      return _high_priority.empty() && _next == _end;
    }

    std::size_t size() const { return _end; }

    std::size_t next_index() const {
      std::scoped_lock lock(_mutex);
      return _next;
    }

    std::size_t high_priority_count() const {
      std::scoped_lock lock(_mutex);
      return _high_priority.size();
    }

    // Records every subsequent operation into `trace` (nullptr detaches).
    void attach_trace(std::vector<QueueEvent>* trace) {
      std::scoped_lock lock(_mutex);
      _trace = trace;
    }

  private:

    mutable std::mutex _mutex;
    std::size_t _next {0};
    const std::size_t _end;
    std::deque<std::size_t> _high_priority;
    std::vector<QueueEvent>* _trace {nullptr};
};

}  // end of namespace hyb ----------------------------------------------------
