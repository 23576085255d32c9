#pragma once

#include <oneapi/tbb/task_arena.h>
#include <oneapi/tbb/task_group.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "block.hpp"
#include "buffer_pool.hpp"
#include "device.hpp"
#include "subprocess.hpp"
#include "transport.hpp"
#include "work_queue.hpp"

// hybrid_for_each
//
// Applies a functor to every element of a random-access range, with the work
// split dynamically between host workers (in-place, no serialization) and any
// number of devices (items shipped in blocks, results scattered back by
// sequence index). Each device gets its own copy of the functor; changes a
// device makes to its copy are never seen by the host.

namespace hyb {

// DeviceSpec
struct DeviceSpec {
  std::uint32_t workers {8};
  LinkConfig link {};
  std::string executable;   // device binary, subprocess transport only
  DeviceOptions options {}; // in-process transport only
};

// Per-device record of block traffic, in controller order.
struct ControllerEvent {
  enum class Kind { sent, resulted } kind;
  std::uint64_t block_id;
  std::uint32_t items;
  std::size_t outstanding_after;
};

struct HybridOptions {
  // Number of host worker tasks; 0 leaves all work to the devices (the caller
  // still finishes whatever they give back).
  std::size_t host_workers {static_cast<std::size_t>(tbb::this_task_arena::max_concurrency())};
  std::size_t host_chunk {1};
  std::size_t buffer_capacity {1u << 20};
  std::size_t hot_buffers {2};
  std::size_t functor_bulk_threshold {64u << 10};
  std::chrono::milliseconds handshake_timeout {std::chrono::seconds(10)};

  std::vector<QueueEvent>* queue_trace {nullptr};
  // one vector per device when set
  std::vector<std::vector<ControllerEvent>>* controller_traces {nullptr};
  // one vector per device when set; every message the host sent and received
  std::vector<std::vector<Message>>* message_traces {nullptr};
};

// UnitStatistics
struct UnitStatistics {
  std::string unit;
  std::uint64_t items {0};
  std::uint64_t bytes_tx {0};
  std::uint64_t bytes_rx {0};
  double busy_seconds {0.0};
  std::size_t buffers_allocated {0};
  bool lost {false};
  bool is_device {false};
  std::string error;
};

// RunStatistics
struct RunStatistics {
  std::vector<UnitStatistics> units;
  double wall_seconds {0.0};

  std::uint64_t total_items() const {
    std::uint64_t n = 0;
    for(const auto& u : units) {
      n += u.items;
    }
    return n;
  }

  std::uint64_t device_items() const {
    std::uint64_t n = 0;
    for(const auto& u : units) {
      if(u.is_device) {
        n += u.items;
      }
    }
    return n;
  }

  double device_fraction() const {
    const auto total = total_items();
    return total == 0 ? 0.0 : static_cast<double>(device_items()) / static_cast<double>(total);
  }

  UnitStatistics* find(const std::string& unit) {
    for(auto& u : units) {
      if(u.unit == unit) {
        return &u;
      }
    }
    return nullptr;
  }

  // Accumulates another run unit-by-unit (units matched by name).
  void merge(const RunStatistics& other) {
    for(const auto& o : other.units) {
      if(auto* u = find(o.unit)) {
        u->items += o.items;
        u->bytes_tx += o.bytes_tx;
        u->bytes_rx += o.bytes_rx;
        u->busy_seconds += o.busy_seconds;
        u->buffers_allocated = std::max(u->buffers_allocated, o.buffers_allocated);
        u->lost = u->lost || o.lost;
      }
      else {
        units.push_back(o);
      }
    }
    wall_seconds += other.wall_seconds;
  }

  void write_csv(std::ostream& os) const {
    os << "unit,items,bytes_tx,bytes_rx,busy_seconds\n";
    for(const auto& u : units) {
      os << u.unit << ',' << u.items << ',' << u.bytes_tx << ',' << u.bytes_rx << ','
         << u.busy_seconds << '\n';
    }
  }
};

// Procedure: run_host_worker
//
// Takes `chunk` indices at a time and applies the functor in place until the
// queue runs dry. Returns the number of items processed.
template <typename Item, typename F>
std::size_t run_host_worker(WorkQueue& queue, std::span<Item> sequence, const F& functor, std::size_t chunk = 1) {
  std::size_t processed = 0;
  std::vector<std::size_t> indices;
  indices.reserve(chunk);
  for(;;) {
    queue.take_into(chunk, indices);
    if(indices.empty()) {
      return processed;
    }
    for(auto i : indices) {
      functor(sequence[i]);
    }
    processed += indices.size();
  }
}

// Launches a device for one hybrid_for_each call and performs the HELLO
// exchange. For the in-process transport `device_thread` runs serve_device.
struct DeviceConnection {
  std::unique_ptr<Endpoint> endpoint;
  std::uint32_t workers {0};
  std::thread device_thread;

  DeviceConnection() = default;
  DeviceConnection(DeviceConnection&&) = default;
  DeviceConnection& operator=(DeviceConnection&&) = default;

  ~DeviceConnection() { shutdown(); }

  void shutdown() {
    if(endpoint) {
      endpoint->close();
    }
    if(device_thread.joinable()) {
      device_thread.join();
    }
  }
};

// Procedure: connect_device
inline DeviceConnection connect_device(const DeviceSpec& spec, std::chrono::milliseconds timeout) {
  spec.link.validate();
  if(spec.workers == 0) {
    throw Error("device worker count must be positive");
  }
  DeviceConnection c;
  if(spec.link.transport == TransportKind::in_process) {
    auto pair = make_in_process_link(spec.link);
    c.endpoint = std::move(pair.host);
    c.device_thread = std::thread(
      [ep = std::move(pair.device), workers = spec.workers, opts = spec.options]() mutable {
        try {
          serve_device(*ep, workers, KernelRegistry::global(), opts);
        }
        catch(const Error&) {
          ep->close();
        }
      }
    );
  }
  else {
    c.endpoint = spawn_device_process(spec.executable, spec.link, spec.workers, timeout);
  }
  c.workers = await_hello(*c.endpoint, timeout);
  return c;
}

namespace detail {

// Endpoint decorator that records every message passing through it.
class TracingEndpoint : public Endpoint {

  public:

    TracingEndpoint(Endpoint& inner, std::vector<Message>& log) : _inner{inner}, _log{log} {}

    void send_message(Message m) override {
      _record(m);
      _inner.send_message(std::move(m));
    }

    Completion bulk_transfer(Message m) override {
      _record(m);
      return _inner.bulk_transfer(std::move(m));
    }

    Message receive_message() override {
      auto m = _inner.receive_message();
      _record(m);
      return m;
    }

    std::optional<Message> receive_message_for(std::chrono::milliseconds t) override {
      auto m = _inner.receive_message_for(t);
      if(m) {
        _record(*m);
      }
      return m;
    }

    void close() override { _inner.close(); }

    LinkCounters counters() const override { return _inner.counters(); }

  private:

    void _record(const Message& m) {
      std::scoped_lock lock(_mutex);
      _log.push_back(m);
    }

    Endpoint& _inner;
    std::vector<Message>& _log;
    std::mutex _mutex;
};

// FIFO of closures executed by one dedicated thread.
class SupportWorker {

  public:

    SupportWorker() : _thread([this]{ _run(); }) {}

    ~SupportWorker() { join(); }

    void post(std::function<void()> task) {
      {
        std::scoped_lock lock(_mutex);
        _tasks.push_back(std::move(task));
      }
      _cv.notify_one();
    }

    // Runs everything already posted, then stops.
    void join() {
      {
        std::scoped_lock lock(_mutex);
        _stopping = true;
      }
      _cv.notify_one();
      if(_thread.joinable()) {
        _thread.join();
      }
    }

  private:

    void _run() {
      for(;;) {
        std::function<void()> task;
        {
          std::unique_lock lock(_mutex);
          _cv.wait(lock, [&]{ return !_tasks.empty() || _stopping; });
          if(_tasks.empty()) {
            return;
          }
          task = std::move(_tasks.front());
          _tasks.pop_front();
        }
        task();
      }
    }

    std::mutex _mutex;
    std::condition_variable _cv;
    std::deque<std::function<void()>> _tasks;
    bool _stopping {false};
    std::thread _thread;
};

}  // end of namespace detail ------------------------------------------------

// DeviceController
//
// Host-side driver for one device. The control loop only reacts to events;
// packing, sending and scattering run on a support worker, and link receives
// on a receiver thread, so the loop never waits on serialization or on a
// transfer in progress.
template <typename Item, typename F>
class DeviceController {

  struct PackDone { std::uint64_t block_id; std::size_t items; };
  struct ResultArrived { Message message; };
  struct ScatterDone { std::size_t items; };
  struct LinkClosed {};
  struct Failure { std::exception_ptr error; bool fatal; };

  using Event = std::variant<PackDone, ResultArrived, ScatterDone, LinkClosed, Failure>;

  public:

    DeviceController(
      std::size_t index,
      const DeviceSpec& spec,
      WorkQueue& queue,
      std::span<Item> sequence,
      const F& functor,
      const HybridOptions& options
    ) :
      _index{index}, _spec{spec}, _queue{queue}, _sequence{sequence},
      _functor{functor}, _options{options} {
      stats.unit = "device" + std::to_string(index);
      stats.is_device = true;
    }

    // Returns an error that must be rethrown to the caller (serialization
    // failures); device loss is recovered and only recorded in stats.
    std::exception_ptr run() {
      const auto start = Clock::now();
      try {
        _connection = connect_device(_spec, _options.handshake_timeout);
      }
      catch(const Error& e) {
        stats.lost = true;
        stats.error = e.what();
        return nullptr;
      }

      Endpoint* ep = _connection.endpoint.get();
      std::unique_ptr<detail::TracingEndpoint> tracer;
      if(_options.message_traces) {
        auto& log = (*_options.message_traces)[_index];
        log.push_back(make_hello(_connection.workers));
        tracer = std::make_unique<detail::TracingEndpoint>(*ep, log);
        ep = tracer.get();
      }
      _endpoint = ep;

      std::thread receiver([this]{
        for(;;) {
          try {
            auto m = _endpoint->receive_message();
            _post(ResultArrived{std::move(m)});
          }
          catch(const PeerClosed&) {
            _post(LinkClosed{});
            return;
          }
        }
      });

      {
        detail::SupportWorker support;
        _support = &support;
        _control_loop();
        support.join();
        _support = nullptr;
      }

      if(stats.lost) {
        std::scoped_lock lock(_outstanding_mutex);
        for(auto& [id, indices] : _outstanding) {
          _queue.put_back(indices);
        }
        _outstanding.clear();
      }

      const auto counters = _connection.endpoint->counters();
      _connection.shutdown();
      receiver.join();

      stats.bytes_tx = counters.bytes_sent;
      stats.bytes_rx = counters.bytes_received;
      stats.buffers_allocated = _pool.allocations();
      stats.busy_seconds = Seconds(Clock::now() - start).count();
      return _error;
    }

    UnitStatistics stats;

  private:

    void _post(Event e) {
      {
        std::scoped_lock lock(_events_mutex);
        _events.push_back(std::move(e));
      }
      _events_cv.notify_one();
    }

    Event _next_event() {
      std::unique_lock lock(_events_mutex);
      _events_cv.wait(lock, [&]{ return !_events.empty(); });
      Event e = std::move(_events.front());
      _events.pop_front();
      return e;
    }

    void _trace(ControllerEvent::Kind kind, std::uint64_t block, std::uint32_t items) {
      if(_options.controller_traces) {
        (*_options.controller_traces)[_index].push_back({kind, block, items, _on_device});
      }
    }

    void _top_up() {
      while(!_draining && _in_flight < _options.hot_buffers) {
        ++_in_flight;
        const auto block_id = _next_block_id++;
        _support->post([this, block_id]{ _pack_and_send(block_id); });
      }
    }

    // support worker
    void _pack_and_send(std::uint64_t block_id) {
      auto buffer = _pool.acquire(_options.buffer_capacity);
      buffer.block_id = block_id;
      std::vector<std::size_t> indices;
      try {
        indices = pack_block<Item>(_queue, std::span<const Item>(_sequence), buffer, _connection.workers);
      }
      catch(const ItemTooLarge&) {
        _pool.release(std::move(buffer));
        _post(Failure{std::current_exception(), true});
        return;
      }
      if(indices.empty()) {
        _pool.release(std::move(buffer));
        _post(PackDone{block_id, 0});
        return;
      }
      const auto n = indices.size();
      {
        std::scoped_lock lock(_outstanding_mutex);
        _outstanding.emplace(block_id, std::move(indices));
      }
      _post(PackDone{block_id, n});
      try {
        _endpoint->bulk_transfer(Message{MessageKind::work_block, std::move(buffer.bytes)});
      }
      catch(const PeerClosed&) {
        // the receiver thread reports the loss; indices stay outstanding
      }
    }

    // support worker; results are validated against the block's indices
    // before any of them is written back
    void _scatter(Message m, std::vector<std::size_t> expected) {
      try {
        ByteReader r(m.payload);
        const auto header = read_block_header(r);
        std::vector<std::size_t> indices(header.item_count);
        std::vector<Item> items(header.item_count);
        for(std::uint32_t i = 0; i < header.item_count; ++i) {
          indices[i] = static_cast<std::size_t>(r.read<std::uint64_t>());
          deserialize_into(r, items[i]);
        }
        auto sorted = indices;
        std::sort(sorted.begin(), sorted.end());
        std::sort(expected.begin(), expected.end());
        if(sorted != expected || r.remaining() != 0) {
          throw MalformedBlock("result block does not match the work block it answers");
        }
        for(std::size_t i = 0; i < indices.size(); ++i) {
          _sequence[indices[i]] = std::move(items[i]);
        }
        _pool.release(_pool.adopt(std::move(m.payload), _options.buffer_capacity));
        _post(ScatterDone{header.item_count});
      }
      catch(const Error&) {
        _queue.put_back(expected);
        _post(Failure{std::current_exception(), false});
      }
    }

    void _control_loop() {
      Message state = make_functor_state(_functor);
      if(state.payload.size() > _options.functor_bulk_threshold) {
        _endpoint->bulk_transfer(std::move(state));
      }
      else {
        _endpoint->send_message(std::move(state));
      }
      _top_up();

      for(;;) {
        if(_draining && _in_flight == 0 && _pending_scatters == 0) {
          try {
            _endpoint->send_message({MessageKind::no_more_work, {}});
            _endpoint->send_message({MessageKind::shutdown, {}});
          }
          catch(const PeerClosed&) {
          }
          return;
        }

        Event e = _next_event();

        if(auto* p = std::get_if<PackDone>(&e)) {
          if(p->items == 0) {
            --_in_flight;
            _draining = true;
          }
          else {
            ++_on_device;
            _trace(ControllerEvent::Kind::sent, p->block_id, static_cast<std::uint32_t>(p->items));
          }
        }
        else if(auto* r = std::get_if<ResultArrived>(&e)) {
          if(r->message.kind != MessageKind::result_block) {
            // SHUTDOWN from the device means it gave up on the session
            _lose_device();
            return;
          }
          BlockHeader header;
          std::vector<std::size_t> expected;
          try {
            ByteReader hr(r->message.payload);
            header = read_block_header(hr);
          }
          catch(const Error&) {
            _lose_device();
            return;
          }
          {
            std::scoped_lock lock(_outstanding_mutex);
            auto it = _outstanding.find(header.block_id);
            if(it == _outstanding.end() || it->second.size() != header.item_count) {
              _lose_device();
              return;
            }
            expected = std::move(it->second);
            _outstanding.erase(it);
          }
          --_in_flight;
          --_on_device;
          ++_pending_scatters;
          stats.items += header.item_count;
          _trace(ControllerEvent::Kind::resulted, header.block_id, header.item_count);
          _support->post([this, m = std::move(r->message), e = std::move(expected)]() mutable {
            _scatter(std::move(m), std::move(e));
          });
          _top_up();
        }
        else if(std::holds_alternative<ScatterDone>(e)) {
          --_pending_scatters;
        }
        else if(std::holds_alternative<LinkClosed>(e)) {
          _lose_device();
          return;
        }
        else if(auto* f = std::get_if<Failure>(&e)) {
          if(f->fatal) {
            --_in_flight;
            _draining = true;
            if(!_error) {
              _error = f->error;
            }
          }
          else {
            --_pending_scatters;
            _lose_device();
            return;
          }
        }
      }
    }

    void _lose_device() {
      stats.lost = true;
      if(stats.error.empty()) {
        stats.error = "device link lost";
      }
      _endpoint->close();
    }

    std::size_t _index;
    const DeviceSpec& _spec;
    WorkQueue& _queue;
    std::span<Item> _sequence;
    const F& _functor;
    const HybridOptions& _options;

    DeviceConnection _connection;
    Endpoint* _endpoint {nullptr};
    detail::SupportWorker* _support {nullptr};
    BufferPool _pool {4};

    std::mutex _events_mutex;
    std::condition_variable _events_cv;
    std::deque<Event> _events;

    std::mutex _outstanding_mutex;
    std::map<std::uint64_t, std::vector<std::size_t>> _outstanding;

    std::uint64_t _next_block_id {0};
    std::size_t _in_flight {0};
    std::size_t _on_device {0};
    std::size_t _pending_scatters {0};
    bool _draining {false};
    std::exception_ptr _error;
};

// Procedure: hybrid_for_each
//
// Blocks until every element of [first, last) has been replaced by the
// functor applied to its original value. Devices that fail mid-run have
// their unfinished items returned to the queue; the remaining units finish
// them. An item too large for a transfer buffer is still processed (on the
// host) and its ItemTooLarge is rethrown once the range is complete.
template <std::random_access_iterator It, typename F>
requires OffloadFunctor<F, std::iter_value_t<It>>
RunStatistics hybrid_for_each(
  It first,
  It last,
  const F& functor,
  std::span<const DeviceSpec> devices = {},
  const HybridOptions& options = {}
) {
  using Item = std::iter_value_t<It>;
  static_assert(std::contiguous_iterator<It>, "hybrid_for_each needs contiguous storage");

  const auto start = Clock::now();
  KernelRegistry::global().add<F, Item>();

  std::span<Item> sequence(std::to_address(first), static_cast<std::size_t>(last - first));
  WorkQueue queue(sequence.size());
  if(options.queue_trace) {
    queue.attach_trace(options.queue_trace);
  }
  if(options.controller_traces) {
    options.controller_traces->assign(devices.size(), {});
  }
  if(options.message_traces) {
    options.message_traces->assign(devices.size(), {});
  }

  // each device gets its own copy of the functor
  std::vector<F> device_copies(devices.size(), functor);
  std::vector<std::unique_ptr<DeviceController<Item, F>>> controllers;
  std::vector<std::exception_ptr> errors(devices.size());
  std::vector<std::thread> controller_threads;
  for(std::size_t d = 0; d < devices.size(); ++d) {
    controllers.push_back(std::make_unique<DeviceController<Item, F>>(
      d, devices[d], queue, sequence, device_copies[d], options
    ));
  }
  for(std::size_t d = 0; d < devices.size(); ++d) {
    controller_threads.emplace_back([&, d]{ errors[d] = controllers[d]->run(); });
  }

  const F& host_copy = functor;
  UnitStatistics host;
  host.unit = "host";
  std::vector<std::size_t> counts(options.host_workers, 0);
  std::vector<double> busy(options.host_workers, 0.0);
  if(options.host_workers > 0) {
    tbb::task_group workers;
    for(std::size_t w = 0; w < options.host_workers; ++w) {
      workers.run([&, w]{
        const auto t0 = Clock::now();
        counts[w] = run_host_worker(queue, sequence, host_copy, std::max<std::size_t>(1, options.host_chunk));
        busy[w] = Seconds(Clock::now() - t0).count();
      });
    }
    workers.wait();
  }

  for(auto& t : controller_threads) {
    t.join();
  }

  // leftovers from lost devices or late put-backs
  std::size_t leftover = 0;
  {
    const auto t0 = Clock::now();
    leftover = run_host_worker(queue, sequence, host_copy, 1);
    busy.push_back(Seconds(Clock::now() - t0).count());
  }

  for(auto c : counts) {
    host.items += c;
  }
  host.items += leftover;
  for(auto b : busy) {
    host.busy_seconds += b;
  }

  RunStatistics stats;
  stats.units.push_back(host);
  for(auto& c : controllers) {
    stats.units.push_back(c->stats);
  }
  stats.wall_seconds = Seconds(Clock::now() - start).count();

  for(auto& e : errors) {
    if(e) {
      std::rethrow_exception(e);
    }
  }
  return stats;
}

// Convenience overload for whole containers.
template <typename Container, typename F>
RunStatistics hybrid_for_each(
  Container& items,
  const F& functor,
  std::span<const DeviceSpec> devices = {},
  const HybridOptions& options = {}
) {
  return hybrid_for_each(std::begin(items), std::end(items), functor, devices, options);
}

}  // end of namespace hyb ----------------------------------------------------
