#pragma once

// Deterministic discrete-event kernel: virtual clock, (time, seq) ordered
// event queue, process registry and the interrupt-driven fair-share
// resource that recomputes every sharer's finish time when membership or
// capacity changes.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridflow::engine {

using ProcessId = std::uint32_t;
using ClaimId = std::uint64_t;

inline constexpr ProcessId kNoProcess = std::numeric_limits<ProcessId>::max();
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Absolute work tolerance below which a claim counts as finished.
inline constexpr double kWorkEpsilon = 1e-9;
/// Time tolerance used to absorb floating-point residue at completion.
inline constexpr double kTimeEpsilon = 1e-9;

/// Fatal modeling or logic error. Aborts the run.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind : std::uint8_t { Wake, Interrupt, Completion, Message, CapacityChange };

const char* to_string(EventKind kind);

/// Opaque scenario data. `tag` is chosen by the receiver when it asks for
/// the event (continuation key, claim tag, message type).
struct Payload {
  std::uint64_t tag = 0;
  std::uint64_t value = 0;
};

struct SimEvent {
  double time = 0.0;
  std::uint64_t seq = 0;
  ProcessId target = kNoProcess;
  EventKind kind = EventKind::Wake;
  Payload payload{};
  std::uint64_t epoch = 0;
};

enum class ProcessState : std::uint8_t { Idle, Running, Waiting, Finished };

class Simulator;

class Process {
 public:
  virtual ~Process() = default;

  ProcessId id() const { return id_; }
  ProcessState state() const { return state_; }

 protected:
  virtual void on_event(Simulator& sim, const SimEvent& event) = 0;

 private:
  friend class Simulator;
  ProcessId id_ = kNoProcess;
  ProcessState state_ = ProcessState::Idle;
};

struct SimulatorOptions {
  /// Maximum number of events processed at one timestamp before the run is
  /// declared a modeling cycle.
  std::uint64_t same_time_limit = 1'000'000;
};

struct SimulationReport {
  double clock = 0.0;
  std::uint64_t events_processed = 0;
  std::uint64_t stale_dropped = 0;
  std::uint64_t dead_target_dropped = 0;
  std::uint64_t clamped = 0;
  bool queue_exhausted = false;
};

class Simulator {
 public:
  explicit Simulator(SimulatorOptions options = {});
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  ProcessId add(std::unique_ptr<Process> process);

  template <class P, class... Args>
  P& spawn(Args&&... args) {
    auto owned = std::make_unique<P>(std::forward<Args>(args)...);
    P& ref = *owned;
    add(std::move(owned));
    return ref;
  }

  Process& process(ProcessId id);
  std::size_t process_count() const { return processes_.size(); }

  /// Marks a process finished; later events addressed to it are dropped.
  void finish(ProcessId id);

  double now() const { return clock_; }

  /// Stores the event, assigning its sequence number. Throws on events in
  /// the past.
  std::uint64_t enqueue(SimEvent event);

  std::uint64_t schedule(double time, ProcessId target, EventKind kind, Payload payload = {},
                         std::uint64_t epoch = 0);

  /// Removes and returns the earliest event without dispatching it. An empty
  /// optional is the end-of-simulation sentinel.
  std::optional<SimEvent> dequeue();

  bool empty() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }

  /// Processes every event with time <= t_end in (time, seq) order. The
  /// clock finishes at t_end when it is finite, otherwise at the last event.
  SimulationReport run_until(double t_end);

  void note_stale() { ++report_.stale_dropped; }
  void note_clamped() { ++report_.clamped; }
  const SimulationReport& report() const { return report_; }

  /// Called for every dispatched event; used for trace audits.
  void set_trace(std::function<void(const SimEvent&)> trace) { trace_ = std::move(trace); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  void dispatch(const SimEvent& event);

  SimulatorOptions options_;
  double clock_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::vector<std::unique_ptr<Process>> processes_;
  SimulationReport report_;
  std::function<void(const SimEvent&)> trace_;
};

/// A process whose events are continuations registered with `defer`.
/// The payload tag of each event selects the continuation to run.
class Actor : public Process {
 public:
  using Continuation = std::function<void(Simulator&, const SimEvent&)>;

  /// Registers a continuation and returns the tag to place in an event
  /// payload (or hand to a resource as a claim tag).
  std::uint64_t defer(Continuation fn);

  /// Runs `fn` after `delay` simulated seconds.
  void after(Simulator& sim, double delay, Continuation fn);

 protected:
  void on_event(Simulator& sim, const SimEvent& event) override;

 private:
  std::uint64_t next_tag_ = 1;
  std::map<std::uint64_t, Continuation> pending_;
};

/// Piecewise-constant function of time. Before the first breakpoint the
/// first value applies.
class CapacitySchedule {
 public:
  struct Point {
    double time;
    double value;
  };

  CapacitySchedule() = default;
  explicit CapacitySchedule(double constant);
  explicit CapacitySchedule(std::vector<Point> points);

  double at(double time) const;
  const std::vector<Point>& points() const { return points_; }

 private:
  std::vector<Point> points_;
};

/// Weighted water-filling of `capacity` among claims with optional rate
/// ceilings (`caps[i]` = +inf for none). Capacity a capped claim cannot use
/// is redistributed to the others in proportion to weight.
std::vector<double> water_fill(double capacity, std::span<const double> weights,
                               std::span<const double> caps);

struct ClaimSpec {
  ProcessId owner = kNoProcess;
  double work = 0.0;
  double weight = 1.0;
  double cap = kInfinity;
  /// Returned to the owner in the completion notification payload.
  std::uint64_t tag = 0;
};

struct Claim {
  ClaimId id = 0;
  ProcessId owner = kNoProcess;
  std::uint64_t tag = 0;
  double work = 0.0;
  double remaining = 0.0;
  double weight = 1.0;
  double cap = kInfinity;
  double rate = 0.0;
  double projected_finish = kInfinity;
  double joined_at = 0.0;
  /// Running integral of rate over time; equals `work` at completion.
  double served = 0.0;
};

/// A capacity shared by concurrent claims under processor sharing.
///
/// Every join, leave or capacity change is an interrupt: progress is
/// brought up to date, rates are recomputed, the epoch advances and a
/// completion event stamped with the new epoch is queued for the earliest
/// projected finish. Events carrying an older epoch are dropped on arrival.
class SharedResource : public Process {
 public:
  SharedResource(std::string name, CapacitySchedule schedule);

  const std::string& name() const { return name_; }

  /// Queues capacity-change events for the schedule breakpoints. Must be
  /// called once after the resource is added to the simulator.
  void start(Simulator& sim);

  ClaimId join(Simulator& sim, const ClaimSpec& spec);
  void leave(Simulator& sim, ClaimId id);
  void set_capacity(Simulator& sim, double capacity);

  /// Advances every claim's remaining work to `now`.
  void update(Simulator& sim, double now);

  const Claim* find(ClaimId id) const;
  std::span<const Claim> claims() const { return claims_; }
  bool idle() const { return claims_.empty(); }

  double capacity() const { return capacity_; }
  std::uint64_t epoch() const { return epoch_; }
  double last_update() const { return last_update_; }
  double total_rate() const;

  /// Work served since the start of the run, evaluated at `t` >= last update.
  double served_until(double t) const;
  /// Integral of capacity over time since start(), evaluated at `t`.
  double capacity_integral_until(double t) const;

  /// Observer invoked on every finalized claim, before the owner is notified.
  void set_on_complete(std::function<void(const Claim&, double)> fn) { on_complete_ = std::move(fn); }

 protected:
  void on_event(Simulator& sim, const SimEvent& event) override;

 private:
  void reallocate(Simulator& sim);
  void remove_at(std::size_t index);

  std::string name_;
  CapacitySchedule schedule_;
  double capacity_;
  std::vector<Claim> claims_;
  double last_update_ = 0.0;
  std::uint64_t epoch_ = 0;
  ClaimId next_claim_ = 1;
  double served_total_ = 0.0;
  double capacity_integral_ = 0.0;
  double capacity_since_ = 0.0;
  std::function<void(const Claim&, double)> on_complete_;
};

}  // namespace gridflow::engine
