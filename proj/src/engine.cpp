#include "gridflow/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gridflow::engine {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Wake: return "wake";
    case EventKind::Interrupt: return "interrupt";
    case EventKind::Completion: return "completion";
    case EventKind::Message: return "message";
    case EventKind::CapacityChange: return "capacity-change";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(SimulatorOptions options) : options_(options) {}

ProcessId Simulator::add(std::unique_ptr<Process> process) {
  const auto id = static_cast<ProcessId>(processes_.size());
  process->id_ = id;
  process->state_ = ProcessState::Idle;
  processes_.push_back(std::move(process));
  return id;
}

Process& Simulator::process(ProcessId id) {
  if (id >= processes_.size()) throw SimulationError("unknown process id " + std::to_string(id));
  return *processes_[id];
}

void Simulator::finish(ProcessId id) { process(id).state_ = ProcessState::Finished; }

std::uint64_t Simulator::enqueue(SimEvent event) {
  if (std::isnan(event.time) || event.time < clock_) {
    std::ostringstream msg;
    msg << "event in the past: time " << event.time << " < clock " << clock_ << " (target "
        << event.target << ", kind " << to_string(event.kind) << ")";
    throw SimulationError(msg.str());
  }
  event.seq = next_seq_++;
  queue_.push(event);
  return event.seq;
}

std::uint64_t Simulator::schedule(double time, ProcessId target, EventKind kind, Payload payload,
                                  std::uint64_t epoch) {
  SimEvent event;
  event.time = time;
  event.target = target;
  event.kind = kind;
  event.payload = payload;
  event.epoch = epoch;
  return enqueue(event);
}

std::optional<SimEvent> Simulator::dequeue() {
  if (queue_.empty()) return std::nullopt;
  SimEvent event = queue_.top();
  queue_.pop();
  return event;
}

void Simulator::dispatch(const SimEvent& event) {
  Process& target = process(event.target);
  if (target.state_ == ProcessState::Finished) {
    ++report_.dead_target_dropped;
    return;
  }
  if (trace_) trace_(event);
  target.state_ = ProcessState::Running;
  target.on_event(*this, event);
  if (target.state_ == ProcessState::Running) target.state_ = ProcessState::Waiting;
}

SimulationReport Simulator::run_until(double t_end) {
  double same_time = -1.0;
  std::uint64_t same_count = 0;
  while (!queue_.empty() && queue_.top().time <= t_end) {
    SimEvent event = queue_.top();
    queue_.pop();
    if (event.time == same_time) {
      if (++same_count > options_.same_time_limit) {
        std::ostringstream msg;
        msg << "event cascade exceeded " << options_.same_time_limit << " events at t=" << event.time
            << " (last target " << event.target << ", kind " << to_string(event.kind) << ")";
        throw SimulationError(msg.str());
      }
    } else {
      same_time = event.time;
      same_count = 1;
    }
    clock_ = event.time;
    ++report_.events_processed;
    dispatch(event);
  }
  if (std::isfinite(t_end) && t_end > clock_) clock_ = t_end;
  report_.clock = clock_;
  report_.queue_exhausted = queue_.empty();
  return report_;
}

// ---------------------------------------------------------------------------
// Actor

std::uint64_t Actor::defer(Continuation fn) {
  const auto tag = next_tag_++;
  pending_.emplace(tag, std::move(fn));
  return tag;
}

void Actor::after(Simulator& sim, double delay, Continuation fn) {
  sim.schedule(sim.now() + delay, id(), EventKind::Wake, Payload{defer(std::move(fn)), 0});
}

void Actor::on_event(Simulator& sim, const SimEvent& event) {
  auto it = pending_.find(event.payload.tag);
  if (it == pending_.end()) {
    throw SimulationError("actor " + std::to_string(id()) + " has no continuation for tag " +
                          std::to_string(event.payload.tag));
  }
  Continuation fn = std::move(it->second);
  pending_.erase(it);
  fn(sim, event);
}

// ---------------------------------------------------------------------------
// CapacitySchedule

CapacitySchedule::CapacitySchedule(double constant) : points_{{0.0, constant}} {}

CapacitySchedule::CapacitySchedule(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.empty()) throw SimulationError("capacity schedule needs at least one point");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].time > points_[i - 1].time)) {
      throw SimulationError("capacity schedule breakpoints must be strictly increasing");
    }
  }
}

double CapacitySchedule::at(double time) const {
  if (points_.empty()) return 0.0;
  auto it = std::upper_bound(points_.begin(), points_.end(), time,
                             [](double t, const Point& p) { return t < p.time; });
  if (it == points_.begin()) return points_.front().value;
  return std::prev(it)->value;
}

// ---------------------------------------------------------------------------
// water_fill

std::vector<double> water_fill(double capacity, std::span<const double> weights,
                               std::span<const double> caps) {
  const std::size_t n = weights.size();
  std::vector<double> rates(n, 0.0);
  if (n == 0 || capacity <= 0.0) return rates;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return caps[a] / weights[a] < caps[b] / weights[b];
  });

  double left = capacity;
  double weight_left = 0.0;
  for (double w : weights) weight_left += w;

  std::size_t k = 0;
  for (; k < n; ++k) {
    const std::size_t i = order[k];
    const double share = left * weights[i] / weight_left;
    if (caps[i] > share) break;
    rates[i] = caps[i];
    left -= caps[i];
    weight_left -= weights[i];
  }
  for (; k < n; ++k) {
    const std::size_t i = order[k];
    rates[i] = left * weights[i] / weight_left;
  }
  return rates;
}

// ---------------------------------------------------------------------------
// SharedResource

SharedResource::SharedResource(std::string name, CapacitySchedule schedule)
    : name_(std::move(name)), schedule_(std::move(schedule)), capacity_(schedule_.at(0.0)) {}

void SharedResource::start(Simulator& sim) {
  capacity_ = schedule_.at(sim.now());
  last_update_ = sim.now();
  capacity_since_ = sim.now();
  const auto& points = schedule_.points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].time > sim.now()) {
      sim.schedule(points[i].time, id(), EventKind::CapacityChange, Payload{0, i});
    }
  }
}

double SharedResource::total_rate() const {
  double sum = 0.0;
  for (const auto& c : claims_) sum += c.rate;
  return sum;
}

double SharedResource::served_until(double t) const {
  return served_total_ + total_rate() * std::max(0.0, t - last_update_);
}

double SharedResource::capacity_integral_until(double t) const {
  return capacity_integral_ + capacity_ * std::max(0.0, t - capacity_since_);
}

const Claim* SharedResource::find(ClaimId id) const {
  for (const auto& c : claims_) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

void SharedResource::update(Simulator& sim, double now) {
  if (now < last_update_) {
    throw SimulationError("resource " + name_ + ": update into the past");
  }
  const double dt = now - last_update_;
  if (dt > 0.0) {
    for (auto& c : claims_) {
      const double done = c.rate * dt;
      c.remaining -= done;
      c.served += done;
      served_total_ += done;
      if (c.remaining < 0.0) {
        if (c.remaining < -kWorkEpsilon) sim.note_clamped();
        c.remaining = 0.0;
      }
    }
  }
  last_update_ = now;
}

void SharedResource::reallocate(Simulator& sim) {
  ++epoch_;
  std::vector<double> weights(claims_.size());
  std::vector<double> caps(claims_.size());
  for (std::size_t i = 0; i < claims_.size(); ++i) {
    weights[i] = claims_[i].weight;
    caps[i] = claims_[i].cap;
  }
  const auto rates = water_fill(capacity_, weights, caps);

  double earliest = kInfinity;
  ClaimId earliest_id = 0;
  for (std::size_t i = 0; i < claims_.size(); ++i) {
    Claim& c = claims_[i];
    c.rate = rates[i];
    c.projected_finish = c.rate > 0.0 ? last_update_ + c.remaining / c.rate : kInfinity;
    if (c.projected_finish < earliest) {
      earliest = c.projected_finish;
      earliest_id = c.id;
    }
  }
  if (std::isfinite(earliest)) {
    sim.schedule(std::max(earliest, sim.now()), id(), EventKind::Completion, Payload{0, earliest_id},
                 epoch_);
  }
}

ClaimId SharedResource::join(Simulator& sim, const ClaimSpec& spec) {
  if (!(spec.work > 0.0)) throw SimulationError("resource " + name_ + ": claim work must be positive");
  if (!(spec.weight > 0.0)) throw SimulationError("resource " + name_ + ": claim weight must be positive");
  update(sim, sim.now());
  Claim c;
  c.id = next_claim_++;
  c.owner = spec.owner;
  c.tag = spec.tag;
  c.work = spec.work;
  c.remaining = spec.work;
  c.weight = spec.weight;
  c.cap = spec.cap;
  c.joined_at = sim.now();
  claims_.push_back(c);
  reallocate(sim);
  return c.id;
}

void SharedResource::remove_at(std::size_t index) {
  claims_.erase(claims_.begin() + static_cast<std::ptrdiff_t>(index));
}

void SharedResource::leave(Simulator& sim, ClaimId claim) {
  auto it = std::find_if(claims_.begin(), claims_.end(), [&](const Claim& c) { return c.id == claim; });
  if (it == claims_.end()) {
    throw SimulationError("resource " + name_ + ": leave for unknown claim " + std::to_string(claim));
  }
  update(sim, sim.now());
  claims_.erase(it);
  reallocate(sim);
}

void SharedResource::set_capacity(Simulator& sim, double capacity) {
  if (capacity < 0.0) throw SimulationError("resource " + name_ + ": negative capacity");
  update(sim, sim.now());
  capacity_integral_ += capacity_ * (sim.now() - capacity_since_);
  capacity_since_ = sim.now();
  capacity_ = capacity;
  reallocate(sim);
}

void SharedResource::on_event(Simulator& sim, const SimEvent& event) {
  if (event.kind == EventKind::CapacityChange) {
    set_capacity(sim, schedule_.points().at(event.payload.value).value);
    return;
  }
  if (event.kind != EventKind::Completion) return;
  if (event.epoch != epoch_) {
    sim.note_stale();
    return;
  }
  const double now = sim.now();
  update(sim, now);

  std::vector<Claim> done;
  for (std::size_t i = 0; i < claims_.size();) {
    const Claim& c = claims_[i];
    if (c.remaining <= kWorkEpsilon || c.projected_finish <= now + kTimeEpsilon) {
      if (c.remaining > kWorkEpsilon) sim.note_clamped();
      done.push_back(c);
      done.back().remaining = 0.0;
      remove_at(i);
    } else {
      ++i;
    }
  }
  if (done.empty()) {
    throw SimulationError("resource " + name_ + ": completion event with no finished claim at t=" +
                          std::to_string(now));
  }
  reallocate(sim);
  for (const Claim& c : done) {
    if (on_complete_) on_complete_(c, now);
    if (c.owner != kNoProcess) {
      sim.schedule(now, c.owner, EventKind::Completion, Payload{c.tag, c.id});
    }
  }
}

}  // namespace gridflow::engine
