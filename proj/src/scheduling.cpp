#include "gridflow/scheduling.hpp"

#include <algorithm>

namespace gridflow::sched {

using engine::SimulationError;

const char* to_string(JobType type) {
  switch (type) {
    case JobType::Production: return "production";
    case JobType::Reproduction: return "reproduction";
    case JobType::Analysis: return "analysis";
    case JobType::Generic: return "generic";
  }
  return "unknown";
}

Placement choose_placement(std::size_t local, std::span<const double> loads, double threshold) {
  if (loads[local] <= threshold) return {local, false};
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (i == local) continue;
    if (!best || loads[i] < loads[*best]) best = i;
  }
  if (!best) return {local, false};
  return {*best, true};
}

// ---------------------------------------------------------------------------
// Agent plans

std::optional<std::string> AgentPlan::parent_of(const std::string& center) const {
  for (const auto& [relay, downstream] : relays) {
    if (std::find(downstream.begin(), downstream.end(), center) != downstream.end()) return relay;
  }
  return std::nullopt;
}

std::vector<std::string> AgentPlan::validate() const {
  std::vector<std::string> errors;
  std::map<std::string, std::string> owner;
  for (const auto& [relay, downstream] : relays) {
    for (const auto& d : downstream) {
      if (d == relay) {
        errors.push_back("relay " + relay + " forwards to itself");
        continue;
      }
      auto [it, fresh] = owner.emplace(d, relay);
      if (!fresh && it->second != relay) {
        errors.push_back("center " + d + " is forwarded by both " + it->second + " and " + relay);
      }
    }
  }
  for (const auto& [relay, downstream] : relays) {
    std::set<std::string> seen{relay};
    std::string cur = relay;
    for (auto it = owner.find(cur); it != owner.end(); it = owner.find(cur)) {
      cur = it->second;
      if (!seen.insert(cur).second) {
        errors.push_back("relay cycle through " + relay);
        break;
      }
    }
  }
  return errors;
}

std::size_t FanoutSchedule::copies() const {
  std::size_t n = direct.size();
  for (const auto& [relay, to] : forwards) n += to.size();
  return n;
}

FanoutSchedule plan_fanout(const std::string& source, const std::set<std::string>& destinations,
                           const AgentPlan& plan) {
  std::set<std::string> direct;
  std::map<std::string, std::set<std::string>> forwards;
  for (const auto& d : destinations) {
    if (d == source) continue;
    std::string cur = d;
    for (std::size_t hops = 0;; ++hops) {
      if (hops > plan.relays.size()) throw SimulationError("relay cycle while planning fan-out to " + d);
      auto parent = plan.parent_of(cur);
      if (!parent || *parent == source) {
        direct.insert(cur);
        break;
      }
      forwards[*parent].insert(cur);
      cur = *parent;
    }
  }
  FanoutSchedule out;
  out.direct.assign(direct.begin(), direct.end());
  for (auto& [relay, to] : forwards) out.forwards[relay].assign(to.begin(), to.end());
  return out;
}

// ---------------------------------------------------------------------------
// GridScheduler

GridScheduler::GridScheduler(data::DataService& data, std::vector<FarmSpec> farms) : data_(data) {
  for (auto& spec : farms) {
    if (spec.cpu_count < 1) throw SimulationError("farm " + spec.center + ": cpu_count must be >= 1");
    if (!(spec.cpu_rate > 0.0)) throw SimulationError("farm " + spec.center + ": cpu_rate must be positive");
    Farm f;
    f.slots = spec.job_slots > 0 ? spec.job_slots : spec.cpu_count;
    f.spec = std::move(spec);
    farms_.push_back(std::move(f));
  }
}

void GridScheduler::start(engine::Simulator& sim) {
  for (auto& f : farms_) {
    f.resource = &sim.spawn<engine::SharedResource>("cpu:" + f.spec.center,
                                                     engine::CapacitySchedule(f.spec.cpu_count * f.spec.cpu_rate));
    f.resource->start(sim);
  }
}

std::size_t GridScheduler::center_index(const std::string& center) const {
  for (std::size_t i = 0; i < farms_.size(); ++i) {
    if (farms_[i].spec.center == center) return i;
  }
  throw SimulationError("no farm at center " + center);
}

double GridScheduler::load(std::size_t i) const {
  const Farm& f = farms_.at(i);
  return static_cast<double>(static_cast<std::size_t>(f.running) + f.queue.size()) /
         static_cast<double>(f.spec.cpu_count);
}

std::vector<double> GridScheduler::loads() const {
  std::vector<double> out(farms_.size());
  for (std::size_t i = 0; i < farms_.size(); ++i) out[i] = load(i);
  return out;
}

Placement GridScheduler::submit(engine::Simulator& sim, Job job, const std::string& center, Done done) {
  if (!(job.cpu_work > 0.0)) throw SimulationError("job " + std::to_string(job.id) + ": cpu_work must be positive");
  if (jobs_.count(job.id)) throw SimulationError("job " + std::to_string(job.id) + " submitted twice");
  const std::size_t local = center_index(center);
  const auto loads_now = loads();
  const Placement placement = choose_placement(local, loads_now, farms_[local].spec.threshold);
  job.origin = center;
  job.submit_time = sim.now();
  job.exported = placement.exported;
  const auto id = job.id;
  Entry entry;
  entry.job = std::move(job);
  entry.done = std::move(done);
  jobs_.emplace(id, std::move(entry));
  farms_[placement.center].queue.push_back(id);
  stage(sim, placement.center, id);
  return placement;
}

void GridScheduler::stage(engine::Simulator& sim, std::size_t center, std::uint64_t job_id) {
  Entry& e = jobs_.at(job_id);
  auto& catalog = data_.catalog();
  const std::string& name = farms_[center].spec.center;
  const auto node = data_.net().topology().node(name);
  std::vector<std::pair<data::FileId, data::ServerIndex>> remote;
  for (data::FileId input : e.job.inputs) {
    if (!catalog.has_file(input) || catalog.file(input).replicas.empty()) {
      e.failed = true;
      break;
    }
    const auto& replicas = catalog.file(input).replicas;
    const bool local = std::any_of(replicas.begin(), replicas.end(),
                                   [&](data::ServerIndex s) { return catalog.server(s).spec.center == name; });
    if (!local) remote.emplace_back(input, catalog.find_optimal(input, node, data_.net()));
  }
  if (e.failed) {
    auto& q = farms_[center].queue;
    q.erase(std::find(q.begin(), q.end(), job_id));
    finish(sim, center, job_id, true);
    return;
  }
  e.waiting_inputs = remote.size();
  if (remote.empty()) {
    e.staged = true;
    e.staging_done = sim.now();
    dispatch(sim, center);
    return;
  }
  for (auto [file, source] : remote) {
    data_.fetch(sim, file, source, node, std::nullopt,
                [this, center, job_id](engine::Simulator& sim, const data::FetchResult&) {
                  Entry& e = jobs_.at(job_id);
                  if (--e.waiting_inputs == 0) {
                    e.staged = true;
                    e.staging_done = sim.now();
                    dispatch(sim, center);
                  }
                });
  }
}

void GridScheduler::dispatch(engine::Simulator& sim, std::size_t center) {
  Farm& f = farms_[center];
  while (f.running < f.slots && !f.queue.empty() && jobs_.at(f.queue.front()).staged) {
    const auto job_id = f.queue.front();
    f.queue.pop_front();
    ++f.running;
    Entry& e = jobs_.at(job_id);
    e.cpu_start = sim.now();
    engine::ClaimSpec claim;
    claim.owner = id();
    claim.work = e.job.cpu_work;
    claim.cap = f.spec.cpu_rate;
    claim.tag = defer([this, center, job_id](engine::Simulator& sim, const engine::SimEvent&) {
      --farms_[center].running;
      finish(sim, center, job_id, false);
      dispatch(sim, center);
    });
    f.resource->join(sim, claim);
  }
}

void GridScheduler::finish(engine::Simulator& sim, std::size_t center, std::uint64_t job_id, bool failed) {
  auto it = jobs_.find(job_id);
  Entry e = std::move(it->second);
  jobs_.erase(it);
  JobRecord r;
  r.id = e.job.id;
  r.type = e.job.type;
  r.center = farms_[center].spec.center;
  r.submit_time = e.job.submit_time;
  r.start_time = failed ? sim.now() : e.cpu_start;
  r.end_time = sim.now();
  r.staging_time = failed ? 0.0 : e.staging_done - e.job.submit_time;
  r.exported = e.job.exported;
  r.failed = failed;
  records_.push_back(r);
  if (e.done) e.done(sim, r);
}

// ---------------------------------------------------------------------------
// TransferAgents

void TransferAgents::fanout(engine::Simulator& sim, data::FileId file, const std::string& source,
                            const std::set<std::string>& destinations, Delivered on_delivery) {
  auto schedule = std::make_shared<const FanoutSchedule>(plan_fanout(source, destinations, active_plan()));
  auto dests = std::make_shared<const std::set<std::string>>(destinations);
  for (const auto& to : schedule->direct) send(sim, file, source, to, schedule, dests, on_delivery);
}

void TransferAgents::send(engine::Simulator& sim, data::FileId file, const std::string& from, const std::string& to,
                          std::shared_ptr<const FanoutSchedule> schedule,
                          std::shared_ptr<const std::set<std::string>> destinations, Delivered on_delivery) {
  auto& catalog = data_.catalog();
  const auto& replicas = catalog.file(file).replicas;
  std::optional<data::ServerIndex> src;
  for (auto s : replicas) {
    if (catalog.server(s).spec.center != from) continue;
    if (!src || catalog.server(s).spec.kind == data::StorageKind::Disk) src = s;
  }
  if (!src) throw SimulationError("fan-out: file " + std::to_string(file) + " has no replica at " + from);
  auto dst = catalog.disk_at(to);
  if (!dst) throw SimulationError("fan-out: no disk server at " + to);
  const auto node = data_.net().topology().node(to);
  data_.fetch(sim, file, *src, node, *dst,
              [this, file, to, schedule, destinations, on_delivery](engine::Simulator& sim,
                                                                    const data::FetchResult& result) {
                if (destinations->count(to) && on_delivery) on_delivery(sim, to, result);
                auto fw = schedule->forwards.find(to);
                if (fw == schedule->forwards.end()) return;
                for (const auto& next : fw->second) send(sim, file, to, next, schedule, destinations, on_delivery);
              });
}

}  // namespace gridflow::sched
