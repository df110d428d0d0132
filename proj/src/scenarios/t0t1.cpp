#include <algorithm>
#include <deque>
#include <memory>
#include <set>

#include "gridflow/scenarios.hpp"

namespace gridflow::scenarios {
namespace {

using data::FileClass;
using data::FileId;
using engine::Simulator;
using engine::SimEvent;

class T0T1World {
 public:
  T0T1World(const T0T1Spec& spec, std::uint64_t seed, double duration, double interval)
      : spec_(spec),
        duration_(duration),
        raw_rng_(substream(seed, "raw-replication")),
        production_rng_(substream(seed, "production")),
        reproduction_rng_(substream(seed, "reproduction")) {
    for (const auto& err : spec.agents.validate()) throw engine::SimulationError(err);
    net_ = &sim_.spawn<network::FlowNetwork>(spec.topology.build(), network::NetworkOptions{spec.topology.window_bytes});
    const auto& topo = net_->topology();
    std::vector<sched::FarmSpec> farms;
    for (const auto& c : spec.centers) {
      const auto node = topo.node(c.name);
      auto disk = c.disk;
      disk.center = c.name;
      disk.kind = data::StorageKind::Disk;
      catalog_.add_server(disk, node);
      if (c.tape) {
        auto tape = *c.tape;
        tape.center = c.name;
        tape.kind = data::StorageKind::Tape;
        catalog_.add_server(tape, node);
      }
      auto farm = c.farm;
      farm.center = c.name;
      farms.push_back(farm);
    }
    data_ = &sim_.spawn<data::DataService>(catalog_, *net_);
    scheduler_ = &sim_.spawn<sched::GridScheduler>(*data_, farms);
    agents_ = std::make_unique<sched::TransferAgents>(*data_, spec.agents, spec.agents_enabled);
    raw_actor_ = &sim_.spawn<engine::Actor>();
    analysis_actor_ = &sim_.spawn<engine::Actor>();
    recorder_ = &sim_.spawn<metrics::MetricsRecorder>(interval);

    net_->start(sim_);
    scheduler_->start(sim_);
    recorder_->watch_network(net_);
    for (std::size_t i = 0; i < scheduler_->farm_count(); ++i) {
      recorder_->watch_cpu(scheduler_->farm(i).center, {&scheduler_->resource(i)});
    }
    recorder_->set_job_counter([this] {
      std::size_t n = 0;
      for (std::size_t i = 0; i < scheduler_->farm_count(); ++i) n += scheduler_->running(i) + scheduler_->queued(i);
      return n;
    });
    recorder_->start(sim_);

    data_->set_on_delivery([this](const data::FetchResult& r) {
      const auto& f = catalog_.file(r.file);
      const auto& dst = net_->topology().nodes()[r.dst];
      // Fan-out copies are timed from the moment the origin started serving
      // them, so a relayed copy includes its upstream hop.
      double start = r.requested_at;
      if (auto it = fanout_start_.find({r.file, dst}); it != fanout_start_.end()) {
        start = it->second;
        fanout_start_.erase(it);
      }
      result_.transfers.push_back(metrics::TransferRecord{r.file, f.cls, catalog_.server(r.source).spec.center, dst,
                                                          r.bytes, start, r.finished_at});
    });
    sim_.set_trace([this](const SimEvent& e) { trace_hash_ = trace_step(trace_hash_, e); });
  }

  RunResult run() {
    if (spec_.raw.enabled) schedule_next_raw(0.0);
    if (spec_.reproduction.enabled && spec_.reproduction.start_time < duration_) {
      raw_actor_->after(sim_, spec_.reproduction.start_time,
                        [this](Simulator&, const SimEvent&) { start_reproduction(); });
    }
    if (spec_.analysis.enabled) schedule_analysis();

    result_.report = sim_.run_until(duration_);
    recorder_->sample(duration_);
    finish();
    return std::move(result_);
  }

 private:
  struct AnalysisRun {
    std::string center;
    std::size_t record = 0;
    std::deque<FileId> queue;
    int inflight = 0;
    double bytes = 0.0;
  };
  struct ReproductionSite {
    std::size_t record = 0;
    std::size_t outstanding = 0;  // jobs plus undelivered DST copies
    double bytes = 0.0;
  };

  data::ServerIndex disk(const std::string& center) const {
    auto d = catalog_.disk_at(center);
    if (!d) throw engine::SimulationError("no disk server at " + center);
    return *d;
  }

  bool resident_at(FileId f, const std::string& center) const {
    for (auto s : catalog_.file(f).replicas) {
      if (catalog_.server(s).spec.center == center) return true;
    }
    return false;
  }

  // -- RAW recording and round-robin replication ---------------------------

  void schedule_next_raw(double created_before) {
    const double size = spec_.raw.file_size.sample(raw_rng_);
    const double at = created_before + size / spec_.raw.recording_rate;
    if (at > spec_.raw.stop_time || at >= duration_) return;
    raw_actor_->after(sim_, at - sim_.now(), [this, size](Simulator&, const SimEvent&) { create_raw(size); });
  }

  void create_raw(double size) {
    const double now = sim_.now();
    data::FileRecord rec;
    rec.cls = FileClass::Raw;
    rec.size_bytes = size;
    rec.created_at = now;
    rec.first_event = next_event_;
    next_event_ += 1000;
    rec.last_event = next_event_ - 1;
    const FileId id = catalog_.register_file(rec);
    const auto& dest = round_robin(spec_.raw.destinations, raw_index_++);
    ++assigned_[dest];
    expected_[{id, dest}] = 0;
    data_->store(sim_, id, disk(spec_.tier0), {disk(dest)},
                 [this, id, dest](Simulator&, const data::FetchResult&) { ++expected_[{id, dest}]; });
    if (spec_.production.enabled) submit_production(id);
    schedule_next_raw(now);
  }

  // -- production and DST distribution -------------------------------------

  void submit_production(FileId raw) {
    sched::Job job;
    job.id = next_job_++;
    job.type = sched::JobType::Production;
    job.cpu_work = spec_.production.cpu_work_per_raw;
    job.inputs = {raw};
    scheduler_->submit(sim_, job, spec_.tier0, [this, raw](Simulator&, const sched::JobRecord& r) {
      if (r.failed) return;
      const FileId dst = new_dst(raw, spec_.production.dst_ratio, spec_.production.dst_sd, production_rng_,
                                 r.center);
      std::set<std::string> dests;
      for (const auto& c : spec_.centers) {
        if (c.name != r.center) dests.insert(c.name);
      }
      fan_out(dst, r.center, dests, nullptr);
      ++production_fanouts_;
    });
  }

  FileId new_dst(FileId raw, double ratio, double sd, std::mt19937_64& rng, const std::string& center) {
    data::FileRecord rec;
    rec.cls = FileClass::Dst;
    rec.size_bytes = dst_size(catalog_.file(raw).size_bytes, ratio, sd, rng);
    rec.created_at = sim_.now();
    rec.first_event = catalog_.file(raw).first_event;
    rec.last_event = catalog_.file(raw).last_event;
    const FileId id = catalog_.register_file(rec);
    data_->store(sim_, id, disk(center), {});
    return id;
  }

  void fan_out(FileId file, const std::string& source, const std::set<std::string>& dests, ReproductionSite* site) {
    for (const auto& d : dests) {
      if (d == source) continue;
      expected_[{file, d}] = 0;
      fanout_start_[{file, d}] = sim_.now();
    }
    if (site) {
      site->outstanding += dests.size() - (dests.count(source) ? 1 : 0);
      site->bytes += catalog_.file(file).size_bytes * static_cast<double>(dests.size());
    }
    agents_->fanout(sim_, file, source, dests,
                    [this, file, site](Simulator&, const std::string& center, const data::FetchResult&) {
                      ++expected_[{file, center}];
                      if (site) settle(*site);
                    });
  }

  // -- re-production at the tier-1 centers ----------------------------------

  void start_reproduction() {
    for (const auto& center : spec_.tier1()) {
      auto site = std::make_unique<ReproductionSite>();
      site->record = result_.activities.size();
      result_.activities.push_back(metrics::ActivityRecord{"reproduction", center, sim_.now(), std::nullopt, 0.0});
      ReproductionSite* s = site.get();
      sites_.push_back(std::move(site));
      std::vector<FileId> held;
      for (const auto& [id, f] : catalog_.files()) {
        if (f.cls == FileClass::Raw && resident_at(id, center)) held.push_back(id);
      }
      result_.stats["reproduction_jobs:" + center] = static_cast<double>(held.size());
      s->outstanding = held.size();
      for (FileId raw : held) {
        sched::Job job;
        job.id = next_job_++;
        job.type = sched::JobType::Reproduction;
        job.cpu_work = spec_.reproduction.cpu_work_per_raw;
        job.inputs = {raw};
        scheduler_->submit(sim_, job, center, [this, raw, s](Simulator&, const sched::JobRecord& r) {
          if (!r.failed) {
            const FileId dst = new_dst(raw, spec_.reproduction.dst_ratio, spec_.reproduction.dst_sd,
                                       reproduction_rng_, r.center);
            std::set<std::string> dests;
            for (const auto& c : spec_.tier1()) dests.insert(c);
            if (spec_.reproduction.include_t0) dests.insert(spec_.tier0);
            dests.erase(r.center);
            fan_out(dst, r.center, dests, s);
          }
          settle(*s);
        });
      }
      if (held.empty()) settle_now(*s);
    }
  }

  void settle(ReproductionSite& s) {
    if (s.outstanding > 0) --s.outstanding;
    if (s.outstanding == 0) settle_now(s);
  }

  void settle_now(ReproductionSite& s) {
    auto& rec = result_.activities[s.record];
    rec.completion = sim_.now();
    rec.bytes_moved = s.bytes;
  }

  // -- detector analysis ----------------------------------------------------

  void schedule_analysis() {
    for (const auto& center : spec_.analysis.centers) {
      const CenterSpec* c = nullptr;
      for (const auto& cs : spec_.centers) {
        if (cs.name == center) c = &cs;
      }
      if (!c) throw engine::SimulationError("analysis center " + center + " is not configured");
      for (double t : analysis_triggers(c->utc_offset_h, spec_.analysis.local_start_h, spec_.epoch_utc_h,
                                        duration_)) {
        analysis_actor_->after(sim_, t - sim_.now(),
                               [this, center](Simulator&, const SimEvent&) { start_analysis(center); });
      }
    }
  }

  void start_analysis(const std::string& center) {
    const double now = sim_.now();
    auto run = std::make_shared<AnalysisRun>();
    run->center = center;
    run->record = result_.activities.size();
    result_.activities.push_back(metrics::ActivityRecord{"analysis", center, now, std::nullopt, 0.0});
    for (FileId f : files_in_window(catalog_, FileClass::Raw, now - spec_.analysis.window_h * 3600.0, now)) {
      run->queue.push_back(f);
    }
    pump_analysis(run);
  }

  void pump_analysis(const std::shared_ptr<AnalysisRun>& run) {
    const auto node = net_->topology().node(run->center);
    while (run->inflight < spec_.analysis.max_parallel && !run->queue.empty()) {
      const FileId f = run->queue.front();
      run->queue.pop_front();
      if (resident_at(f, run->center)) continue;
      const auto source = catalog_.find_optimal(f, node, *net_);
      ++run->inflight;
      data_->fetch(sim_, f, source, node, disk(run->center),
                   [this, run](Simulator&, const data::FetchResult& r) {
                     --run->inflight;
                     run->bytes += r.bytes;
                     pump_analysis(run);
                   });
    }
    if (run->inflight == 0 && run->queue.empty()) {
      auto& rec = result_.activities[run->record];
      if (!rec.completion) {
        rec.completion = sim_.now();
        rec.bytes_moved = run->bytes;
      }
    }
  }

  // -- end of run -----------------------------------------------------------

  void finish() {
    auto& stats = result_.stats;
    const auto& links = net_->topology().links();
    for (std::size_t l = 0; l < links.size(); ++l) {
      const double bits = net_->link_bits_until(l, duration_);
      stats["link_bits:" + links[l].id] = bits;
      stats["link_avg_bps:" + links[l].id] = bits / duration_;
    }
    for (std::size_t i = 0; i < scheduler_->farm_count(); ++i) {
      const auto& r = scheduler_->resource(i);
      const double cap = r.capacity_integral_until(duration_);
      stats["cpu_utilization:" + scheduler_->farm(i).center] = cap > 0.0 ? r.served_until(duration_) / cap : 0.0;
    }
    for (const auto& [center, n] : assigned_) stats["raw_assigned:" + center] = n;
    stats["production_fanouts"] = static_cast<double>(production_fanouts_);
    stats["tape_reads"] = static_cast<double>(data_->tape_reads());

    auto& audit = result_.audit_violations;
    for (auto& e : net_->audit(duration_)) audit.push_back(std::move(e));
    for (auto& e : catalog_.audit()) audit.push_back(std::move(e));
    std::size_t undelivered = 0;
    for (const auto& [key, count] : expected_) {
      if (count > 1) {
        audit.push_back("file " + std::to_string(key.first) + " delivered " + std::to_string(count) + " times to " +
                        key.second);
      }
      if (count == 0) ++undelivered;
    }
    stats["undelivered_copies"] = static_cast<double>(undelivered);
    if (!assigned_.empty()) {
      int lo = assigned_.begin()->second;
      int hi = lo;
      for (const auto& [c, n] : assigned_) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      if (assigned_.size() < spec_.raw.destinations.size()) lo = 0;
      if (hi - lo > 1) audit.push_back("round-robin imbalance: " + std::to_string(lo) + ".." + std::to_string(hi));
    }
    stats["events_processed"] = static_cast<double>(result_.report.events_processed);
    stats["stale_dropped"] = static_cast<double>(result_.report.stale_dropped);

    result_.links = recorder_->links();
    result_.cpu = recorder_->cpu();
    result_.samples = recorder_->samples();
    result_.jobs = scheduler_->records();
    result_.trace_hash = trace_hash_;
    result_.duration = duration_;
  }

  const T0T1Spec& spec_;
  double duration_;
  Simulator sim_;
  network::FlowNetwork* net_ = nullptr;
  data::ReplicaCatalog catalog_;
  data::DataService* data_ = nullptr;
  sched::GridScheduler* scheduler_ = nullptr;
  std::unique_ptr<sched::TransferAgents> agents_;
  engine::Actor* raw_actor_ = nullptr;
  engine::Actor* analysis_actor_ = nullptr;
  metrics::MetricsRecorder* recorder_ = nullptr;
  std::mt19937_64 raw_rng_;
  std::mt19937_64 production_rng_;
  std::mt19937_64 reproduction_rng_;
  std::size_t raw_index_ = 0;
  std::int64_t next_event_ = 0;
  std::uint64_t next_job_ = 1;
  std::uint64_t production_fanouts_ = 0;
  std::map<std::string, int> assigned_;
  std::map<std::pair<FileId, std::string>, int> expected_;
  std::map<std::pair<FileId, std::string>, double> fanout_start_;
  std::vector<std::unique_ptr<ReproductionSite>> sites_;
  std::uint64_t trace_hash_ = kTraceSeed;
  RunResult result_;
};

}  // namespace

RunResult run_t0t1(const T0T1Spec& spec, std::uint64_t seed, double duration, double metrics_interval) {
  T0T1World world(spec, seed, duration, metrics_interval);
  return world.run();
}

}  // namespace gridflow::scenarios
