#include <deque>
#include <memory>

#include "gridflow/scenarios.hpp"

namespace gridflow::scenarios {
namespace {

using engine::SimEvent;
using engine::Simulator;

class ProofWorld {
 public:
  ProofWorld(const ProofSpec& spec, std::uint64_t seed, double duration, double interval)
      : spec_(spec),
        duration_(duration),
        local_rng_(substream(seed, "proof-local")),
        think_rng_(substream(seed, "proof-think")) {
    if (spec.n_masters < 1 || spec.m_slaves < 1 || spec.s_servers < 1 || spec.slaves_per_master < 1) {
      throw engine::SimulationError("proof: masters, stations, servers and slaves per master must be positive");
    }
    if (static_cast<long>(spec.slaves_per_master) * spec.n_masters < spec.m_slaves) {
      throw engine::SimulationError("proof: slaves_per_master * n_masters must cover every station");
    }
    if (spec.p_local < 0.0 || spec.p_local > 1.0) throw engine::SimulationError("proof: p_local outside [0,1]");
    if (spec.packets_per_request < 1 || spec.packet_events < 1 || spec.requests_per_master < 1) {
      throw engine::SimulationError("proof: packets_per_request, packet_events and requests_per_master must be positive");
    }

    network::Topology topo;
    topo.add_node("switch");
    for (int k = 0; k < spec.m_slaves; ++k) {
      topo.add_node(station_name(k));
      topo.add_link(network::Link{"lan:" + station_name(k), station_name(k), "switch", engine::CapacitySchedule(spec.lan_bps), 1e-4});
    }
    for (int k = 0; k < spec.s_servers; ++k) {
      const std::string name = "ds" + std::to_string(k);
      topo.add_node(name);
      topo.add_link(network::Link{"lan:" + name, name, "switch", engine::CapacitySchedule(spec.server_lan_bps), 1e-4});
    }
    net_ = &sim_.spawn<network::FlowNetwork>(std::move(topo));
    for (int k = 0; k < spec.s_servers; ++k) {
      data::ServerSpec s;
      s.id = "ds" + std::to_string(k);
      s.center = s.id;
      s.service_time = spec.server_service_time;
      s.parallelism = spec.server_parallelism;
      catalog_.add_server(s, net_->topology().node(s.id));
    }
    // Each master's dataset: one file per packet, on every data server.
    for (int i = 0; i < spec.n_masters; ++i) {
      std::vector<data::FileId> files;
      for (int p = 0; p < spec.packets_per_request; ++p) {
        data::FileRecord rec;
        rec.size_bytes = spec.packet_bytes();
        rec.first_event = static_cast<std::int64_t>(p) * spec.packet_events;
        rec.last_event = rec.first_event + spec.packet_events - 1;
        const auto id = catalog_.register_file(rec);
        for (std::size_t s = 0; s < catalog_.server_count(); ++s) catalog_.store(id, s, 0.0);
        files.push_back(id);
      }
      datasets_.push_back(std::move(files));
    }
    data_ = &sim_.spawn<data::DataService>(catalog_, *net_);
    actor_ = &sim_.spawn<engine::Actor>();
    for (int k = 0; k < spec.m_slaves; ++k) {
      stations_.push_back(
          &sim_.spawn<engine::SharedResource>("cpu:" + station_name(k), engine::CapacitySchedule(spec.station_cpu_rate)));
    }
    masters_.resize(static_cast<std::size_t>(spec.n_masters));
    for (int i = 0; i < spec.n_masters; ++i) {
      for (int j = 0; j < spec.slaves_per_master; ++j) {
        Slave s;
        s.master = static_cast<std::size_t>(i);
        s.station = static_cast<std::size_t>((i * spec.slaves_per_master + j) % spec.m_slaves);
        masters_[s.master].slaves.push_back(slaves_.size());
        slaves_.push_back(s);
      }
    }
    recorder_ = &sim_.spawn<metrics::MetricsRecorder>(interval);

    net_->start(sim_);
    for (auto* st : stations_) st->start(sim_);
    recorder_->watch_network(net_);
    for (int k = 0; k < spec.m_slaves; ++k) {
      recorder_->watch_cpu(station_name(k), {stations_[static_cast<std::size_t>(k)]});
    }
    recorder_->set_job_counter([this] { return busy_slaves_; });
    recorder_->start(sim_);

    data_->set_on_delivery([this](const data::FetchResult& r) {
      result_.transfers.push_back(metrics::TransferRecord{r.file, data::FileClass::Raw,
                                                          catalog_.server(r.source).spec.center,
                                                          net_->topology().nodes()[r.dst], r.bytes, r.requested_at,
                                                          r.finished_at});
    });
    sim_.set_trace([this](const SimEvent& e) { trace_hash_ = trace_step(trace_hash_, e); });
  }

  RunResult run() {
    for (std::size_t i = 0; i < masters_.size(); ++i) {
      const double first = spec_.repeat_requests ? think() : 0.0;
      actor_->after(sim_, first, [this, i](Simulator&, const SimEvent&) { post(i, Message{Kind::ClientRequest, 0}); });
    }
    result_.report = sim_.run_until(duration_);
    recorder_->sample(duration_);
    finish();
    return std::move(result_);
  }

 private:
  enum class Kind { ClientRequest, WorkRequest, Result };
  struct Message {
    Kind kind;
    std::size_t slave;
  };
  struct Master {
    std::vector<std::size_t> slaves;
    std::deque<Message> inbox;
    bool busy = false;
    bool active = false;
    int next_packet = 0;
    int returned = 0;
    std::int64_t events = 0;
    std::size_t record = 0;
    double bytes = 0.0;
    int requests = 0;
  };
  struct Slave {
    std::size_t master = 0;
    std::size_t station = 0;
    bool idle = true;
    int packet = -1;
    double assigned_at = 0.0;
    double cpu_start = 0.0;
  };

  static std::string station_name(int k) { return "st" + std::to_string(k); }

  double think() {
    std::exponential_distribution<double> d(1.0 / spec_.think_time_mean);
    return d(think_rng_);
  }

  void post(std::size_t m, Message msg) {
    masters_[m].inbox.push_back(msg);
    pump(m);
  }

  // The master handles one message at a time, each taking handle_time.
  void pump(std::size_t m) {
    Master& master = masters_[m];
    if (master.busy || master.inbox.empty()) return;
    master.busy = true;
    const Message msg = master.inbox.front();
    master.inbox.pop_front();
    actor_->after(sim_, spec_.master_handle_time, [this, m, msg](Simulator&, const SimEvent&) {
      handle(m, msg);
      masters_[m].busy = false;
      pump(m);
    });
  }

  void handle(std::size_t m, const Message& msg) {
    Master& master = masters_[m];
    switch (msg.kind) {
      case Kind::ClientRequest:
        master.active = true;
        master.next_packet = 0;
        master.returned = 0;
        master.events = 0;
        master.bytes = 0.0;
        ++master.requests;
        master.record = result_.activities.size();
        result_.activities.push_back(
            metrics::ActivityRecord{"proof-request", "master" + std::to_string(m), sim_.now(), std::nullopt, 0.0});
        for (std::size_t s : master.slaves) {
          if (slaves_[s].idle) {
            slaves_[s].idle = false;
            master.inbox.push_back(Message{Kind::WorkRequest, s});
          }
        }
        break;
      case Kind::WorkRequest: {
        Slave& slave = slaves_[msg.slave];
        if (!master.active || master.next_packet >= spec_.packets_per_request) {
          slave.idle = true;
          break;
        }
        slave.packet = master.next_packet++;
        slave.assigned_at = sim_.now();
        obtain(msg.slave);
        break;
      }
      case Kind::Result:
        ++master.returned;
        master.events += spec_.packet_events;
        if (master.returned == spec_.packets_per_request) complete(m);
        break;
    }
  }

  void obtain(std::size_t s) {
    Slave& slave = slaves_[s];
    ++busy_slaves_;
    std::bernoulli_distribution local(spec_.p_local);
    if (local(local_rng_)) {
      ++local_hits_;
      compute(s);
      return;
    }
    ++server_requests_;
    const auto file = datasets_[slave.master][static_cast<std::size_t>(slave.packet)];
    const auto node = net_->topology().node(station_name(static_cast<int>(slave.station)));
    data_->fetch(sim_, file, catalog_.find_optimal(file, node, *net_), node, std::nullopt,
                 [this, s](Simulator&, const data::FetchResult& r) {
                   masters_[slaves_[s].master].bytes += r.bytes;
                   compute(s);
                 });
  }

  void compute(std::size_t s) {
    Slave& slave = slaves_[s];
    slave.cpu_start = sim_.now();
    engine::ClaimSpec claim;
    claim.owner = actor_->id();
    claim.work = spec_.packet_cpu_work();
    claim.cap = spec_.station_cpu_rate;
    claim.tag = actor_->defer([this, s](Simulator&, const SimEvent&) { returned(s); });
    stations_[slave.station]->join(sim_, claim);
  }

  void returned(std::size_t s) {
    Slave& slave = slaves_[s];
    --busy_slaves_;
    sched::JobRecord rec;
    rec.id = ++next_job_;
    rec.type = sched::JobType::Analysis;
    rec.center = station_name(static_cast<int>(slave.station));
    rec.submit_time = slave.assigned_at;
    rec.start_time = slave.cpu_start;
    rec.end_time = sim_.now();
    rec.staging_time = slave.cpu_start - slave.assigned_at;
    result_.jobs.push_back(rec);
    slave.packet = -1;
    post(slave.master, Message{Kind::Result, s});
    post(slave.master, Message{Kind::WorkRequest, s});
  }

  void complete(std::size_t m) {
    Master& master = masters_[m];
    master.active = false;
    auto& rec = result_.activities[master.record];
    rec.completion = sim_.now();
    rec.bytes_moved = master.bytes;
    const std::int64_t expected = static_cast<std::int64_t>(spec_.packets_per_request) * spec_.packet_events;
    if (master.events != expected) {
      result_.audit_violations.push_back("master" + std::to_string(m) + " processed " +
                                         std::to_string(master.events) + " events, expected " +
                                         std::to_string(expected));
    }
    if (!spec_.repeat_requests && master.requests < spec_.requests_per_master) {
      post(m, Message{Kind::ClientRequest, 0});
    } else if (spec_.repeat_requests) {
      actor_->after(sim_, think(),
                    [this, m](Simulator&, const SimEvent&) { post(m, Message{Kind::ClientRequest, 0}); });
    }
  }

  void finish() {
    auto& stats = result_.stats;
    double served = 0.0;
    double capacity = 0.0;
    for (auto* st : stations_) {
      served += st->served_until(duration_);
      capacity += st->capacity_integral_until(duration_);
    }
    stats["cpu_usage_avg"] = capacity > 0.0 ? served / capacity : 0.0;

    std::size_t completed = 0;
    double last = 0.0;
    for (const auto& a : result_.activities) {
      if (a.completion) {
        ++completed;
        last = std::max(last, *a.completion);
      }
    }
    stats["requests_started"] = static_cast<double>(result_.activities.size());
    stats["requests_completed"] = static_cast<double>(completed);
    stats["total_processing_time"] =
        completed == result_.activities.size() && completed > 0 ? last : engine::kInfinity;
    stats["local_hits"] = static_cast<double>(local_hits_);
    stats["server_requests"] = static_cast<double>(server_requests_);
    const auto& links = net_->topology().links();
    double lan_bits = 0.0;
    for (std::size_t l = 0; l < links.size(); ++l) {
      const double bits = net_->link_bits_until(l, duration_);
      stats["link_avg_bps:" + links[l].id] = bits / duration_;
      if (links[l].id.rfind("lan:ds", 0) == 0) lan_bits += bits;
    }
    stats["server_lan_bits"] = lan_bits;
    stats["events_processed"] = static_cast<double>(result_.report.events_processed);

    for (auto& e : net_->audit(duration_)) result_.audit_violations.push_back(std::move(e));
    result_.links = recorder_->links();
    result_.cpu = recorder_->cpu();
    result_.samples = recorder_->samples();
    result_.trace_hash = trace_hash_;
    result_.duration = duration_;
  }

  const ProofSpec& spec_;
  double duration_;
  Simulator sim_;
  network::FlowNetwork* net_ = nullptr;
  data::ReplicaCatalog catalog_;
  data::DataService* data_ = nullptr;
  engine::Actor* actor_ = nullptr;
  metrics::MetricsRecorder* recorder_ = nullptr;
  std::vector<engine::SharedResource*> stations_;
  std::vector<std::vector<data::FileId>> datasets_;
  std::vector<Master> masters_;
  std::vector<Slave> slaves_;
  std::mt19937_64 local_rng_;
  std::mt19937_64 think_rng_;
  std::size_t busy_slaves_ = 0;
  std::uint64_t local_hits_ = 0;
  std::uint64_t server_requests_ = 0;
  std::uint64_t next_job_ = 0;
  std::uint64_t trace_hash_ = kTraceSeed;
  RunResult result_;
};

}  // namespace

RunResult run_proof(const ProofSpec& spec, std::uint64_t seed, double duration, double metrics_interval) {
  ProofWorld world(spec, seed, duration, metrics_interval);
  return world.run();
}

}  // namespace gridflow::scenarios
