#include "gridflow/datalayer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridflow::data {

using engine::SimulationError;

const char* to_string(FileClass cls) { return cls == FileClass::Raw ? "RAW" : "DST"; }

double replica_cost(double size_bytes, double attainable_bps, std::size_t pending, double service_time,
                    double mount_latency) {
  const double transfer = std::isinf(attainable_bps) ? 0.0
                          : attainable_bps > 0.0     ? size_bytes * 8.0 / attainable_bps
                                                     : engine::kInfinity;
  return transfer + static_cast<double>(pending) * service_time + mount_latency;
}

// ---------------------------------------------------------------------------
// ReplicaCatalog

ServerIndex ReplicaCatalog::add_server(ServerSpec spec, network::NodeIndex node) {
  if (find_server(spec.id)) throw SimulationError("duplicate server " + spec.id);
  if (spec.parallelism < 1) throw SimulationError("server " + spec.id + ": parallelism must be >= 1");
  Server s;
  s.spec = std::move(spec);
  s.node = node;
  servers_.push_back(std::move(s));
  resident_.emplace_back();
  return servers_.size() - 1;
}

FileId ReplicaCatalog::register_file(FileRecord record) {
  if (!(record.size_bytes > 0.0)) throw SimulationError("file size must be positive");
  if (record.id == 0) record.id = next_id_;
  if (files_.count(record.id)) throw SimulationError("duplicate file id " + std::to_string(record.id));
  next_id_ = std::max(next_id_, record.id + 1);
  record.replicas.clear();
  const FileId id = record.id;
  files_.emplace(id, std::move(record));
  return id;
}

const FileRecord& ReplicaCatalog::file(FileId id) const {
  auto it = files_.find(id);
  if (it == files_.end()) throw SimulationError("unknown file " + std::to_string(id));
  return it->second;
}

std::optional<ServerIndex> ReplicaCatalog::find_server(const std::string& id) const {
  for (ServerIndex i = 0; i < servers_.size(); ++i) {
    if (servers_[i].spec.id == id) return i;
  }
  return std::nullopt;
}

std::optional<ServerIndex> ReplicaCatalog::disk_at(const std::string& center) const {
  for (ServerIndex i = 0; i < servers_.size(); ++i) {
    if (servers_[i].spec.center == center && servers_[i].spec.kind == StorageKind::Disk) return i;
  }
  return std::nullopt;
}

std::optional<ServerIndex> ReplicaCatalog::tape_at(const std::string& center) const {
  for (ServerIndex i = 0; i < servers_.size(); ++i) {
    if (servers_[i].spec.center == center && servers_[i].spec.kind == StorageKind::Tape) return i;
  }
  return std::nullopt;
}

double ReplicaCatalog::free_bytes(ServerIndex i) const {
  const auto& s = servers_.at(i);
  return s.spec.capacity_bytes - s.used;
}

void ReplicaCatalog::place(FileId id, ServerIndex server) {
  auto& f = files_.at(id);
  f.replicas.insert(server);
  servers_[server].used += f.size_bytes;
  auto& r = resident_[server];
  r.where[id] = r.recency.insert(r.recency.end(), id);
}

void ReplicaCatalog::evict(FileId id, ServerIndex server) {
  auto& f = files_.at(id);
  f.replicas.erase(server);
  servers_[server].used -= f.size_bytes;
  auto& r = resident_[server];
  auto it = r.where.find(id);
  r.recency.erase(it->second);
  r.where.erase(it);
}

void ReplicaCatalog::touch(FileId id, ServerIndex server, double) {
  auto& r = resident_.at(server);
  auto it = r.where.find(id);
  if (it == r.where.end()) return;
  r.recency.splice(r.recency.end(), r.recency, it->second);
}

std::vector<FileId> ReplicaCatalog::lru_order(ServerIndex server) const {
  const auto& r = resident_.at(server);
  return {r.recency.begin(), r.recency.end()};
}

std::vector<Move> ReplicaCatalog::store(FileId id, ServerIndex server, double now) {
  const FileRecord& f = file(id);
  if (f.replicas.count(server)) {
    touch(id, server, now);
    return {};
  }
  const Server& s = servers_.at(server);
  if (s.spec.kind == StorageKind::Tape) {
    if (f.size_bytes > free_bytes(server)) throw SimulationError("mass storage " + s.spec.id + " is full");
    place(id, server);
    return {};
  }
  if (f.size_bytes > s.spec.capacity_bytes) {
    auto tape = tape_at(s.spec.center);
    if (!tape || f.size_bytes > free_bytes(*tape)) {
      std::ostringstream msg;
      msg << "file " << id << " (" << f.size_bytes << " B) exceeds the disk and tape capacity at center "
          << s.spec.center;
      throw SimulationError(msg.str());
    }
    place(id, *tape);
    return {};
  }
  auto moves = migrate(server, f.size_bytes, now);
  place(id, server);
  return moves;
}

std::vector<Move> ReplicaCatalog::migrate(ServerIndex server, double needed, double) {
  std::vector<Move> moves;
  if (needed <= free_bytes(server)) return moves;
  const Server& s = servers_.at(server);
  auto tape = tape_at(s.spec.center);
  if (!tape) throw SimulationError("server " + s.spec.id + " is out of space and has no mass storage");
  auto& r = resident_[server];
  while (needed > free_bytes(server)) {
    if (r.recency.empty()) throw SimulationError("server " + s.spec.id + " cannot free enough space");
    const FileId victim = r.recency.front();
    const FileRecord& f = files_.at(victim);
    const bool on_tape = f.replicas.count(*tape) != 0;
    if (!on_tape && f.size_bytes > free_bytes(*tape)) {
      throw SimulationError("mass storage " + servers_[*tape].spec.id + " is full during migration from " +
                            s.spec.id);
    }
    evict(victim, server);
    if (!on_tape) place(victim, *tape);
    moves.push_back(Move{victim, server, *tape});
  }
  return moves;
}

ServerIndex ReplicaCatalog::find_closest(FileId id, network::NodeIndex requester,
                                         const network::Topology& topology) const {
  const FileRecord& f = file(id);
  if (f.replicas.empty()) throw SimulationError("file " + std::to_string(id) + " has no replica");
  std::optional<ServerIndex> best;
  double best_rtt = engine::kInfinity;
  for (ServerIndex r : f.replicas) {
    const double rtt = topology.path(servers_[r].node, requester).rtt_s;
    if (!best || rtt < best_rtt || (rtt == best_rtt && servers_[r].spec.id < servers_[*best].spec.id)) {
      best = r;
      best_rtt = rtt;
    }
  }
  return *best;
}

ServerIndex ReplicaCatalog::find_optimal(FileId id, network::NodeIndex requester,
                                         const network::FlowNetwork& net) const {
  const FileRecord& f = file(id);
  if (f.replicas.empty()) throw SimulationError("file " + std::to_string(id) + " has no replica");
  struct Candidate {
    double cost;
    double rtt;
    ServerIndex server;
  };
  std::optional<Candidate> best;
  for (ServerIndex r : f.replicas) {
    const Server& s = servers_[r];
    const double rate = net.attainable_rate(s.node, requester);
    const double mount = s.spec.kind == StorageKind::Tape ? s.spec.mount_latency : 0.0;
    Candidate c{replica_cost(f.size_bytes, rate, s.pending, s.spec.service_time, mount),
                net.topology().path(s.node, requester).rtt_s, r};
    if (!best) {
      best = c;
      continue;
    }
    const double tol = 1e-12 * std::max(1.0, std::max(std::abs(c.cost), std::abs(best->cost)));
    if (c.cost < best->cost - tol) {
      best = c;
    } else if (std::abs(c.cost - best->cost) <= tol) {
      if (c.rtt < best->rtt || (c.rtt == best->rtt && s.spec.id < servers_[best->server].spec.id)) best = c;
    }
  }
  return best->server;
}

std::vector<std::string> ReplicaCatalog::audit() const {
  std::vector<std::string> errors;
  for (const auto& [id, f] : files_) {
    for (ServerIndex r : f.replicas) {
      if (!resident_[r].where.count(id)) {
        errors.push_back("file " + std::to_string(id) + " listed on " + servers_[r].spec.id + " but not resident");
      }
    }
  }
  for (ServerIndex s = 0; s < servers_.size(); ++s) {
    double sum = 0.0;
    for (FileId id : resident_[s].recency) {
      sum += files_.at(id).size_bytes;
      if (!files_.at(id).replicas.count(s)) {
        errors.push_back("file " + std::to_string(id) + " resident on " + servers_[s].spec.id +
                         " but missing from the catalog");
      }
    }
    const auto& srv = servers_[s];
    if (std::abs(sum - srv.used) > 1e-6 * std::max(1.0, sum)) {
      errors.push_back("server " + srv.spec.id + ": occupancy counter out of sync");
    }
    if (srv.used > srv.spec.capacity_bytes * (1.0 + 1e-12)) {
      errors.push_back("server " + srv.spec.id + " over capacity");
    }
  }
  return errors;
}

// ---------------------------------------------------------------------------
// DataService

void DataService::fetch(engine::Simulator& sim, FileId file, ServerIndex source, network::NodeIndex dst,
                        std::optional<ServerIndex> store_at, Done done) {
  Request request{file, dst, store_at, sim.now(), std::move(done)};
  queues_[source].waiting.push_back(std::move(request));
  ++catalog_.server(source).pending;
  pump(sim, source);
}

void DataService::pump(engine::Simulator& sim, ServerIndex server) {
  auto& q = queues_[server];
  const int slots = catalog_.server(server).spec.parallelism;
  while (q.busy < slots && !q.waiting.empty()) {
    Request request = std::move(q.waiting.front());
    q.waiting.pop_front();
    ++q.busy;
    serve(sim, server, std::move(request));
  }
}

void DataService::serve(engine::Simulator& sim, ServerIndex server, Request request) {
  const Server& s = catalog_.server(server);
  const bool tape = s.spec.kind == StorageKind::Tape;
  catalog_.touch(request.file, server, sim.now());
  const double delay = s.spec.service_time + (tape ? s.spec.mount_latency : 0.0);
  after(sim, delay, [this, server, request = std::move(request)](engine::Simulator& sim, const engine::SimEvent&) mutable {
    auto& q = queues_[server];
    --q.busy;
    --catalog_.server(server).pending;
    const Server& s = catalog_.server(server);
    const FileRecord& f = catalog_.file(request.file);
    ServerIndex source = server;
    if (!f.replicas.count(server)) {
      // Migrated while queued: read it back from the center's tape, or from
      // the best remaining replica.
      auto tape = catalog_.tape_at(s.spec.center);
      if (tape && f.replicas.count(*tape)) {
        fetch_requeue(sim, *tape, std::move(request));
      } else {
        fetch_requeue(sim, catalog_.find_optimal(request.file, request.dst, net_), std::move(request));
      }
      pump(sim, server);
      return;
    }
    if (s.spec.kind == StorageKind::Tape) {
      ++tape_reads_;
      if (auto disk = catalog_.disk_at(s.spec.center)) {
        catalog_.store(request.file, *disk, sim.now());
        source = *disk;
      }
    }
    ship(sim, source, std::move(request));
    pump(sim, server);
  });
}

void DataService::fetch_requeue(engine::Simulator& sim, ServerIndex source, Request request) {
  queues_[source].waiting.push_back(std::move(request));
  ++catalog_.server(source).pending;
  pump(sim, source);
}

void DataService::ship(engine::Simulator& sim, ServerIndex source, Request request) {
  const FileRecord& f = catalog_.file(request.file);
  FetchResult result;
  result.file = request.file;
  result.source = source;
  result.dst = request.dst;
  result.requested_at = request.requested_at;
  result.transfer_started_at = sim.now();
  result.bytes = f.size_bytes;
  network::TransferRequest tr;
  tr.file_id = request.file;
  tr.size_bytes = f.size_bytes;
  tr.src = catalog_.server(source).node;
  tr.dst = request.dst;
  tr.owner = id();
  tr.tag = defer([this, result, store_at = request.store_at, done = std::move(request.done)](
                     engine::Simulator& sim, const engine::SimEvent&) mutable {
    result.finished_at = sim.now();
    if (store_at) catalog_.store(result.file, *store_at, sim.now());
    if (on_delivery_) on_delivery_(result);
    if (done) done(sim, result);
  });
  net_.start_transfer(sim, tr);
}

void DataService::store(engine::Simulator& sim, FileId file, ServerIndex server,
                        const std::vector<ServerIndex>& replicate_to, Done done) {
  catalog_.store(file, server, sim.now());
  for (ServerIndex r : replicate_to) {
    fetch(sim, file, server, catalog_.server(r).node, r, done);
  }
}

}  // namespace gridflow::data
