#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridflow/engine.hpp"
#include "gridflow/network.hpp"

namespace gridflow::data {

using FileId = std::uint64_t;
using ServerIndex = std::size_t;

enum class FileClass : std::uint8_t { Raw, Dst };
const char* to_string(FileClass cls);

struct FileRecord {
  FileId id = 0;
  FileClass cls = FileClass::Raw;
  double size_bytes = 0.0;
  double created_at = 0.0;
  std::int64_t first_event = 0;
  std::int64_t last_event = 0;
  std::set<ServerIndex> replicas;
};

enum class StorageKind : std::uint8_t { Disk, Tape };

struct ServerSpec {
  std::string id;
  std::string center;
  StorageKind kind = StorageKind::Disk;
  double capacity_bytes = engine::kInfinity;
  double service_time = 0.0;  // seconds per request
  int parallelism = 1;        // requests served at once
  double mount_latency = 0.0; // tape only, per retrieval
};

struct Server {
  ServerSpec spec;
  network::NodeIndex node = 0;
  double used = 0.0;
  std::size_t pending = 0;  // queued + in-service requests
};

/// A disk-to-tape move performed by migration.
struct Move {
  FileId file = 0;
  ServerIndex from = 0;
  ServerIndex to = 0;
};

/// Cost of reading a replica, in seconds: estimated transfer time at the
/// attainable rate plus the server queue delay and any tape mount.
double replica_cost(double size_bytes, double attainable_bps, std::size_t pending, double service_time,
                    double mount_latency);

/// Metadata catalog: file records, replica locations and per-server
/// occupancy. Disk servers evict least-recently-accessed files to the mass
/// storage at the same center when an insert would overflow them.
class ReplicaCatalog {
 public:
  ServerIndex add_server(ServerSpec spec, network::NodeIndex node);

  FileId register_file(FileRecord record);
  bool has_file(FileId id) const { return files_.count(id) != 0; }
  const FileRecord& file(FileId id) const;
  const std::map<FileId, FileRecord>& files() const { return files_; }

  std::size_t server_count() const { return servers_.size(); }
  const Server& server(ServerIndex i) const { return servers_.at(i); }
  Server& server(ServerIndex i) { return servers_.at(i); }
  std::optional<ServerIndex> find_server(const std::string& id) const;
  std::optional<ServerIndex> disk_at(const std::string& center) const;
  std::optional<ServerIndex> tape_at(const std::string& center) const;
  double free_bytes(ServerIndex i) const;

  /// Makes the file resident on the server, migrating older files to tape
  /// first when the disk would overflow. Returns the migrations performed.
  std::vector<Move> store(FileId id, ServerIndex server, double now);

  /// Records an access for LRU ordering.
  void touch(FileId id, ServerIndex server, double now);

  /// Frees space until `needed` bytes fit. No-op when they already do.
  std::vector<Move> migrate(ServerIndex server, double needed, double now);

  /// Disk residents from least to most recently accessed.
  std::vector<FileId> lru_order(ServerIndex server) const;

  ServerIndex find_closest(FileId id, network::NodeIndex requester, const network::Topology& topology) const;

  /// Replica with minimum replica_cost against the live network state.
  /// Ties resolve by RTT, then server id.
  ServerIndex find_optimal(FileId id, network::NodeIndex requester, const network::FlowNetwork& net) const;

  /// Every catalog replica is resident on its server and vice versa; no
  /// server over capacity.
  std::vector<std::string> audit() const;

 private:
  struct Residency {
    std::list<FileId> recency;
    std::unordered_map<FileId, std::list<FileId>::iterator> where;
  };

  void place(FileId id, ServerIndex server);
  void evict(FileId id, ServerIndex server);

  std::vector<Server> servers_;
  std::vector<Residency> resident_;
  std::map<FileId, FileRecord> files_;
  FileId next_id_ = 1;
};

struct FetchResult {
  FileId file = 0;
  ServerIndex source = 0;
  network::NodeIndex dst = 0;
  double requested_at = 0.0;
  double transfer_started_at = 0.0;
  double finished_at = 0.0;
  double bytes = 0.0;
};

/// Serves read requests: FIFO queue per server, per-request service time,
/// tape mount plus staging back to disk, then the network transfer.
class DataService : public engine::Actor {
 public:
  using Done = std::function<void(engine::Simulator&, const FetchResult&)>;

  DataService(ReplicaCatalog& catalog, network::FlowNetwork& net) : catalog_(catalog), net_(net) {}

  ReplicaCatalog& catalog() { return catalog_; }
  network::FlowNetwork& net() { return net_; }

  /// Reads `file` from `source` and ships it to `dst`. When `store_at` is
  /// given the arrival is registered there as a new replica.
  void fetch(engine::Simulator& sim, FileId file, ServerIndex source, network::NodeIndex dst,
             std::optional<ServerIndex> store_at, Done done);

  /// Stores a file locally and, optionally, pushes replicas to other servers.
  /// `done` runs once per replica as it lands.
  void store(engine::Simulator& sim, FileId file, ServerIndex server, const std::vector<ServerIndex>& replicate_to,
             Done done = {});

  /// Observer for every delivered copy.
  void set_on_delivery(std::function<void(const FetchResult&)> fn) { on_delivery_ = std::move(fn); }

  std::uint64_t tape_reads() const { return tape_reads_; }

 private:
  struct Request {
    FileId file;
    network::NodeIndex dst;
    std::optional<ServerIndex> store_at;
    double requested_at;
    Done done;
  };
  struct Queue {
    std::deque<Request> waiting;
    int busy = 0;
  };

  void pump(engine::Simulator& sim, ServerIndex server);
  void fetch_requeue(engine::Simulator& sim, ServerIndex source, Request request);
  void serve(engine::Simulator& sim, ServerIndex server, Request request);
  void ship(engine::Simulator& sim, ServerIndex server, Request request);

  ReplicaCatalog& catalog_;
  network::FlowNetwork& net_;
  std::map<ServerIndex, Queue> queues_;
  std::function<void(const FetchResult&)> on_delivery_;
  std::uint64_t tape_reads_ = 0;
};

}  // namespace gridflow::data
