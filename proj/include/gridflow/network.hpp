#pragma once

// Flow-level LAN/WAN model. Transfers are fluid flows over static
// single-path routes; every start, finish or capacity change triggers a
// global max-min fair reallocation.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridflow/engine.hpp"

namespace gridflow::network {

using NodeIndex = std::size_t;
using LinkIndex = std::size_t;
using TransferId = std::uint64_t;

/// Default protocol window for ftp-like transfers (8 MB, decimal).
inline constexpr double kDefaultWindowBytes = 8e6;

struct Link {
  std::string id;
  std::string a;
  std::string b;
  engine::CapacitySchedule capacity;  // bits/s
  double rtt_s = 0.0;                 // contribution to the round-trip time of paths crossing it
};

struct Path {
  std::vector<LinkIndex> links;
  double rtt_s = 0.0;
};

class Topology {
 public:
  NodeIndex add_node(const std::string& name);
  LinkIndex add_link(Link link);

  /// Pins the route between two nodes (both directions). Links are listed
  /// from `src` to `dst`.
  void add_route(const std::string& src, const std::string& dst, const std::vector<std::string>& link_ids);

  std::optional<NodeIndex> find_node(const std::string& name) const;
  std::optional<LinkIndex> find_link(const std::string& id) const;
  NodeIndex node(const std::string& name) const;

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  std::vector<Link>& links() { return links_; }

  /// Route between two nodes: the pinned route when one exists, otherwise
  /// the minimum-RTT path (ties by hop count, then node order). Throws
  /// SimulationError when the nodes are disconnected.
  const Path& path(NodeIndex src, NodeIndex dst) const;
  bool connected(NodeIndex src, NodeIndex dst) const;

  /// Every node reachable from the first one, every link capacity positive
  /// and schedules strictly increasing. Returns one message per violation.
  std::vector<std::string> validate() const;

 private:
  std::optional<Path> shortest(NodeIndex src, NodeIndex dst) const;

  std::vector<std::string> nodes_;
  std::vector<Link> links_;
  std::map<std::pair<NodeIndex, NodeIndex>, Path> pinned_;
  mutable std::map<std::pair<NodeIndex, NodeIndex>, Path> cache_;
};

/// Throughput ceiling of a window-limited transfer: window*8/rtt, unbounded
/// when rtt is zero.
double rtt_cap_bps(double window_bytes, double rtt_s);

struct FlowSpec {
  std::span<const LinkIndex> links;
  double cap = engine::kInfinity;
};

/// Max-min fair rates by progressive filling: all unfrozen flows rise
/// together until a link saturates or a flow hits its own cap.
std::vector<double> allocate_rates(std::span<const double> link_capacity, std::span<const FlowSpec> flows);

struct TransferRequest {
  std::uint64_t file_id = 0;
  double size_bytes = 0.0;
  NodeIndex src = 0;
  NodeIndex dst = 0;
  engine::ProcessId owner = engine::kNoProcess;
  std::uint64_t tag = 0;
};

struct Transfer {
  TransferId id = 0;
  std::uint64_t file_id = 0;
  NodeIndex src = 0;
  NodeIndex dst = 0;
  std::vector<LinkIndex> path;
  double rtt_s = 0.0;
  double size_bytes = 0.0;
  double remaining_bits = 0.0;
  double cap_bps = engine::kInfinity;
  double rate_bps = 0.0;
  double started_at = 0.0;
  double projected_finish = engine::kInfinity;
  engine::ProcessId owner = engine::kNoProcess;
  std::uint64_t tag = 0;
  /// Running integral of rate over time.
  double sent_bits = 0.0;
};

struct NetworkOptions {
  double window_bytes = kDefaultWindowBytes;
};

class FlowNetwork : public engine::Process {
 public:
  FlowNetwork(Topology topology, NetworkOptions options = {});

  const Topology& topology() const { return topology_; }
  const NetworkOptions& options() const { return options_; }

  /// Queues capacity-change events for every link schedule breakpoint.
  void start(engine::Simulator& sim);

  /// Starts a transfer. A transfer between co-located endpoints completes
  /// at once. The owner receives a Completion event carrying `tag`.
  TransferId start_transfer(engine::Simulator& sim, const TransferRequest& request);

  void capacity_change(engine::Simulator& sim, LinkIndex link, double bps);

  /// Rate a new transfer between the two nodes would get right now.
  double attainable_rate(NodeIndex src, NodeIndex dst) const;

  double link_capacity(LinkIndex link) const { return capacity_.at(link); }
  /// Bits carried by the link since the start of the run, evaluated at t.
  double link_bits_until(LinkIndex link, double t) const;
  /// Integral of the link capacity since the start of the run, evaluated at t.
  double link_capacity_integral(LinkIndex link, double t) const;

  std::span<const Transfer> active() const { return active_; }
  const Transfer* find(TransferId id) const;
  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t completed() const { return completed_; }
  /// Finished transfers whose integrated rate missed the size by more than 1e-6 relative.
  std::uint64_t conservation_violations() const { return conservation_violations_; }

  void set_on_complete(std::function<void(const Transfer&, double)> fn) { on_complete_ = std::move(fn); }

  /// Byte conservation: for every link, carried bits equal the bits of
  /// finished transfers plus the progress of in-flight ones. Returns the
  /// violations found at `now`.
  std::vector<std::string> audit(double now, double rel_tol = 1e-6) const;

 protected:
  void on_event(engine::Simulator& sim, const engine::SimEvent& event) override;

 private:
  void update(double now);
  void reallocate(engine::Simulator& sim);
  void finalize(engine::Simulator& sim, const Transfer& t, double now);

  Topology topology_;
  NetworkOptions options_;
  std::vector<double> capacity_;
  std::vector<double> capacity_integral_;
  std::vector<double> capacity_since_;
  std::vector<double> link_bits_;
  std::vector<double> link_rate_;
  std::vector<double> link_finished_bits_;
  std::vector<Transfer> active_;
  double last_update_ = 0.0;
  std::uint64_t epoch_ = 0;
  TransferId next_id_ = 1;
  std::uint64_t completed_ = 0;
  std::uint64_t conservation_violations_ = 0;
  std::function<void(const Transfer&, double)> on_complete_;
};

}  // namespace gridflow::network
