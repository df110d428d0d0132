#include "gridflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <tuple>

namespace gridflow::network {

using engine::kInfinity;
using engine::SimulationError;

// ---------------------------------------------------------------------------
// Topology

NodeIndex Topology::add_node(const std::string& name) {
  if (find_node(name)) throw SimulationError("duplicate node " + name);
  nodes_.push_back(name);
  return nodes_.size() - 1;
}

LinkIndex Topology::add_link(Link link) {
  if (find_link(link.id)) throw SimulationError("duplicate link " + link.id);
  if (!find_node(link.a)) throw SimulationError("link " + link.id + ": unknown endpoint " + link.a);
  if (!find_node(link.b)) throw SimulationError("link " + link.id + ": unknown endpoint " + link.b);
  links_.push_back(std::move(link));
  cache_.clear();
  return links_.size() - 1;
}

std::optional<NodeIndex> Topology::find_node(const std::string& name) const {
  auto it = std::find(nodes_.begin(), nodes_.end(), name);
  if (it == nodes_.end()) return std::nullopt;
  return static_cast<NodeIndex>(it - nodes_.begin());
}

std::optional<LinkIndex> Topology::find_link(const std::string& id) const {
  for (LinkIndex i = 0; i < links_.size(); ++i) {
    if (links_[i].id == id) return i;
  }
  return std::nullopt;
}

NodeIndex Topology::node(const std::string& name) const {
  auto n = find_node(name);
  if (!n) throw SimulationError("unknown node " + name);
  return *n;
}

void Topology::add_route(const std::string& src, const std::string& dst,
                         const std::vector<std::string>& link_ids) {
  const NodeIndex s = node(src);
  const NodeIndex d = node(dst);
  Path forward;
  std::string at = src;
  for (const auto& id : link_ids) {
    auto l = find_link(id);
    if (!l) throw SimulationError("route " + src + "->" + dst + ": unknown link " + id);
    const Link& link = links_[*l];
    if (link.a == at) {
      at = link.b;
    } else if (link.b == at) {
      at = link.a;
    } else {
      throw SimulationError("route " + src + "->" + dst + ": link " + id + " does not touch " + at);
    }
    forward.links.push_back(*l);
    forward.rtt_s += link.rtt_s;
  }
  if (at != dst) throw SimulationError("route " + src + "->" + dst + " ends at " + at);
  Path backward = forward;
  std::reverse(backward.links.begin(), backward.links.end());
  pinned_[{s, d}] = std::move(forward);
  pinned_[{d, s}] = std::move(backward);
  cache_.clear();
}

std::optional<Path> Topology::shortest(NodeIndex src, NodeIndex dst) const {
  using Key = std::tuple<double, std::size_t, NodeIndex>;
  const std::size_t n = nodes_.size();
  std::vector<std::vector<std::pair<NodeIndex, LinkIndex>>> adj(n);
  for (LinkIndex l = 0; l < links_.size(); ++l) {
    const NodeIndex a = *find_node(links_[l].a);
    const NodeIndex b = *find_node(links_[l].b);
    adj[a].emplace_back(b, l);
    adj[b].emplace_back(a, l);
  }
  std::vector<double> dist(n, kInfinity);
  std::vector<std::size_t> hops(n, 0);
  std::vector<std::optional<std::pair<NodeIndex, LinkIndex>>> prev(n);
  std::priority_queue<Key, std::vector<Key>, std::greater<>> frontier;
  dist[src] = 0.0;
  frontier.emplace(0.0, 0, src);
  while (!frontier.empty()) {
    auto [d, h, u] = frontier.top();
    frontier.pop();
    if (d > dist[u] || (d == dist[u] && h > hops[u])) continue;
    for (auto [v, l] : adj[u]) {
      const double nd = d + links_[l].rtt_s;
      const std::size_t nh = h + 1;
      if (nd < dist[v] || (nd == dist[v] && nh < hops[v])) {
        dist[v] = nd;
        hops[v] = nh;
        prev[v] = std::make_pair(u, l);
        frontier.emplace(nd, nh, v);
      }
    }
  }
  if (!std::isfinite(dist[dst])) return std::nullopt;
  Path p;
  p.rtt_s = dist[dst];
  for (NodeIndex v = dst; v != src; v = prev[v]->first) p.links.push_back(prev[v]->second);
  std::reverse(p.links.begin(), p.links.end());
  return p;
}

const Path& Topology::path(NodeIndex src, NodeIndex dst) const {
  static const Path kEmpty{};
  if (src == dst) return kEmpty;
  const auto key = std::make_pair(src, dst);
  if (auto it = pinned_.find(key); it != pinned_.end()) return it->second;
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  auto p = shortest(src, dst);
  if (!p) throw SimulationError("no route from " + nodes_.at(src) + " to " + nodes_.at(dst));
  return cache_.emplace(key, std::move(*p)).first->second;
}

bool Topology::connected(NodeIndex src, NodeIndex dst) const {
  if (src == dst || pinned_.count({src, dst}) || cache_.count({src, dst})) return true;
  return shortest(src, dst).has_value();
}

std::vector<std::string> Topology::validate() const {
  std::vector<std::string> errors;
  for (const auto& link : links_) {
    for (const auto& p : link.capacity.points()) {
      if (!(p.value > 0.0)) {
        std::ostringstream msg;
        msg << "link " << link.id << ": capacity must be positive (got " << p.value << " at t=" << p.time << ")";
        errors.push_back(msg.str());
      }
    }
    if (link.rtt_s < 0.0) errors.push_back("link " + link.id + ": negative rtt");
  }
  for (NodeIndex v = 1; v < nodes_.size(); ++v) {
    if (!connected(0, v)) errors.push_back("node " + nodes_[v] + " is not connected to " + nodes_[0]);
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Allocation

double rtt_cap_bps(double window_bytes, double rtt_s) {
  if (rtt_s <= 0.0) return kInfinity;
  return window_bytes * 8.0 / rtt_s;
}

std::vector<double> allocate_rates(std::span<const double> link_capacity, std::span<const FlowSpec> flows) {
  constexpr double kRel = 1e-12;
  const std::size_t n = flows.size();
  std::vector<double> rate(n, 0.0);
  std::vector<bool> frozen(n, false);
  std::vector<double> frozen_sum(link_capacity.size(), 0.0);
  std::vector<std::size_t> unfrozen(link_capacity.size(), 0);
  for (const auto& f : flows) {
    for (LinkIndex l : f.links) ++unfrozen[l];
  }

  std::size_t left = n;
  std::vector<bool> saturated(link_capacity.size());
  while (left > 0) {
    double level = kInfinity;
    for (LinkIndex l = 0; l < link_capacity.size(); ++l) {
      if (unfrozen[l] == 0) continue;
      const double share = std::max(0.0, link_capacity[l] - frozen_sum[l]) / static_cast<double>(unfrozen[l]);
      level = std::min(level, share);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!frozen[i]) level = std::min(level, flows[i].cap);
    }
    const double threshold = level + kRel * std::max(1.0, std::abs(level));
    for (LinkIndex l = 0; l < link_capacity.size(); ++l) {
      saturated[l] = unfrozen[l] > 0 &&
                     std::max(0.0, link_capacity[l] - frozen_sum[l]) / static_cast<double>(unfrozen[l]) <= threshold;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) continue;
      bool stop = flows[i].cap <= threshold;
      for (LinkIndex l : flows[i].links) stop = stop || saturated[l];
      if (!stop) continue;
      frozen[i] = true;
      --left;
      rate[i] = std::min(flows[i].cap, level);
      for (LinkIndex l : flows[i].links) {
        frozen_sum[l] += rate[i];
        --unfrozen[l];
      }
    }
  }
  return rate;
}

// ---------------------------------------------------------------------------
// FlowNetwork

FlowNetwork::FlowNetwork(Topology topology, NetworkOptions options)
    : topology_(std::move(topology)), options_(options) {
  const std::size_t n = topology_.links().size();
  capacity_.resize(n);
  for (LinkIndex l = 0; l < n; ++l) capacity_[l] = topology_.links()[l].capacity.at(0.0);
  capacity_integral_.assign(n, 0.0);
  capacity_since_.assign(n, 0.0);
  link_bits_.assign(n, 0.0);
  link_rate_.assign(n, 0.0);
  link_finished_bits_.assign(n, 0.0);
}

void FlowNetwork::start(engine::Simulator& sim) {
  last_update_ = sim.now();
  const auto& links = topology_.links();
  for (LinkIndex l = 0; l < links.size(); ++l) {
    capacity_[l] = links[l].capacity.at(sim.now());
    capacity_since_[l] = sim.now();
    const auto& points = links[l].capacity.points();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].time > sim.now()) {
        sim.schedule(points[i].time, id(), engine::EventKind::CapacityChange, engine::Payload{l, i});
      }
    }
  }
}

const Transfer* FlowNetwork::find(TransferId tid) const {
  for (const auto& t : active_) {
    if (t.id == tid) return &t;
  }
  return nullptr;
}

double FlowNetwork::link_bits_until(LinkIndex link, double t) const {
  return link_bits_.at(link) + link_rate_.at(link) * std::max(0.0, t - last_update_);
}

double FlowNetwork::link_capacity_integral(LinkIndex link, double t) const {
  return capacity_integral_.at(link) + capacity_.at(link) * std::max(0.0, t - capacity_since_.at(link));
}

void FlowNetwork::update(double now) {
  if (now < last_update_) throw SimulationError("network update into the past");
  const double dt = now - last_update_;
  if (dt > 0.0) {
    for (auto& t : active_) {
      const double bits = t.rate_bps * dt;
      t.remaining_bits -= bits;
      t.sent_bits += bits;
      if (t.remaining_bits < 0.0) t.remaining_bits = 0.0;
    }
    for (LinkIndex l = 0; l < link_bits_.size(); ++l) link_bits_[l] += link_rate_[l] * dt;
  }
  last_update_ = now;
}

void FlowNetwork::reallocate(engine::Simulator& sim) {
  ++epoch_;
  std::vector<FlowSpec> flows;
  flows.reserve(active_.size());
  for (const auto& t : active_) flows.push_back(FlowSpec{t.path, t.cap_bps});
  const auto rates = allocate_rates(capacity_, flows);

  std::fill(link_rate_.begin(), link_rate_.end(), 0.0);
  double earliest = kInfinity;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    Transfer& t = active_[i];
    t.rate_bps = rates[i];
    for (LinkIndex l : t.path) link_rate_[l] += t.rate_bps;
    t.projected_finish = t.rate_bps > 0.0 ? last_update_ + t.remaining_bits / t.rate_bps : kInfinity;
    earliest = std::min(earliest, t.projected_finish);
  }
  if (std::isfinite(earliest)) {
    sim.schedule(std::max(earliest, sim.now()), id(), engine::EventKind::Completion, {}, epoch_);
  }
}

TransferId FlowNetwork::start_transfer(engine::Simulator& sim, const TransferRequest& request) {
  if (!(request.size_bytes > 0.0)) throw SimulationError("transfer size must be positive");
  const Path& path = topology_.path(request.src, request.dst);
  Transfer t;
  t.id = next_id_++;
  t.file_id = request.file_id;
  t.src = request.src;
  t.dst = request.dst;
  t.path = path.links;
  t.rtt_s = path.rtt_s;
  t.size_bytes = request.size_bytes;
  t.remaining_bits = request.size_bytes * 8.0;
  t.cap_bps = rtt_cap_bps(options_.window_bytes, path.rtt_s);
  t.started_at = sim.now();
  t.owner = request.owner;
  t.tag = request.tag;
  if (t.path.empty()) {
    t.sent_bits = t.remaining_bits;
    t.remaining_bits = 0.0;
    t.projected_finish = sim.now();
    finalize(sim, t, sim.now());
    return t.id;
  }
  update(sim.now());
  active_.push_back(std::move(t));
  reallocate(sim);
  return active_.back().id;
}

void FlowNetwork::capacity_change(engine::Simulator& sim, LinkIndex link, double bps) {
  if (bps < 0.0) throw SimulationError("negative link capacity");
  update(sim.now());
  capacity_integral_.at(link) += capacity_[link] * (sim.now() - capacity_since_[link]);
  capacity_since_[link] = sim.now();
  capacity_[link] = bps;
  reallocate(sim);
}

double FlowNetwork::attainable_rate(NodeIndex src, NodeIndex dst) const {
  const Path& path = topology_.path(src, dst);
  if (path.links.empty()) return kInfinity;
  std::vector<FlowSpec> flows;
  flows.reserve(active_.size() + 1);
  for (const auto& t : active_) flows.push_back(FlowSpec{t.path, t.cap_bps});
  flows.push_back(FlowSpec{path.links, rtt_cap_bps(options_.window_bytes, path.rtt_s)});
  return allocate_rates(capacity_, flows).back();
}

void FlowNetwork::finalize(engine::Simulator& sim, const Transfer& t, double now) {
  for (LinkIndex l : t.path) link_finished_bits_[l] += t.sent_bits;
  ++completed_;
  const double size_bits = t.size_bytes * 8.0;
  if (std::abs(t.sent_bits - size_bits) > 1e-6 * size_bits) ++conservation_violations_;
  if (on_complete_) on_complete_(t, now);
  if (t.owner != engine::kNoProcess) {
    sim.schedule(now, t.owner, engine::EventKind::Completion, engine::Payload{t.tag, t.id});
  }
}

void FlowNetwork::on_event(engine::Simulator& sim, const engine::SimEvent& event) {
  if (event.kind == engine::EventKind::CapacityChange) {
    const LinkIndex l = event.payload.tag;
    capacity_change(sim, l, topology_.links().at(l).capacity.points().at(event.payload.value).value);
    return;
  }
  if (event.kind != engine::EventKind::Completion) return;
  if (event.epoch != epoch_) {
    sim.note_stale();
    return;
  }
  const double now = sim.now();
  update(now);
  std::vector<Transfer> done;
  auto keep = std::stable_partition(active_.begin(), active_.end(), [&](const Transfer& t) {
    return !(t.remaining_bits <= engine::kWorkEpsilon || t.projected_finish <= now + engine::kTimeEpsilon);
  });
  for (auto it = keep; it != active_.end(); ++it) {
    if (it->remaining_bits > engine::kWorkEpsilon) sim.note_clamped();
    it->remaining_bits = 0.0;
    done.push_back(std::move(*it));
  }
  active_.erase(keep, active_.end());
  if (done.empty()) {
    throw SimulationError("network completion event with no finished transfer at t=" + std::to_string(now));
  }
  reallocate(sim);
  for (const auto& t : done) finalize(sim, t, now);
}

std::vector<std::string> FlowNetwork::audit(double now, double rel_tol) const {
  std::vector<std::string> errors;
  std::vector<double> expected = link_finished_bits_;
  const double dt = std::max(0.0, now - last_update_);
  for (const auto& t : active_) {
    for (LinkIndex l : t.path) expected[l] += t.sent_bits + t.rate_bps * dt;
  }
  if (conservation_violations_ > 0) {
    errors.push_back(std::to_string(conservation_violations_) + " transfers finished with unbalanced byte counts");
  }
  for (LinkIndex l = 0; l < expected.size(); ++l) {
    const double carried = link_bits_until(l, now);
    if (std::abs(carried - expected[l]) > rel_tol * std::max(1.0, expected[l])) {
      std::ostringstream msg;
      msg << "link " << topology_.links()[l].id << ": carried " << carried << " bits, transfers account for "
          << expected[l];
      errors.push_back(msg.str());
    }
  }
  return errors;
}

}  // namespace gridflow::network
