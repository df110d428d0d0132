#include <algorithm>
#include <cmath>
#include <cstring>

#include "gridflow/scenarios.hpp"

namespace gridflow::scenarios {

double SizeDistribution::lower() const { return std::max(1.0, mean - 3.0 * relative_sd * mean); }
double SizeDistribution::upper() const { return mean + 3.0 * relative_sd * mean; }

double SizeDistribution::sample(std::mt19937_64& rng) const {
  // Whole bytes; the truncation bounds are applied before rounding.
  if (relative_sd <= 0.0) return std::max(1.0, std::round(mean));
  std::normal_distribution<double> normal(mean, relative_sd * mean);
  for (;;) {
    const double x = normal(rng);
    if (x >= lower() && x <= upper()) return std::max(1.0, std::round(x));
  }
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view activity) {
  // FNV-1a keeps the stream key stable across standard libraries.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : activity) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t trace_step(std::uint64_t hash, const engine::SimEvent& event) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &event.time, sizeof bits);
  for (std::uint64_t v : {bits, event.seq, static_cast<std::uint64_t>(event.kind),
                          static_cast<std::uint64_t>(event.target)}) {
    for (int i = 0; i < 8; ++i) {
      hash ^= (v >> (8 * i)) & 0xffu;
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

const std::string& round_robin(const std::vector<std::string>& destinations, std::size_t i) {
  if (destinations.empty()) throw engine::SimulationError("round robin over an empty destination list");
  return destinations[i % destinations.size()];
}

std::vector<double> analysis_triggers(double utc_offset_h, double local_start_h, double epoch_utc_h,
                                      double duration) {
  double first_h = std::fmod(local_start_h - utc_offset_h - epoch_utc_h, 24.0);
  if (first_h < 0.0) first_h += 24.0;
  std::vector<double> out;
  for (double t = first_h * 3600.0; t < duration; t += 86400.0) out.push_back(t);
  return out;
}

std::vector<data::FileId> files_in_window(const data::ReplicaCatalog& catalog, data::FileClass cls, double from,
                                          double to) {
  std::vector<data::FileId> out;
  for (const auto& [id, f] : catalog.files()) {
    if (f.cls == cls && f.created_at >= from && f.created_at < to) out.push_back(id);
  }
  return out;
}

double dst_size(double raw_bytes, double ratio, double relative_sd, std::mt19937_64& rng) {
  return SizeDistribution{raw_bytes * ratio, relative_sd}.sample(rng);
}

network::Topology TopologySpec::build() const {
  network::Topology topo;
  for (const auto& n : nodes) topo.add_node(n);
  for (const auto& l : links) topo.add_link(l);
  for (const auto& r : routes) topo.add_route(r.src, r.dst, r.links);
  return topo;
}

std::vector<std::string> T0T1Spec::tier1() const {
  std::vector<std::string> out;
  for (const auto& c : centers) {
    if (c.name != tier0) out.push_back(c.name);
  }
  return out;
}

}  // namespace gridflow::scenarios
