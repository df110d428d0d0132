#pragma once

// Fixed-timestep reference model. It shares no code with the event engine:
// rates are recomputed from scratch at every step and work is advanced by
// rate * dt. Used to cross-check the interrupt-driven engine.

#include <map>
#include <string>
#include <vector>

#include "gridflow/engine.hpp"

namespace gridflow::harness {

struct OracleClaim {
  std::string id;
  double start = 0.0;
  double work = 0.0;
  double weight = 1.0;
  double cap = engine::kInfinity;
};

struct OracleResource {
  double capacity = 0.0;
  std::vector<OracleClaim> claims;
};

struct OracleFlow {
  std::string id;
  double start = 0.0;
  double bits = 0.0;
  std::vector<std::size_t> links;
  double cap = engine::kInfinity;
};

struct OracleNetwork {
  std::vector<std::string> link_ids;
  std::vector<double> capacity;
  std::vector<OracleFlow> flows;
};

using Completions = std::map<std::string, double>;

/// Weighted equal share with per-claim caps, found by repeatedly freezing
/// every claim whose cap is below its share.
std::vector<double> oracle_share(double capacity, const std::vector<double>& weights, const std::vector<double>& caps);

/// Progressive filling: raise all unfrozen flows together until a link
/// saturates or a flow hits its cap, freeze, repeat.
std::vector<double> oracle_maxmin(const std::vector<double>& capacity, const std::vector<std::vector<std::size_t>>& paths,
                                  const std::vector<double>& caps);

Completions oracle_resources(const std::vector<OracleResource>& resources, double dt);
Completions oracle_network(const OracleNetwork& network, double dt);

/// Same claims run through the event-driven engine, for comparison.
Completions engine_resources(const std::vector<OracleResource>& resources);

/// Trace file (JSON): {"resources": [{"capacity": C, "claims": [{"id", "start",
/// "work", "weight"?, "cap"?}]}]} or {"links": [{"id", "capacity"}],
/// "flows": [{"id", "start", "bits", "links": [ids], "cap"?}]}.
struct Trace {
  std::vector<OracleResource> resources;
  OracleNetwork network;
  bool is_network = false;
};

Trace load_trace(const std::string& path);
Trace parse_trace(const std::string& json_text);

}  // namespace gridflow::harness
