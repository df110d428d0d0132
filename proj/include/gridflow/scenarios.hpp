#pragma once

// Workload generators: the tiered replication/production study (RAW
// recording and round-robin replication, DST production and fan-out,
// re-production at the tier-1 centers, daily detector analysis) and the
// master/slave packet-pull analysis cluster.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/datalayer.hpp"
#include "gridflow/engine.hpp"
#include "gridflow/metrics.hpp"
#include "gridflow/network.hpp"
#include "gridflow/scheduling.hpp"

namespace gridflow::scenarios {

/// Normal distribution truncated to [max(eps, mean - 3 sd), mean + 3 sd],
/// sd given relative to the mean. Samples are rounded to whole bytes.
struct SizeDistribution {
  double mean = 2e9;
  double relative_sd = 0.10;

  double lower() const;
  double upper() const;
  double sample(std::mt19937_64& rng) const;
};

/// Random stream for one named activity. Streams for different names are
/// independent, so toggling one activity leaves the others' draws intact.
std::mt19937_64 substream(std::uint64_t seed, std::string_view activity);

struct RawReplicationSpec {
  bool enabled = true;
  double recording_rate = 2e8;  // bytes/s
  SizeDistribution file_size{2e9, 0.10};
  std::vector<std::string> destinations;
  /// No files are created after this time.
  double stop_time = engine::kInfinity;
};

struct ProductionSpec {
  bool enabled = true;
  double dst_ratio = 0.1;
  double dst_sd = 0.10;
  double cpu_work_per_raw = 1e12;  // operations
};

struct ReproductionSpec {
  bool enabled = true;
  double start_time = 6 * 3600.0;
  double cpu_work_per_raw = 1e12;
  double dst_ratio = 0.1;
  double dst_sd = 0.10;
  /// Also ship re-produced DSTs back to the tier-0 center.
  bool include_t0 = false;
};

struct AnalysisSpec {
  bool enabled = true;
  std::vector<std::string> centers;
  double local_start_h = 9.0;
  double window_h = 12.0;
  /// Concurrent fetches per analysis run.
  int max_parallel = 64;
};

struct CenterSpec {
  std::string name;
  double utc_offset_h = 0.0;
  sched::FarmSpec farm;
  data::ServerSpec disk;
  std::optional<data::ServerSpec> tape;
};

struct RouteSpec {
  std::string src;
  std::string dst;
  std::vector<std::string> links;
};

struct TopologySpec {
  std::vector<std::string> nodes;
  std::vector<network::Link> links;
  std::vector<RouteSpec> routes;
  double window_bytes = network::kDefaultWindowBytes;

  network::Topology build() const;
};

struct T0T1Spec {
  TopologySpec topology;
  std::vector<CenterSpec> centers;
  std::string tier0 = "T0";
  /// UTC hour of day at simulated time zero.
  double epoch_utc_h = 12.0;
  sched::AgentPlan agents;
  bool agents_enabled = true;
  RawReplicationSpec raw;
  ProductionSpec production;
  ReproductionSpec reproduction;
  AnalysisSpec analysis;

  /// Every center other than the tier-0 one, in configuration order.
  std::vector<std::string> tier1() const;
};

struct ProofSpec {
  int n_masters = 20;
  int m_slaves = 500;
  int s_servers = 4;
  int slaves_per_master = 25;
  double p_local = 0.5;
  int packet_events = 1000;
  int packets_per_request = 400;
  double event_bytes = 1e5;
  double master_handle_time = 0.05;
  double server_service_time = 0.5;
  int server_parallelism = 1;
  double station_cpu_rate = 1e9;
  double request_cpu_hours = 2.5;
  double think_time_mean = 300.0;
  /// Clients keep sending requests, pausing Exp(think_time_mean) between them.
  bool repeat_requests = false;
  /// Without repeat_requests: requests each client sends back to back.
  int requests_per_master = 1;
  double lan_bps = 1e9;
  double server_lan_bps = 1e9;

  double request_cpu_work() const { return request_cpu_hours * 3600.0 * station_cpu_rate; }
  double packet_cpu_work() const { return request_cpu_work() / packets_per_request; }
  double packet_bytes() const { return packet_events * event_bytes; }
};

struct RunResult {
  std::vector<metrics::TransferRecord> transfers;
  std::vector<metrics::LinkSample> links;
  std::vector<metrics::CpuSample> cpu;
  std::vector<sched::JobRecord> jobs;
  std::vector<metrics::ActivityRecord> activities;
  std::vector<metrics::MetricsSample> samples;
  engine::SimulationReport report;
  /// Hash of the dispatched (time, seq, kind, target) trace.
  std::uint64_t trace_hash = 0;
  std::vector<std::string> audit_violations;
  /// Named scalar results: per-link averages, byte counters, audit counts.
  std::map<std::string, double> stats;
  double duration = 0.0;
};

/// Folds one dispatched event into a running FNV-1a trace hash.
std::uint64_t trace_step(std::uint64_t hash, const engine::SimEvent& event);
inline constexpr std::uint64_t kTraceSeed = 1469598103934665603ull;

/// Destination of the i-th RAW file under round-robin replication.
const std::string& round_robin(const std::vector<std::string>& destinations, std::size_t i);

/// Simulated times at which local `local_start_h` occurs at a center with
/// the given UTC offset, for simulated time in [0, duration).
std::vector<double> analysis_triggers(double utc_offset_h, double local_start_h, double epoch_utc_h,
                                      double duration);

/// Files of a class created in the half-open interval [from, to).
std::vector<data::FileId> files_in_window(const data::ReplicaCatalog& catalog, data::FileClass cls, double from,
                                          double to);

/// A DST size for a RAW file: ratio times raw size, times a truncated
/// normal factor with the given relative sd.
double dst_size(double raw_bytes, double ratio, double relative_sd, std::mt19937_64& rng);

RunResult run_t0t1(const T0T1Spec& spec, std::uint64_t seed, double duration, double metrics_interval);
RunResult run_proof(const ProofSpec& spec, std::uint64_t seed, double duration, double metrics_interval);

}  // namespace gridflow::scenarios
