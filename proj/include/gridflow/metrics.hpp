#pragma once

// Run records and the windowed metrics recorder. Window averages are exact
// integrals of the piecewise-constant rates, not point samples.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridflow/datalayer.hpp"
#include "gridflow/engine.hpp"
#include "gridflow/network.hpp"
#include "gridflow/scheduling.hpp"

namespace gridflow::metrics {

struct TransferRecord {
  data::FileId file = 0;
  data::FileClass cls = data::FileClass::Raw;
  std::string src;
  std::string dst;
  double size_bytes = 0.0;
  double start = 0.0;
  double end = 0.0;
};

struct LinkSample {
  double window_end = 0.0;
  std::string link;
  double avg_rate_bps = 0.0;
  double utilization = 0.0;
};

struct CpuSample {
  double window_end = 0.0;
  std::string center;
  double utilization = 0.0;
};

struct ActivityRecord {
  std::string activity;
  std::string center;
  double trigger = 0.0;
  std::optional<double> completion;
  double bytes_moved = 0.0;
};

/// Per-window aggregate kept alongside the CSV rows.
struct MetricsSample {
  double window_end = 0.0;
  std::size_t active_transfers = 0;
  std::size_t active_jobs = 0;
};

class MetricsRecorder : public engine::Process {
 public:
  explicit MetricsRecorder(double interval);

  void watch_network(const network::FlowNetwork* net) { net_ = net; }
  /// CPU utilization of `center` is the served work of all `resources`
  /// over their combined capacity.
  void watch_cpu(std::string center, std::vector<const engine::SharedResource*> resources);
  void set_job_counter(std::function<std::size_t()> fn) { job_counter_ = std::move(fn); }

  void start(engine::Simulator& sim);

  /// Closes the window ending at `t`. Called by the periodic wake-ups and
  /// once more at the end of the run for a trailing partial window.
  void sample(double t);
  double last_sample() const { return last_; }

  const std::vector<LinkSample>& links() const { return links_; }
  const std::vector<CpuSample>& cpu() const { return cpu_; }
  const std::vector<MetricsSample>& samples() const { return samples_; }

 protected:
  void on_event(engine::Simulator& sim, const engine::SimEvent& event) override;

 private:
  struct CpuGroup {
    std::string center;
    std::vector<const engine::SharedResource*> resources;
    double served = 0.0;
    double capacity = 0.0;
  };

  double interval_;
  double last_ = 0.0;
  const network::FlowNetwork* net_ = nullptr;
  std::vector<double> link_bits_;
  std::vector<double> link_capacity_;
  std::vector<CpuGroup> groups_;
  std::function<std::size_t()> job_counter_;
  std::vector<LinkSample> links_;
  std::vector<CpuSample> cpu_;
  std::vector<MetricsSample> samples_;
};

}  // namespace gridflow::metrics
