#pragma once

// CSV emission and the end-of-run summary table.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gridflow/scenarios.hpp"

namespace gridflow::harness {

inline constexpr const char* kTransfersHeader = "file_id,class,src,dst,size_bytes,t_start_s,t_end_s";
inline constexpr const char* kLinksHeader = "t_window_end_s,link_id,avg_rate_bps,utilization";
inline constexpr const char* kCpuHeader = "t_window_end_s,center_id,cpu_utilization";
inline constexpr const char* kJobsHeader = "job_id,type,center,t_submit_s,t_start_s,t_end_s,exported";
inline constexpr const char* kActivitiesHeader = "activity,center,trigger_time_s,completion_time_s,bytes_moved";

void write_transfers_csv(std::ostream& out, const std::vector<metrics::TransferRecord>& rows);
void write_links_csv(std::ostream& out, const std::vector<metrics::LinkSample>& rows);
void write_cpu_csv(std::ostream& out, const std::vector<metrics::CpuSample>& rows);
void write_jobs_csv(std::ostream& out, const std::vector<sched::JobRecord>& rows);
void write_activities_csv(std::ostream& out, const std::vector<metrics::ActivityRecord>& rows);

struct TransferStats {
  std::string cls;
  std::string dst;  // "all" for the across-centers row
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ActivityStats {
  std::string activity;
  std::string center;
  std::size_t runs = 0;
  std::size_t completed = 0;
  double mean_latency = 0.0;
  double max_latency = 0.0;
  double bytes = 0.0;
};

struct Summary {
  std::vector<TransferStats> transfers;
  std::vector<ActivityStats> activities;
  std::vector<std::pair<std::string, double>> link_avg_bps;
  std::vector<std::string> notes;

  std::optional<TransferStats> find(const std::string& cls, const std::string& dst) const;
  std::optional<ActivityStats> find_activity(const std::string& activity, const std::string& center) const;
};

Summary summarize(const scenarios::RunResult& result);
std::string format_summary(const Summary& summary, const scenarios::RunResult& result);

/// Writes the five CSVs, summary.txt and config.yaml into `dir`.
void write_outputs(const std::string& dir, const scenarios::RunResult& result, const std::string& config_dump);

}  // namespace gridflow::harness
