#include "gridflow/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace gridflow::harness {

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string whole(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <class Fn>
std::string render(Fn fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

}  // namespace

void write_transfers_csv(std::ostream& out, const std::vector<metrics::TransferRecord>& rows) {
  out << kTransfersHeader << '\n';
  for (const auto& r : rows) {
    out << r.file << ',' << data::to_string(r.cls) << ',' << r.src << ',' << r.dst << ',' << whole(r.size_bytes)
        << ',' << fixed(r.start) << ',' << fixed(r.end) << '\n';
  }
}

void write_links_csv(std::ostream& out, const std::vector<metrics::LinkSample>& rows) {
  out << kLinksHeader << '\n';
  for (const auto& r : rows) {
    out << fixed(r.window_end) << ',' << r.link << ',' << fixed(r.avg_rate_bps) << ',' << fixed(r.utilization)
        << '\n';
  }
}

void write_cpu_csv(std::ostream& out, const std::vector<metrics::CpuSample>& rows) {
  out << kCpuHeader << '\n';
  for (const auto& r : rows) out << fixed(r.window_end) << ',' << r.center << ',' << fixed(r.utilization) << '\n';
}

void write_jobs_csv(std::ostream& out, const std::vector<sched::JobRecord>& rows) {
  out << kJobsHeader << '\n';
  for (const auto& r : rows) {
    out << r.id << ',' << sched::to_string(r.type) << ',' << r.center << ',' << fixed(r.submit_time) << ','
        << fixed(r.start_time) << ',' << fixed(r.end_time) << ',' << (r.exported ? 1 : 0) << '\n';
  }
}

void write_activities_csv(std::ostream& out, const std::vector<metrics::ActivityRecord>& rows) {
  out << kActivitiesHeader << '\n';
  for (const auto& r : rows) {
    out << r.activity << ',' << r.center << ',' << fixed(r.trigger) << ','
        << (r.completion ? fixed(*r.completion) : std::string()) << ',' << whole(r.bytes_moved) << '\n';
  }
}

std::optional<TransferStats> Summary::find(const std::string& cls, const std::string& dst) const {
  for (const auto& t : transfers) {
    if (t.cls == cls && t.dst == dst) return t;
  }
  return std::nullopt;
}

std::optional<ActivityStats> Summary::find_activity(const std::string& activity, const std::string& center) const {
  for (const auto& a : activities) {
    if (a.activity == activity && a.center == center) return a;
  }
  return std::nullopt;
}

Summary summarize(const scenarios::RunResult& result) {
  Summary s;
  for (const auto cls : {data::FileClass::Raw, data::FileClass::Dst}) {
    const std::string name = data::to_string(cls);
    std::map<std::string, std::vector<double>> by_dst;
    std::vector<double> all;
    for (const auto& t : result.transfers) {
      if (t.cls != cls) continue;
      by_dst[t.dst].push_back(t.end - t.start);
      all.push_back(t.end - t.start);
    }
    if (all.empty()) {
      s.notes.push_back("no " + name + " transfers");
      continue;
    }
    auto stats = [&](const std::string& dst, const std::vector<double>& v) {
      TransferStats t;
      t.cls = name;
      t.dst = dst;
      t.count = v.size();
      double sum = 0.0;
      for (double x : v) sum += x;
      t.mean = sum / static_cast<double>(v.size());
      t.min = *std::min_element(v.begin(), v.end());
      t.max = *std::max_element(v.begin(), v.end());
      return t;
    };
    for (const auto& [dst, v] : by_dst) s.transfers.push_back(stats(dst, v));
    s.transfers.push_back(stats("all", all));
  }

  std::map<std::pair<std::string, std::string>, ActivityStats> acts;
  for (const auto& a : result.activities) {
    auto& st = acts[{a.activity, a.center}];
    st.activity = a.activity;
    st.center = a.center;
    ++st.runs;
    st.bytes += a.bytes_moved;
    if (a.completion) {
      const double lat = *a.completion - a.trigger;
      st.mean_latency += lat;
      st.max_latency = std::max(st.max_latency, lat);
      ++st.completed;
    }
  }
  for (auto& [key, st] : acts) {
    if (st.completed > 0) st.mean_latency /= static_cast<double>(st.completed);
    s.activities.push_back(st);
  }
  const std::string prefix = "link_avg_bps:";
  for (const auto& [k, v] : result.stats) {
    if (k.rfind(prefix, 0) == 0) s.link_avg_bps.emplace_back(k.substr(prefix.size()), v);
  }
  return s;
}

std::string format_summary(const Summary& summary, const scenarios::RunResult& result) {
  std::ostringstream out;
  char buf[256];
  out << "duration_s " << fixed(result.duration) << "\n";
  out << "events " << result.report.events_processed << " stale " << result.report.stale_dropped << "\n\n";

  out << "transfer time by destination (s)\n";
  std::snprintf(buf, sizeof buf, "%-6s %-12s %8s %14s %14s %14s\n", "class", "dst", "count", "mean", "min", "max");
  out << buf;
  for (const auto& t : summary.transfers) {
    std::snprintf(buf, sizeof buf, "%-6s %-12s %8zu %14.6f %14.6f %14.6f\n", t.cls.c_str(), t.dst.c_str(), t.count,
                  t.mean, t.min, t.max);
    out << buf;
  }
  for (const auto& n : summary.notes) out << "note: " << n << "\n";

  out << "\nactivity completion latency (s)\n";
  std::snprintf(buf, sizeof buf, "%-14s %-12s %6s %9s %14s %14s %18s\n", "activity", "center", "runs", "completed",
                "mean", "max", "bytes");
  out << buf;
  for (const auto& a : summary.activities) {
    std::snprintf(buf, sizeof buf, "%-14s %-12s %6zu %9zu %14.6f %14.6f %18.0f\n", a.activity.c_str(),
                  a.center.c_str(), a.runs, a.completed, a.mean_latency, a.max_latency, a.bytes);
    out << buf;
  }
  if (summary.activities.empty()) out << "note: no activities recorded\n";

  out << "\naverage link bandwidth over the run (bps)\n";
  for (const auto& [link, bps] : summary.link_avg_bps) {
    std::snprintf(buf, sizeof buf, "%-16s %20.6f\n", link.c_str(), bps);
    out << buf;
  }

  out << "\nstats\n";
  for (const auto& [k, v] : result.stats) {
    if (k.rfind("link_avg_bps:", 0) == 0 || k.rfind("link_bits:", 0) == 0) continue;
    out << k << " " << fixed(v) << "\n";
  }
  out << "\naudit violations " << result.audit_violations.size() << "\n";
  for (const auto& v : result.audit_violations) out << "  " << v << "\n";
  return out.str();
}

void write_outputs(const std::string& dir, const scenarios::RunResult& result, const std::string& config_dump) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root);
  write_file(root / "transfers.csv", render([&](std::ostream& o) { write_transfers_csv(o, result.transfers); }));
  write_file(root / "links.csv", render([&](std::ostream& o) { write_links_csv(o, result.links); }));
  write_file(root / "cpu.csv", render([&](std::ostream& o) { write_cpu_csv(o, result.cpu); }));
  write_file(root / "jobs.csv", render([&](std::ostream& o) { write_jobs_csv(o, result.jobs); }));
  write_file(root / "activities.csv", render([&](std::ostream& o) { write_activities_csv(o, result.activities); }));
  write_file(root / "summary.txt", format_summary(summarize(result), result));
  write_file(root / "config.yaml", config_dump);
}

}  // namespace gridflow::harness
