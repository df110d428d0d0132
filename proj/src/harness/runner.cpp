#include "gridflow/runner.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "gridflow/config.hpp"
#include "gridflow/oracle.hpp"
#include "gridflow/report.hpp"

namespace gridflow::harness {

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' || c == '=';
    out += ok ? c : '_';
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) out.push_back(part);
  return out;
}

}  // namespace

std::vector<SweepPoint> expand_sweep(const std::vector<std::string>& sweeps) {
  std::vector<SweepPoint> points{SweepPoint{}};
  for (const auto& axis : sweeps) {
    const auto [key, values_text] = split_assignment(axis);
    const auto values = split(values_text, ',');
    if (values.empty()) throw ConfigError({ConfigIssue{key, 0, "sweep needs at least one value"}});
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        SweepPoint q = p;
        q.overrides.push_back(key + "=" + v);
        q.label += (q.label.empty() ? "" : ",") + sanitize(key + "=" + v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

int run_command(const RunOptions& options, std::ostream& log) {
  std::vector<SweepPoint> points;
  try {
    points = expand_sweep(options.sweeps);
  } catch (const ConfigError& e) {
    log << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto& point : points) {
    ScenarioConfig cfg;
    try {
      auto overrides = options.sets;
      overrides.insert(overrides.end(), point.overrides.begin(), point.overrides.end());
      cfg = load_config(options.scenario, overrides);
      if (options.seed) cfg.run.seed = *options.seed;
      if (options.duration) cfg.run.duration = *options.duration;
      if (options.metrics_interval) cfg.run.metrics_interval = *options.metrics_interval;
      if (!(cfg.run.duration > 0.0)) throw ConfigError({ConfigIssue{"--duration", 0, "must be positive"}});
      if (!(cfg.run.metrics_interval > 0.0)) {
        throw ConfigError({ConfigIssue{"--metrics-interval", 0, "must be positive"}});
      }
    } catch (const ConfigError& e) {
      log << e.what() << "\n";
      return kExitConfig;
    }
    const std::string dir =
        point.label.empty() ? options.out_dir : (std::filesystem::path(options.out_dir) / point.label).string();
    try {
      const auto result = run_scenario(cfg);
      write_outputs(dir, result, dump_config(cfg));
      log << "wrote " << dir << " (" << result.transfers.size() << " transfers, " << result.jobs.size()
          << " jobs, " << result.audit_violations.size() << " audit violations)\n";
    } catch (const std::exception& e) {
      log << "run aborted: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitOk;
}

int validate_command(const std::string& scenario, const std::vector<std::string>& sets, std::ostream& out,
                     std::ostream& log) {
  try {
    const auto cfg = load_config(scenario, sets);
    out << dump_config(cfg);
    return kExitOk;
  } catch (const ConfigError& e) {
    log << e.what() << "\n";
    return kExitConfig;
  }
}

int oracle_command(const std::string& trace_file, double dt, std::ostream& out, std::ostream& log) {
  try {
    if (!(dt > 0.0)) {
      log << "--dt must be positive\n";
      return kExitConfig;
    }
    const auto trace = load_trace(trace_file);
    char buf[128];
    if (trace.is_network) {
      for (const auto& [id, t] : oracle_network(trace.network, dt)) {
        std::snprintf(buf, sizeof buf, "%s %.6f\n", id.c_str(), t);
        out << buf;
      }
    } else {
      const auto engine = engine_resources(trace.resources);
      for (const auto& [id, t] : oracle_resources(trace.resources, dt)) {
        std::snprintf(buf, sizeof buf, "%s %.6f %.6f\n", id.c_str(), t, engine.at(id));
        out << buf;
      }
    }
    return kExitOk;
  } catch (const std::exception& e) {
    log << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace gridflow::harness
