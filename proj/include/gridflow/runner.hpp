#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gridflow::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct RunOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<double> metrics_interval;
  std::string out_dir = "out";
  std::vector<std::string> sets;    // key=value
  std::vector<std::string> sweeps;  // key=v1,v2,...
};

struct SweepPoint {
  std::string label;  // output subdirectory name
  std::vector<std::string> overrides;
};

/// Cartesian product of the sweep axes, first axis varying slowest. With no
/// axes there is one unnamed point.
std::vector<SweepPoint> expand_sweep(const std::vector<std::string>& sweeps);

int run_command(const RunOptions& options, std::ostream& log);
int validate_command(const std::string& scenario, const std::vector<std::string>& sets, std::ostream& out,
                     std::ostream& log);
int oracle_command(const std::string& trace_file, double dt, std::ostream& out, std::ostream& log);

}  // namespace gridflow::harness
