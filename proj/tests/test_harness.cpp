#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gridflow/config.hpp"
#include "gridflow/oracle.hpp"
#include "gridflow/report.hpp"
#include "gridflow/runner.hpp"

using namespace gridflow;
using namespace gridflow::harness;
namespace fs = std::filesystem;

namespace {

const std::string kSource = GRIDFLOW_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gridflow-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Loads the shipped file with one key replaced by raw YAML text.
std::string patched(const std::string& preset, const std::string& key, const std::string& value) {
  YAML::Node root = load_yaml_file(kSource + "/scenarios/" + preset);
  apply_override(root, key, value);
  YAML::Emitter out;
  out << root;
  return out.c_str();
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

bool mentions(const ConfigError& e, const std::string& what) {
  for (const auto& i : e.issues()) {
    if (i.str().find(what) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("shipped scenario loads with six tier-1 centers and the table RTTs") {
  const auto cfg = load_config(kSource + "/scenarios/t0t1.cfg");
  REQUIRE_FALSE(cfg.is_proof());
  const auto& spec = std::get<scenarios::T0T1Spec>(cfg.spec);
  CHECK(spec.tier1() == std::vector<std::string>{"T1-EU1", "T1-EU2", "T1-EU3", "T1-US1", "T1-US2", "T1-JP"});
  const auto topo = spec.topology.build();
  auto rtt_ms = [&](const char* a, const char* b) { return topo.path(topo.node(a), topo.node(b)).rtt_s * 1000; };
  CHECK(rtt_ms("T1-EU1", "T0") == doctest::Approx(20));
  CHECK(rtt_ms("T1-EU2", "T0") == doctest::Approx(25));
  CHECK(rtt_ms("T1-EU3", "T0") == doctest::Approx(30));
  CHECK(rtt_ms("T1-US1", "T0") == doctest::Approx(120));
  CHECK(rtt_ms("T1-US1", "T1-US2") == doctest::Approx(60));
  CHECK(rtt_ms("T1-US1", "T1-JP") == doctest::Approx(240));
  const auto dump = dump_config(cfg);
  CHECK(dump.find("T1-JP") != std::string::npos);
  CHECK(dump.find("rtt_ms: 240") != std::string::npos);
}

TEST_CASE("every shipped scenario validates and its dump reloads to the same dump") {
  for (const auto& name : {"t0t1.cfg", "t0t1_scaled.cfg", "proof.cfg", "proof_scaled.cfg", "proof_repeat.cfg"}) {
    const auto cfg = load_config(kSource + "/scenarios/" + name);
    const auto dump = dump_config(cfg);
    CHECK(dump_config(parse_config(YAML::Load(dump))) == dump);
  }
}

TEST_CASE("negative link capacity names the link") {
  const auto dir = scratch("negcap");
  const auto p = write(dir, "bad.cfg", patched("t0t1.cfg", "t0t1.links.T0-US1.capacity_bps", "-1"));
  try {
    load_config(p.string());
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "T0-US1"));
  }
}

TEST_CASE("relay cycle is rejected") {
  const auto dir = scratch("cycle");
  auto text = patched("t0t1.cfg", "t0t1.agents.relays", "{T1-US1: [T1-US2], T1-US2: [T1-US1]}");
  const auto p = write(dir, "cycle.cfg", text);
  CHECK_THROWS_AS(load_config(p.string()), ConfigError);
}

TEST_CASE("unknown keys are reported with their line") {
  const auto dir = scratch("unknown");
  const auto p = write(dir, "typo.cfg", "run:\n  seed: 1\n  durattion: 5\nproof:\n  n_masters: 2\n");
  try {
    load_config(p.string());
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    REQUIRE_FALSE(e.issues().empty());
    CHECK(e.issues()[0].path == "run.durattion");
    CHECK(e.issues()[0].line == 3);
  }
}

TEST_CASE("wrong value types and missing sections are config errors") {
  const auto dir = scratch("types");
  CHECK_THROWS_AS(load_config(write(dir, "a.cfg", "proof:\n  n_masters: many\n").string()), ConfigError);
  CHECK_THROWS_AS(load_config(write(dir, "b.cfg", "run:\n  seed: 1\n").string()), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.cfg").string()), ConfigError);
  CHECK_THROWS_AS(load_config(kSource + "/scenarios/t0t1.cfg", {"t0t1.analysis.centers=[Nowhere]"}), ConfigError);
}

TEST_CASE("overrides reach nested keys") {
  const auto cfg = load_config(kSource + "/scenarios/t0t1.cfg",
                               {"t0t1.links.T0-US1.capacity_bps=3e9", "run.seed=9", "t0t1.agents.enabled=false"});
  const auto& spec = std::get<scenarios::T0T1Spec>(cfg.spec);
  CHECK(cfg.run.seed == 9);
  CHECK_FALSE(spec.agents_enabled);
  for (const auto& l : spec.topology.links) {
    if (l.id == "T0-US1") CHECK(l.capacity.at(0) == 3e9);
  }
  CHECK(split_assignment("a.b=c=d") == std::pair<std::string, std::string>{"a.b", "c=d"});
  CHECK_THROWS_AS(split_assignment("nothing"), ConfigError);
}

TEST_CASE("sweeps expand to a labelled cartesian product") {
  const auto pts = expand_sweep({"a.b=1,2", "c=x,y,z"});
  REQUIRE(pts.size() == 6);
  CHECK(pts[0].label == "a.b=1,c=x");
  CHECK(pts[5].label == "a.b=2,c=z");
  CHECK(pts[4].overrides == std::vector<std::string>{"a.b=2", "c=y"});
  CHECK(expand_sweep({}).size() == 1);
}

TEST_CASE("a run too short for any activity writes header-only transfers") {
  const auto dir = scratch("short");
  RunOptions o;
  o.scenario = kSource + "/scenarios/t0t1.cfg";
  o.duration = 0.001;
  o.out_dir = dir.string();
  std::ostringstream log;
  CHECK(run_command(o, log) == kExitOk);
  CHECK(slurp(dir / "transfers.csv") == std::string(kTransfersHeader) + "\n");
  for (const auto& f : {"links.csv", "cpu.csv", "jobs.csv", "activities.csv", "summary.txt", "config.yaml"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(slurp(dir / "summary.txt").find("no RAW transfers") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  std::ostringstream out, log;
  RunOptions o;
  o.scenario = write(dir, "bad.cfg", "nonsense: 1\n").string();
  o.out_dir = (dir / "out").string();
  CHECK(run_command(o, log) == kExitConfig);
  CHECK(validate_command(o.scenario, {}, out, log) == kExitConfig);
  CHECK(validate_command(kSource + "/scenarios/proof.cfg", {}, out, log) == kExitOk);
  o.scenario = kSource + "/scenarios/proof_scaled.cfg";
  o.duration = -5;
  CHECK(run_command(o, log) == kExitConfig);
  // the disk fills and there is no mass storage behind it
  o.duration = std::nullopt;
  o.scenario = kSource + "/scenarios/t0t1_scaled.cfg";
  o.sets = {"t0t1.centers.T1-EU1.disk.capacity_bytes=1e9"};
  CHECK(run_command(o, log) == kExitRuntime);
  CHECK(oracle_command((dir / "none.json").string(), 1e-3, out, log) == kExitRuntime);
  CHECK(oracle_command((dir / "none.json").string(), 0, out, log) == kExitConfig);
}

TEST_CASE("same config and seed give byte-identical CSVs") {
  const auto dir = scratch("repeat");
  for (const char* sub : {"a", "b"}) {
    RunOptions o;
    o.scenario = kSource + "/scenarios/t0t1_scaled.cfg";
    o.duration = 1800;
    o.out_dir = (dir / sub).string();
    std::ostringstream log;
    REQUIRE(run_command(o, log) == kExitOk);
  }
  for (const auto& f : {"transfers.csv", "links.csv", "cpu.csv", "jobs.csv", "activities.csv", "summary.txt"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(read_csv(dir / "a" / "transfers.csv").size() > 100);
}

TEST_CASE("CSV rows are loss-free and formatted") {
  scenarios::RunResult r;
  r.transfers.push_back({3, data::FileClass::Dst, "T0", "T1-JP", 2.5e8, 1.25, 10});
  r.jobs.push_back({1, sched::JobType::Production, "T0", 0, 0.5, 2, 0, true});
  r.activities.push_back({"analysis", "T1-JP", 3600, std::nullopt, 0});
  std::ostringstream t, j, a;
  write_transfers_csv(t, r.transfers);
  write_jobs_csv(j, r.jobs);
  write_activities_csv(a, r.activities);
  CHECK(t.str() == std::string(kTransfersHeader) + "\n3,DST,T0,T1-JP,250000000,1.250000,10.000000\n");
  CHECK(j.str().find("\n1,production,T0,0.000000,0.500000,2.000000,1\n") != std::string::npos);
  CHECK(a.str().find("\nanalysis,T1-JP,3600.000000,,0\n") != std::string::npos);
}

TEST_CASE("summary means") {
  scenarios::RunResult r;
  r.transfers.push_back({1, data::FileClass::Raw, "T0", "T1-EU1", 1, 0, 10});
  r.transfers.push_back({2, data::FileClass::Raw, "T0", "T1-EU1", 1, 5, 25});
  const auto s = summarize(r);
  REQUIRE(s.find("RAW", "T1-EU1"));
  CHECK(s.find("RAW", "T1-EU1")->mean == 15);
  CHECK(s.find("RAW", "T1-EU1")->min == 10);
  CHECK(s.find("RAW", "T1-EU1")->max == 20);
  CHECK_FALSE(s.find("DST", "all"));
  bool noted = false;
  for (const auto& n : s.notes) noted = noted || n.find("no DST transfers") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("all-centers mean recomputed from transfers.csv") {
  const auto dir = scratch("allseries");
  RunOptions o;
  o.scenario = kSource + "/scenarios/t0t1_scaled.cfg";
  o.duration = 3600;
  o.out_dir = dir.string();
  std::ostringstream log;
  REQUIRE(run_command(o, log) == kExitOk);
  const auto rows = read_csv(dir / "transfers.csv");
  std::map<std::string, std::pair<double, int>> per;
  double total = 0;
  int n = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][1] != "DST") continue;
    const double d = std::stod(rows[i][6]) - std::stod(rows[i][5]);
    per[rows[i][3]].first += d;
    per[rows[i][3]].second += 1;
    total += d;
    ++n;
  }
  REQUIRE(n > 0);
  double weighted = 0;
  for (const auto& [c, v] : per) weighted += (v.first / v.second) * v.second;
  weighted /= n;
  CHECK(weighted == doctest::Approx(total / n));
  const auto cfg = load_config(o.scenario, {});
  auto cfg2 = cfg;
  cfg2.run.duration = 3600;
  const auto s = summarize(run_scenario(cfg2));
  REQUIRE(s.find("DST", "all"));
  CHECK(s.find("DST", "all")->mean == doctest::Approx(weighted).epsilon(1e-6));
  CHECK(s.find("DST", "all")->count == static_cast<std::size_t>(n));
  for (const auto& [c, v] : per) CHECK(s.find("DST", c)->mean == doctest::Approx(v.first / v.second).epsilon(1e-6));
}

TEST_CASE("timestep oracle on the hand trace") {
  const auto t = parse_trace(R"({"resources":[{"capacity":10,"claims":[
      {"id":"A","start":0,"work":100},{"id":"B","start":4,"work":50}]}]})");
  const auto o = oracle_resources(t.resources, 1e-3);
  CHECK(std::abs(o.at("A") - 15.0) <= 0.01);
  CHECK(std::abs(o.at("B") - 14.0) <= 0.01);
  const auto e = engine_resources(t.resources);
  CHECK(e.at("A") == 15.0);
  CHECK(e.at("B") == 14.0);
}

TEST_CASE("timestep oracle: single claim within one step") {
  for (double work : {1.0, 3.3, 77.7}) {
    std::vector<OracleResource> rs{{7.0, {{"x", 0.5, work}}}};
    CHECK(std::abs(oracle_resources(rs, 1e-2).at("x") - (0.5 + work / 7.0)) <= 1e-2);
  }
}

TEST_CASE("oracle command prints both columns") {
  const auto dir = scratch("oracle");
  const auto p = write(dir, "t.json", R"({"resources":[{"capacity":10,"claims":[
      {"id":"A","start":0,"work":100},{"id":"B","start":4,"work":50}]}]})");
  std::ostringstream out, log;
  CHECK(oracle_command(p.string(), 1e-3, out, log) == kExitOk);
  CHECK(out.str().find("A 15.0") == 0);
  CHECK(out.str().find("15.000000\nB 14.0") != std::string::npos);
  const auto n = write(dir, "n.json", R"({"links":[{"id":"L1","capacity":10},{"id":"L2","capacity":4}],
      "flows":[{"id":"f1","bits":80,"links":["L1"]},{"id":"f2","bits":20,"links":["L1","L2"]},
               {"id":"f3","bits":20,"links":["L2"]}]})");
  std::ostringstream nout;
  CHECK(oracle_command(n.string(), 1e-3, nout, log) == kExitOk);
  CHECK(nout.str().find("f1 10.0") != std::string::npos);
  CHECK_THROWS(parse_trace("{\"nothing\": 1}"));
}
