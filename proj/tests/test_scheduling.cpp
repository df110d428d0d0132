#include <doctest.h>

#include <algorithm>
#include <random>

#include "gridflow/scheduling.hpp"

using namespace gridflow;
using namespace gridflow::sched;
using engine::kInfinity;

namespace {

const std::vector<std::string> kTier1{"T1-EU1", "T1-EU2", "T1-EU3", "T1-US1", "T1-US2", "T1-JP"};

AgentPlan us_plan() {
  AgentPlan p;
  p.relays["T1-US1"] = {"T1-US2", "T1-JP"};
  return p;
}

// The tier-0/tier-1 tree with a disk server at every center.
struct Grid {
  engine::Simulator sim;
  network::FlowNetwork* net = nullptr;
  data::ReplicaCatalog catalog;
  data::DataService* data = nullptr;
  network::LinkIndex transatlantic = 0;
  double transatlantic_bytes = 0;

  explicit Grid(double t0_us_bps = 10e9) {
    network::Topology t;
    for (auto n : {"T0", "MR", "T1-EU1", "T1-EU2", "T1-EU3", "T1-US1", "T1-US2", "T1-JP"}) t.add_node(n);
    auto link = [&t](const char* id, const char* a, const char* b, double bps, double rtt) {
      return t.add_link({id, a, b, engine::CapacitySchedule(bps), rtt});
    };
    link("T0-MR", "T0", "MR", 40e9, 0);
    link("MR-EU1", "MR", "T1-EU1", 10e9, 0.020);
    link("MR-EU2", "MR", "T1-EU2", 10e9, 0.025);
    link("MR-EU3", "MR", "T1-EU3", 10e9, 0.030);
    transatlantic = link("T0-US1", "T0", "T1-US1", t0_us_bps, 0.120);
    link("US1-US2", "T1-US1", "T1-US2", 10e9, 0.060);
    link("US1-JP", "T1-US1", "T1-JP", 10e9, 0.240);
    net = &sim.spawn<network::FlowNetwork>(t);
    net->start(sim);
    net->set_on_complete([this](const network::Transfer& tr, double) {
      if (std::find(tr.path.begin(), tr.path.end(), transatlantic) != tr.path.end()) transatlantic_bytes += tr.size_bytes;
    });
    for (const auto& n : net->topology().nodes()) {
      if (n == "MR") continue;
      data::ServerSpec s;
      s.id = n + ":disk";
      s.center = n;
      s.parallelism = 64;
      catalog.add_server(s, net->topology().node(n));
    }
    data = &sim.spawn<data::DataService>(catalog, *net);
  }

  data::FileId file_at(const std::string& center, double bytes) {
    data::FileRecord r;
    r.size_bytes = bytes;
    const auto id = catalog.register_file(r);
    catalog.store(id, *catalog.disk_at(center), sim.now());
    return id;
  }
};

FarmSpec farm(const std::string& center, int cpus, double rate, int slots = 0) {
  FarmSpec f;
  f.center = center;
  f.cpu_count = cpus;
  f.cpu_rate = rate;
  f.job_slots = slots;
  return f;
}

}  // namespace

TEST_CASE("placement stays local under the threshold") {
  const std::vector<double> loads{0.5, 0.1, 0.2};
  const auto p = choose_placement(0, loads, 0.8);
  CHECK(p.center == 0);
  CHECK_FALSE(p.exported);
}

TEST_CASE("placement exports to the least loaded remote center") {
  const std::vector<double> loads{0.9, 0.5, 0.3};
  const auto p = choose_placement(0, loads, 0.8);
  CHECK(p.center == 2);
  CHECK(p.exported);
}

TEST_CASE("property: export target is the brute-force argmin and scale invariant") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const std::size_t local = trial % n;
    std::vector<double> loads(n);
    for (auto& l : loads) l = std::floor(u(rng) * 20) / 10;  // coarse, so ties happen
    const auto p = choose_placement(local, loads, 0.8);
    if (loads[local] <= 0.8) {
      CHECK(p.center == local);
      continue;
    }
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != local && (best == n || loads[i] < loads[best])) best = i;
    }
    CHECK(p.center == best);
    std::vector<double> scaled = loads;
    const double k = 0.5 + u(rng) * 3;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != local) scaled[i] *= k;
    }
    CHECK(choose_placement(local, scaled, 0.8).center == p.center);
  }
}

TEST_CASE("relay plan validation") {
  AgentPlan p;
  p.relays["T1-US1"] = {"T1-US2"};
  p.relays["T1-US2"] = {"T1-US1"};
  CHECK_FALSE(p.validate().empty());
  AgentPlan twice;
  twice.relays["A"] = {"C"};
  twice.relays["B"] = {"C"};
  CHECK_FALSE(twice.validate().empty());
  CHECK(us_plan().validate().empty());
}

TEST_CASE("fan-out plan with the US relay") {
  const auto s = plan_fanout("T0", {kTier1.begin(), kTier1.end()}, us_plan());
  CHECK(s.direct == std::vector<std::string>{"T1-EU1", "T1-EU2", "T1-EU3", "T1-US1"});
  REQUIRE(s.forwards.count("T1-US1"));
  CHECK(s.forwards.at("T1-US1") == std::vector<std::string>{"T1-JP", "T1-US2"});
  CHECK(s.copies() == 6);
}

TEST_CASE("fan-out plan without relays is direct") {
  const auto s = plan_fanout("T0", {kTier1.begin(), kTier1.end()}, AgentPlan{});
  CHECK(s.direct.size() == 6);
  CHECK(s.forwards.empty());
}

TEST_CASE("fan-out to US2 alone goes through the relay and skips JP") {
  const auto s = plan_fanout("T0", {"T1-US2"}, us_plan());
  CHECK(s.direct == std::vector<std::string>{"T1-US1"});
  CHECK(s.forwards.at("T1-US1") == std::vector<std::string>{"T1-US2"});
  CHECK(s.copies() == 2);
}

TEST_CASE("a relay sending its own file forwards nothing through itself") {
  const auto s = plan_fanout("T1-US1", {"T0", "T1-US2", "T1-JP"}, us_plan());
  CHECK(s.direct == std::vector<std::string>{"T0", "T1-JP", "T1-US2"});
  CHECK(s.forwards.empty());
}

TEST_CASE("property: every destination gets one copy and the ocean is crossed as planned") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 40; ++trial) {
    std::set<std::string> dests;
    for (const auto& c : kTier1) {
      if (rng() % 2) dests.insert(c);
    }
    if (dests.empty()) dests.insert(kTier1[trial % 6]);
    for (bool enabled : {true, false}) {
      Grid g;
      TransferAgents agents(*g.data, us_plan(), enabled);
      const double size = 2e8;
      const auto f = g.file_at("T0", size);
      std::multiset<std::string> got;
      agents.fanout(g.sim, f, "T0", dests, [&](engine::Simulator&, const std::string& c, const data::FetchResult&) {
        got.insert(c);
      });
      g.sim.run_until(kInfinity);
      CHECK(got == std::multiset<std::string>(dests.begin(), dests.end()));
      std::size_t us_side = 0;
      for (const auto& d : dests) us_side += (d == "T1-US1" || d == "T1-US2" || d == "T1-JP") ? 1 : 0;
      const double want = enabled ? (us_side > 0 ? size : 0.0) : size * static_cast<double>(us_side);
      CHECK(g.transatlantic_bytes == want);
    }
  }
}

TEST_CASE("CPU phase of 3600 C on a farm of capacity C is one hour") {
  Grid g;
  GridScheduler& s = g.sim.spawn<GridScheduler>(*g.data, std::vector<FarmSpec>{farm("T0", 1, 1e9)});
  s.start(g.sim);
  Job j;
  j.id = 1;
  j.cpu_work = 3600 * 1e9;
  s.submit(g.sim, j, "T0");
  g.sim.run_until(kInfinity);
  REQUIRE(s.records().size() == 1);
  CHECK(s.records()[0].end_time - s.records()[0].start_time == doctest::Approx(3600));
}

TEST_CASE("two equal jobs sharing one CPU each take twice as long") {
  Grid g;
  GridScheduler& s = g.sim.spawn<GridScheduler>(*g.data, std::vector<FarmSpec>{farm("T0", 1, 10, 2)});
  s.start(g.sim);
  for (int i = 1; i <= 2; ++i) {
    Job j;
    j.id = i;
    j.cpu_work = 100;
    s.submit(g.sim, j, "T0");
  }
  g.sim.run_until(kInfinity);
  REQUIRE(s.records().size() == 2);
  for (const auto& r : s.records()) CHECK(r.end_time == doctest::Approx(20));
}

TEST_CASE("remote input is staged before the CPU phase") {
  // a 1 Gbps branch with no window ceiling
  network::Topology t;
  t.add_node("A");
  t.add_node("B");
  t.add_link({"AB", "A", "B", engine::CapacitySchedule(1e9), 0});
  engine::Simulator sim;
  auto& net = sim.spawn<network::FlowNetwork>(t);
  data::ReplicaCatalog cat;
  data::ServerSpec sa;
  sa.id = "A:disk";
  sa.center = "A";
  cat.add_server(sa, 0);
  data::ServerSpec sb = sa;
  sb.id = "B:disk";
  sb.center = "B";
  cat.add_server(sb, 1);
  auto& ds = sim.spawn<data::DataService>(cat, net);
  data::FileRecord fr;
  fr.size_bytes = 2000e6;
  const auto f = cat.register_file(fr);
  cat.store(f, 0, 0);
  auto& s = sim.spawn<GridScheduler>(ds, std::vector<FarmSpec>{farm("A", 1, 1e9), farm("B", 1, 1e9)});
  s.start(sim);
  Job j;
  j.id = 7;
  j.cpu_work = 60e9;
  j.inputs = {f};
  s.submit(sim, j, "B");
  sim.run_until(kInfinity);
  REQUIRE(s.records().size() == 1);
  const auto& r = s.records()[0];
  CHECK(r.staging_time == doctest::Approx(16));
  CHECK(r.start_time == doctest::Approx(16));
  CHECK(r.end_time == doctest::Approx(76));
  CHECK_FALSE(r.failed);
}

TEST_CASE("missing input fails the job instead of hanging") {
  Grid g;
  auto& s = g.sim.spawn<GridScheduler>(*g.data, std::vector<FarmSpec>{farm("T0", 1, 1e9)});
  s.start(g.sim);
  Job j;
  j.id = 3;
  j.cpu_work = 1;
  j.inputs = {12345};
  s.submit(g.sim, j, "T0");
  g.sim.run_until(kInfinity);
  REQUIRE(s.records().size() == 1);
  CHECK(s.records()[0].failed);
}

TEST_CASE("busy farm exports to the idle one") {
  Grid g;
  auto& s = g.sim.spawn<GridScheduler>(*g.data,
                                       std::vector<FarmSpec>{farm("T0", 2, 1), farm("T1-EU1", 2, 1), farm("T1-EU2", 2, 1)});
  s.start(g.sim);
  std::vector<Placement> where;
  for (int i = 1; i <= 4; ++i) {
    Job j;
    j.id = i;
    j.cpu_work = 100;
    where.push_back(s.submit(g.sim, j, "T0"));
  }
  // loads after each submit: 0.5, 1.0 (still local at 0.5 <= 0.8), then exports
  CHECK_FALSE(where[0].exported);
  CHECK_FALSE(where[1].exported);
  CHECK(where[2].exported);
  CHECK(where[2].center == 1);
  CHECK(where[3].exported);
  CHECK(where[3].center == 2);
}

TEST_CASE("queued jobs start in submit order") {
  Grid g;
  auto& s = g.sim.spawn<GridScheduler>(*g.data, std::vector<FarmSpec>{farm("T0", 2, 1)});
  s.start(g.sim);
  auto& driver = g.sim.spawn<engine::Actor>();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1, 10);
  for (int i = 1; i <= 30; ++i) {
    const double work = u(rng);
    driver.after(g.sim, i * 0.1, [&s, i, work](engine::Simulator& sim, const engine::SimEvent&) {
      Job j;
      j.id = i;
      j.cpu_work = work;
      s.submit(sim, j, "T0");
    });
  }
  g.sim.run_until(kInfinity);
  std::vector<JobRecord> rs = s.records();
  REQUIRE(rs.size() == 30);
  std::sort(rs.begin(), rs.end(), [](const JobRecord& a, const JobRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < rs.size(); ++i) CHECK(rs[i].start_time >= rs[i - 1].start_time);
}
