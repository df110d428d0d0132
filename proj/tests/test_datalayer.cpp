#include <doctest.h>

#include <algorithm>
#include <list>
#include <random>

#include "gridflow/datalayer.hpp"
#include "gridflow/oracle.hpp"

using namespace gridflow;
using namespace gridflow::data;
using engine::kInfinity;

namespace {

constexpr double GB = 1e9;

ServerSpec disk(const std::string& center, double capacity, double service = 0.0, int parallelism = 1) {
  ServerSpec s;
  s.id = center + ":disk";
  s.center = center;
  s.capacity_bytes = capacity;
  s.service_time = service;
  s.parallelism = parallelism;
  return s;
}

ServerSpec tape(const std::string& center, double mount = 0.0) {
  ServerSpec s;
  s.id = center + ":tape";
  s.center = center;
  s.kind = StorageKind::Tape;
  s.mount_latency = mount;
  return s;
}

FileId add_file(ReplicaCatalog& c, double bytes, double created = 0.0) {
  FileRecord r;
  r.size_bytes = bytes;
  r.created_at = created;
  return c.register_file(r);
}

// T0 behind a zero-delay router to EU1, plus the transatlantic chain.
network::Topology small_grid() {
  network::Topology t;
  for (auto n : {"T0", "MR", "EU1", "US1", "JP"}) t.add_node(n);
  t.add_link({"T0-MR", "T0", "MR", engine::CapacitySchedule(40e9), 0.0});
  t.add_link({"MR-EU1", "MR", "EU1", engine::CapacitySchedule(10e9), 0.020});
  t.add_link({"T0-US1", "T0", "US1", engine::CapacitySchedule(10e9), 0.120});
  t.add_link({"US1-JP", "US1", "JP", engine::CapacitySchedule(10e9), 0.240});
  return t;
}

}  // namespace

TEST_CASE("storing a file on an empty server") {
  ReplicaCatalog c;
  const auto s = c.add_server(disk("A", 100 * GB), 0);
  const auto f = add_file(c, 2 * GB);
  CHECK(c.store(f, s, 0).empty());
  CHECK(c.server(s).used == 2 * GB);
  CHECK(c.file(f).replicas.size() == 1);
  CHECK(c.audit().empty());
}

TEST_CASE("full disk migrates least recently used files to tape") {
  ReplicaCatalog c;
  const auto d = c.add_server(disk("A", 100 * GB), 0);
  const auto t = c.add_server(tape("A"), 0);
  std::vector<FileId> ids;
  for (int i = 0; i < 49; ++i) ids.push_back(add_file(c, 2 * GB));
  for (auto id : ids) c.store(id, d, 0);
  CHECK(c.server(d).used == 98 * GB);
  c.touch(ids[0], d, 1);  // oldest becomes newest
  const auto big = add_file(c, 5 * GB);
  const auto moves = c.store(big, d, 2);
  double freed = 0;
  for (const auto& m : moves) {
    freed += c.file(m.file).size_bytes;
    CHECK(m.to == t);
  }
  CHECK(freed >= 3 * GB);
  REQUIRE(moves.size() == 2);
  CHECK(moves[0].file == ids[1]);
  CHECK(moves[1].file == ids[2]);
  CHECK(c.file(ids[1]).replicas == std::set<ServerIndex>{t});
  CHECK(c.server(d).used <= 100 * GB);
  CHECK(c.audit().empty());
}

TEST_CASE("no migration when the space is already there") {
  ReplicaCatalog c;
  const auto d = c.add_server(disk("A", 10 * GB), 0);
  c.add_server(tape("A"), 0);
  c.store(add_file(c, 4 * GB), d, 0);
  CHECK(c.migrate(d, 6 * GB, 1).empty());
  CHECK(c.store(add_file(c, 6 * GB), d, 1).empty());
}

TEST_CASE("out of space with no mass storage throws") {
  ReplicaCatalog c;
  const auto d = c.add_server(disk("A", 3 * GB), 0);
  c.store(add_file(c, 2 * GB), d, 0);
  CHECK_THROWS_AS(c.store(add_file(c, 2 * GB), d, 0), engine::SimulationError);
}

TEST_CASE("eviction order matches an independent LRU replay") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  ReplicaCatalog c;
  const auto d = c.add_server(disk("A", 20 * GB), 0);
  c.add_server(tape("A"), 0);
  std::list<FileId> lru;  // front = least recent
  std::map<FileId, double> size;
  std::vector<FileId> want, got;
  double used = 0;
  for (int step = 0; step < 2000; ++step) {
    if (!lru.empty() && u(rng) < 0.5) {
      auto it = lru.begin();
      std::advance(it, static_cast<long>(u(rng) * lru.size()));
      const FileId id = *it;
      lru.erase(it);
      lru.push_back(id);
      c.touch(id, d, step);
      continue;
    }
    const double bytes = std::floor(1 + u(rng) * 5) * GB;
    const auto id = add_file(c, bytes);
    size[id] = bytes;
    const bool should_migrate = used + bytes > 20 * GB;
    while (used + bytes > 20 * GB) {
      want.push_back(lru.front());
      used -= size[lru.front()];
      lru.pop_front();
    }
    lru.push_back(id);
    used += bytes;
    const auto moves = c.store(id, d, step);
    CHECK(should_migrate == !moves.empty());
    for (const auto& m : moves) got.push_back(m.file);
  }
  CHECK(got == want);
  CHECK(c.lru_order(d) == std::vector<FileId>(lru.begin(), lru.end()));
  CHECK(c.audit().empty());
}

TEST_CASE("closest replica by path RTT") {
  const auto topo = small_grid();
  ReplicaCatalog c;
  const auto t0 = c.add_server(disk("T0", kInfinity), topo.node("T0"));
  const auto jp = c.add_server(disk("JP", kInfinity), topo.node("JP"));
  const auto f = add_file(c, GB);
  c.store(f, jp, 0);
  CHECK(c.find_closest(f, topo.node("EU1"), topo) == jp);  // single replica
  c.store(f, t0, 0);
  CHECK(c.find_closest(f, topo.node("EU1"), topo) == t0);
  CHECK(c.find_closest(f, topo.node("US1"), topo) == t0);
  CHECK(c.find_closest(f, topo.node("JP"), topo) == jp);
}

TEST_CASE("equal RTT replicas resolve to the lower server id") {
  network::Topology topo;
  for (auto n : {"r", "x", "y"}) topo.add_node(n);
  topo.add_link({"rx", "r", "x", engine::CapacitySchedule(1e9), 0.01});
  topo.add_link({"ry", "r", "y", engine::CapacitySchedule(1e9), 0.01});
  ReplicaCatalog c;
  auto sb = disk("B", kInfinity);
  sb.id = "b";
  auto sa = disk("A", kInfinity);
  sa.id = "a";
  const auto b = c.add_server(sb, topo.node("x"));
  const auto a = c.add_server(sa, topo.node("y"));
  const auto f = add_file(c, GB);
  c.store(f, b, 0);
  c.store(f, a, 0);
  CHECK(c.find_closest(f, topo.node("r"), topo) == a);
}

TEST_CASE("property: closest replica depends only on the replica set") {
  const auto topo = small_grid();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> centers{"T0", "EU1", "US1", "JP"};
    std::shuffle(centers.begin(), centers.end(), rng);
    ReplicaCatalog c1, c2;
    std::vector<ServerIndex> s1, s2;
    for (const auto& n : {"T0", "EU1", "US1", "JP"}) s1.push_back(c1.add_server(disk(n, kInfinity), topo.node(n)));
    for (const auto& n : {"T0", "EU1", "US1", "JP"}) s2.push_back(c2.add_server(disk(n, kInfinity), topo.node(n)));
    const auto f1 = add_file(c1, GB), f2 = add_file(c2, GB);
    const std::size_t k = 1 + trial % 4;
    auto index = [](const std::string& n) {
      const std::vector<std::string> order{"T0", "EU1", "US1", "JP"};
      return static_cast<std::size_t>(std::find(order.begin(), order.end(), n) - order.begin());
    };
    for (std::size_t i = 0; i < k; ++i) c1.store(f1, s1[index(centers[i])], 0);
    for (std::size_t i = k; i-- > 0;) c2.store(f2, s2[index(centers[i])], 0);
    const auto requester = topo.node(centers[3 - trial % 4]);
    CHECK(c1.find_closest(f1, requester, topo) == c2.find_closest(f2, requester, topo));
  }
}

TEST_CASE("replica cost formula") {
  // 2000 MB: 100 MB/s with no queue beats 200 MB/s behind 50 s of queue
  CHECK(replica_cost(2000e6, 800e6, 0, 10, 0) == doctest::Approx(20));
  CHECK(replica_cost(2000e6, 1600e6, 5, 10, 0) == doctest::Approx(60));
  CHECK(replica_cost(1e9, kInfinity, 0, 0, 30) == 30);
}

TEST_CASE("optimal replica weighs queue delay against bandwidth") {
  network::Topology topo;
  for (auto n : {"r", "a", "b"}) topo.add_node(n);
  topo.add_link({"ra", "r", "a", engine::CapacitySchedule(800e6), 0});
  topo.add_link({"rb", "r", "b", engine::CapacitySchedule(1600e6), 0});
  engine::Simulator sim;
  auto& net = sim.spawn<network::FlowNetwork>(topo);
  ReplicaCatalog c;
  auto sa = disk("A", kInfinity);
  auto sb = disk("B", kInfinity, 50.0);
  const auto a = c.add_server(sa, topo.node("a"));
  const auto b = c.add_server(sb, topo.node("b"));
  const auto f = add_file(c, 2000e6);
  c.store(f, a, 0);
  c.store(f, b, 0);
  CHECK(c.find_optimal(f, topo.node("r"), net) == b);  // idle queues: faster path wins
  c.server(b).pending = 1;
  CHECK(c.find_optimal(f, topo.node("r"), net) == a);
}

TEST_CASE("property: idle uniform servers make optimal equal closest") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    network::Topology topo;
    topo.add_node("r");
    ReplicaCatalog c;
    const auto f = add_file(c, GB);
    for (int i = 0; i < 5; ++i) {
      const std::string n = "s" + std::to_string(i);
      topo.add_node(n);
      topo.add_link({"r-" + n, "r", n, engine::CapacitySchedule(1e9), std::floor(u(rng) * 5) * 0.02});
    }
    engine::Simulator sim;
    auto& net = sim.spawn<network::FlowNetwork>(topo);
    for (int i = 0; i < 5; ++i) {
      const std::string n = "s" + std::to_string(i);
      const auto s = c.add_server(disk(n, kInfinity, 0.5), topo.node(n));
      if (u(rng) < 0.6 || i == 4) c.store(f, s, 0);
    }
    CHECK(c.find_optimal(f, topo.node("r"), net) == c.find_closest(f, topo.node("r"), topo));
  }
}

TEST_CASE("optimal replica matches exhaustive cost enumeration under load") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 60; ++trial) {
    network::Topology topo;
    topo.add_node("r");
    topo.add_node("hub");
    topo.add_link({"r-hub", "r", "hub", engine::CapacitySchedule(2e9 + u(rng) * 8e9), 0.001});
    for (int i = 0; i < 4; ++i) {
      const std::string n = "s" + std::to_string(i);
      topo.add_node(n);
      topo.add_link({"hub-" + n, "hub", n, engine::CapacitySchedule(2e8 + u(rng) * 2e9), u(rng) * 0.2});
    }
    engine::Simulator sim;
    auto& net = sim.spawn<network::FlowNetwork>(topo);
    net.start(sim);
    ReplicaCatalog c;
    const auto f = add_file(c, 1e9 + u(rng) * 2e9);
    std::vector<ServerIndex> servers;
    for (int i = 0; i < 4; ++i) {
      const std::string n = "s" + std::to_string(i);
      servers.push_back(c.add_server(disk(n, kInfinity, u(rng) * 5), topo.node(n)));
      c.server(servers.back()).pending = static_cast<std::size_t>(u(rng) * 4);
      c.store(f, servers.back(), 0);
    }
    // background traffic
    const int bg = static_cast<int>(u(rng) * 6);
    for (int k = 0; k < bg; ++k) {
      network::TransferRequest tr;
      tr.file_id = 100 + k;
      tr.size_bytes = 1e12;
      tr.src = topo.node("s" + std::to_string(static_cast<int>(u(rng) * 4)));
      tr.dst = u(rng) < 0.5 ? topo.node("r") : topo.node("hub");
      if (tr.src != tr.dst) net.start_transfer(sim, tr);
    }
    std::vector<double> cap;
    for (const auto& l : topo.links()) cap.push_back(l.capacity.at(0));
    const auto requester = topo.node("r");
    std::optional<ServerIndex> best;
    double best_cost = kInfinity;
    for (auto s : servers) {
      std::vector<std::vector<std::size_t>> paths;
      std::vector<double> caps;
      for (const auto& t : net.active()) {
        paths.push_back(t.path);
        caps.push_back(t.cap_bps);
      }
      const auto& p = topo.path(c.server(s).node, requester);
      paths.push_back(p.links);
      caps.push_back(8e6 * 8 / p.rtt_s);
      const double rate = harness::oracle_maxmin(cap, paths, caps).back();
      const double cost =
          c.file(f).size_bytes * 8 / rate + static_cast<double>(c.server(s).pending) * c.server(s).spec.service_time;
      if (cost < best_cost) {
        best_cost = cost;
        best = s;
      }
    }
    CHECK(c.find_optimal(f, requester, net) == *best);
  }
}

TEST_CASE("replicate_to adds the replica once the copy lands") {
  const auto topo = small_grid();
  engine::Simulator sim;
  auto& net = sim.spawn<network::FlowNetwork>(topo);
  net.start(sim);
  ReplicaCatalog c;
  const auto a = c.add_server(disk("T0", kInfinity), topo.node("T0"));
  const auto b = c.add_server(disk("EU1", kInfinity), topo.node("EU1"));
  auto& ds = sim.spawn<DataService>(c, net);
  const auto f = add_file(c, 2 * GB);
  int landed = 0;
  ds.store(sim, f, a, {b}, [&](engine::Simulator&, const FetchResult&) { ++landed; });
  CHECK(c.file(f).replicas == std::set<ServerIndex>{a});
  sim.run_until(kInfinity);
  CHECK(landed == 1);
  CHECK(c.file(f).replicas == std::set<ServerIndex>{a, b});
  CHECK(c.audit().empty());
}

TEST_CASE("single-threaded server serves requests in arrival order") {
  network::Topology topo;
  topo.add_node("srv");
  topo.add_node("cli");
  topo.add_link({"l", "srv", "cli", engine::CapacitySchedule(1e12), 0});
  engine::Simulator sim;
  auto& net = sim.spawn<network::FlowNetwork>(topo);
  ReplicaCatalog c;
  const auto s = c.add_server(disk("S", kInfinity, 0.5), 0);
  auto& ds = sim.spawn<DataService>(c, net);
  const auto f1 = add_file(c, 1e6);
  const auto f2 = add_file(c, 1e6);
  c.store(f1, s, 0);
  c.store(f2, s, 0);
  std::vector<FetchResult> out;
  ds.fetch(sim, f1, s, 1, std::nullopt, [&](engine::Simulator&, const FetchResult& r) { out.push_back(r); });
  ds.fetch(sim, f2, s, 1, std::nullopt, [&](engine::Simulator&, const FetchResult& r) { out.push_back(r); });
  CHECK(c.server(s).pending == 2);
  sim.run_until(kInfinity);
  REQUIRE(out.size() == 2);
  CHECK(out[0].file == f1);
  CHECK(out[0].transfer_started_at == doctest::Approx(0.5));
  CHECK(out[1].transfer_started_at == doctest::Approx(1.0));
  CHECK(c.server(s).pending == 0);
}

TEST_CASE("tape reads pay the mount and stage back to disk") {
  network::Topology topo;
  topo.add_node("T0");
  topo.add_node("X");
  topo.add_link({"l", "T0", "X", engine::CapacitySchedule(1e9), 0});
  engine::Simulator sim;
  auto& net = sim.spawn<network::FlowNetwork>(topo);
  ReplicaCatalog c;
  const auto d = c.add_server(disk("T0", kInfinity, 0.01), 0);
  const auto t = c.add_server(tape("T0", 30), 0);
  auto& ds = sim.spawn<DataService>(c, net);
  const auto f = add_file(c, 2000e6);
  c.store(f, t, 0);
  double finished = 0;
  ds.fetch(sim, f, t, 1, std::nullopt, [&](engine::Simulator&, const FetchResult& r) { finished = r.finished_at; });
  sim.run_until(kInfinity);
  CHECK(finished == doctest::Approx(0.0 + 30 + 16));
  CHECK(ds.tape_reads() == 1);
  CHECK(c.file(f).replicas.count(d) == 1);
}
