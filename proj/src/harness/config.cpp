#include "gridflow/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace gridflow::harness {

using scenarios::CenterSpec;
using scenarios::ProofSpec;
using scenarios::T0T1Spec;

std::string ConfigIssue::str() const {
  std::ostringstream out;
  out << path;
  if (line > 0) out << " (line " << line << ")";
  out << ": " << message;
  return out.str();
}

namespace {

std::string summarize(const std::vector<ConfigIssue>& issues) {
  std::ostringstream out;
  out << issues.size() << " configuration error" << (issues.size() == 1 ? "" : "s");
  for (const auto& i : issues) out << "\n  " << i.str();
  return out.str();
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

int line_of(const YAML::Node& n) {
  if (!n.IsDefined()) return 0;
  const auto mark = n.Mark();
  return mark.line >= 0 ? mark.line + 1 : 0;
}

template <class T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else return "a list of strings";
}

class Reader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const YAML::Node& n, const std::string& path, std::string msg) {
    issues.push_back(ConfigIssue{path, line_of(n), std::move(msg)});
  }

  bool map(const YAML::Node& n, const std::string& path) {
    if (!n.IsDefined() || n.IsNull()) return false;
    if (!n.IsMap()) {
      fail(n, path, "expected a mapping");
      return false;
    }
    return true;
  }

  void keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!n.IsMap()) return;
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) fail(kv.first, join(path, key), "unknown key");
    }
  }

  template <class T>
  bool get(const YAML::Node& n, const char* key, const std::string& path, T& out) {
    if (!n.IsMap()) return false;
    const YAML::Node v = n[key];
    if (!v.IsDefined()) return false;
    try {
      out = v.template as<T>();
      return true;
    } catch (const YAML::Exception&) {
      fail(v, join(path, key), std::string("expected ") + type_name<T>());
      return false;
    }
  }

  void require(bool ok, const YAML::Node& n, const char* key, const std::string& path, const std::string& msg) {
    if (ok) return;
    const YAML::Node v = n.IsMap() ? n[key] : YAML::Node();
    fail(v.IsDefined() ? v : n, join(path, key), msg);
  }
};

void read_run(Reader& r, const YAML::Node& n, RunSettings& run) {
  const std::string path = "run";
  if (!r.map(n, path)) return;
  r.keys(n, path, {"seed", "duration", "metrics_interval"});
  r.get(n, "seed", path, run.seed);
  r.get(n, "duration", path, run.duration);
  r.get(n, "metrics_interval", path, run.metrics_interval);
  r.require(run.duration > 0.0, n, "duration", path, "must be positive");
  r.require(run.metrics_interval > 0.0, n, "metrics_interval", path, "must be positive");
}

engine::CapacitySchedule read_capacity(Reader& r, const YAML::Node& n, const std::string& path) {
  if (n.IsScalar()) {
    try {
      return engine::CapacitySchedule(n.as<double>());
    } catch (const YAML::Exception&) {
      r.fail(n, path, "expected a number or a list of [time, bps] points");
      return engine::CapacitySchedule(1.0);
    }
  }
  if (n.IsSequence()) {
    std::vector<engine::CapacitySchedule::Point> points;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const auto p = n[i];
      if (!p.IsSequence() || p.size() != 2) {
        r.fail(p, path + "[" + std::to_string(i) + "]", "expected [time, bps]");
        continue;
      }
      try {
        points.push_back({p[0].as<double>(), p[1].as<double>()});
      } catch (const YAML::Exception&) {
        r.fail(p, path + "[" + std::to_string(i) + "]", "expected [time, bps]");
      }
    }
    try {
      return engine::CapacitySchedule(points);
    } catch (const engine::SimulationError& e) {
      r.fail(n, path, e.what());
      return engine::CapacitySchedule(1.0);
    }
  }
  r.fail(n, path, "expected a number or a list of [time, bps] points");
  return engine::CapacitySchedule(1.0);
}

void read_server(Reader& r, const YAML::Node& n, const std::string& path, data::ServerSpec& s, bool tape) {
  if (!r.map(n, path)) return;
  if (tape) {
    r.keys(n, path, {"capacity_bytes", "service_time", "parallelism", "mount_latency"});
  } else {
    r.keys(n, path, {"capacity_bytes", "service_time", "parallelism"});
  }
  r.get(n, "capacity_bytes", path, s.capacity_bytes);
  r.get(n, "service_time", path, s.service_time);
  r.get(n, "parallelism", path, s.parallelism);
  if (tape) r.get(n, "mount_latency", path, s.mount_latency);
  r.require(s.capacity_bytes > 0.0, n, "capacity_bytes", path, "must be positive");
  r.require(s.service_time >= 0.0, n, "service_time", path, "must not be negative");
  r.require(s.parallelism >= 1, n, "parallelism", path, "must be at least 1");
  r.require(s.mount_latency >= 0.0, n, "mount_latency", path, "must not be negative");
}

void read_center(Reader& r, const YAML::Node& n, const std::string& path, CenterSpec& c) {
  c.disk.id = c.name + ":disk";
  c.disk.parallelism = 64;
  if (!n.IsDefined() || n.IsNull()) return;
  if (!r.map(n, path)) return;
  r.keys(n, path, {"utc_offset_h", "farm", "disk", "tape"});
  r.get(n, "utc_offset_h", path, c.utc_offset_h);
  const auto farm = n["farm"];
  const std::string fp = join(path, "farm");
  if (r.map(farm, fp)) {
    r.keys(farm, fp, {"cpu_count", "cpu_rate", "job_slots", "threshold"});
    r.get(farm, "cpu_count", fp, c.farm.cpu_count);
    r.get(farm, "cpu_rate", fp, c.farm.cpu_rate);
    r.get(farm, "job_slots", fp, c.farm.job_slots);
    r.get(farm, "threshold", fp, c.farm.threshold);
    r.require(c.farm.cpu_count >= 1, farm, "cpu_count", fp, "must be at least 1");
    r.require(c.farm.cpu_rate > 0.0, farm, "cpu_rate", fp, "must be positive");
    r.require(c.farm.job_slots >= 0, farm, "job_slots", fp, "must not be negative");
    r.require(c.farm.threshold >= 0.0, farm, "threshold", fp, "must not be negative");
  }
  read_server(r, n["disk"], join(path, "disk"), c.disk, false);
  if (n["tape"].IsDefined() && !n["tape"].IsNull()) {
    data::ServerSpec tape;
    tape.id = c.name + ":tape";
    tape.kind = data::StorageKind::Tape;
    read_server(r, n["tape"], join(path, "tape"), tape, true);
    c.tape = tape;
  }
}

void read_t0t1(Reader& r, const YAML::Node& n, T0T1Spec& s) {
  const std::string path = "t0t1";
  if (!r.map(n, path)) return;
  r.keys(n, path, {"tier0", "epoch_utc_h", "window_bytes", "nodes", "links", "routes", "centers", "agents", "raw",
                   "production", "reproduction", "analysis"});
  r.get(n, "tier0", path, s.tier0);
  r.get(n, "epoch_utc_h", path, s.epoch_utc_h);
  r.get(n, "window_bytes", path, s.topology.window_bytes);
  r.require(s.topology.window_bytes > 0.0, n, "window_bytes", path, "must be positive");
  r.get(n, "nodes", path, s.topology.nodes);

  std::set<std::string> nodes;
  for (const auto& name : s.topology.nodes) {
    if (!nodes.insert(name).second) r.fail(n["nodes"], join(path, "nodes"), "duplicate node " + name);
  }
  if (s.topology.nodes.empty()) r.fail(n, join(path, "nodes"), "at least one node is required");

  const auto links = n["links"];
  const std::string lp = join(path, "links");
  if (r.map(links, lp)) {
    for (const auto& kv : links) {
      const auto id = kv.first.as<std::string>();
      const auto ln = kv.second;
      const std::string p = join(lp, id);
      if (!r.map(ln, p)) continue;
      r.keys(ln, p, {"a", "b", "capacity_bps", "rtt_ms"});
      network::Link link{id, "", "", engine::CapacitySchedule(1.0), 0.0};
      r.require(r.get(ln, "a", p, link.a) && nodes.count(link.a), ln, "a", p, "must name a configured node");
      r.require(r.get(ln, "b", p, link.b) && nodes.count(link.b), ln, "b", p, "must name a configured node");
      if (ln["capacity_bps"].IsDefined()) {
        link.capacity = read_capacity(r, ln["capacity_bps"], join(p, "capacity_bps"));
        for (const auto& pt : link.capacity.points()) {
          r.require(pt.value > 0.0, ln, "capacity_bps", p, "link " + id + ": capacity must be positive");
        }
      } else {
        r.fail(ln, join(p, "capacity_bps"), "required");
      }
      double rtt_ms = 0.0;
      r.get(ln, "rtt_ms", p, rtt_ms);
      r.require(rtt_ms >= 0.0, ln, "rtt_ms", p, "link " + id + ": rtt must not be negative");
      link.rtt_s = rtt_ms / 1000.0;
      s.topology.links.push_back(link);
    }
  }

  const auto routes = n["routes"];
  if (routes.IsDefined() && !routes.IsNull()) {
    if (!routes.IsSequence()) {
      r.fail(routes, join(path, "routes"), "expected a list");
    } else {
      for (std::size_t i = 0; i < routes.size(); ++i) {
        const std::string p = join(path, "routes") + "[" + std::to_string(i) + "]";
        const auto rn = routes[i];
        if (!r.map(rn, p)) continue;
        r.keys(rn, p, {"src", "dst", "links"});
        scenarios::RouteSpec route;
        r.get(rn, "src", p, route.src);
        r.get(rn, "dst", p, route.dst);
        r.get(rn, "links", p, route.links);
        s.topology.routes.push_back(route);
      }
    }
  }
  if (r.issues.empty()) {
    try {
      const auto topo = s.topology.build();
      for (const auto& e : topo.validate()) r.fail(n["links"], lp, e);
    } catch (const engine::SimulationError& e) {
      r.fail(n["routes"].IsDefined() ? n["routes"] : n, join(path, "routes"), e.what());
    }
  }

  const auto centers = n["centers"];
  const std::string cp = join(path, "centers");
  std::set<std::string> names;
  if (r.map(centers, cp)) {
    for (const auto& kv : centers) {
      CenterSpec c;
      c.name = kv.first.as<std::string>();
      if (!nodes.count(c.name)) r.fail(kv.first, join(cp, c.name), "center is not a configured node");
      read_center(r, kv.second, join(cp, c.name), c);
      names.insert(c.name);
      s.centers.push_back(std::move(c));
    }
  }
  if (!names.count(s.tier0)) r.fail(n, join(path, "tier0"), "tier-0 center " + s.tier0 + " is not configured");

  const auto agents = n["agents"];
  const std::string ap = join(path, "agents");
  if (r.map(agents, ap)) {
    r.keys(agents, ap, {"enabled", "relays"});
    r.get(agents, "enabled", ap, s.agents_enabled);
    const auto relays = agents["relays"];
    const std::string rp = join(ap, "relays");
    if (r.map(relays, rp)) {
      for (const auto& kv : relays) {
        const auto relay = kv.first.as<std::string>();
        std::vector<std::string> downstream;
        try {
          downstream = kv.second.as<std::vector<std::string>>();
        } catch (const YAML::Exception&) {
          r.fail(kv.second, join(rp, relay), "expected a list of centers");
        }
        if (!names.count(relay)) r.fail(kv.first, join(rp, relay), "relay is not a configured center");
        for (const auto& d : downstream) {
          if (!names.count(d)) r.fail(kv.second, join(rp, relay), d + " is not a configured center");
        }
        s.agents.relays[relay] = downstream;
      }
      for (const auto& e : s.agents.validate()) r.fail(relays, rp, e);
    }
  }

  const auto raw = n["raw"];
  const std::string rawp = join(path, "raw");
  s.raw.destinations = s.tier1();
  if (r.map(raw, rawp)) {
    r.keys(raw, rawp,
           {"enabled", "recording_rate", "file_size_mean", "file_size_sd", "destinations", "stop_time"});
    r.get(raw, "enabled", rawp, s.raw.enabled);
    r.get(raw, "recording_rate", rawp, s.raw.recording_rate);
    r.get(raw, "file_size_mean", rawp, s.raw.file_size.mean);
    r.get(raw, "file_size_sd", rawp, s.raw.file_size.relative_sd);
    r.get(raw, "destinations", rawp, s.raw.destinations);
    r.get(raw, "stop_time", rawp, s.raw.stop_time);
    r.require(s.raw.recording_rate > 0.0, raw, "recording_rate", rawp, "must be positive");
    r.require(s.raw.file_size.mean > 0.0, raw, "file_size_mean", rawp, "must be positive");
    r.require(s.raw.file_size.relative_sd >= 0.0, raw, "file_size_sd", rawp, "must not be negative");
  }
  if (s.raw.enabled && s.raw.destinations.empty()) r.fail(raw, join(rawp, "destinations"), "must not be empty");
  for (const auto& d : s.raw.destinations) {
    if (!names.count(d)) r.fail(raw["destinations"], join(rawp, "destinations"), d + " is not a configured center");
  }

  const auto prod = n["production"];
  const std::string pp = join(path, "production");
  if (r.map(prod, pp)) {
    r.keys(prod, pp, {"enabled", "dst_ratio", "dst_sd", "cpu_work_per_raw"});
    r.get(prod, "enabled", pp, s.production.enabled);
    r.get(prod, "dst_ratio", pp, s.production.dst_ratio);
    r.get(prod, "dst_sd", pp, s.production.dst_sd);
    r.get(prod, "cpu_work_per_raw", pp, s.production.cpu_work_per_raw);
    r.require(s.production.dst_ratio > 0.0, prod, "dst_ratio", pp, "must be positive");
    r.require(s.production.dst_sd >= 0.0, prod, "dst_sd", pp, "must not be negative");
    r.require(s.production.cpu_work_per_raw > 0.0, prod, "cpu_work_per_raw", pp, "must be positive");
  }

  const auto rep = n["reproduction"];
  const std::string rpp = join(path, "reproduction");
  if (r.map(rep, rpp)) {
    r.keys(rep, rpp, {"enabled", "start_time", "cpu_work_per_raw", "dst_ratio", "dst_sd", "include_t0"});
    r.get(rep, "enabled", rpp, s.reproduction.enabled);
    r.get(rep, "start_time", rpp, s.reproduction.start_time);
    r.get(rep, "cpu_work_per_raw", rpp, s.reproduction.cpu_work_per_raw);
    r.get(rep, "dst_ratio", rpp, s.reproduction.dst_ratio);
    r.get(rep, "dst_sd", rpp, s.reproduction.dst_sd);
    r.get(rep, "include_t0", rpp, s.reproduction.include_t0);
    r.require(s.reproduction.start_time >= 0.0, rep, "start_time", rpp, "must not be negative");
    r.require(s.reproduction.cpu_work_per_raw > 0.0, rep, "cpu_work_per_raw", rpp, "must be positive");
    r.require(s.reproduction.dst_ratio > 0.0, rep, "dst_ratio", rpp, "must be positive");
    r.require(s.reproduction.dst_sd >= 0.0, rep, "dst_sd", rpp, "must not be negative");
  }

  const auto an = n["analysis"];
  const std::string anp = join(path, "analysis");
  if (r.map(an, anp)) {
    r.keys(an, anp, {"enabled", "centers", "local_start_h", "window_h", "max_parallel"});
    r.get(an, "enabled", anp, s.analysis.enabled);
    r.get(an, "centers", anp, s.analysis.centers);
    r.get(an, "local_start_h", anp, s.analysis.local_start_h);
    r.get(an, "window_h", anp, s.analysis.window_h);
    r.get(an, "max_parallel", anp, s.analysis.max_parallel);
    r.require(s.analysis.window_h > 0.0, an, "window_h", anp, "must be positive");
    r.require(s.analysis.max_parallel >= 1, an, "max_parallel", anp, "must be at least 1");
    for (const auto& c : s.analysis.centers) {
      if (!names.count(c)) r.fail(an["centers"], join(anp, "centers"), c + " is not a configured center");
    }
  }
}

void read_proof(Reader& r, const YAML::Node& n, ProofSpec& s) {
  const std::string path = "proof";
  if (!r.map(n, path)) return;
  r.keys(n, path, {"n_masters", "m_slaves", "s_servers", "slaves_per_master", "p_local", "packet_events",
                   "packets_per_request", "event_bytes", "master_handle_time", "server_service_time",
                   "server_parallelism", "station_cpu_rate", "request_cpu_hours", "think_time_mean",
                   "repeat_requests", "requests_per_master", "lan_bps", "server_lan_bps"});
  r.get(n, "n_masters", path, s.n_masters);
  r.get(n, "m_slaves", path, s.m_slaves);
  r.get(n, "s_servers", path, s.s_servers);
  r.get(n, "slaves_per_master", path, s.slaves_per_master);
  r.get(n, "p_local", path, s.p_local);
  r.get(n, "packet_events", path, s.packet_events);
  r.get(n, "packets_per_request", path, s.packets_per_request);
  r.get(n, "event_bytes", path, s.event_bytes);
  r.get(n, "master_handle_time", path, s.master_handle_time);
  r.get(n, "server_service_time", path, s.server_service_time);
  r.get(n, "server_parallelism", path, s.server_parallelism);
  r.get(n, "station_cpu_rate", path, s.station_cpu_rate);
  r.get(n, "request_cpu_hours", path, s.request_cpu_hours);
  r.get(n, "think_time_mean", path, s.think_time_mean);
  r.get(n, "repeat_requests", path, s.repeat_requests);
  r.get(n, "requests_per_master", path, s.requests_per_master);
  r.get(n, "lan_bps", path, s.lan_bps);
  r.get(n, "server_lan_bps", path, s.server_lan_bps);
  r.require(s.n_masters >= 1, n, "n_masters", path, "must be at least 1");
  r.require(s.m_slaves >= 1, n, "m_slaves", path, "must be at least 1");
  r.require(s.s_servers >= 1, n, "s_servers", path, "must be at least 1");
  r.require(s.slaves_per_master >= 1, n, "slaves_per_master", path, "must be at least 1");
  r.require(static_cast<long>(s.slaves_per_master) * s.n_masters >= s.m_slaves, n, "slaves_per_master", path,
            "slaves_per_master * n_masters must be at least m_slaves");
  r.require(s.p_local >= 0.0 && s.p_local <= 1.0, n, "p_local", path, "must lie in [0, 1]");
  r.require(s.packet_events >= 1, n, "packet_events", path, "must be at least 1");
  r.require(s.packets_per_request >= 1, n, "packets_per_request", path, "must be at least 1");
  r.require(s.event_bytes > 0.0, n, "event_bytes", path, "must be positive");
  r.require(s.master_handle_time >= 0.0, n, "master_handle_time", path, "must not be negative");
  r.require(s.server_service_time >= 0.0, n, "server_service_time", path, "must not be negative");
  r.require(s.server_parallelism >= 1, n, "server_parallelism", path, "must be at least 1");
  r.require(s.station_cpu_rate > 0.0, n, "station_cpu_rate", path, "must be positive");
  r.require(s.request_cpu_hours > 0.0, n, "request_cpu_hours", path, "must be positive");
  r.require(s.think_time_mean > 0.0, n, "think_time_mean", path, "must be positive");
  r.require(s.requests_per_master >= 1, n, "requests_per_master", path, "must be at least 1");
  r.require(s.lan_bps > 0.0, n, "lan_bps", path, "must be positive");
  r.require(s.server_lan_bps > 0.0, n, "server_lan_bps", path, "must be positive");
}

YAML::Node capacity_node(const engine::CapacitySchedule& c) {
  const auto& pts = c.points();
  if (pts.size() == 1 && pts[0].time == 0.0) return YAML::Node(pts[0].value);
  YAML::Node seq(YAML::NodeType::Sequence);
  for (const auto& p : pts) {
    YAML::Node pair(YAML::NodeType::Sequence);
    pair.SetStyle(YAML::EmitterStyle::Flow);
    pair.push_back(p.time);
    pair.push_back(p.value);
    seq.push_back(pair);
  }
  return seq;
}

YAML::Node server_node(const data::ServerSpec& s, bool tape) {
  YAML::Node n;
  n["capacity_bytes"] = s.capacity_bytes;
  n["service_time"] = s.service_time;
  n["parallelism"] = s.parallelism;
  if (tape) n["mount_latency"] = s.mount_latency;
  return n;
}

YAML::Node string_list(const std::vector<std::string>& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (const auto& s : v) n.push_back(s);
  return n;
}

YAML::Node t0t1_node(const T0T1Spec& s) {
  YAML::Node n;
  n["tier0"] = s.tier0;
  n["epoch_utc_h"] = s.epoch_utc_h;
  n["window_bytes"] = s.topology.window_bytes;
  n["nodes"] = string_list(s.topology.nodes);
  YAML::Node links(YAML::NodeType::Map);
  for (const auto& l : s.topology.links) {
    YAML::Node ln;
    ln["a"] = l.a;
    ln["b"] = l.b;
    ln["capacity_bps"] = capacity_node(l.capacity);
    ln["rtt_ms"] = l.rtt_s * 1000.0;
    links[l.id] = ln;
  }
  n["links"] = links;
  YAML::Node routes(YAML::NodeType::Sequence);
  for (const auto& r : s.topology.routes) {
    YAML::Node rn;
    rn["src"] = r.src;
    rn["dst"] = r.dst;
    rn["links"] = string_list(r.links);
    routes.push_back(rn);
  }
  n["routes"] = routes;
  YAML::Node centers(YAML::NodeType::Map);
  for (const auto& c : s.centers) {
    YAML::Node cn;
    cn["utc_offset_h"] = c.utc_offset_h;
    YAML::Node farm;
    farm["cpu_count"] = c.farm.cpu_count;
    farm["cpu_rate"] = c.farm.cpu_rate;
    farm["job_slots"] = c.farm.job_slots;
    farm["threshold"] = c.farm.threshold;
    cn["farm"] = farm;
    cn["disk"] = server_node(c.disk, false);
    if (c.tape) cn["tape"] = server_node(*c.tape, true);
    centers[c.name] = cn;
  }
  n["centers"] = centers;
  YAML::Node agents;
  agents["enabled"] = s.agents_enabled;
  YAML::Node relays(YAML::NodeType::Map);
  for (const auto& [relay, down] : s.agents.relays) relays[relay] = string_list(down);
  agents["relays"] = relays;
  n["agents"] = agents;
  YAML::Node raw;
  raw["enabled"] = s.raw.enabled;
  raw["recording_rate"] = s.raw.recording_rate;
  raw["file_size_mean"] = s.raw.file_size.mean;
  raw["file_size_sd"] = s.raw.file_size.relative_sd;
  raw["destinations"] = string_list(s.raw.destinations);
  raw["stop_time"] = s.raw.stop_time;
  n["raw"] = raw;
  YAML::Node prod;
  prod["enabled"] = s.production.enabled;
  prod["dst_ratio"] = s.production.dst_ratio;
  prod["dst_sd"] = s.production.dst_sd;
  prod["cpu_work_per_raw"] = s.production.cpu_work_per_raw;
  n["production"] = prod;
  YAML::Node rep;
  rep["enabled"] = s.reproduction.enabled;
  rep["start_time"] = s.reproduction.start_time;
  rep["cpu_work_per_raw"] = s.reproduction.cpu_work_per_raw;
  rep["dst_ratio"] = s.reproduction.dst_ratio;
  rep["dst_sd"] = s.reproduction.dst_sd;
  rep["include_t0"] = s.reproduction.include_t0;
  n["reproduction"] = rep;
  YAML::Node an;
  an["enabled"] = s.analysis.enabled;
  an["centers"] = string_list(s.analysis.centers);
  an["local_start_h"] = s.analysis.local_start_h;
  an["window_h"] = s.analysis.window_h;
  an["max_parallel"] = s.analysis.max_parallel;
  n["analysis"] = an;
  return n;
}

YAML::Node proof_node(const ProofSpec& s) {
  YAML::Node n;
  n["n_masters"] = s.n_masters;
  n["m_slaves"] = s.m_slaves;
  n["s_servers"] = s.s_servers;
  n["slaves_per_master"] = s.slaves_per_master;
  n["p_local"] = s.p_local;
  n["packet_events"] = s.packet_events;
  n["packets_per_request"] = s.packets_per_request;
  n["event_bytes"] = s.event_bytes;
  n["master_handle_time"] = s.master_handle_time;
  n["server_service_time"] = s.server_service_time;
  n["server_parallelism"] = s.server_parallelism;
  n["station_cpu_rate"] = s.station_cpu_rate;
  n["request_cpu_hours"] = s.request_cpu_hours;
  n["think_time_mean"] = s.think_time_mean;
  n["repeat_requests"] = s.repeat_requests;
  n["requests_per_master"] = s.requests_per_master;
  n["lan_bps"] = s.lan_bps;
  n["server_lan_bps"] = s.server_lan_bps;
  return n;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}

YAML::Node load_yaml_file(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError({ConfigIssue{path, 0, "cannot read file"}});
  } catch (const YAML::ParserException& e) {
    throw ConfigError({ConfigIssue{path, e.mark.line + 1, e.msg}});
  }
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError({ConfigIssue{text, 0, "expected key=value"}});
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

void apply_override(YAML::Node& root, const std::string& dotted_key, const std::string& value) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(dotted_key);
  while (std::getline(in, part, '.')) {
    if (part.empty()) throw ConfigError({ConfigIssue{dotted_key, 0, "empty path component"}});
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError({ConfigIssue{dotted_key, 0, "empty key"}});
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError({ConfigIssue{dotted_key, 0, "cannot parse value: " + e.msg}});
  }
  // Node assignment aliases in yaml-cpp, so walk with fresh handles.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node cur = chain.back();
    if (cur.IsDefined() && !cur.IsNull() && !cur.IsMap()) {
      throw ConfigError({ConfigIssue{dotted_key, line_of(cur), parts[i] + " is not a mapping"}});
    }
    chain.push_back(cur[parts[i]]);
  }
  YAML::Node leaf = chain.back();
  if (leaf.IsDefined() && !leaf.IsNull() && !leaf.IsMap()) {
    throw ConfigError({ConfigIssue{dotted_key, line_of(leaf), "parent is not a mapping"}});
  }
  leaf[parts.back()] = parsed;
}

ScenarioConfig parse_config(const YAML::Node& root) {
  Reader r;
  ScenarioConfig cfg;
  if (!root.IsMap()) throw ConfigError({ConfigIssue{"<root>", line_of(root), "expected a mapping"}});
  r.keys(root, "", {"run", "t0t1", "proof"});
  read_run(r, root["run"], cfg.run);
  const bool t0t1 = root["t0t1"].IsDefined();
  const bool proof = root["proof"].IsDefined();
  if (t0t1 == proof) {
    r.fail(root, "<root>", "exactly one of the t0t1 or proof sections is required");
  } else if (t0t1) {
    T0T1Spec s;
    read_t0t1(r, root["t0t1"], s);
    cfg.spec = std::move(s);
  } else {
    ProofSpec s;
    read_proof(r, root["proof"], s);
    cfg.spec = s;
  }
  if (!r.issues.empty()) throw ConfigError(std::move(r.issues));
  return cfg;
}

ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  YAML::Node root = load_yaml_file(path);
  for (const auto& o : overrides) {
    const auto [key, value] = split_assignment(o);
    apply_override(root, key, value);
  }
  return parse_config(root);
}

std::string dump_config(const ScenarioConfig& config) {
  YAML::Node root;
  root["run"]["seed"] = config.run.seed;
  root["run"]["duration"] = config.run.duration;
  root["run"]["metrics_interval"] = config.run.metrics_interval;
  if (const auto* t = std::get_if<T0T1Spec>(&config.spec)) {
    root["t0t1"] = t0t1_node(*t);
  } else {
    root["proof"] = proof_node(std::get<ProofSpec>(config.spec));
  }
  YAML::Emitter out;
  out.SetDoublePrecision(15);
  out << root;
  return std::string(out.c_str()) + "\n";
}

scenarios::RunResult run_scenario(const ScenarioConfig& config) {
  if (const auto* t = std::get_if<T0T1Spec>(&config.spec)) {
    return scenarios::run_t0t1(*t, config.run.seed, config.run.duration, config.run.metrics_interval);
  }
  return scenarios::run_proof(std::get<ProofSpec>(config.spec), config.run.seed, config.run.duration,
                              config.run.metrics_interval);
}

}  // namespace gridflow::harness
