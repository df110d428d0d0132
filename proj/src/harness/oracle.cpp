#include "gridflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridflow::harness {

std::vector<double> oracle_share(double capacity, const std::vector<double>& weights, const std::vector<double>& caps) {
  const std::size_t n = weights.size();
  std::vector<double> rate(n, 0.0);
  std::vector<bool> frozen(n, false);
  double left = capacity;
  for (;;) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!frozen[i]) w += weights[i];
    }
    if (w <= 0.0) break;
    bool froze = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!frozen[i] && caps[i] < left * weights[i] / w) {
        rate[i] = caps[i];
        frozen[i] = true;
        froze = true;
      }
    }
    if (froze) {
      left = capacity;
      for (std::size_t i = 0; i < n; ++i) {
        if (frozen[i]) left -= rate[i];
      }
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!frozen[i]) rate[i] = left * weights[i] / w;
    }
    break;
  }
  return rate;
}

std::vector<double> oracle_maxmin(const std::vector<double>& capacity, const std::vector<std::vector<std::size_t>>& paths,
                                  const std::vector<double>& caps) {
  const std::size_t n = paths.size();
  std::vector<double> rate(n, 0.0);
  std::vector<bool> frozen(n, false);
  for (std::size_t f = 0; f < n; ++f) {
    if (paths[f].empty() && std::isinf(caps[f])) {
      rate[f] = engine::kInfinity;
      frozen[f] = true;
    }
  }
  for (;;) {
    std::vector<double> used(capacity.size(), 0.0);
    std::vector<int> open(capacity.size(), 0);
    for (std::size_t f = 0; f < n; ++f) {
      for (auto l : paths[f]) {
        used[l] += rate[f];
        if (!frozen[f]) ++open[l];
      }
    }
    double inc = engine::kInfinity;
    for (std::size_t l = 0; l < capacity.size(); ++l) {
      if (open[l] > 0) inc = std::min(inc, (capacity[l] - used[l]) / open[l]);
    }
    for (std::size_t f = 0; f < n; ++f) {
      if (!frozen[f]) inc = std::min(inc, caps[f] - rate[f]);
    }
    if (std::isinf(inc)) break;
    inc = std::max(inc, 0.0);
    for (std::size_t f = 0; f < n; ++f) {
      if (!frozen[f]) rate[f] += inc;
    }
    for (std::size_t l = 0; l < capacity.size(); ++l) used[l] = 0.0;
    for (std::size_t f = 0; f < n; ++f) {
      for (auto l : paths[f]) used[l] += rate[f];
    }
    bool any_open = false;
    for (std::size_t f = 0; f < n; ++f) {
      if (frozen[f]) continue;
      bool stop = rate[f] >= caps[f] * (1.0 - 1e-12);
      for (auto l : paths[f]) stop = stop || used[l] >= capacity[l] * (1.0 - 1e-12);
      if (stop) {
        frozen[f] = true;
      } else {
        any_open = true;
      }
    }
    if (!any_open) break;
  }
  return rate;
}

namespace {

struct Stepper {
  std::vector<double> start;
  std::vector<double> remaining;
  std::vector<double> finish;

  explicit Stepper(std::size_t n) : start(n, 0.0), remaining(n, 0.0), finish(n, engine::kInfinity) {}

  // `rates(active, t)` fills one rate per item; inactive items are ignored.
  template <class Rates>
  void run(double dt, Rates rates) {
    const std::size_t n = start.size();
    std::vector<bool> done(n, false);
    std::size_t left = n;
    double t = 0.0;
    std::vector<bool> active(n, false);
    std::vector<double> rate(n, 0.0);
    while (left > 0) {
      double next_start = engine::kInfinity;
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        active[i] = !done[i] && start[i] <= t;
        any = any || active[i];
        if (!done[i] && start[i] > t) next_start = std::min(next_start, start[i]);
      }
      if (!any) {
        if (std::isinf(next_start)) break;
        t = next_start;
        continue;
      }
      // Arrivals are step breakpoints; otherwise the step is dt.
      const double h = std::min(dt, next_start - t);
      rates(active, rate);
      bool progress = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        if (rate[i] > 0.0) progress = true;
        const double step = rate[i] * h;
        if (rate[i] > 0.0 && remaining[i] <= step) {
          finish[i] = t + remaining[i] / rate[i];
          remaining[i] = 0.0;
          done[i] = true;
          --left;
        } else {
          remaining[i] -= step;
        }
      }
      if (!progress && std::isinf(next_start)) break;
      t += h;
    }
  }
};

}  // namespace

Completions oracle_resources(const std::vector<OracleResource>& resources, double dt) {
  if (!(dt > 0.0)) throw engine::SimulationError("oracle: dt must be positive");
  std::vector<std::pair<std::size_t, const OracleClaim*>> all;
  for (std::size_t r = 0; r < resources.size(); ++r) {
    for (const auto& c : resources[r].claims) all.emplace_back(r, &c);
  }
  Stepper s(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    s.start[i] = all[i].second->start;
    s.remaining[i] = all[i].second->work;
  }
  s.run(dt, [&](const std::vector<bool>& active, std::vector<double>& rate) {
    for (std::size_t r = 0; r < resources.size(); ++r) {
      std::vector<std::size_t> idx;
      std::vector<double> w;
      std::vector<double> caps;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].first == r && active[i]) {
          idx.push_back(i);
          w.push_back(all[i].second->weight);
          caps.push_back(all[i].second->cap);
        }
      }
      const auto share = oracle_share(resources[r].capacity, w, caps);
      for (std::size_t k = 0; k < idx.size(); ++k) rate[idx[k]] = share[k];
    }
  });
  Completions out;
  for (std::size_t i = 0; i < all.size(); ++i) out[all[i].second->id] = s.finish[i];
  return out;
}

Completions oracle_network(const OracleNetwork& network, double dt) {
  if (!(dt > 0.0)) throw engine::SimulationError("oracle: dt must be positive");
  const auto& flows = network.flows;
  Stepper s(flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    s.start[i] = flows[i].start;
    s.remaining[i] = flows[i].bits;
  }
  s.run(dt, [&](const std::vector<bool>& active, std::vector<double>& rate) {
    std::vector<std::size_t> idx;
    std::vector<std::vector<std::size_t>> paths;
    std::vector<double> caps;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      if (!active[i]) continue;
      idx.push_back(i);
      paths.push_back(flows[i].links);
      caps.push_back(flows[i].cap);
    }
    const auto r = oracle_maxmin(network.capacity, paths, caps);
    for (std::size_t k = 0; k < idx.size(); ++k) rate[idx[k]] = r[k];
  });
  Completions out;
  for (std::size_t i = 0; i < flows.size(); ++i) out[flows[i].id] = s.finish[i];
  return out;
}

Completions engine_resources(const std::vector<OracleResource>& resources) {
  engine::Simulator sim;
  auto& driver = sim.spawn<engine::Actor>();
  Completions out;
  std::vector<std::map<engine::ClaimId, std::string>> names(resources.size());
  for (std::size_t r = 0; r < resources.size(); ++r) {
    auto& res = sim.spawn<engine::SharedResource>("r" + std::to_string(r),
                                                  engine::CapacitySchedule(resources[r].capacity));
    res.start(sim);
    res.set_on_complete([&out, &names, r](const engine::Claim& c, double now) { out[names[r].at(c.id)] = now; });
    for (const auto& c : resources[r].claims) {
      out[c.id] = engine::kInfinity;
      driver.after(sim, c.start, [&res, &names, r, c](engine::Simulator& sim, const engine::SimEvent&) {
        engine::ClaimSpec spec;
        spec.work = c.work;
        spec.weight = c.weight;
        spec.cap = c.cap;
        names[r][res.join(sim, spec)] = c.id;
      });
    }
  }
  sim.run_until(engine::kInfinity);
  return out;
}

namespace {

double number_or_inf(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return engine::kInfinity;
  return j[key].get<double>();
}

}  // namespace

Trace parse_trace(const std::string& json_text) {
  Trace trace;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    if (j.contains("resources")) {
      for (const auto& r : j.at("resources")) {
        OracleResource res;
        res.capacity = r.at("capacity").get<double>();
        for (const auto& c : r.at("claims")) {
          OracleClaim claim;
          claim.id = c.at("id").get<std::string>();
          claim.start = c.value("start", 0.0);
          claim.work = c.at("work").get<double>();
          claim.weight = c.value("weight", 1.0);
          claim.cap = number_or_inf(c, "cap");
          res.claims.push_back(claim);
        }
        trace.resources.push_back(std::move(res));
      }
    } else if (j.contains("links")) {
      trace.is_network = true;
      std::map<std::string, std::size_t> index;
      for (const auto& l : j.at("links")) {
        index[l.at("id").get<std::string>()] = trace.network.link_ids.size();
        trace.network.link_ids.push_back(l.at("id").get<std::string>());
        trace.network.capacity.push_back(l.at("capacity").get<double>());
      }
      for (const auto& f : j.at("flows")) {
        OracleFlow flow;
        flow.id = f.at("id").get<std::string>();
        flow.start = f.value("start", 0.0);
        flow.bits = f.at("bits").get<double>();
        flow.cap = number_or_inf(f, "cap");
        for (const auto& l : f.at("links")) {
          auto it = index.find(l.get<std::string>());
          if (it == index.end()) throw engine::SimulationError("trace: unknown link " + l.get<std::string>());
          flow.links.push_back(it->second);
        }
        trace.network.flows.push_back(std::move(flow));
      }
    } else {
      throw engine::SimulationError("trace: expected a \"resources\" or \"links\" section");
    }
  } catch (const nlohmann::json::exception& e) {
    throw engine::SimulationError(std::string("trace: ") + e.what());
  }
  return trace;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw engine::SimulationError("cannot read trace file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_trace(text.str());
}

}  // namespace gridflow::harness
