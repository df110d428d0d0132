#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gridflow/config.hpp"
#include "gridflow/engine.hpp"
#include "gridflow/network.hpp"
#include "gridflow/oracle.hpp"
#include "gridflow/report.hpp"

namespace py = pybind11;
using namespace gridflow;

namespace {

std::vector<harness::OracleResource> to_resources(const py::list& items) {
  std::vector<harness::OracleResource> out;
  for (const auto& item : items) {
    const auto d = item.cast<py::dict>();
    harness::OracleResource r;
    r.capacity = d["capacity"].cast<double>();
    for (const auto& c : d["claims"].cast<py::list>()) {
      const auto cd = c.cast<py::dict>();
      harness::OracleClaim cl;
      cl.id = cd["id"].cast<std::string>();
      cl.start = cd.contains("start") ? cd["start"].cast<double>() : 0.0;
      cl.work = cd["work"].cast<double>();
      if (cd.contains("weight")) cl.weight = cd["weight"].cast<double>();
      if (cd.contains("cap")) cl.cap = cd["cap"].cast<double>();
      r.claims.push_back(cl);
    }
    out.push_back(std::move(r));
  }
  return out;
}

py::list transfers_of(const scenarios::RunResult& r) {
  py::list out;
  for (const auto& t : r.transfers) {
    py::dict d;
    d["file_id"] = t.file;
    d["class"] = data::to_string(t.cls);
    d["src"] = t.src;
    d["dst"] = t.dst;
    d["size_bytes"] = t.size_bytes;
    d["t_start_s"] = t.start;
    d["t_end_s"] = t.end;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event-driven grid simulator: scenario runs, rate allocation and the timestep oracle";

  static py::exception<harness::ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception<engine::SimulationError>(m, "SimulationError", PyExc_RuntimeError);

  py::class_<harness::ScenarioConfig>(m, "ScenarioConfig")
      .def_property_readonly("is_proof", &harness::ScenarioConfig::is_proof)
      .def_property_readonly("seed", [](const harness::ScenarioConfig& c) { return c.run.seed; })
      .def_property_readonly("duration", [](const harness::ScenarioConfig& c) { return c.run.duration; })
      .def_property_readonly("metrics_interval",
                             [](const harness::ScenarioConfig& c) { return c.run.metrics_interval; })
      .def("dump", &harness::dump_config);

  py::class_<scenarios::RunResult>(m, "RunResult")
      .def_readonly("stats", &scenarios::RunResult::stats)
      .def_readonly("audit_violations", &scenarios::RunResult::audit_violations)
      .def_readonly("trace_hash", &scenarios::RunResult::trace_hash)
      .def_readonly("duration", &scenarios::RunResult::duration)
      .def_property_readonly("transfers", &transfers_of)
      .def_property_readonly("job_count", [](const scenarios::RunResult& r) { return r.jobs.size(); })
      .def_property_readonly("events_processed",
                             [](const scenarios::RunResult& r) { return r.report.events_processed; })
      .def("summary", [](const scenarios::RunResult& r) { return harness::format_summary(harness::summarize(r), r); })
      .def(
          "write_outputs",
          [](const scenarios::RunResult& r, const std::string& dir, const harness::ScenarioConfig& cfg) {
            harness::write_outputs(dir, r, harness::dump_config(cfg));
          },
          py::arg("dir"), py::arg("config"));

  m.def(
      "load_config",
      [](const std::string& path, const std::vector<std::string>& overrides) {
        try {
          return harness::load_config(path, overrides);
        } catch (const harness::ConfigError& e) {
          PyErr_SetString(config_error.ptr(), e.what());
          throw py::error_already_set();
        }
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

  m.def("run", &harness::run_scenario, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "water_fill",
      [](double capacity, const std::vector<double>& weights, std::optional<std::vector<double>> caps) {
        const auto c = caps.value_or(std::vector<double>(weights.size(), engine::kInfinity));
        return engine::water_fill(capacity, weights, c);
      },
      py::arg("capacity"), py::arg("weights"), py::arg("caps") = py::none());

  m.def(
      "allocate_rates",
      [](const std::vector<double>& capacity, const std::vector<std::vector<std::size_t>>& paths,
         std::optional<std::vector<double>> caps) {
        std::vector<network::FlowSpec> flows;
        for (std::size_t i = 0; i < paths.size(); ++i) {
          flows.push_back({paths[i], caps ? caps->at(i) : engine::kInfinity});
        }
        return network::allocate_rates(capacity, flows);
      },
      py::arg("capacity"), py::arg("paths"), py::arg("caps") = py::none());

  m.def(
      "oracle_resources",
      [](const py::list& resources, double dt) { return harness::oracle_resources(to_resources(resources), dt); },
      py::arg("resources"), py::arg("dt") = 1e-3);
  m.def(
      "engine_resources", [](const py::list& resources) { return harness::engine_resources(to_resources(resources)); },
      py::arg("resources"));
}
