#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ctxlora/errors.hpp"
#include "ctxlora/io.hpp"
#include "ctxlora/optimizer.hpp"
#include "ctxlora/plan.hpp"
#include "ctxlora/schedule.hpp"
#include "ctxlora/task_graph.hpp"
#include "ctxlora/trainer.hpp"

namespace py = pybind11;
using namespace ctxlora;
using io::Json;

// Documents cross the boundary as JSON text; the Python package wraps them
// in json.loads/json.dumps.
namespace {

TaskGraph graph_of(const std::string& text) { return io::graph_from_json(Json::parse(text)); }
CostModel costs_of(const std::string& text) { return io::cost_model_from_json(Json::parse(text)); }

double delta_of(std::optional<double> frozen_ratio, std::optional<double> delta) {
  if (frozen_ratio && delta) throw ConfigError("give frozen_ratio or delta, not both");
  if (delta) return *delta;
  if (frozen_ratio) return delta_from_frozen_ratio(*frozen_ratio);
  return 0.0;
}

BlockLayout layout_of(const TaskGraph& g, std::size_t d_out, std::size_t d_in, std::size_t rank) {
  return partition_blocks(d_out, d_in ? d_in : 4 * g.size(), rank, g);
}

std::vector<std::string> all_devices(const CostModel& cm) {
  std::vector<std::string> ids;
  for (const auto& d : cm.devices()) ids.push_back(d.id);
  return ids;
}

std::string layers(const std::string& graph) {
  const auto g = graph_of(graph);
  return io::layers_to_json(g, extract_layers(g)).dump();
}

std::string plan(const std::string& graph, std::size_t d_out, std::size_t d_in, std::size_t rank,
                 std::optional<double> frozen_ratio, std::optional<double> delta) {
  const auto g = graph_of(graph);
  const auto p = build_plan(g, layout_of(g, d_out, d_in, rank), delta_of(frozen_ratio, delta));
  auto doc = io::plan_to_json(p);
  doc["validation"] = io::validation_to_json(validate_plan(p));
  doc["walkthrough"] = io::stage_walkthrough(p, extract_layers(g));
  return doc.dump();
}

std::string train(const std::string& graph, std::uint64_t seed, std::size_t d_out, std::size_t d_in,
                  std::size_t rank, std::optional<double> frozen_ratio, std::optional<double> delta,
                  std::size_t steps, double lr, std::size_t samples, double noise) {
  const auto g = graph_of(graph);
  const auto layout = layout_of(g, d_out, d_in, rank);
  const auto model = init_model(layout, seed);
  DatasetOptions opts;
  opts.samples_per_task = samples;
  opts.noise = noise;
  const auto data = synthesize_dataset(model, g, seed + 1, opts);
  const auto p = build_plan(g, layout, delta_of(frozen_ratio, delta));
  RunResult run;
  {
    py::gil_scoped_release release;
    run = run_plan(model, p, data, steps, lr);
  }
  Json stages = Json::array();
  for (const auto& r : run.stages) {
    Json norms = Json::object();
    for (TaskId t = 0; t < r.change_norms.size(); ++t) norms[g.name(t)] = r.change_norms[t];
    stages.push_back(Json{{"stage", r.stage_index},
                          {"trainee", g.name(r.trainee)},
                          {"loss", r.final_loss},
                          {"loss_history", r.loss_history},
                          {"delta_norms", norms}});
  }
  return Json{{"stages", stages},
              {"audit", io::audit_to_json(g, validate_plan(p), run.stages)},
              {"checkpoint", io::checkpoint_to_json(g, run.model)}}
      .dump();
}

std::string simulate_assignment(const std::string& costs, std::vector<std::string> train_devices,
                                std::vector<std::string> partition, std::size_t k, std::size_t dataset_size,
                                std::vector<std::string> offload, bool serial) {
  const auto cm = costs_of(costs);
  const auto work = workload_from_roles(cm);
  Grouping grouping;
  std::sort(train_devices.begin(), train_devices.end());
  grouping.train_devices = train_devices;
  for (const auto& d : all_devices(cm)) {
    if (!std::binary_search(train_devices.begin(), train_devices.end(), d)) grouping.frozen_devices.push_back(d);
  }
  std::sort(grouping.frozen_devices.begin(), grouping.frozen_devices.end());
  std::sort(offload.begin(), offload.end());
  grouping.offloaded = offload;
  validate_grouping(grouping, cm, work);
  const auto s = build_schedule(work, grouping, make_partition(partition, grouping), k,
                                micro_batch_count(dataset_size, k));
  const auto trace = serial ? simulate_serial(s, cm) : simulate(s, cm);
  const auto c = group_completion(trace);
  Json util = Json::object();
  for (const auto& d : trace.devices) util[d.device] = trace.makespan > 0 ? d.busy / trace.makespan : 0.0;
  return Json{{"makespan", trace.makespan},
              {"C_T", c.train},
              {"C_F", c.frozen},
              {"utilization", util},
              {"violations", check_trace(s, trace, cm)},
              {"gantt", io::gantt_to_json(s, trace)}}
      .dump();
}

std::string optimize_profile(const std::string& costs, std::size_t k_max, std::size_t dataset_size,
                             std::optional<std::vector<std::string>> devices) {
  const auto cm = costs_of(costs);
  const auto work = workload_from_roles(cm);
  OptResult r;
  {
    py::gil_scoped_release release;
    r = optimize(cm, work, devices ? *devices : all_devices(cm), cm.layers().size(), k_max, dataset_size);
  }
  return io::opt_result_to_json(r).dump();
}

std::string gap(const std::string& costs, std::optional<std::vector<std::string>> devices) {
  const auto cm = costs_of(costs);
  const auto g = minimize_gap(cm, workload_from_roles(cm), devices ? *devices : all_devices(cm));
  return Json{{"D_t", g.grouping.train_devices},
              {"D_f", g.grouping.frozen_devices},
              {"offloaded", g.grouping.offloaded},
              {"V_t", g.train_tasks},
              {"V_f", g.frozen_tasks},
              {"G_c", g.gap}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ContextLoRA core";

  // Translators run newest first, so the base class goes in before its subclasses.
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<CycleError>(m, "CycleError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("layers", &layers, py::arg("graph"));
  m.def("plan", &plan, py::arg("graph"), py::arg("d_out"), py::arg("d_in"), py::arg("rank"),
        py::arg("frozen_ratio") = py::none(), py::arg("delta") = py::none());
  m.def("train", &train, py::arg("graph"), py::arg("seed"), py::arg("d_out"), py::arg("d_in"), py::arg("rank"),
        py::arg("frozen_ratio") = py::none(), py::arg("delta") = py::none(), py::arg("steps") = 200,
        py::arg("lr") = 0.05, py::arg("samples") = 32, py::arg("noise") = 0.01);
  m.def("simulate", &simulate_assignment, py::arg("costs"), py::arg("train_devices"), py::arg("partition"),
        py::arg("k"), py::arg("dataset_size"), py::arg("offload") = std::vector<std::string>{},
        py::arg("serial") = false);
  m.def("optimize", &optimize_profile, py::arg("costs"), py::arg("k_max"), py::arg("dataset_size"),
        py::arg("devices") = py::none());
  m.def("minimize_gap", &gap, py::arg("costs"), py::arg("devices") = py::none());
}
