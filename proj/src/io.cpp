#include "ctxlora/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ctxlora/errors.hpp"

namespace ctxlora::io {

namespace {

// Shortest text that round-trips the double.
std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T required(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + ": bad \"" + key + "\": " + e.what());
  }
}

Json range_json(const ColumnRange& r) { return Json::array({r.begin, r.end}); }

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

TaskGraph graph_from_json(const Json& doc) {
  auto tasks = required<std::vector<std::string>>(doc, "tasks", "graph");
  std::vector<std::pair<std::string, std::string>> edges;
  if (doc.contains("edges")) {
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
        throw ConfigError("graph: every edge must be a [from, to] pair of task names");
      }
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  return TaskGraph::build(std::move(tasks), edges);
}

Json graph_to_json(const TaskGraph& g) {
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back({g.name(e.from), g.name(e.to)});
  return Json{{"tasks", g.names()}, {"edges", edges}};
}

Json layers_to_json(const TaskGraph& g, const LayerList& layers) {
  Json out = Json::array();
  for (const auto& layer : layers.layers) {
    Json names = Json::array();
    for (TaskId t : layer) names.push_back(g.name(t));
    out.push_back(names);
  }
  return Json{{"layers", out}};
}

Json layout_to_json(const TaskGraph& g, const BlockLayout& layout) {
  Json segments = Json::object();
  for (TaskId t = 0; t < layout.task_count(); ++t) segments[g.name(t)] = range_json(layout.segments[t]);
  return Json{{"d_out", layout.d_out}, {"d_in", layout.d_in}, {"rank", layout.rank}, {"segments", segments}};
}

Json stage_to_json(const TaskGraph& g, const StagePlan& sp) {
  Json train = Json::object(), freeze = Json::object(), mask = Json::array();
  for (const auto& s : sp.train) train[g.name(s.task)] = range_json(s.cols);
  for (const auto& s : sp.freeze) freeze[g.name(s.task)] = range_json(s.cols);
  for (TaskId t : sp.mask) mask.push_back(g.name(t));
  return Json{{"stage", sp.stage_index}, {"trainee", g.name(sp.trainee)}, {"train", train},
              {"freeze", freeze},        {"mask", mask}};
}

Json plan_to_json(const TrainingPlan& plan) {
  Json stages = Json::array();
  for (const auto& sp : plan.stages) stages.push_back(stage_to_json(plan.graph, sp));
  return Json{{"delta", plan.delta},
              {"frozen_ratio", 1.0 - plan.delta},
              {"layout", layout_to_json(plan.graph, plan.layout)},
              {"stages", stages}};
}

std::string stage_walkthrough(const TrainingPlan& plan, const LayerList& layers) {
  const auto& g = plan.graph;
  std::ostringstream os;
  os << "layers:";
  for (const auto& layer : layers.layers) {
    os << " [";
    for (std::size_t i = 0; i < layer.size(); ++i) os << (i ? ", " : "") << g.name(layer[i]);
    os << "]";
  }
  os << "\n";
  auto names = [&](std::vector<TaskId> ids) {
    std::sort(ids.begin(), ids.end(), [&](TaskId a, TaskId b) { return g.name(a) < g.name(b); });
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) return std::string("-");
    std::string out;
    for (TaskId t : ids) out += (out.empty() ? "" : " ") + g.name(t);
    return out;
  };
  for (const auto& sp : plan.stages) {
    const std::size_t layer = layers.layer_of(sp.trainee);
    const char* phase = layer == 0 ? "Beginning" : layer + 1 == layers.depth() ? "Ending" : "Execution";
    std::vector<TaskId> train, freeze;
    for (const auto& s : sp.train) {
      if (!s.cols.empty()) train.push_back(s.task);
    }
    for (const auto& s : sp.freeze) {
      if (!s.cols.empty()) freeze.push_back(s.task);
    }
    os << "phase " << phase << ": train " << names(train) << "; freeze " << names(freeze) << "; mask "
       << names(sp.mask) << "\n";
  }
  return os.str();
}

Json validation_to_json(const ValidationReport& report) {
  Json items = Json::array();
  for (const auto& v : report.violations) {
    Json item{{"code", v.code}, {"message", v.message}};
    item["stage"] = v.stage ? Json(*v.stage) : Json(nullptr);
    items.push_back(item);
  }
  return Json{{"violations", items.size()}, {"items", items}};
}

CostModel cost_model_from_json(const Json& doc) {
  std::vector<DeviceProfile> devices;
  for (const auto& d : required<Json>(doc, "devices", "costs")) {
    DeviceProfile p;
    p.id = required<std::string>(d, "id", "device");
    p.capacity = required<double>(d, "capacity", "device '" + p.id + "'");
    if (d.contains("links")) {
      for (const auto& [peer, l] : d.at("links").items()) {
        const std::string where = "link " + p.id + "->" + peer;
        p.links[peer] = Link{required<double>(l, "bw", where), l.contains("lat") ? l.at("lat").get<double>() : 0.0};
      }
    }
    devices.push_back(std::move(p));
  }

  std::vector<LayerCost> layers;
  for (const auto& l : required<Json>(doc, "layers", "costs")) {
    LayerCost lc;
    lc.fwd_work = required<double>(l, "fwd", "layer " + std::to_string(layers.size()));
    lc.bwd_work = l.contains("bwd") ? l.at("bwd").get<double>() : kDefaultBackwardRatio * lc.fwd_work;
    lc.act_bytes = l.contains("act_bytes") ? l.at("act_bytes").get<double>() : 0.0;
    layers.push_back(lc);
  }

  std::vector<TaskLoad> tasks;
  if (doc.contains("tasks")) {
    for (const auto& t : doc.at("tasks")) {
      TaskLoad load;
      load.id = required<std::string>(t, "id", "task");
      load.req_train = required<double>(t, "req_train", "task '" + load.id + "'");
      load.req_frozen = required<double>(t, "req_frozen", "task '" + load.id + "'");
      if (t.contains("role")) {
        const auto role = t.at("role").get<std::string>();
        if (role != "train" && role != "frozen") throw ConfigError("task '" + load.id + "': role must be train or frozen");
        load.training = role == "train";
      }
      tasks.push_back(std::move(load));
    }
  }
  return CostModel(std::move(devices), std::move(layers), std::move(tasks));
}

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (double v : m.data()) data.push_back(v);
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const Json& doc) {
  const auto rows = required<std::size_t>(doc, "rows", "matrix");
  const auto cols = required<std::size_t>(doc, "cols", "matrix");
  const auto data = required<std::vector<double>>(doc, "data", "matrix");
  if (data.size() != rows * cols) throw ConfigError("matrix: data length does not match rows * cols");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

Json checkpoint_to_json(const TaskGraph& g, const ToyModel& m) {
  Json blocks = Json::object();
  for (TaskId t = 0; t < m.blocks.size(); ++t) {
    blocks[g.name(t)] = Json{{"B", matrix_to_json(m.blocks[t].B)}, {"A", matrix_to_json(m.blocks[t].A)}};
  }
  return Json{{"layout", layout_to_json(g, m.layout)}, {"W0", matrix_to_json(m.base)}, {"blocks", blocks}};
}

ToyModel checkpoint_from_json(const Json& doc, const TaskGraph& g) {
  const auto& lj = required<Json>(doc, "layout", "checkpoint");
  BlockLayout layout;
  layout.d_out = required<std::size_t>(lj, "d_out", "layout");
  layout.d_in = required<std::size_t>(lj, "d_in", "layout");
  layout.rank = required<std::size_t>(lj, "rank", "layout");
  const auto& segs = required<Json>(lj, "segments", "layout");
  ToyModel m;
  for (TaskId t = 0; t < g.size(); ++t) {
    const auto r = required<std::vector<std::size_t>>(segs, g.name(t).c_str(), "layout segments");
    if (r.size() != 2) throw ConfigError("layout segments: expected [begin, end]");
    layout.segments.push_back({r[0], r[1]});
    const auto& bj = required<Json>(required<Json>(doc, "blocks", "checkpoint"), g.name(t).c_str(), "blocks");
    m.blocks.push_back({matrix_from_json(required<Json>(bj, "B", "block")), matrix_from_json(required<Json>(bj, "A", "block"))});
  }
  m.layout = layout;
  m.base = matrix_from_json(required<Json>(doc, "W0", "checkpoint"));
  return m;
}

std::string stage_results_jsonl(const TaskGraph& g, const std::vector<StageResult>& results) {
  std::string out;
  for (const auto& r : results) {
    Json norms = Json::object();
    for (TaskId t = 0; t < r.change_norms.size(); ++t) norms[g.name(t)] = r.change_norms[t];
    Json line{{"stage", r.stage_index},   {"trainee", g.name(r.trainee)}, {"loss", r.final_loss},
              {"steps", r.steps},         {"delta_norms", norms},          {"audit_violations", r.audit.size()}};
    out += line.dump() + "\n";
  }
  return out;
}

std::string stage_results_csv(const TaskGraph& g, const std::vector<StageResult>& results) {
  std::ostringstream os;
  os << "stage,trainee,loss,steps";
  for (const auto& name : g.names()) os << ",delta_norm_" << name;
  os << "\n";
  for (const auto& r : results) {
    os << r.stage_index << "," << g.name(r.trainee) << "," << fmt_double(r.final_loss) << "," << r.steps;
    for (double v : r.change_norms) os << "," << fmt_double(v);
    os << "\n";
  }
  return os.str();
}

Json audit_to_json(const TaskGraph& g, const ValidationReport& plan_report, const std::vector<StageResult>& results) {
  Json stages = Json::array();
  std::size_t total = plan_report.violations.size();
  for (const auto& r : results) {
    Json findings = Json::array();
    for (const auto& f : r.audit) findings.push_back(Json{{"code", f.code}, {"task", g.name(f.task)}, {"message", f.message}});
    total += r.audit.size();
    stages.push_back(Json{{"stage", r.stage_index},
                          {"trainee", g.name(r.trainee)},
                          {"mask_freeze_ok", r.audit.empty()},
                          {"findings", findings}});
  }
  return Json{{"violations", total}, {"plan", validation_to_json(plan_report)}, {"stages", stages}};
}

Json gantt_to_json(const PipelineSchedule& s, const Trace& trace) {
  Json out = Json::array();
  for (const auto& te : trace.events) {
    const auto& e = s.events[te.event];
    out.push_back(Json{{"device", te.device},
                       {"event", event_name(e.kind)},
                       {"mb", e.micro_batch},
                       {"start", te.start},
                       {"end", te.end},
                       {"layers", Json::array({e.layers.begin, e.layers.end})},
                       {"offloaded", e.offloaded}});
  }
  return out;
}

Json schedule_to_json(const PipelineSchedule& s) {
  Json events = Json::array();
  for (const auto& e : s.events) {
    events.push_back(Json{{"cycle", e.cycle},
                          {"event", event_name(e.kind)},
                          {"mb", e.micro_batch},
                          {"device", e.device},
                          {"layers", Json::array({e.layers.begin, e.layers.end})},
                          {"offloaded", e.offloaded}});
  }
  return Json{{"micro_batches", s.micro_batches},
              {"k", s.batch_size},
              {"D_t", s.grouping.train_devices},
              {"D_f", s.grouping.frozen_devices},
              {"offloaded", s.grouping.offloaded},
              {"Q", s.partition.assignment},
              {"events", events}};
}

std::string trace_summary_csv(const Trace& trace) {
  const auto c = group_completion(trace);
  std::ostringstream os;
  os << "makespan,C_T,C_F";
  for (const auto& d : trace.devices) os << ",util_" << d.device;
  os << "\n" << fmt_double(trace.makespan) << "," << fmt_double(c.train) << "," << fmt_double(c.frozen);
  for (const auto& d : trace.devices) {
    os << "," << fmt_double(trace.makespan > 0.0 ? d.busy / trace.makespan : 0.0);
  }
  os << "\n";
  return os.str();
}

Json opt_result_to_json(const OptResult& r) {
  return Json{{"D_t", r.grouping.train_devices},
              {"V_t", r.train_tasks},
              {"Q", r.partition.assignment},
              {"k", r.batch_size},
              {"C_min", r.c_min},
              {"evaluated", r.evaluated},
              {"D_f", r.grouping.frozen_devices},
              {"offloaded", r.grouping.offloaded},
              {"N_t", r.partition.train_layers},
              {"micro_batches", r.micro_batches},
              {"C_T", r.completion.train},
              {"C_F", r.completion.frozen},
              {"G_c", r.gap}};
}

}  // namespace ctxlora::io
