#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctxlora/errors.hpp"
#include "ctxlora/io.hpp"
#include "ctxlora/optimizer.hpp"
#include "ctxlora/plan.hpp"
#include "ctxlora/schedule.hpp"
#include "ctxlora/task_graph.hpp"
#include "ctxlora/trainer.hpp"

namespace fs = std::filesystem;
using namespace ctxlora;
using io::Json;

namespace {

constexpr int kViolations = 1;
constexpr int kError = 2;

struct Options {
  std::string graph, costs, out, trainee;
  std::optional<double> frozen_ratio, delta;
  std::uint64_t seed = 0;
  std::size_t d_out = 4, d_in = 0, rank = 2;
  std::size_t steps = 200, samples = 32;
  double lr = 0.05, noise = 0.01, coupling = 0.0;
  std::size_t k_max = 4, k = 1, dataset = 32;
  std::vector<std::string> devices, train_devices, offload, partition;
  bool corrupt = false, serial = false;
};

void add_graph(CLI::App* c, Options& o, bool required) {
  auto* opt = c->add_option("--graph", o.graph, "task graph JSON")->envname("CTXLORA_GRAPH")->check(CLI::ExistingFile);
  if (required) opt->required();
}

void add_ratio(CLI::App* c, Options& o) {
  auto* fr = c->add_option("--frozen-ratio", o.frozen_ratio, "fraction of prerequisite columns held fixed (1 - delta)")
                 ->envname("CTXLORA_FROZEN_RATIO")
                 ->check(CLI::Range(0.0, 1.0));
  auto* d = c->add_option("--delta", o.delta, "activated fraction of prerequisite columns")
                ->envname("CTXLORA_DELTA")
                ->check(CLI::Range(0.0, 1.0));
  fr->excludes(d);
}

void add_dims(CLI::App* c, Options& o) {
  c->add_option("--d-out", o.d_out, "adapter output dimension")->envname("CTXLORA_D_OUT")->check(CLI::PositiveNumber);
  c->add_option("--d-in", o.d_in, "adapter input dimension (default 4 per task)")->envname("CTXLORA_D_IN");
  c->add_option("--rank", o.rank, "LoRA rank")->envname("CTXLORA_RANK")->check(CLI::PositiveNumber);
}

void add_costs(CLI::App* c, Options& o) {
  c->add_option("--costs", o.costs, "cost profile JSON")->envname("CTXLORA_COSTS")->required()->check(CLI::ExistingFile);
  c->add_option("--dataset-size", o.dataset, "samples per epoch")->envname("CTXLORA_DATASET_SIZE")
      ->check(CLI::PositiveNumber);
  c->add_option("--devices", o.devices, "restrict to these devices")->delimiter(',');
  c->add_option("--trainee", o.trainee, "stage to schedule (needs --graph; default: task roles in --costs)");
  add_graph(c, o, false);
  add_ratio(c, o);
  c->add_option("--d-in", o.d_in, "adapter input dimension used to classify prerequisites");
}

void add_assignment(CLI::App* c, Options& o) {
  c->add_option("--train-devices", o.train_devices, "D_t")->delimiter(',')->required();
  c->add_option("--offload", o.offload, "frozen tasks run on D_t")->delimiter(',');
  c->add_option("--partition", o.partition, "device per model layer")->delimiter(',')->required();
  c->add_option("--k", o.k, "micro-batch size")->envname("CTXLORA_K")->check(CLI::PositiveNumber);
}

double delta_of(const Options& o) {
  if (o.delta) return *o.delta;
  if (o.frozen_ratio) return delta_from_frozen_ratio(*o.frozen_ratio);
  return 0.0;
}

TaskGraph load_graph(const Options& o) { return io::graph_from_json(io::read_json_file(o.graph)); }

BlockLayout layout_for(const Options& o, const TaskGraph& g) {
  const std::size_t d_in = o.d_in ? o.d_in : 4 * g.size();
  return partition_blocks(o.d_out, d_in, o.rank, g);
}

void write(const Options& o, const std::string& name, const std::string& text) {
  fs::create_directories(o.out);
  io::write_text_file(fs::path(o.out) / name, text);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Stage with the most to break: duplicate a frozen slice into train, or
// failing that, train a masked block.
void corrupt_plan(TrainingPlan& plan) {
  for (auto& sp : plan.stages) {
    if (!sp.freeze.empty()) {
      sp.train.push_back(sp.freeze.front());
      return;
    }
  }
  for (auto& sp : plan.stages) {
    if (!sp.mask.empty()) {
      const TaskId t = sp.mask.front();
      sp.train.push_back(BlockSlice{t, ColumnRange{0, plan.layout.width(t)}});
      return;
    }
  }
  throw ConfigError("plan has no frozen or masked block to corrupt");
}

int cmd_validate(const Options& o) {
  const auto g = load_graph(o);
  const auto layers = extract_layers(g);
  std::cout << io::layers_to_json(g, layers).dump() << "\n";
  if (!o.out.empty()) write(o, "layers.json", dump(io::layers_to_json(g, layers)));
  return 0;
}

int cmd_plan(const Options& o) {
  const auto g = load_graph(o);
  const auto plan = build_plan(g, layout_for(o, g), delta_of(o));
  const auto report = validate_plan(plan);
  std::cout << io::stage_walkthrough(plan, extract_layers(g));
  if (!o.out.empty()) write(o, "plan.json", dump(io::plan_to_json(plan)));
  for (const auto& v : report.violations) std::cerr << "violation " << v.code << ": " << v.message << "\n";
  return report.ok() ? 0 : kViolations;
}

int cmd_train(const Options& o) {
  const auto g = load_graph(o);
  const auto layout = layout_for(o, g);
  const auto model = init_model(layout, o.seed);
  DatasetOptions dopts;
  dopts.samples_per_task = o.samples;
  dopts.noise = o.noise;
  dopts.input_coupling = o.coupling;
  const auto data = synthesize_dataset(model, g, o.seed + 1, dopts);
  auto plan = build_plan(g, layout, delta_of(o));
  if (o.corrupt) corrupt_plan(plan);
  const auto report = validate_plan(plan);
  const auto run = run_plan(model, plan, data, o.steps, o.lr);

  const auto audit = io::audit_to_json(g, report, run.stages);
  write(o, "plan.json", dump(io::plan_to_json(plan)));
  write(o, "stages.csv", io::stage_results_csv(g, run.stages));
  write(o, "stages.jsonl", io::stage_results_jsonl(g, run.stages));
  write(o, "checkpoint.json", dump(io::checkpoint_to_json(g, run.model)));
  write(o, "audit.json", dump(audit));

  const std::size_t violations = audit.at("violations").get<std::size_t>();
  std::cout << "stages " << run.stages.size() << ", violations " << violations << "\n";
  return violations == 0 ? 0 : kViolations;
}

StageWorkload workload_of(const Options& o, const CostModel& cm) {
  if (o.trainee.empty()) return workload_from_roles(cm);
  if (o.graph.empty()) throw ConfigError("--trainee needs --graph");
  const auto g = load_graph(o);
  const auto plan = build_plan(g, layout_for(o, g), delta_of(o));
  return stage_workload(plan.stage_for(g.id(o.trainee)), g);
}

std::vector<std::string> device_ids(const Options& o, const CostModel& cm) {
  if (!o.devices.empty()) return o.devices;
  std::vector<std::string> ids;
  for (const auto& d : cm.devices()) ids.push_back(d.id);
  return ids;
}

PipelineSchedule schedule_of(const Options& o, const CostModel& cm, const StageWorkload& work) {
  Grouping grouping;
  grouping.train_devices = o.train_devices;
  for (const auto& d : device_ids(o, cm)) {
    if (std::find(o.train_devices.begin(), o.train_devices.end(), d) == o.train_devices.end()) {
      grouping.frozen_devices.push_back(d);
    }
  }
  grouping.offloaded = o.offload;
  std::sort(grouping.train_devices.begin(), grouping.train_devices.end());
  std::sort(grouping.frozen_devices.begin(), grouping.frozen_devices.end());
  std::sort(grouping.offloaded.begin(), grouping.offloaded.end());
  validate_grouping(grouping, cm, work);
  const auto partition = make_partition(o.partition, grouping);
  return build_schedule(work, grouping, partition, o.k, micro_batch_count(o.dataset, o.k));
}

int cmd_schedule(const Options& o) {
  const auto cm = io::cost_model_from_json(io::read_json_file(o.costs));
  const auto s = schedule_of(o, cm, workload_of(o, cm));
  const auto text = dump(io::schedule_to_json(s));
  if (o.out.empty()) std::cout << text;
  else write(o, "schedule.json", text);
  return 0;
}

int cmd_simulate(const Options& o) {
  const auto cm = io::cost_model_from_json(io::read_json_file(o.costs));
  const auto s = schedule_of(o, cm, workload_of(o, cm));
  const auto trace = o.serial ? simulate_serial(s, cm) : simulate(s, cm);
  const auto problems = check_trace(s, trace, cm);
  std::cout << io::trace_summary_csv(trace);
  if (!o.out.empty()) {
    write(o, "trace.csv", io::trace_summary_csv(trace));
    write(o, "gantt.json", dump(io::gantt_to_json(s, trace)));
  }
  for (const auto& p : problems) std::cerr << "violation: " << p << "\n";
  return problems.empty() ? 0 : kViolations;
}

int cmd_optimize(const Options& o) {
  const auto cm = io::cost_model_from_json(io::read_json_file(o.costs));
  const auto work = workload_of(o, cm);
  const auto r = optimize(cm, work, device_ids(o, cm), cm.layers().size(), o.k_max, o.dataset);
  const auto s = build_schedule(work, r.grouping, r.partition, r.batch_size, r.micro_batches);
  const auto trace = simulate(s, cm);
  auto doc = io::opt_result_to_json(r);
  doc["k_max"] = o.k_max;
  doc["dataset_size"] = o.dataset;
  std::cout << dump(doc);
  if (!o.out.empty()) {
    write(o, "opt_result.json", dump(doc));
    write(o, "schedule.json", dump(io::schedule_to_json(s)));
    write(o, "gantt.json", dump(io::gantt_to_json(s, trace)));
    write(o, "trace.csv", io::trace_summary_csv(trace));
  }
  return 0;
}

int cmd_report(const Options& o) {
  const fs::path dir(o.out);
  int status = 0;
  bool any = false;
  if (fs::exists(dir / "audit.json")) {
    any = true;
    const auto audit = io::read_json_file(dir / "audit.json");
    std::cout << "training run\n";
    std::ifstream jsonl(dir / "stages.jsonl");
    std::string line;
    while (std::getline(jsonl, line)) {
      const auto st = Json::parse(line);
      std::printf("  stage %zu  %-12s loss %.6g\n", st.at("stage").get<std::size_t>(),
                  st.at("trainee").get<std::string>().c_str(), st.at("loss").get<double>());
    }
    const auto v = audit.at("violations").get<std::size_t>();
    std::cout << "  audit violations " << v << "\n";
    if (v) status = kViolations;
  }
  if (fs::exists(dir / "opt_result.json")) {
    any = true;
    const auto r = io::read_json_file(dir / "opt_result.json");
    std::cout << "optimizer\n"
              << "  D_t " << r.at("D_t").dump() << "  D_f " << r.at("D_f").dump() << "  offloaded "
              << r.at("offloaded").dump() << "\n"
              << "  Q " << r.at("Q").dump() << "  k " << r.at("k").dump() << "  C_min " << r.at("C_min").dump()
              << "\n";
  }
  if (!any) throw ConfigError("no run artifacts in " + dir.string());
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ContextLoRA planning, toy training and pipeline scheduling"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values");
  Options o;

  auto* validate = app.add_subcommand("validate", "check a task graph and print its layers");
  add_graph(validate, o, true);
  validate->add_option("--out", o.out, "output directory");

  auto* plan = app.add_subcommand("plan", "print the stage plan");
  add_graph(plan, o, true);
  add_ratio(plan, o);
  add_dims(plan, o);
  plan->add_option("--out", o.out, "output directory");

  auto* train = app.add_subcommand("train", "run the toy sliding-window training");
  add_graph(train, o, true);
  add_ratio(train, o);
  add_dims(train, o);
  train->add_option("--seed", o.seed, "RNG seed")->envname("CTXLORA_SEED")->required();
  train->add_option("--steps", o.steps, "gradient steps per stage")->envname("CTXLORA_STEPS");
  train->add_option("--lr", o.lr, "learning rate")->envname("CTXLORA_LR")->check(CLI::PositiveNumber);
  train->add_option("--samples", o.samples, "samples per task")->check(CLI::PositiveNumber);
  train->add_option("--noise", o.noise, "target noise std")->check(CLI::NonNegativeNumber);
  train->add_option("--input-coupling", o.coupling, "shared latent mixed into inputs")->check(CLI::Range(0.0, 0.999));
  train->add_option("--out", o.out, "output directory")->envname("CTXLORA_OUT")->required();
  train->add_flag("--debug-corrupt-plan", o.corrupt, "inject a freeze/mask fault into the plan");

  auto* schedule = app.add_subcommand("schedule", "emit the pipeline event list for an assignment");
  add_costs(schedule, o);
  add_assignment(schedule, o);
  schedule->add_option("--out", o.out, "output directory");

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate an assignment");
  add_costs(simulate_cmd, o);
  add_assignment(simulate_cmd, o);
  simulate_cmd->add_flag("--serial", o.serial, "serial per-micro-batch baseline");
  simulate_cmd->add_option("--out", o.out, "output directory");

  auto* opt = app.add_subcommand("optimize", "search grouping, partition and batch size");
  add_costs(opt, o);
  opt->add_option("--k-max", o.k_max, "largest micro-batch size")->envname("CTXLORA_K_MAX")
      ->check(CLI::PositiveNumber);
  opt->add_option("--out", o.out, "output directory")->envname("CTXLORA_OUT");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--out", o.out, "run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kError;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*plan) return cmd_plan(o);
    if (*train) return cmd_train(o);
    if (*schedule) return cmd_schedule(o);
    if (*simulate_cmd) return cmd_simulate(o);
    if (*opt) return cmd_optimize(o);
    if (*report) return cmd_report(o);
  } catch (const CycleError& e) {
    std::cerr << "CycleError: " << e.what() << "\n";
  } catch (const ctxlora::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kError;
}
