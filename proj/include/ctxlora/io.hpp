#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ctxlora/cost_model.hpp"
#include "ctxlora/optimizer.hpp"
#include "ctxlora/plan.hpp"
#include "ctxlora/schedule.hpp"
#include "ctxlora/task_graph.hpp"
#include "ctxlora/trainer.hpp"

namespace ctxlora::io {

// Key order in emitted documents follows insertion order so outputs read
// naturally and stay byte-stable.
using Json = nlohmann::ordered_json;

// Throws ConfigError on I/O or parse failure.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// {"tasks": ["A", ...], "edges": [["A", "C"], ...]}
TaskGraph graph_from_json(const Json& doc);
Json graph_to_json(const TaskGraph& g);

// {"layers": [["A", "B"], ["C", "E"], ["D"]]}
Json layers_to_json(const TaskGraph& g, const LayerList& layers);

Json layout_to_json(const TaskGraph& g, const BlockLayout& layout);

// Per stage {"trainee", "train": {task: [b, e]}, "freeze": {...}, "mask": [...]},
// column ranges half-open and relative to the task's block.
Json stage_to_json(const TaskGraph& g, const StagePlan& sp);
Json plan_to_json(const TrainingPlan& plan);
Json validation_to_json(const ValidationReport& report);

// Human-readable walkthrough: the layer list, then one line per stage naming
// its phase (Beginning for the first layer, Ending for the last, Execution in
// between) and the trained, frozen and masked blocks.
std::string stage_walkthrough(const TrainingPlan& plan, const LayerList& layers);

// {"devices": [{"id", "capacity", "links": {peer: {"bw", "lat"}}}],
//  "layers": [{"fwd", "bwd", "act_bytes"}], "tasks": [{"id", "req_train", "req_frozen"}]}
// A layer without "bwd" gets kDefaultBackwardRatio * fwd.
CostModel cost_model_from_json(const Json& doc);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& doc);
Json checkpoint_to_json(const TaskGraph& g, const ToyModel& m);
ToyModel checkpoint_from_json(const Json& doc, const TaskGraph& g);

// One JSON object per line.
std::string stage_results_jsonl(const TaskGraph& g, const std::vector<StageResult>& results);
// stage,trainee,loss,steps,delta_norm_<task>...
std::string stage_results_csv(const TaskGraph& g, const std::vector<StageResult>& results);
Json audit_to_json(const TaskGraph& g, const ValidationReport& plan_report, const std::vector<StageResult>& results);

// [{"device", "event", "mb", "start", "end", "layers": [b, e]}]
Json gantt_to_json(const PipelineSchedule& s, const Trace& trace);
Json schedule_to_json(const PipelineSchedule& s);
// makespan,C_T,C_F then util_<device> per device.
std::string trace_summary_csv(const Trace& trace);

// {"D_t", "V_t", "Q", "k", "C_min", "evaluated"} plus diagnostic fields.
Json opt_result_to_json(const OptResult& r);

}  // namespace ctxlora::io
