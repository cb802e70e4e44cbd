#include "ctxlora/plan.hpp"

#include <algorithm>
#include <cmath>

#include "ctxlora/errors.hpp"

namespace ctxlora {

const ColumnRange& BlockLayout::segment(TaskId t) const {
  if (t >= segments.size()) throw UnknownTaskError("no segment for task index " + std::to_string(t));
  return segments[t];
}

BlockLayout partition_blocks(std::size_t d_out, std::size_t d_in, std::size_t rank,
                             const TaskGraph& g,
                             const std::optional<std::vector<std::size_t>>& widths) {
  const std::size_t n = g.size();
  if (n == 0) throw DimensionError("cannot partition for an empty task graph");
  if (d_out == 0) throw DimensionError("d_out must be positive");
  if (rank == 0) throw DimensionError("rank must be positive");
  if (d_in < n) {
    throw DimensionError("d_in (" + std::to_string(d_in) + ") is smaller than the task count (" +
                         std::to_string(n) + ")");
  }

  std::vector<std::size_t> w;
  if (widths) {
    if (widths->size() != n) throw DimensionError("expected one width per task");
    std::size_t total = 0;
    for (auto x : *widths) {
      if (x == 0) throw DimensionError("segment widths must be at least 1");
      total += x;
    }
    if (total != d_in) {
      throw DimensionError("segment widths sum to " + std::to_string(total) + ", expected d_in = " +
                           std::to_string(d_in));
    }
    w = *widths;
  } else {
    w.assign(n, d_in / n);
    for (std::size_t i = 0; i < d_in % n; ++i) ++w[i];
  }

  BlockLayout layout{d_out, d_in, rank, {}};
  std::size_t start = 0;
  for (auto x : w) {
    layout.segments.push_back({start, start + x});
    start += x;
  }
  return layout;
}

std::size_t activated_columns(double delta, std::size_t width) {
  if (!(delta > 0.0) || width == 0) return 0;
  // Products such as 0.7 * 10 land a few ulps above the integer.
  double exact = delta * static_cast<double>(width);
  auto cols = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(cols, 1, width);
}

double delta_from_frozen_ratio(double frozen_ratio) {
  if (!(frozen_ratio >= 0.0 && frozen_ratio <= 1.0)) {
    throw ConfigError("frozen_ratio must lie in [0, 1]");
  }
  return 1.0 - frozen_ratio;
}

std::vector<TaskId> StagePlan::participating() const {
  std::vector<TaskId> out;
  for (const auto& s : train) out.push_back(s.task);
  for (const auto& s : freeze) out.push_back(s.task);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const StagePlan& TrainingPlan::stage_for(TaskId trainee) const {
  for (const auto& s : stages) {
    if (s.trainee == trainee) return s;
  }
  throw UnknownTaskError("no stage trains task index " + std::to_string(trainee));
}

TrainingPlan build_plan(const TaskGraph& g, const BlockLayout& layout, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in [0, 1]");
  if (layout.task_count() != g.size()) {
    throw DimensionError("layout has " + std::to_string(layout.task_count()) +
                         " segments but the graph has " + std::to_string(g.size()) + " tasks");
  }

  TrainingPlan plan{{}, layout, g, delta};
  const LayerList layers = extract_layers(g);
  for (TaskId trainee : layers.flatten()) {
    StagePlan sp;
    sp.stage_index = plan.stages.size();
    sp.trainee = trainee;
    sp.delta = delta;
    sp.train.push_back({trainee, {0, layout.width(trainee)}});

    const auto prereqs = g.prerequisites(trainee);
    for (TaskId p : prereqs) {
      const std::size_t w = layout.width(p);
      const std::size_t active = activated_columns(delta, w);
      if (active > 0) sp.train.push_back({p, {0, active}});
      if (active < w) sp.freeze.push_back({p, {active, w}});
    }
    for (TaskId t = 0; t < g.size(); ++t) {
      if (t != trainee && !std::binary_search(prereqs.begin(), prereqs.end(), t)) {
        sp.mask.push_back(t);
      }
    }
    plan.stages.push_back(std::move(sp));
  }
  return plan;
}

std::size_t ValidationReport::count(const std::string& code) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [&](const Violation& v) { return v.code == code; }));
}

namespace {

enum class ColumnState : std::uint8_t { kTrain, kFreeze, kMask };

void check_layout(const TrainingPlan& plan, ValidationReport& report) {
  const auto& layout = plan.layout;
  auto add = [&](std::string msg) { report.violations.push_back({std::nullopt, "layout", std::move(msg)}); };
  if (layout.task_count() != plan.graph.size()) {
    add("layout has " + std::to_string(layout.task_count()) + " segments for " +
        std::to_string(plan.graph.size()) + " tasks");
    return;
  }
  if (layout.rank == 0) add("rank must be positive");
  std::size_t expect = 0;
  for (TaskId t = 0; t < layout.task_count(); ++t) {
    const auto& seg = layout.segments[t];
    if (seg.begin != expect || seg.empty()) {
      add("segment of task '" + plan.graph.name(t) + "' is empty or not contiguous");
    }
    expect = seg.end;
  }
  if (expect != layout.d_in) add("segments do not cover [0, d_in)");
}

void check_stage(const TrainingPlan& plan, const StagePlan& sp, ValidationReport& report) {
  const auto& g = plan.graph;
  const auto& layout = plan.layout;
  const std::size_t n = g.size();
  auto add = [&](std::string code, std::string msg) {
    report.violations.push_back({sp.stage_index, std::move(code), std::move(msg)});
  };

  if (sp.trainee >= n) {
    add("unknown_task", "trainee index out of range");
    return;
  }

  // Assignments per block and column; each column must end up with exactly one state.
  std::vector<std::vector<std::vector<ColumnState>>> assigned(n);
  for (TaskId t = 0; t < n; ++t) assigned[t].resize(layout.width(t));

  bool structural_error = false;
  auto place = [&](const BlockSlice& s, ColumnState state) {
    if (s.task >= n) {
      add("unknown_task", "slice references task index " + std::to_string(s.task));
      structural_error = true;
      return;
    }
    if (s.cols.end > layout.width(s.task) || s.cols.begin > s.cols.end) {
      add("slice_out_of_range", "slice of '" + g.name(s.task) + "' exceeds its block");
      structural_error = true;
      return;
    }
    for (auto c = s.cols.begin; c < s.cols.end; ++c) assigned[s.task][c].push_back(state);
  };
  for (const auto& s : sp.train) place(s, ColumnState::kTrain);
  for (const auto& s : sp.freeze) place(s, ColumnState::kFreeze);
  for (TaskId t : sp.mask) place({t, {0, t < n ? layout.width(t) : 0}}, ColumnState::kMask);
  if (structural_error) return;

  const auto prereqs = g.prerequisites(sp.trainee);
  for (TaskId t = 0; t < n; ++t) {
    const std::size_t w = layout.width(t);
    const bool is_prereq = std::binary_search(prereqs.begin(), prereqs.end(), t);
    const std::size_t active = activated_columns(sp.delta, w);
    auto expected = [&](std::size_t c) {
      if (t == sp.trainee) return ColumnState::kTrain;
      if (is_prereq) return c < active ? ColumnState::kTrain : ColumnState::kFreeze;
      return ColumnState::kMask;
    };

    bool overlap = false, uncovered = false, wrong = false;
    for (std::size_t c = 0; c < w; ++c) {
      const auto& states = assigned[t][c];
      if (states.size() > 1) overlap = true;
      else if (states.empty()) uncovered = true;
      else if (states.front() != expected(c)) wrong = true;
    }
    const std::string block = "block '" + g.name(t) + "'";
    if (overlap) {
      add("overlap", block + " has columns assigned to more than one of train/freeze/mask");
    } else if (uncovered) {
      add("uncovered", block + " has columns in none of train/freeze/mask");
    } else if (wrong) {
      if (t == sp.trainee) add("trainee_not_trained", block + " is the trainee but is not fully trainable");
      else if (is_prereq) add("prerequisite_split", block + " does not follow the delta prefix split");
      else add("not_masked", block + " is neither trainee nor prerequisite but is not masked");
    }
  }
}

}  // namespace

ValidationReport validate_plan(const TrainingPlan& plan) {
  ValidationReport report;
  check_layout(plan, report);
  if (!report.ok()) return report;
  if (!(plan.delta >= 0.0 && plan.delta <= 1.0)) {
    report.violations.push_back({std::nullopt, "delta_range", "delta outside [0, 1]"});
  }

  const auto& g = plan.graph;
  const std::size_t n = g.size();
  const LayerList layers = extract_layers(g);

  std::vector<std::size_t> trained_at(n, plan.stages.size());
  std::size_t last_layer = 0;
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& sp = plan.stages[i];
    if (sp.stage_index != i) {
      report.violations.push_back({i, "stage_index", "stage_index " + std::to_string(sp.stage_index) +
                                                         " at position " + std::to_string(i)});
    }
    if (sp.trainee < n) {
      if (trained_at[sp.trainee] != plan.stages.size()) {
        report.violations.push_back({i, "trained_twice", "task '" + g.name(sp.trainee) + "' trained more than once"});
      } else {
        trained_at[sp.trainee] = i;
      }
      const std::size_t layer = layers.layer_of(sp.trainee);
      if (layer < last_layer) {
        report.violations.push_back({i, "order", "task '" + g.name(sp.trainee) +
                                                     "' scheduled after a deeper layer"});
      }
      last_layer = std::max(last_layer, layer);
    }
    check_stage(plan, sp, report);
  }
  for (TaskId t = 0; t < n; ++t) {
    if (trained_at[t] == plan.stages.size()) {
      report.violations.push_back({std::nullopt, "never_trained", "task '" + g.name(t) + "' never trained"});
    }
  }
  return report;
}

}  // namespace ctxlora
