#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ctxlora/task_graph.hpp"

namespace ctxlora {

// Half-open column range [begin, end).
struct ColumnRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t width() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t c) const { return c >= begin && c < end; }

  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

// Column-wise split of the adapter matrix W (d_out x d_in) into one segment per
// task. segments[t] is the absolute column range owned by task t.
struct BlockLayout {
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::size_t rank = 0;
  std::vector<ColumnRange> segments;

  std::size_t task_count() const { return segments.size(); }
  const ColumnRange& segment(TaskId t) const;
  std::size_t width(TaskId t) const { return segment(t).width(); }

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;
};

// Equal-width split with the remainder going to the first d_in mod n tasks,
// unless explicit widths are given. Throws DimensionError.
BlockLayout partition_blocks(std::size_t d_out, std::size_t d_in, std::size_t rank,
                             const TaskGraph& g,
                             const std::optional<std::vector<std::size_t>>& widths = std::nullopt);

// A range of columns inside one task's block. `cols` is relative to the start
// of the block, so [0, width) is the whole block.
struct BlockSlice {
  TaskId task = 0;
  ColumnRange cols;

  friend bool operator==(const BlockSlice&, const BlockSlice&) = default;
};

// Number of leading prerequisite columns activated by delta: ceil(delta * width),
// zero iff delta is zero.
std::size_t activated_columns(double delta, std::size_t width);

struct StagePlan {
  std::size_t stage_index = 0;
  TaskId trainee = 0;
  std::vector<BlockSlice> train;
  std::vector<BlockSlice> freeze;
  std::vector<TaskId> mask;
  double delta = 0.0;

  // Tasks with a slice in train or freeze, ascending and unique. These are
  // the blocks that take part in the stage's forward pass.
  std::vector<TaskId> participating() const;

  friend bool operator==(const StagePlan&, const StagePlan&) = default;
};

struct TrainingPlan {
  std::vector<StagePlan> stages;
  BlockLayout layout;
  TaskGraph graph;
  double delta = 0.0;

  const StagePlan& stage_for(TaskId trainee) const;
};

// One StagePlan per task in layer order. The trainee block is fully trainable;
// each prerequisite has its first ceil(delta*width) columns trainable and the
// rest frozen; everything else is masked.
TrainingPlan build_plan(const TaskGraph& g, const BlockLayout& layout, double delta);

// frozen_ratio is the user-facing knob; delta = 1 - frozen_ratio.
double delta_from_frozen_ratio(double frozen_ratio);

struct Violation {
  std::optional<std::size_t> stage;  // empty for plan-level findings
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(const std::string& code) const;
};

// Checks every structural rule a plan must satisfy. Reports at most one
// finding per (stage, block), so a single corrupted block yields one entry.
ValidationReport validate_plan(const TrainingPlan& plan);

}  // namespace ctxlora
