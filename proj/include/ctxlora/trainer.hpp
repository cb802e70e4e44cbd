#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxlora/matrix.hpp"
#include "ctxlora/plan.hpp"
#include "ctxlora/task_graph.hpp"

namespace ctxlora {

// Per-task adapter factors; the block's update is B * A placed into the
// task's columns. B is d_out x rank, A is rank x width.
struct LowRankFactors {
  Matrix B;
  Matrix A;

  friend bool operator==(const LowRankFactors&, const LowRankFactors&) = default;
};

// Single linear layer W0 plus one low-rank block per task:
//   W_eff(active) = W0 + sum over active slices of embed(B_t * A_t[:, slice]).
// W0 is never written after init_model.
struct ToyModel {
  BlockLayout layout;
  Matrix base;
  std::vector<LowRankFactors> blocks;

  // Dense effective weight for the given active slices.
  Matrix effective_weight(std::span<const BlockSlice> active) const;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

// W0 ~ U(-0.5, 0.5), B_t ~ N(0, 1/rank), A_t = 0, so the initial update is zero.
ToyModel init_model(const BlockLayout& layout, std::uint64_t seed);

struct Sample {
  Vector x;
  Vector y;
};

struct TaskDataset {
  std::vector<std::vector<Sample>> per_task;
  std::uint64_t seed = 0;

  const std::vector<Sample>& task(TaskId t) const;
};

// Teacher-generated regression data. Every task t gets a hidden rank-`rank`
// update U_t on its own columns; the targets of t are
//   y = (W0 + sum over u in ancestors(t) + {t} of embed(U_u)) x + noise,
// so a dependent task's targets carry its prerequisites' features.
// `input_coupling` in [0, 1) mixes a shared latent vector into every input,
// which correlates columns across segments.
struct DatasetOptions {
  std::size_t samples_per_task = 32;
  double noise = 0.0;
  double input_coupling = 0.0;
  double update_scale = 0.5;
};
TaskDataset synthesize_dataset(const ToyModel& model, const TaskGraph& g, std::uint64_t seed,
                               const DatasetOptions& options = {});

using ActiveSet = std::vector<BlockSlice>;

// Whole blocks of the given tasks.
ActiveSet full_blocks(const BlockLayout& layout, std::span<const TaskId> tasks);
// Train and freeze slices of a stage; masked blocks contribute nothing.
ActiveSet stage_active_set(const StagePlan& sp);

// y = W_eff(active) x. Throws DimensionError on shape mismatch or slices
// outside the layout.
Vector forward(const ToyModel& m, const ActiveSet& active, std::span<const double> x);

// mean over the batch of |y - target|^2 / 2
double batch_loss(const ToyModel& m, const ActiveSet& active, std::span<const Sample> batch);

struct BlockGradient {
  TaskId task = 0;
  Matrix dB;
  Matrix dA;  // zero in columns that are not active
};

struct Gradients {
  double loss = 0.0;
  std::vector<BlockGradient> blocks;  // one per participating task, ascending

  const BlockGradient& of(TaskId t) const;
};

// Analytic gradients of batch_loss with respect to every active block's factors.
Gradients compute_gradients(const ToyModel& m, const ActiveSet& active, std::span<const Sample> batch);

// One gradient-descent step under the stage's rules: the trainee's B and A
// move; for every other block only A columns inside a train slice move. Freeze
// and mask columns stay bitwise untouched. Returns the loss before the step.
double stage_step(ToyModel& m, const StagePlan& sp, std::span<const Sample> batch, double lr);

struct AuditFinding {
  std::string code;  // "mask_changed", "freeze_changed" or "base_changed"
  TaskId task = 0;
  std::string message;
};

struct StageResult {
  std::size_t stage_index = 0;
  TaskId trainee = 0;
  double final_loss = 0.0;
  std::size_t steps = 0;
  std::vector<double> loss_history;   // loss before each step, then the final loss
  std::vector<double> change_norms;   // per task: sqrt(|dB|^2 + |dA|^2) over the stage
  std::vector<AuditFinding> audit;    // empty when freeze/mask semantics held
};

struct RunResult {
  std::vector<StageResult> stages;
  ToyModel model;

  std::size_t audit_violations() const;
};

// Executes the stages in plan order with full-batch gradient descent on the
// trainee's data. Does not reject invalid plans; the per-stage audit reports
// any parameter that moved although the plan froze or masked it.
RunResult run_plan(ToyModel m, const TrainingPlan& plan, const TaskDataset& data,
                   std::size_t steps_per_stage, double lr);

// Restricted view over the requested tasks and all their ancestors.
class ComposedModel {
 public:
  ComposedModel(const ToyModel& model, std::vector<TaskId> blocks);

  const std::vector<TaskId>& blocks() const { return blocks_; }
  const ActiveSet& active() const { return active_; }
  Vector forward(std::span<const double> x) const;
  double loss(std::span<const Sample> batch) const;

 private:
  const ToyModel* model_;
  std::vector<TaskId> blocks_;
  ActiveSet active_;
};

// Throws UnknownTaskError.
ComposedModel compose(const ToyModel& m, const TaskGraph& g, std::span<const TaskId> tasks);

}  // namespace ctxlora
