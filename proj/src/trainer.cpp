#include "ctxlora/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ctxlora/errors.hpp"

namespace ctxlora {

namespace {

// Per-block 0/1 column flags for the union of the active slices. A column
// listed twice still contributes once.
std::vector<std::vector<char>> column_masks(const ToyModel& m, const ActiveSet& active) {
  std::vector<std::vector<char>> masks(m.blocks.size());
  for (const auto& s : active) {
    if (s.task >= m.blocks.size()) {
      throw DimensionError("active slice references task index " + std::to_string(s.task));
    }
    const std::size_t w = m.layout.width(s.task);
    if (s.cols.begin > s.cols.end || s.cols.end > w) {
      throw DimensionError("active slice exceeds the block of task index " + std::to_string(s.task));
    }
    auto& mask = masks[s.task];
    if (mask.empty()) mask.assign(w, 0);
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s.cols.begin),
              mask.begin() + static_cast<std::ptrdiff_t>(s.cols.end), 1);
  }
  return masks;
}

Vector forward_masked(const ToyModel& m, const std::vector<std::vector<char>>& masks,
                      std::span<const double> x) {
  const auto& L = m.layout;
  if (x.size() != L.d_in) {
    throw DimensionError("input has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(L.d_in));
  }
  Vector y(L.d_out, 0.0);
  for (std::size_t i = 0; i < L.d_out; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < L.d_in; ++c) acc += m.base(i, c) * x[c];
    y[i] = acc;
  }
  Vector z(L.rank);
  for (TaskId t = 0; t < masks.size(); ++t) {
    if (masks[t].empty()) continue;
    const auto& f = m.blocks[t];
    const std::size_t start = L.segment(t).begin;
    for (std::size_t j = 0; j < L.rank; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < masks[t].size(); ++c) {
        if (masks[t][c]) acc += f.A(j, c) * x[start + c];
      }
      z[j] = acc;
    }
    for (std::size_t i = 0; i < L.d_out; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < L.rank; ++j) acc += f.B(i, j) * z[j];
      y[i] += acc;
    }
  }
  return y;
}

double squared_error(std::span<const double> y, std::span<const double> target) {
  if (y.size() != target.size()) throw DimensionError("target size does not match d_out");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - target[i];
    s += e * e;
  }
  return 0.5 * s;
}

}  // namespace

Matrix ToyModel::effective_weight(std::span<const BlockSlice> active) const {
  const auto masks = column_masks(*this, ActiveSet(active.begin(), active.end()));
  Matrix w = base;
  for (TaskId t = 0; t < masks.size(); ++t) {
    if (masks[t].empty()) continue;
    const auto& f = blocks[t];
    const std::size_t start = layout.segment(t).begin;
    for (std::size_t i = 0; i < layout.d_out; ++i) {
      for (std::size_t c = 0; c < masks[t].size(); ++c) {
        if (!masks[t][c]) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < layout.rank; ++j) acc += f.B(i, j) * f.A(j, c);
        w(i, start + c) += acc;
      }
    }
  }
  return w;
}

ToyModel init_model(const BlockLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(layout.rank)));

  ToyModel m{layout, Matrix(layout.d_out, layout.d_in), {}};
  for (double& v : m.base.data()) v = uniform(rng);
  for (TaskId t = 0; t < layout.task_count(); ++t) {
    LowRankFactors f{Matrix(layout.d_out, layout.rank), Matrix(layout.rank, layout.width(t), 0.0)};
    for (double& v : f.B.data()) v = gauss(rng);
    m.blocks.push_back(std::move(f));
  }
  return m;
}

const std::vector<Sample>& TaskDataset::task(TaskId t) const {
  if (t >= per_task.size()) throw UnknownTaskError("no data for task index " + std::to_string(t));
  return per_task[t];
}

TaskDataset synthesize_dataset(const ToyModel& model, const TaskGraph& g, std::uint64_t seed,
                               const DatasetOptions& options) {
  const auto& L = model.layout;
  if (L.task_count() != g.size()) throw DimensionError("layout and graph disagree on task count");
  if (options.samples_per_task == 0) throw ConfigError("samples_per_task must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Hidden per-task updates, each of rank <= L.rank.
  std::vector<Matrix> hidden;
  for (TaskId t = 0; t < g.size(); ++t) {
    const std::size_t w = L.width(t);
    Matrix b(L.d_out, L.rank), a(L.rank, w), u(L.d_out, w);
    for (double& v : b.data()) v = gauss(rng);
    for (double& v : a.data()) v = gauss(rng);
    const double scale = options.update_scale / std::sqrt(static_cast<double>(L.rank));
    for (std::size_t i = 0; i < L.d_out; ++i) {
      for (std::size_t c = 0; c < w; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < L.rank; ++j) acc += b(i, j) * a(j, c);
        u(i, c) = scale * acc;
      }
    }
    hidden.push_back(std::move(u));
  }

  TaskDataset data;
  data.seed = seed;
  const double coupling = std::clamp(options.input_coupling, 0.0, 0.999);
  for (TaskId t = 0; t < g.size(); ++t) {
    Matrix teacher = model.base;
    auto lineage = g.ancestors(t);
    lineage.push_back(t);
    for (TaskId u : lineage) {
      const std::size_t start = L.segment(u).begin;
      for (std::size_t i = 0; i < L.d_out; ++i) {
        for (std::size_t c = 0; c < L.width(u); ++c) teacher(i, start + c) += hidden[u](i, c);
      }
    }

    std::vector<Sample> samples;
    samples.reserve(options.samples_per_task);
    for (std::size_t s = 0; s < options.samples_per_task; ++s) {
      Sample smp{Vector(L.d_in), Vector(L.d_out)};
      const double shared = gauss(rng);
      for (auto& v : smp.x) v = coupling * shared + std::sqrt(1.0 - coupling * coupling) * gauss(rng);
      for (std::size_t i = 0; i < L.d_out; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < L.d_in; ++c) acc += teacher(i, c) * smp.x[c];
        smp.y[i] = acc + options.noise * gauss(rng);
      }
      samples.push_back(std::move(smp));
    }
    data.per_task.push_back(std::move(samples));
  }
  return data;
}

ActiveSet full_blocks(const BlockLayout& layout, std::span<const TaskId> tasks) {
  ActiveSet out;
  for (TaskId t : tasks) out.push_back({t, {0, layout.width(t)}});
  return out;
}

ActiveSet stage_active_set(const StagePlan& sp) {
  ActiveSet out = sp.train;
  out.insert(out.end(), sp.freeze.begin(), sp.freeze.end());
  return out;
}

Vector forward(const ToyModel& m, const ActiveSet& active, std::span<const double> x) {
  return forward_masked(m, column_masks(m, active), x);
}

double batch_loss(const ToyModel& m, const ActiveSet& active, std::span<const Sample> batch) {
  if (batch.empty()) throw DimensionError("empty batch");
  const auto masks = column_masks(m, active);
  double total = 0.0;
  for (const auto& s : batch) total += squared_error(forward_masked(m, masks, s.x), s.y);
  return total / static_cast<double>(batch.size());
}

const BlockGradient& Gradients::of(TaskId t) const {
  for (const auto& b : blocks) {
    if (b.task == t) return b;
  }
  throw UnknownTaskError("no gradient for task index " + std::to_string(t));
}

Gradients compute_gradients(const ToyModel& m, const ActiveSet& active, std::span<const Sample> batch) {
  if (batch.empty()) throw DimensionError("empty batch");
  const auto& L = m.layout;
  const auto masks = column_masks(m, active);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  // G = (1/N) sum_s e_s x_s^T, the gradient with respect to the dense weight.
  Matrix G(L.d_out, L.d_in, 0.0);
  double loss = 0.0;
  for (const auto& s : batch) {
    const Vector y = forward_masked(m, masks, s.x);
    loss += squared_error(y, s.y);
    for (std::size_t i = 0; i < L.d_out; ++i) {
      const double e = (y[i] - s.y[i]) * inv_n;
      for (std::size_t c = 0; c < L.d_in; ++c) G(i, c) += e * s.x[c];
    }
  }

  Gradients out;
  out.loss = loss * inv_n;
  for (TaskId t = 0; t < masks.size(); ++t) {
    if (masks[t].empty()) continue;
    const auto& f = m.blocks[t];
    const std::size_t start = L.segment(t).begin;
    const std::size_t w = masks[t].size();
    BlockGradient g{t, Matrix(L.d_out, L.rank, 0.0), Matrix(L.rank, w, 0.0)};
    for (std::size_t c = 0; c < w; ++c) {
      if (!masks[t][c]) continue;
      for (std::size_t j = 0; j < L.rank; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < L.d_out; ++i) acc += f.B(i, j) * G(i, start + c);
        g.dA(j, c) = acc;
      }
      for (std::size_t i = 0; i < L.d_out; ++i) {
        for (std::size_t j = 0; j < L.rank; ++j) g.dB(i, j) += G(i, start + c) * f.A(j, c);
      }
    }
    out.blocks.push_back(std::move(g));
  }
  return out;
}

double stage_step(ToyModel& m, const StagePlan& sp, std::span<const Sample> batch, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  const Gradients grads = compute_gradients(m, stage_active_set(sp), batch);

  auto& trainee = m.blocks.at(sp.trainee);
  const auto& gt = grads.of(sp.trainee);
  auto b = trainee.B.data();
  auto db = gt.dB.data();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * db[i];

  for (const auto& s : sp.train) {
    auto& f = m.blocks.at(s.task);
    const auto& g = grads.of(s.task);
    for (std::size_t j = 0; j < f.A.rows(); ++j) {
      for (auto c = s.cols.begin; c < s.cols.end; ++c) f.A(j, c) -= lr * g.dA(j, c);
    }
  }
  return grads.loss;
}

std::size_t RunResult::audit_violations() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.audit.size();
  return n;
}

namespace {

bool columns_equal(const Matrix& a, const Matrix& b, const ColumnRange& cols) {
  for (std::size_t j = 0; j < a.rows(); ++j) {
    for (auto c = cols.begin; c < cols.end; ++c) {
      const double x = a(j, c), y = b(j, c);
      if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

double change_norm(const LowRankFactors& before, const LowRankFactors& after) {
  double s = 0.0;
  auto acc = [&](const Matrix& x, const Matrix& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = y.data()[i] - x.data()[i];
      s += d * d;
    }
  };
  acc(before.B, after.B);
  acc(before.A, after.A);
  return std::sqrt(s);
}

std::vector<AuditFinding> audit_stage(const TrainingPlan& plan, const StagePlan& sp,
                                      const ToyModel& before, const ToyModel& after) {
  std::vector<AuditFinding> findings;
  const auto& g = plan.graph;
  if (!bitwise_equal(before.base, after.base)) {
    findings.push_back({"base_changed", sp.trainee, "base weight W0 changed"});
  }
  for (TaskId t : sp.mask) {
    if (t >= before.blocks.size()) continue;
    if (!bitwise_equal(before.blocks[t].B, after.blocks[t].B) ||
        !bitwise_equal(before.blocks[t].A, after.blocks[t].A)) {
      findings.push_back({"mask_changed", t, "masked block '" + g.name(t) + "' changed"});
    }
  }
  for (const auto& s : sp.freeze) {
    if (s.task >= before.blocks.size()) continue;
    const bool b_ok = s.task == sp.trainee || bitwise_equal(before.blocks[s.task].B, after.blocks[s.task].B);
    if (!b_ok || !columns_equal(before.blocks[s.task].A, after.blocks[s.task].A, s.cols)) {
      findings.push_back({"freeze_changed", s.task, "frozen columns of '" + g.name(s.task) + "' changed"});
    }
  }
  return findings;
}

}  // namespace

RunResult run_plan(ToyModel m, const TrainingPlan& plan, const TaskDataset& data,
                   std::size_t steps_per_stage, double lr) {
  if (m.layout != plan.layout) throw DimensionError("model layout does not match the plan layout");
  RunResult result;
  for (const auto& sp : plan.stages) {
    const ToyModel before = m;
    const auto& batch = data.task(sp.trainee);
    const ActiveSet active = stage_active_set(sp);

    StageResult sr;
    sr.stage_index = sp.stage_index;
    sr.trainee = sp.trainee;
    sr.steps = steps_per_stage;
    sr.loss_history.reserve(steps_per_stage + 1);
    for (std::size_t step = 0; step < steps_per_stage; ++step) {
      sr.loss_history.push_back(stage_step(m, sp, batch, lr));
    }
    sr.final_loss = batch_loss(m, active, batch);
    sr.loss_history.push_back(sr.final_loss);

    for (TaskId t = 0; t < m.blocks.size(); ++t) {
      sr.change_norms.push_back(change_norm(before.blocks[t], m.blocks[t]));
    }
    sr.audit = audit_stage(plan, sp, before, m);
    result.stages.push_back(std::move(sr));
  }
  result.model = std::move(m);
  return result;
}

ComposedModel::ComposedModel(const ToyModel& model, std::vector<TaskId> blocks)
    : model_(&model), blocks_(std::move(blocks)), active_(full_blocks(model.layout, blocks_)) {}

Vector ComposedModel::forward(std::span<const double> x) const { return ctxlora::forward(*model_, active_, x); }

double ComposedModel::loss(std::span<const Sample> batch) const { return batch_loss(*model_, active_, batch); }

ComposedModel compose(const ToyModel& m, const TaskGraph& g, std::span<const TaskId> tasks) {
  if (g.size() != m.blocks.size()) throw DimensionError("graph and model disagree on task count");
  std::vector<bool> keep(g.size(), false);
  for (TaskId t : tasks) {
    if (t >= g.size()) throw UnknownTaskError("unknown task index " + std::to_string(t));
    keep[t] = true;
    for (TaskId a : g.ancestors(t)) keep[a] = true;
  }
  std::vector<TaskId> blocks;
  for (TaskId t = 0; t < g.size(); ++t) {
    if (keep[t]) blocks.push_back(t);
  }
  return ComposedModel(m, std::move(blocks));
}

}  // namespace ctxlora
