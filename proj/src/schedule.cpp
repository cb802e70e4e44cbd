#include "ctxlora/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "ctxlora/errors.hpp"

namespace ctxlora {

std::vector<TaskRef> StageWorkload::refs() const {
  std::vector<TaskRef> out;
  for (const auto& t : training) out.push_back({t, Execution::kTrain});
  for (const auto& t : frozen) out.push_back({t, Execution::kFrozen});
  return out;
}

StageWorkload stage_workload(const StagePlan& sp, const TaskGraph& g) {
  StageWorkload w;
  w.training.push_back(g.name(sp.trainee));
  std::set<TaskId> frozen;
  for (const auto& s : sp.freeze) {
    if (s.task != sp.trainee && !s.cols.empty()) frozen.insert(s.task);
  }
  std::set<TaskId> extra;
  for (const auto& s : sp.train) {
    if (s.task != sp.trainee && !frozen.count(s.task)) extra.insert(s.task);
  }
  for (TaskId t : extra) w.training.push_back(g.name(t));
  for (TaskId t : frozen) w.frozen.push_back(g.name(t));
  return w;
}

StageWorkload workload_from_roles(const CostModel& cm) {
  StageWorkload w;
  for (const auto& t : cm.tasks()) {
    if (!t.training) throw ConfigError("task " + t.id + " has no role");
    (*t.training ? w.training : w.frozen).push_back(t.id);
  }
  return w;
}

void validate_grouping(const Grouping& grouping, const CostModel& cm, const StageWorkload& work) {
  if (grouping.train_devices.empty()) throw InvalidGroupingError("training group D_t is empty");
  std::set<std::string> seen;
  for (const auto* group : {&grouping.train_devices, &grouping.frozen_devices}) {
    for (const auto& d : *group) {
      if (!seen.insert(d).second) throw InvalidGroupingError("device '" + d + "' appears twice in the grouping");
      try {
        cm.device(d);
      } catch (const UnknownDeviceError&) {
        throw InvalidGroupingError("grouping names unknown device '" + d + "'");
      }
    }
  }
  for (const auto& t : grouping.offloaded) {
    if (std::find(work.frozen.begin(), work.frozen.end(), t) == work.frozen.end()) {
      throw InvalidGroupingError("offloaded task '" + t + "' is not a frozen task of this stage");
    }
  }
}

std::vector<DeviceSpan> Partition::spans() const {
  std::vector<DeviceSpan> out;
  for (std::size_t l = 0; l < assignment.size(); ++l) {
    if (out.empty() || out.back().device != assignment[l]) {
      out.push_back({assignment[l], {l, l + 1}});
    } else {
      out.back().layers.end = l + 1;
    }
  }
  return out;
}

std::vector<DeviceSpan> Partition::train_spans() const {
  std::vector<DeviceSpan> out;
  for (auto& s : spans()) {
    if (s.layers.end <= train_layers) out.push_back(std::move(s));
  }
  return out;
}

std::vector<DeviceSpan> Partition::frozen_spans() const {
  std::vector<DeviceSpan> out;
  for (auto& s : spans()) {
    if (s.layers.begin >= train_layers) out.push_back(std::move(s));
  }
  return out;
}

Partition make_partition(std::vector<std::string> assignment, const Grouping& grouping) {
  auto in = [](const std::vector<std::string>& group, const std::string& d) {
    return std::find(group.begin(), group.end(), d) != group.end();
  };
  Partition p{std::move(assignment), 0};
  while (p.train_layers < p.assignment.size() && in(grouping.train_devices, p.assignment[p.train_layers])) {
    ++p.train_layers;
  }
  if (p.train_layers == 0) throw InvalidGroupingError("partition must start with layers on D_t");
  for (std::size_t l = p.train_layers; l < p.assignment.size(); ++l) {
    if (!in(grouping.frozen_devices, p.assignment[l])) {
      throw InvalidGroupingError("layer " + std::to_string(l) + " on '" + p.assignment[l] +
                                 "' breaks the D_t prefix / D_f suffix structure");
    }
  }
  std::set<std::string> seen;
  for (const auto& s : p.spans()) {
    if (!seen.insert(s.device).second) {
      throw InvalidGroupingError("device '" + s.device + "' holds a non-contiguous layer range");
    }
  }
  return p;
}

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::kForwardFrozen: return "FP_f";
    case EventKind::kForwardTrain: return "FP_t";
    case EventKind::kBackwardTrain: return "BP_t";
  }
  return "?";
}

std::size_t micro_batch_count(std::size_t dataset_size, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (dataset_size == 0) throw ConfigError("dataset size must be at least 1");
  return (dataset_size + batch_size - 1) / batch_size;
}

namespace {

void push_chain(std::vector<ScheduleEvent>& out, EventKind kind, std::size_t mb, std::size_t cycle,
                const std::vector<DeviceSpan>& spans, bool offloaded, std::size_t multiplicity, bool reverse) {
  const std::size_t hops = spans.size();
  for (std::size_t h = 0; h < hops; ++h) {
    const auto& span = reverse ? spans[hops - 1 - h] : spans[h];
    out.push_back({kind, mb, cycle, span.device, span.layers, h, hops, offloaded, multiplicity});
  }
}

}  // namespace

PipelineSchedule build_schedule(const StageWorkload& work, const Grouping& grouping,
                                const Partition& partition, std::size_t batch_size,
                                std::size_t micro_batches) {
  if (micro_batches == 0) throw ConfigError("need at least one micro-batch");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (grouping.train_devices.empty()) throw InvalidGroupingError("training group D_t is empty");
  if (work.training.empty() && work.frozen.empty()) throw InvalidGroupingError("stage has no tasks");
  for (const auto& t : grouping.offloaded) {
    if (std::find(work.frozen.begin(), work.frozen.end(), t) == work.frozen.end()) {
      throw InvalidGroupingError("offloaded task '" + t + "' is not a frozen task of this stage");
    }
  }

  const auto train_spans = partition.train_spans();
  const auto frozen_spans = partition.frozen_spans();
  if (train_spans.empty()) throw InvalidGroupingError("no layers assigned to D_t");

  const std::size_t offloaded = grouping.offloaded.size();
  const std::size_t on_frozen_group = work.frozen.size() - offloaded;
  if (on_frozen_group > 0 && frozen_spans.empty()) {
    throw InvalidGroupingError("frozen tasks remain on D_f but D_f holds no layers");
  }
  const std::size_t trainers = work.training.size();

  PipelineSchedule s{micro_batches, batch_size, grouping, partition, {}};
  auto forwards = [&](std::size_t mb, std::size_t cycle) {
    if (on_frozen_group > 0) {
      push_chain(s.events, EventKind::kForwardFrozen, mb, cycle, frozen_spans, false, on_frozen_group, false);
    }
    if (offloaded > 0) {
      push_chain(s.events, EventKind::kForwardFrozen, mb, cycle, train_spans, true, offloaded, false);
    }
    if (trainers > 0) push_chain(s.events, EventKind::kForwardTrain, mb, cycle, train_spans, false, trainers, false);
  };
  auto backward = [&](std::size_t mb, std::size_t cycle) {
    if (trainers > 0) push_chain(s.events, EventKind::kBackwardTrain, mb, cycle, train_spans, false, trainers, true);
  };

  forwards(0, 0);
  for (std::size_t i = 1; i < micro_batches; ++i) {
    forwards(i, i);
    backward(i - 1, i);
  }
  backward(micro_batches - 1, micro_batches);
  return s;
}

PipelineSchedule build_schedule(const StagePlan& sp, const TaskGraph& g, const Grouping& grouping,
                                const Partition& partition, std::size_t batch_size,
                                std::size_t micro_batches) {
  return build_schedule(stage_workload(sp, g), grouping, partition, batch_size, micro_batches);
}

double event_duration(const ScheduleEvent& e, const CostModel& cm, std::size_t batch_size) {
  const auto& dev = cm.device(e.device);
  double t = 0.0;
  for (std::size_t l = e.layers.begin; l < e.layers.end; ++l) {
    const auto& lc = cm.layer(l);
    t += e.kind == EventKind::kBackwardTrain ? t_bwd(lc, dev, batch_size) : t_fwd(lc, dev, batch_size);
  }
  return t * static_cast<double>(e.multiplicity);
}

namespace {

using ChainKey = std::tuple<EventKind, bool, std::size_t, std::size_t>;  // kind, offloaded, mb, hop

struct Dependency {
  std::size_t event;
  double transfer;  // seconds between predecessor end and earliest start
};

// Chain predecessor of every event, if any, with the activation transfer cost.
std::vector<std::optional<Dependency>> dependencies(const PipelineSchedule& s, const CostModel& cm) {
  std::map<ChainKey, std::size_t> index;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    index[{e.kind, e.offloaded, e.micro_batch, e.hop}] = i;
  }
  auto find = [&](ChainKey key) -> std::optional<std::size_t> {
    auto it = index.find(key);
    if (it == index.end()) return std::nullopt;
    return it->second;
  };

  const double k = static_cast<double>(s.batch_size);
  std::vector<std::optional<Dependency>> deps(s.events.size());
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    std::optional<std::size_t> pred;
    if (e.hop > 0) {
      pred = find({e.kind, e.offloaded, e.micro_batch, e.hop - 1});
    } else if (e.kind == EventKind::kBackwardTrain) {
      // Backward of a micro-batch begins where its forward ended.
      pred = find({EventKind::kForwardTrain, false, e.micro_batch, e.hops - 1});
    }
    if (!pred) continue;
    const auto& p = s.events[*pred];
    double transfer = 0.0;
    if (p.device != e.device) {
      // Activations (forward) or their gradients (backward) cross the boundary
      // between the two ranges; its size is fixed by the lower range's last layer.
      const std::size_t boundary = e.kind == EventKind::kBackwardTrain ? e.layers.end - 1 : p.layers.end - 1;
      transfer = t_comm(cm, p.device, e.device, cm.layer(boundary).act_bytes * k);
    }
    deps[i] = Dependency{*pred, transfer};
  }
  return deps;
}

void check_finite(double v, const ScheduleEvent& e, const char* what) {
  if (!std::isfinite(v)) {
    throw UnboundedScheduleError(std::string(what) + " of " + event_name(e.kind) + " micro-batch " +
                                 std::to_string(e.micro_batch) + " on '" + e.device + "' is unbounded");
  }
}

bool in_train_group(const PipelineSchedule& s, const std::string& device) {
  const auto& g = s.grouping.train_devices;
  return std::find(g.begin(), g.end(), device) != g.end();
}

void finish_trace(const PipelineSchedule& s, Trace& trace) {
  std::vector<std::string> devices = s.grouping.train_devices;
  devices.insert(devices.end(), s.grouping.frozen_devices.begin(), s.grouping.frozen_devices.end());
  for (const auto& te : trace.events) {
    trace.makespan = std::max(trace.makespan, te.end);
    if (std::find(devices.begin(), devices.end(), te.device) == devices.end()) devices.push_back(te.device);
  }
  for (const auto& d : devices) {
    DeviceUsage u{d, 0.0, 0.0};
    for (const auto& te : trace.events) {
      if (te.device == d) u.busy += te.end - te.start;
    }
    u.idle = trace.makespan - u.busy;
    trace.devices.push_back(u);
  }
}

}  // namespace

Trace simulate(const PipelineSchedule& s, const CostModel& cm) {
  const auto deps = dependencies(s, cm);
  std::map<std::string, double> device_free;
  Trace trace;
  trace.events.reserve(s.events.size());
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    const double duration = event_duration(e, cm, s.batch_size);
    check_finite(duration, e, "duration");
    double ready = 0.0;
    if (deps[i]) {
      check_finite(deps[i]->transfer, e, "incoming transfer");
      ready = trace.events[deps[i]->event].end + deps[i]->transfer;
    }
    double& free_at = device_free[e.device];
    const double start = std::max(free_at, ready);
    const double end = start + duration;
    free_at = end;
    trace.events.push_back({i, e.device, start, end, in_train_group(s, e.device)});
  }
  finish_trace(s, trace);
  return trace;
}

Trace simulate_serial(const PipelineSchedule& s, const CostModel& cm) {
  const auto deps = dependencies(s, cm);
  auto rank = [](const ScheduleEvent& e) {
    int kind = 0;
    switch (e.kind) {
      case EventKind::kForwardFrozen: kind = e.offloaded ? 1 : 0; break;
      case EventKind::kForwardTrain: kind = 2; break;
      case EventKind::kBackwardTrain: kind = 3; break;
    }
    return std::make_tuple(e.micro_batch, kind, e.hop);
  };
  std::vector<std::size_t> order(s.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rank(s.events[a]) < rank(s.events[b]); });

  Trace trace;
  trace.events.resize(s.events.size());
  double clock = 0.0;
  for (std::size_t i : order) {
    const auto& e = s.events[i];
    const double duration = event_duration(e, cm, s.batch_size);
    check_finite(duration, e, "duration");
    double transfer = 0.0;
    if (deps[i]) {
      transfer = deps[i]->transfer;
      check_finite(transfer, e, "incoming transfer");
    }
    const double start = clock + transfer;
    clock = start + duration;
    trace.events[i] = {i, e.device, start, clock, in_train_group(s, e.device)};
  }
  finish_trace(s, trace);
  return trace;
}

GroupCompletion group_completion(const Trace& trace) {
  GroupCompletion c;
  for (const auto& te : trace.events) {
    double& slot = te.train_group ? c.train : c.frozen;
    slot = std::max(slot, te.end);
  }
  return c;
}

std::vector<std::string> check_trace(const PipelineSchedule& s, const Trace& trace, const CostModel& cm) {
  std::vector<std::string> problems;
  if (trace.events.size() != s.events.size()) {
    problems.push_back("trace has " + std::to_string(trace.events.size()) + " events, schedule has " +
                       std::to_string(s.events.size()));
    return problems;
  }
  auto label = [&](std::size_t i) {
    const auto& e = s.events[i];
    return std::string(event_name(e.kind)) + "^" + std::to_string(e.micro_batch) + "@" + e.device;
  };

  double max_end = 0.0;
  std::map<std::string, std::vector<std::size_t>> per_device;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& te = trace.events[i];
    max_end = std::max(max_end, te.end);
    if (te.device != s.events[i].device) problems.push_back(label(i) + " ran on the wrong device");
    if (te.end < te.start) problems.push_back(label(i) + " ends before it starts");
    per_device[te.device].push_back(i);
  }
  for (auto& [dev, idx] : per_device) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = trace.events[a];
      const auto& y = trace.events[b];
      return std::tie(x.start, x.end) < std::tie(y.start, y.end);
    });
    for (std::size_t j = 1; j < idx.size(); ++j) {
      if (trace.events[idx[j]].start < trace.events[idx[j - 1]].end) {
        problems.push_back(label(idx[j - 1]) + " overlaps " + label(idx[j]));
      }
    }
  }

  const auto deps = dependencies(s, cm);
  for (std::size_t i = 0; i < deps.size(); ++i) {
    if (!deps[i]) continue;
    const double earliest = trace.events[deps[i]->event].end + deps[i]->transfer;
    if (trace.events[i].start < earliest) {
      problems.push_back(label(i) + " starts before " + label(deps[i]->event) + " and its transfer finish");
    }
  }
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (e.kind == EventKind::kBackwardTrain && e.hop == 0 && !deps[i]) {
      problems.push_back(label(i) + " has no matching forward pass");
    }
  }
  if (trace.makespan != max_end) problems.push_back("makespan differs from the latest event end");
  return problems;
}

}  // namespace ctxlora
