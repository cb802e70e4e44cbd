#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctxlora/cost_model.hpp"
#include "ctxlora/plan.hpp"
#include "ctxlora/task_graph.hpp"

namespace ctxlora {

// Which task blocks a stage needs with and without backward propagation.
// A prerequisite with at least one frozen column is a frozen task; a fully
// activated prerequisite (delta = 1) trains alongside the trainee.
struct StageWorkload {
  std::vector<std::string> training;
  std::vector<std::string> frozen;

  std::vector<TaskRef> refs() const;
};

StageWorkload stage_workload(const StagePlan& sp, const TaskGraph& g);
// From the role hints of a cost profile, in profile order. Throws ConfigError
// when a task has no role.
StageWorkload workload_from_roles(const CostModel& cm);

// D_t runs forward and backward for the trainable blocks, D_f runs forward for
// the frozen ones. `offloaded` frozen tasks run their forward on D_t instead.
struct Grouping {
  std::vector<std::string> train_devices;
  std::vector<std::string> frozen_devices;
  std::vector<std::string> offloaded;

  friend bool operator==(const Grouping&, const Grouping&) = default;
};

// Throws InvalidGroupingError.
void validate_grouping(const Grouping& grouping, const CostModel& cm, const StageWorkload& work);

struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

struct DeviceSpan {
  std::string device;
  LayerRange layers;

  friend bool operator==(const DeviceSpan&, const DeviceSpan&) = default;
};

// Q: one device per model layer. The first `train_layers` (N_t) layers sit on
// D_t devices, the remaining N_f on D_f devices, and each device holds one
// contiguous range.
struct Partition {
  std::vector<std::string> assignment;
  std::size_t train_layers = 0;

  std::size_t layer_count() const { return assignment.size(); }
  std::vector<DeviceSpan> spans() const;
  std::vector<DeviceSpan> train_spans() const;
  std::vector<DeviceSpan> frozen_spans() const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

// Derives N_t and checks the prefix/suffix and contiguity rules against the
// grouping. Throws InvalidGroupingError.
Partition make_partition(std::vector<std::string> assignment, const Grouping& grouping);

enum class EventKind { kForwardFrozen, kForwardTrain, kBackwardTrain };

const char* event_name(EventKind k);  // "FP_f", "FP_t", "BP_t"

struct ScheduleEvent {
  EventKind kind = EventKind::kForwardTrain;
  std::size_t micro_batch = 0;
  std::size_t cycle = 0;  // 0 = first stage, 1..n-1 middle cycles, n = last stage
  std::string device;
  LayerRange layers;
  std::size_t hop = 0;   // position along its device chain, in execution order
  std::size_t hops = 1;  // chain length
  bool offloaded = false;       // frozen forward placed on a D_t device
  std::size_t multiplicity = 1; // task blocks carried by the event
};

struct PipelineSchedule {
  std::size_t micro_batches = 0;
  std::size_t batch_size = 0;
  Grouping grouping;
  Partition partition;
  std::vector<ScheduleEvent> events;  // in cycle order
};

// First stage: FP^0(T_f), FP^0(T_t). Cycle i: FP^i(T_f), FP^i(T_t), BP^{i-1}(T_t).
// Last stage: BP^{n-1}(T_t). Frozen work never gets a BP event.
PipelineSchedule build_schedule(const StageWorkload& work, const Grouping& grouping,
                                const Partition& partition, std::size_t batch_size,
                                std::size_t micro_batches);
PipelineSchedule build_schedule(const StagePlan& sp, const TaskGraph& g, const Grouping& grouping,
                                const Partition& partition, std::size_t batch_size,
                                std::size_t micro_batches);

// ceil(dataset_size / batch_size)
std::size_t micro_batch_count(std::size_t dataset_size, std::size_t batch_size);

struct TimedEvent {
  std::size_t event = 0;  // index into PipelineSchedule::events
  std::string device;
  double start = 0.0;
  double end = 0.0;
  bool train_group = true;
};

struct DeviceUsage {
  std::string device;
  double busy = 0.0;
  double idle = 0.0;
};

struct Trace {
  std::vector<TimedEvent> events;  // same order as the schedule
  double makespan = 0.0;
  std::vector<DeviceUsage> devices;
};

// Event duration on its device, without transfers.
double event_duration(const ScheduleEvent& e, const CostModel& cm, std::size_t batch_size);

// Deterministic list scheduling: events are placed in schedule order, each at
// the earliest time its device is free and its chain predecessor has finished
// and shipped its activations. Throws UnknownLinkError, UnknownLayerError,
// UnknownDeviceError, or UnboundedScheduleError for an infinite hop.
Trace simulate(const PipelineSchedule& s, const CostModel& cm);

// Baseline on the same assignment with no overlap at all: micro-batch by
// micro-batch, every forward then every backward, one event at a time.
Trace simulate_serial(const PipelineSchedule& s, const CostModel& cm);

struct GroupCompletion {
  double train = 0.0;   // C_T
  double frozen = 0.0;  // C_F
  double makespan() const { return train > frozen ? train : frozen; }
};

GroupCompletion group_completion(const Trace& trace);

// Every broken trace invariant as a readable line; empty when the trace is sound.
std::vector<std::string> check_trace(const PipelineSchedule& s, const Trace& trace, const CostModel& cm);

}  // namespace ctxlora
