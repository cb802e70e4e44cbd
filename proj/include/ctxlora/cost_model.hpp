#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ctxlora {

struct Link {
  double bandwidth = 1.0;  // bytes per second, > 0
  double latency = 0.0;    // seconds, >= 0
};

struct DeviceProfile {
  std::string id;
  double capacity = 1.0;  // work units per second, > 0
  std::map<std::string, Link> links;
};

struct LayerCost {
  double fwd_work = 0.0;   // work units per sample
  double bwd_work = 0.0;   // work units per sample, training executions only
  double act_bytes = 0.0;  // bytes per sample crossing the layer's output boundary
};

constexpr double kDefaultBackwardRatio = 2.0;

// Requirement R_r of a task in each execution mode.
struct TaskLoad {
  std::string id;
  double req_train = 0.0;
  double req_frozen = 0.0;
  // Role hint used when no dependency graph is supplied.
  std::optional<bool> training;
};

enum class Execution { kTrain, kFrozen };

// Device, layer and task profiles. Immutable once loaded; validate() enforces
// capacity > 0, bandwidth > 0, latency >= 0 and non-negative work.
class CostModel {
 public:
  CostModel() = default;
  CostModel(std::vector<DeviceProfile> devices, std::vector<LayerCost> layers, std::vector<TaskLoad> tasks);

  const std::vector<DeviceProfile>& devices() const { return devices_; }
  const std::vector<LayerCost>& layers() const { return layers_; }
  const std::vector<TaskLoad>& tasks() const { return tasks_; }

  // Throws UnknownDeviceError / UnknownLayerError / UnknownTaskError.
  const DeviceProfile& device(const std::string& id) const;
  const LayerCost& layer(std::size_t index) const;
  const TaskLoad& task(const std::string& id) const;

  // Directed link src -> dst, falling back to dst -> src. Throws UnknownLinkError.
  const Link& link(const std::string& src, const std::string& dst) const;

  double requirement(const std::string& task, Execution exec) const;

  // Every device c times faster: capacities and bandwidths times c, latencies
  // divided by c. All modelled times scale by exactly 1/c. Task requirements are
  // left alone unless with_requirements is set, so the grouping gap may change.
  CostModel scaled(double c, bool with_requirements = false) const;

 private:
  void validate() const;

  std::vector<DeviceProfile> devices_;
  std::vector<LayerCost> layers_;
  std::vector<TaskLoad> tasks_;
};

// k * fwd_work / capacity
double t_fwd(const LayerCost& lc, const DeviceProfile& d, std::size_t k);
// k * bwd_work / capacity; zero for frozen executions.
double t_bwd(const LayerCost& lc, const DeviceProfile& d, std::size_t k, Execution exec = Execution::kTrain);
// latency + bytes / bandwidth, zero when src and dst are the same device.
double t_comm(const CostModel& cm, const std::string& src, const std::string& dst, double bytes);

struct TaskRef {
  std::string id;
  Execution exec = Execution::kTrain;
};

struct GroupMetrics {
  double capacity = 0.0;     // R_c
  double requirement = 0.0;  // R_r
};

GroupMetrics group_metrics(const CostModel& cm, const std::vector<std::string>& devices,
                           const std::vector<TaskRef>& tasks);

}  // namespace ctxlora
