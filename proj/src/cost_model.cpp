#include "ctxlora/cost_model.hpp"

#include <cmath>
#include <set>

#include "ctxlora/errors.hpp"

namespace ctxlora {

CostModel::CostModel(std::vector<DeviceProfile> devices, std::vector<LayerCost> layers,
                     std::vector<TaskLoad> tasks)
    : devices_(std::move(devices)), layers_(std::move(layers)), tasks_(std::move(tasks)) {
  validate();
}

void CostModel::validate() const {
  std::set<std::string> ids;
  for (const auto& d : devices_) {
    if (d.id.empty()) throw ConfigError("device id must be nonempty");
    if (!ids.insert(d.id).second) throw ConfigError("duplicate device id '" + d.id + "'");
    if (!(d.capacity > 0.0)) throw ConfigError("device '" + d.id + "' needs capacity > 0");
    for (const auto& [peer, l] : d.links) {
      if (!(l.bandwidth > 0.0)) throw ConfigError("link " + d.id + "->" + peer + " needs bandwidth > 0");
      if (!(l.latency >= 0.0)) throw ConfigError("link " + d.id + "->" + peer + " needs latency >= 0");
    }
  }
  for (const auto& d : devices_) {
    for (const auto& [peer, l] : d.links) {
      if (!ids.count(peer)) throw UnknownDeviceError("link from '" + d.id + "' to unknown device '" + peer + "'");
    }
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (!(l.fwd_work >= 0.0 && l.bwd_work >= 0.0 && l.act_bytes >= 0.0)) {
      throw ConfigError("layer " + std::to_string(i) + " has negative cost");
    }
  }
  std::set<std::string> task_ids;
  for (const auto& t : tasks_) {
    if (!task_ids.insert(t.id).second) throw ConfigError("duplicate task id '" + t.id + "'");
    if (!(t.req_train >= 0.0 && t.req_frozen >= 0.0)) {
      throw ConfigError("task '" + t.id + "' has a negative requirement");
    }
  }
}

const DeviceProfile& CostModel::device(const std::string& id) const {
  for (const auto& d : devices_) {
    if (d.id == id) return d;
  }
  throw UnknownDeviceError("unknown device '" + id + "'");
}

const LayerCost& CostModel::layer(std::size_t index) const {
  if (index >= layers_.size()) throw UnknownLayerError("no cost entry for layer " + std::to_string(index));
  return layers_[index];
}

const TaskLoad& CostModel::task(const std::string& id) const {
  for (const auto& t : tasks_) {
    if (t.id == id) return t;
  }
  throw UnknownTaskError("no load profile for task '" + id + "'");
}

const Link& CostModel::link(const std::string& src, const std::string& dst) const {
  const auto& s = device(src);
  if (auto it = s.links.find(dst); it != s.links.end()) return it->second;
  const auto& d = device(dst);
  if (auto it = d.links.find(src); it != d.links.end()) return it->second;
  throw UnknownLinkError("no link between '" + src + "' and '" + dst + "'");
}

double CostModel::requirement(const std::string& id, Execution exec) const {
  const auto& t = task(id);
  return exec == Execution::kTrain ? t.req_train : t.req_frozen;
}

CostModel CostModel::scaled(double c, bool with_requirements) const {
  if (!(c > 0.0)) throw ConfigError("scale factor must be positive");
  auto devices = devices_;
  for (auto& d : devices) {
    d.capacity *= c;
    for (auto& [peer, l] : d.links) {
      l.bandwidth *= c;
      l.latency /= c;
    }
  }
  auto tasks = tasks_;
  if (with_requirements)
    for (auto& t : tasks) {
      t.req_train *= c;
      t.req_frozen *= c;
    }
  return CostModel(std::move(devices), layers_, std::move(tasks));
}

double t_fwd(const LayerCost& lc, const DeviceProfile& d, std::size_t k) {
  return static_cast<double>(k) * lc.fwd_work / d.capacity;
}

double t_bwd(const LayerCost& lc, const DeviceProfile& d, std::size_t k, Execution exec) {
  if (exec == Execution::kFrozen) return 0.0;
  return static_cast<double>(k) * lc.bwd_work / d.capacity;
}

double t_comm(const CostModel& cm, const std::string& src, const std::string& dst, double bytes) {
  if (!(bytes >= 0.0)) throw ConfigError("transfer size must be non-negative");
  if (src == dst) return 0.0;
  const Link& l = cm.link(src, dst);
  return l.latency + bytes / l.bandwidth;
}

GroupMetrics group_metrics(const CostModel& cm, const std::vector<std::string>& devices,
                           const std::vector<TaskRef>& tasks) {
  GroupMetrics m;
  for (const auto& d : devices) m.capacity += cm.device(d).capacity;
  for (const auto& t : tasks) m.requirement += cm.requirement(t.id, t.exec);
  return m;
}

}  // namespace ctxlora
