#include "ctxlora/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <tuple>

#include "ctxlora/errors.hpp"

namespace ctxlora {

namespace {

struct GapCandidate {
  GapResult result;
  std::size_t offloaded = 0;
};

// True when a is preferred over b.
bool better(const GapCandidate& a, const GapCandidate& b) {
  const auto& ga = a.result;
  const auto& gb = b.result;
  if (ga.gap != gb.gap) return ga.gap < gb.gap;
  if (ga.train.capacity != gb.train.capacity) return ga.train.capacity > gb.train.capacity;
  if (ga.grouping.train_devices != gb.grouping.train_devices) {
    return ga.grouping.train_devices < gb.grouping.train_devices;
  }
  if (a.offloaded != b.offloaded) return a.offloaded < b.offloaded;
  return ga.grouping.offloaded < gb.grouping.offloaded;
}

// All ways to cut `total` layers into `parts` nonempty contiguous runs, as run
// lengths in lexicographic order.
void compositions(std::size_t total, std::size_t parts, std::vector<std::size_t>& prefix,
                  std::vector<std::vector<std::size_t>>& out) {
  if (parts == 0) {
    if (total == 0) out.push_back(prefix);
    return;
  }
  if (total < parts) return;
  for (std::size_t first = 1; first + (parts - 1) <= total; ++first) {
    prefix.push_back(first);
    compositions(total - first, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

std::vector<std::vector<std::size_t>> compositions(std::size_t total, std::size_t parts) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> prefix;
  compositions(total, parts, prefix, out);
  return out;
}

}  // namespace

GapResult minimize_gap(const CostModel& cm, const StageWorkload& work, std::vector<std::string> devices) {
  if (devices.empty()) throw InfeasibleError("no devices to form a training group");
  if (work.training.empty()) throw InfeasibleError("at least one training task is required");
  if (devices.size() > 20 || work.frozen.size() > 20) throw InfeasibleError("exhaustive grouping search is too large");
  std::sort(devices.begin(), devices.end());
  if (std::adjacent_find(devices.begin(), devices.end()) != devices.end()) {
    throw InfeasibleError("device list contains duplicates");
  }
  for (const auto& d : devices) cm.device(d);

  const std::size_t m = devices.size();
  const std::size_t f = work.frozen.size();
  const std::size_t all = (std::size_t{1} << m) - 1;
  std::optional<GapCandidate> best;

  for (std::size_t dmask = 1; dmask <= all; ++dmask) {
    // Both groups nonempty whenever there is more than one device.
    if (m > 1 && dmask == all) continue;
    Grouping grouping;
    for (std::size_t i = 0; i < m; ++i) {
      (dmask >> i & 1 ? grouping.train_devices : grouping.frozen_devices).push_back(devices[i]);
    }

    for (std::size_t tmask = 0; tmask < (std::size_t{1} << f); ++tmask) {
      if (m == 1 && tmask != (std::size_t{1} << f) - 1) continue;  // lone device runs everything
      GapCandidate cand;
      cand.result.grouping = grouping;
      std::vector<TaskRef> vt, vf;
      for (const auto& t : work.training) {
        vt.push_back({t, Execution::kTrain});
        cand.result.train_tasks.push_back(t);
      }
      for (std::size_t j = 0; j < f; ++j) {
        if (tmask >> j & 1) {
          vt.push_back({work.frozen[j], Execution::kFrozen});
          cand.result.train_tasks.push_back(work.frozen[j]);
          cand.result.grouping.offloaded.push_back(work.frozen[j]);
          ++cand.offloaded;
        } else {
          vf.push_back({work.frozen[j], Execution::kFrozen});
          cand.result.frozen_tasks.push_back(work.frozen[j]);
        }
      }
      std::sort(cand.result.grouping.offloaded.begin(), cand.result.grouping.offloaded.end());
      cand.result.train = group_metrics(cm, grouping.train_devices, vt);
      cand.result.frozen = group_metrics(cm, grouping.frozen_devices, vf);
      cand.result.gap = std::abs(cand.result.train.capacity - cand.result.train.requirement) +
                        std::abs(cand.result.frozen.capacity - cand.result.frozen.requirement);
      if (!best || better(cand, *best)) best = std::move(cand);
    }
  }
  if (!best) throw InfeasibleError("no feasible grouping");
  return best->result;
}

std::vector<Partition> enumerate_partitions(const Grouping& grouping, std::size_t layers) {
  auto train_devices = grouping.train_devices;
  auto frozen_devices = grouping.frozen_devices;
  std::sort(train_devices.begin(), train_devices.end());
  std::sort(frozen_devices.begin(), frozen_devices.end());
  const std::size_t nt_dev = train_devices.size();
  const std::size_t nf_dev = frozen_devices.size();

  std::vector<Partition> out;
  if (nt_dev == 0 || layers < nt_dev + nf_dev) return out;
  const std::size_t lo = nt_dev;
  const std::size_t hi = nf_dev == 0 ? layers : layers - nf_dev;

  for (std::size_t n_t = lo; n_t <= hi; ++n_t) {
    const auto train_cuts = compositions(n_t, nt_dev);
    const auto frozen_cuts = compositions(layers - n_t, nf_dev);
    for (const auto& tc : train_cuts) {
      for (const auto& fc : frozen_cuts) {
        Partition p;
        p.train_layers = n_t;
        for (std::size_t i = 0; i < nt_dev; ++i) p.assignment.insert(p.assignment.end(), tc[i], train_devices[i]);
        for (std::size_t i = 0; i < nf_dev; ++i) p.assignment.insert(p.assignment.end(), fc[i], frozen_devices[i]);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

OptResult search_partition_batch(const Grouping& grouping, const StageWorkload& work, const CostModel& cm,
                                 std::size_t layers, std::size_t k_max, std::size_t dataset_size) {
  if (k_max == 0) throw InfeasibleError("k_max must be at least 1");
  if (dataset_size == 0) throw InfeasibleError("dataset size must be at least 1");
  if (layers > cm.layers().size()) {
    throw UnknownLayerError("cost model describes " + std::to_string(cm.layers().size()) + " layers, " +
                            std::to_string(layers) + " requested");
  }
  validate_grouping(grouping, cm, work);
  const std::size_t device_count = grouping.train_devices.size() + grouping.frozen_devices.size();
  if (layers < device_count) {
    throw InfeasibleError("need at least one layer per device (" + std::to_string(layers) + " layers, " +
                          std::to_string(device_count) + " devices)");
  }

  const auto candidates = enumerate_partitions(grouping, layers);
  if (candidates.empty()) throw InfeasibleError("no model partition fits the grouping");

  OptResult best;
  bool found = false;
  std::size_t evaluated = 0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const std::size_t n = micro_batch_count(dataset_size, k);
    for (const auto& q : candidates) {
      const auto schedule = build_schedule(work, grouping, q, k, n);
      const auto trace = simulate(schedule, cm);
      ++evaluated;
      // Candidates arrive in (k, N_t, enumeration) order, so a strict
      // improvement test implements the tie-break.
      if (!found || trace.makespan < best.c_min) {
        found = true;
        best.partition = q;
        best.batch_size = k;
        best.micro_batches = n;
        best.c_min = trace.makespan;
        best.completion = group_completion(trace);
      }
    }
  }
  best.grouping = grouping;
  best.evaluated = evaluated;
  return best;
}

OptResult optimize(const CostModel& cm, const StageWorkload& work, const std::vector<std::string>& devices,
                   std::size_t layers, std::size_t k_max, std::size_t dataset_size) {
  const GapResult gap = minimize_gap(cm, work, devices);
  OptResult r = search_partition_batch(gap.grouping, work, cm, layers, k_max, dataset_size);
  r.train_tasks = gap.train_tasks;
  r.gap = gap.gap;
  return r;
}

}  // namespace ctxlora
