#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctxlora/cost_model.hpp"
#include "ctxlora/schedule.hpp"

namespace ctxlora {

struct GapResult {
  Grouping grouping;                    // device lists sorted by id
  std::vector<std::string> train_tasks;  // V_t: training tasks plus offloaded frozen ones
  std::vector<std::string> frozen_tasks; // V_f
  GroupMetrics train;
  GroupMetrics frozen;
  double gap = 0.0;  // |R_c(D_t) - R_r(V_t)| + |R_c(D_f) - R_r(V_f)|
};

// Exhaustive search over device bipartitions and frozen-task allocations.
// Training tasks always stay on D_t. With two or more devices both groups are
// nonempty; a single device forms D_t alone and takes every frozen task.
// Ties: larger R_c(D_t), then the lexicographically smallest D_t, then fewer
// offloaded tasks, then the lexicographically smallest offloaded set.
// Throws InfeasibleError.
GapResult minimize_gap(const CostModel& cm, const StageWorkload& work, std::vector<std::string> devices);

// Candidate set Q_n: every prefix split N_t and, inside each group, every
// contiguous assignment giving each device (in id order) at least one layer.
std::vector<Partition> enumerate_partitions(const Grouping& grouping, std::size_t layers);

struct OptResult {
  Grouping grouping;
  std::vector<std::string> train_tasks;
  double gap = 0.0;
  Partition partition;
  std::size_t batch_size = 0;
  std::size_t micro_batches = 0;
  double c_min = 0.0;
  GroupCompletion completion;
  std::size_t evaluated = 0;
};

// Simulates every (Q, k) with k in [1, k_max] and keeps the smallest makespan.
// Ties: smaller k, then smaller N_t, then enumeration order. Throws InfeasibleError.
OptResult search_partition_batch(const Grouping& grouping, const StageWorkload& work, const CostModel& cm,
                                 std::size_t layers, std::size_t k_max, std::size_t dataset_size);

// Grouping first (minimize_gap), then the (Q, k) search on that grouping.
OptResult optimize(const CostModel& cm, const StageWorkload& work, const std::vector<std::string>& devices,
                   std::size_t layers, std::size_t k_max, std::size_t dataset_size);

}  // namespace ctxlora
