#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ctxlora {

// Zero-based position of a task in declaration order.
using TaskId = std::size_t;

struct Edge {
  TaskId from;
  TaskId to;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Dense n x n 0/1 matrix; cell (i, j) is 1 iff task i must finish before task j.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(std::size_t n) : n_(n), cells_(n * n, 0) {}

  std::size_t size() const { return n_; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return cells_[i * n_ + j]; }

  std::vector<std::uint8_t> row(std::size_t i) const {
    return {cells_.begin() + static_cast<std::ptrdiff_t>(i * n_),
            cells_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_)};
  }

  friend bool operator==(const AdjacencyMatrix&, const AdjacencyMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> cells_;
};

// Validated, immutable task dependency DAG.
class TaskGraph {
 public:
  // Throws InvalidGraphError, UnknownTaskError, DuplicateEdgeError or CycleError.
  static TaskGraph build(std::vector<std::string> names,
                         const std::vector<std::pair<std::string, std::string>>& edges);

  // Same validation, edges given by index. Used by generators and tests.
  static TaskGraph from_indices(std::vector<std::string> names, const std::vector<Edge>& edges);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(TaskId t) const;
  const std::vector<Edge>& edges() const { return edges_; }

  std::optional<TaskId> find(const std::string& name) const;
  // Throws UnknownTaskError.
  TaskId id(const std::string& name) const;

  bool has_edge(TaskId from, TaskId to) const;
  AdjacencyMatrix adjacency() const;

  // P(t): direct predecessors, ascending.
  std::vector<TaskId> prerequisites(TaskId t) const;
  std::vector<TaskId> successors(TaskId t) const;
  // Transitive predecessors, ascending, excluding t.
  std::vector<TaskId> ancestors(TaskId t) const;
  bool is_leaf(TaskId t) const { return successors(t).empty(); }

  friend bool operator==(const TaskGraph&, const TaskGraph&) = default;

 private:
  TaskGraph() = default;
  void check_task(TaskId t) const;

  std::vector<std::string> names_;
  std::vector<Edge> edges_;  // sorted
};

// Source-node stratification S = [S_1, ..., S_L]. Tasks inside a layer are
// kept in ascending index order.
struct LayerList {
  std::vector<std::vector<TaskId>> layers;

  std::size_t depth() const { return layers.size(); }
  // Zero-based layer of t; throws UnknownTaskError if absent.
  std::size_t layer_of(TaskId t) const;
  // Tasks in stage order: layer by layer, ascending index within a layer.
  std::vector<TaskId> flatten() const;

  friend bool operator==(const LayerList&, const LayerList&) = default;
};

// Iteratively peels the zero in-degree tasks of the residual graph.
LayerList extract_layers(const TaskGraph& g);

}  // namespace ctxlora
