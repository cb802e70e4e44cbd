#include "ctxlora/task_graph.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "ctxlora/errors.hpp"

namespace ctxlora {

namespace {

// Colour-marking DFS; returns a task on a cycle if one exists.
std::optional<TaskId> find_cycle(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::vector<TaskId>> out(n);
  for (const auto& e : edges) out[e.from].push_back(e.to);

  enum : std::uint8_t { kWhite, kGrey, kBlack };
  std::vector<std::uint8_t> colour(n, kWhite);
  std::vector<std::pair<TaskId, std::size_t>> stack;
  for (TaskId root = 0; root < n; ++root) {
    if (colour[root] != kWhite) continue;
    stack.emplace_back(root, 0);
    colour[root] = kGrey;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < out[node].size()) {
        TaskId child = out[node][next++];
        if (colour[child] == kGrey) return child;
        if (colour[child] == kWhite) {
          colour[child] = kGrey;
          stack.emplace_back(child, 0);
        }
      } else {
        colour[node] = kBlack;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

}  // namespace

TaskGraph TaskGraph::from_indices(std::vector<std::string> names, const std::vector<Edge>& edges) {
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (name.empty()) throw InvalidGraphError("task names must be nonempty");
    if (!seen.insert(name).second) throw InvalidGraphError("duplicate task name '" + name + "'");
  }

  TaskGraph g;
  g.names_ = std::move(names);
  const std::size_t n = g.names_.size();
  for (const auto& e : edges) {
    if (e.from >= n || e.to >= n) {
      throw UnknownTaskError("edge endpoint out of range: " + std::to_string(e.from) + " -> " +
                             std::to_string(e.to));
    }
    if (e.from == e.to) throw CycleError("self-edge on task '" + g.names_[e.from] + "'");
  }

  g.edges_ = edges;
  std::sort(g.edges_.begin(), g.edges_.end());
  auto dup = std::adjacent_find(g.edges_.begin(), g.edges_.end());
  if (dup != g.edges_.end()) {
    throw DuplicateEdgeError("duplicate edge " + g.names_[dup->from] + " -> " + g.names_[dup->to]);
  }
  if (auto on_cycle = find_cycle(n, g.edges_)) {
    throw CycleError("task graph contains a directed cycle through '" + g.names_[*on_cycle] + "'");
  }
  return g;
}

TaskGraph TaskGraph::build(std::vector<std::string> names,
                           const std::vector<std::pair<std::string, std::string>>& edges) {
  std::unordered_map<std::string, TaskId> index;
  for (TaskId i = 0; i < names.size(); ++i) index.emplace(names[i], i);
  auto lookup = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw UnknownTaskError("edge references undeclared task '" + name + "'");
    return it->second;
  };
  std::vector<Edge> resolved;
  resolved.reserve(edges.size());
  for (const auto& [from, to] : edges) resolved.push_back({lookup(from), lookup(to)});
  return from_indices(std::move(names), resolved);
}

void TaskGraph::check_task(TaskId t) const {
  if (t >= names_.size()) throw UnknownTaskError("task index " + std::to_string(t) + " out of range");
}

const std::string& TaskGraph::name(TaskId t) const {
  check_task(t);
  return names_[t];
}

std::optional<TaskId> TaskGraph::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<TaskId>(it - names_.begin());
}

TaskId TaskGraph::id(const std::string& name) const {
  if (auto t = find(name)) return *t;
  throw UnknownTaskError("unknown task '" + name + "'");
}

bool TaskGraph::has_edge(TaskId from, TaskId to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

AdjacencyMatrix TaskGraph::adjacency() const {
  AdjacencyMatrix a(size());
  for (const auto& e : edges_) a(e.from, e.to) = 1;
  return a;
}

std::vector<TaskId> TaskGraph::prerequisites(TaskId t) const {
  check_task(t);
  std::vector<TaskId> out;
  for (const auto& e : edges_) {
    if (e.to == t) out.push_back(e.from);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TaskId> TaskGraph::successors(TaskId t) const {
  check_task(t);
  std::vector<TaskId> out;
  for (const auto& e : edges_) {
    if (e.from == t) out.push_back(e.to);
  }
  return out;
}

std::vector<TaskId> TaskGraph::ancestors(TaskId t) const {
  check_task(t);
  std::vector<bool> mark(size(), false);
  std::vector<TaskId> frontier{t};
  while (!frontier.empty()) {
    TaskId cur = frontier.back();
    frontier.pop_back();
    for (TaskId p : prerequisites(cur)) {
      if (!mark[p]) {
        mark[p] = true;
        frontier.push_back(p);
      }
    }
  }
  std::vector<TaskId> out;
  for (TaskId i = 0; i < size(); ++i) {
    if (mark[i]) out.push_back(i);
  }
  return out;
}

std::size_t LayerList::layer_of(TaskId t) const {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (std::find(layers[k].begin(), layers[k].end(), t) != layers[k].end()) return k;
  }
  throw UnknownTaskError("task index " + std::to_string(t) + " not in any layer");
}

std::vector<TaskId> LayerList::flatten() const {
  std::vector<TaskId> out;
  for (const auto& layer : layers) out.insert(out.end(), layer.begin(), layer.end());
  return out;
}

LayerList extract_layers(const TaskGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> in_degree(n, 0);
  std::vector<std::vector<TaskId>> out(n);
  for (const auto& e : g.edges()) {
    ++in_degree[e.to];
    out[e.from].push_back(e.to);
  }

  LayerList result;
  std::vector<bool> removed(n, false);
  std::size_t remaining = n;
  while (remaining > 0) {
    std::vector<TaskId> sources;
    for (TaskId v = 0; v < n; ++v) {
      if (!removed[v] && in_degree[v] == 0) sources.push_back(v);
    }
    // Unreachable for a validated graph.
    if (sources.empty()) throw CycleError("residual graph has no source node");
    for (TaskId v : sources) {
      removed[v] = true;
      for (TaskId w : out[v]) --in_degree[w];
    }
    remaining -= sources.size();
    result.layers.push_back(std::move(sources));
  }
  return result;
}

}  // namespace ctxlora
