#include "layerscope/tree.hpp"

#include <algorithm>
#include <deque>

namespace layerscope {
namespace {

std::vector<std::vector<int>> adjacency(const DepTree& tree) {
  const int n = static_cast<int>(tree.n_words());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    const int h = tree.heads[static_cast<std::size_t>(w)];
    if (h == 0) continue;
    adj[static_cast<std::size_t>(w)].push_back(h - 1);
    adj[static_cast<std::size_t>(h - 1)].push_back(w);
  }
  return adj;
}

std::vector<int> bfs(const std::vector<std::vector<int>>& adj, int source) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<int> queue{source};
  dist[static_cast<std::size_t>(source)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] >= 0) continue;
      dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

}  // namespace

std::vector<int> tree_depths(const DepTree& tree) {
  const std::size_t n = tree.n_words();
  std::vector<int> depth(n, -1);
  for (std::size_t start = 0; start < n; ++start) {
    // Walk up until a word of known depth (or the root), then unwind.
    std::vector<std::size_t> path;
    std::size_t w = start;
    while (depth[w] < 0 && tree.heads[w] != 0) {
      path.push_back(w);
      w = static_cast<std::size_t>(tree.heads[w] - 1);
    }
    if (depth[w] < 0) depth[w] = 0;
    int d = depth[w];
    for (auto it = path.rbegin(); it != path.rend(); ++it) depth[*it] = ++d;
  }
  return depth;
}

Eigen::MatrixXi tree_distances(const DepTree& tree) {
  const auto adj = adjacency(tree);
  const auto n = static_cast<Eigen::Index>(tree.n_words());
  Eigen::MatrixXi out(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    const auto d = bfs(adj, static_cast<int>(u));
    for (Eigen::Index v = 0; v < n; ++v) out(u, v) = d[static_cast<std::size_t>(v)];
  }
  return out;
}

std::vector<std::pair<int, int>> tree_edges(const DepTree& tree) {
  std::vector<std::pair<int, int>> edges;
  for (std::size_t w = 0; w < tree.n_words(); ++w) {
    const int h = tree.heads[w];
    if (h == 0) continue;
    const int a = static_cast<int>(w);
    const int b = h - 1;
    edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace layerscope
