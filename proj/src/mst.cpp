#include "layerscope/mst.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::vector<Edge> decode_mst(const Eigen::MatrixXd& dist) {
  if (dist.rows() != dist.cols())
    throw ShapeError("decode_mst: matrix is not square");
  const int n = static_cast<int>(dist.rows());
  if (n < 1) throw ShapeError("decode_mst: empty matrix");
  if (!dist.allFinite()) throw ShapeError("decode_mst: non-finite entries");

  // Kruskal over (weight, i, j): the sort order is exactly the tie-break.
  std::vector<std::tuple<double, int, int>> candidates;
  candidates.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) candidates.emplace_back(dist(i, j), i, j);
  std::sort(candidates.begin(), candidates.end());

  DisjointSets sets(n);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n - 1));
  for (const auto& [w, i, j] : candidates) {
    if (sets.unite(i, j)) {
      edges.emplace_back(i, j);
      if (static_cast<int>(edges.size()) == n - 1) break;
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace layerscope
