#pragma once

#include <vector>

#include <Eigen/Dense>

#include "layerscope/conllu.hpp"

namespace layerscope {

/// Edges from the root to each word; the root has depth 0.
std::vector<int> tree_depths(const DepTree& tree);

/// Number of edges on the path between every pair of words.
Eigen::MatrixXi tree_distances(const DepTree& tree);

/// Undirected edges (i, j) with i < j, 0-based, sorted.
std::vector<std::pair<int, int>> tree_edges(const DepTree& tree);

}  // namespace layerscope
