#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace layerscope {

using Edge = std::pair<int, int>;

/// Minimum spanning tree of the complete graph weighted by the upper
/// triangle of `dist`. Equal weights prefer the lexicographically smallest
/// (i, j). Returns n-1 edges with i < j, sorted. Throws ShapeError on a
/// non-square or non-finite matrix.
std::vector<Edge> decode_mst(const Eigen::MatrixXd& dist);

}  // namespace layerscope
