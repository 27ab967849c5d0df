#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace layerscope {

struct ScoreSummary {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;
};

/// Sample Pearson correlation in f64. Throws UndefinedCorrelation when
/// either input is constant and ShapeError on length mismatch or length < 2.
double pearson(std::span<const double> x, std::span<const double> y);

/// Fractional (average) ranks, 1-based. Ties share the mean of the ranks
/// they span.
std::vector<double> average_ranks(std::span<const double> x);

/// Spearman correlation: pearson of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

/// (item, label) membership pair scored by micro-averaged F1.
using LabeledItem = std::pair<std::size_t, std::size_t>;

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro-averaged precision/recall/F1 over pooled (item, label) pairs.
/// Empty predictions give precision 0; empty gold gives recall 0; F1 is 0
/// whenever precision + recall is 0.
PrecisionRecall micro_f1(const std::set<LabeledItem>& pred,
                         const std::set<LabeledItem>& gold);

}  // namespace layerscope
