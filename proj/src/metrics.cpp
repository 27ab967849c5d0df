#include "layerscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

// Neumaier-compensated sum in index order.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
}

double mean(std::span<const double> x) {
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ShapeError("pearson: length mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
  if (x.size() < 2) throw ShapeError("pearson: need at least 2 values");
  if (!all_finite(x) || !all_finite(y))
    throw ShapeError("pearson: non-finite input");
  if (is_constant(x) || is_constant(y))
    throw UndefinedCorrelation("pearson: zero variance input");

  const double mx = mean(x);
  const double my = mean(y);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  const double vx = sxx.value();
  const double vy = syy.value();
  if (!(vx > 0.0) || !(vy > 0.0))
    throw UndefinedCorrelation("pearson: zero variance input");
  const double r = sxy.value() / std::sqrt(vx * vy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j; their mean is (i+1+j)/2.
    const double r = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ShapeError("spearman: length mismatch");
  if (x.size() < 2) throw ShapeError("spearman: need at least 2 values");
  if (!all_finite(x) || !all_finite(y))
    throw ShapeError("spearman: non-finite input");
  if (is_constant(x) || is_constant(y))
    throw UndefinedCorrelation("spearman: all-equal input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

PrecisionRecall micro_f1(const std::set<LabeledItem>& pred,
                         const std::set<LabeledItem>& gold) {
  std::size_t hits = 0;
  for (const auto& p : pred) hits += gold.count(p);
  PrecisionRecall out;
  if (!pred.empty())
    out.precision = static_cast<double>(hits) / static_cast<double>(pred.size());
  if (!gold.empty())
    out.recall = static_cast<double>(hits) / static_cast<double>(gold.size());
  if (out.precision + out.recall > 0.0)
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

}  // namespace layerscope
