#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "layerscope/activations.hpp"

namespace layerscope {

struct TokenRef {
  std::int64_t sentence_id = 0;
  std::int64_t word_index = 0;
  friend auto operator<=>(const TokenRef&, const TokenRef&) = default;
};

/// Tokens shared by both sides of an RSA comparison.
struct StimulusSet {
  std::uint64_t seed = 0;
  std::vector<TokenRef> picks;
  std::string domain_tag;

  std::size_t n() const noexcept { return picks.size(); }
};

/// Symmetric n x n kernel matrix over a stimulus set.
struct SimilarityMatrix {
  Eigen::MatrixXd values;
  std::size_t n() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

struct RsaCurve {
  std::string model_a;
  std::string model_b;
  std::string domain_tag;
  std::size_t n_stimuli = 0;
  std::uint64_t seed = 0;
  std::map<std::size_t, double> scores;  // layer -> score
};

/// Draws n distinct non-special tokens uniformly without replacement.
/// Deterministic in (token list, n, seed). Throws ConfigError when fewer
/// than n tokens are eligible.
StimulusSet sample_stimuli(const ActivationSet& set, std::size_t n,
                           std::uint64_t seed);

/// Row index in `set` of every pick, in pick order. Throws ShapeError if a
/// pick is absent or refers to a special token.
std::vector<std::size_t> resolve_stimuli(const ActivationSet& set,
                                         const StimulusSet& stim);

/// Cosine similarity between every pair of rows. Each unordered pair is
/// computed once, so the result is exactly symmetric; the diagonal is 1.
/// Throws ZeroNormError naming the first zero row.
SimilarityMatrix cosine_kernel(const Eigen::MatrixXd& vectors);

/// Pearson correlation of the strict upper triangles, flattened row-major.
double rsa_score(const SimilarityMatrix& a, const SimilarityMatrix& b);

/// Strict upper triangle, flattened row-major.
std::vector<double> upper_triangle(const SimilarityMatrix& m);

/// RSA score at each requested layer (all shared layers when `layers` is
/// empty). Throws ShapeError when token metadata or layer counts disagree.
RsaCurve layerwise_rsa(const ActivationSet& a, const ActivationSet& b,
                       const StimulusSet& stim,
                       const std::vector<std::size_t>& layers = {});

}  // namespace layerscope
