#include "layerscope/rsa.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "layerscope/errors.hpp"
#include "layerscope/metrics.hpp"
#include "layerscope/rng.hpp"

namespace layerscope {

StimulusSet sample_stimuli(const ActivationSet& set, std::size_t n,
                           std::uint64_t seed) {
  std::vector<TokenRef> eligible;
  for (const auto& t : set.tokens())
    if (!t.is_special) eligible.push_back({t.sentence_id, t.word_index});
  if (n > eligible.size())
    throw ConfigError("requested " + std::to_string(n) + " stimuli but only " +
                      std::to_string(eligible.size()) + " tokens are eligible");
  {
    auto sorted = eligible;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ShapeError("stimuli must come from a word-level set; duplicate "
                       "(sentence, word) tokens found");
  }

  // Partial Fisher-Yates: the first n slots are a uniform sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + rng.below(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  return {seed, std::move(eligible), set.domain_tag()};
}

std::vector<std::size_t> resolve_stimuli(const ActivationSet& set,
                                         const StimulusSet& stim) {
  std::map<TokenRef, std::size_t> index;
  const auto& toks = set.tokens();
  for (std::size_t i = 0; i < toks.size(); ++i)
    if (!toks[i].is_special)
      index.emplace(TokenRef{toks[i].sentence_id, toks[i].word_index}, i);
  std::vector<std::size_t> rows;
  rows.reserve(stim.n());
  for (const auto& p : stim.picks) {
    const auto it = index.find(p);
    if (it == index.end())
      throw ShapeError("stimulus (" + std::to_string(p.sentence_id) + ", " +
                       std::to_string(p.word_index) +
                       ") is not an eligible token");
    rows.push_back(it->second);
  }
  return rows;
}

SimilarityMatrix cosine_kernel(const Eigen::MatrixXd& vectors) {
  const Eigen::Index n = vectors.rows();
  Eigen::VectorXd norms = vectors.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(norms(i) > 0.0)) throw ZeroNormError(static_cast<std::size_t>(i));

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  gram.selfadjointView<Eigen::Upper>().rankUpdate(vectors);

  SimilarityMatrix out;
  out.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c =
          std::clamp(gram(i, j) / (norms(i) * norms(j)), -1.0, 1.0);
      out.values(i, j) = c;
      out.values(j, i) = c;
    }
  }
  return out;
}

std::vector<double> upper_triangle(const SimilarityMatrix& m) {
  const Eigen::Index n = m.values.rows();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(m.values(i, j));
  return out;
}

double rsa_score(const SimilarityMatrix& a, const SimilarityMatrix& b) {
  if (a.n() != b.n())
    throw ShapeError("rsa_score: matrix sizes differ (" + std::to_string(a.n()) +
                     " vs " + std::to_string(b.n()) + ")");
  if (a.n() < 3) throw ShapeError("rsa_score: need at least 3 stimuli");
  const auto ua = upper_triangle(a);
  const auto ub = upper_triangle(b);
  return pearson(ua, ub);
}

RsaCurve layerwise_rsa(const ActivationSet& a, const ActivationSet& b,
                       const StimulusSet& stim,
                       const std::vector<std::size_t>& layers) {
  if (a.tokens() != b.tokens())
    throw ShapeError("token metadata differs between the compared dumps");
  if (a.n_layers() != b.n_layers())
    throw ShapeError("layer counts differ (" + std::to_string(a.n_layers()) +
                     " vs " + std::to_string(b.n_layers()) + ")");

  std::vector<std::size_t> which = layers;
  if (which.empty())
    for (std::size_t l = 0; l < a.n_layers(); ++l) which.push_back(l);

  const auto rows = resolve_stimuli(a, stim);
  RsaCurve curve;
  curve.domain_tag = stim.domain_tag;
  curve.n_stimuli = stim.n();
  curve.seed = stim.seed;
  for (auto l : which) {
    if (l >= a.n_layers())
      throw ShapeError("layer " + std::to_string(l) + " missing (dumps have " +
                       std::to_string(a.n_layers()) + " layers)");
    const auto ka = cosine_kernel(gather_rows(a, l, rows));
    const auto kb = cosine_kernel(gather_rows(b, l, rows));
    curve.scores[l] = rsa_score(ka, kb);
  }
  return curve;
}

}  // namespace layerscope
