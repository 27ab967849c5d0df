#include "layerscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "layerscope/errors.hpp"
#include "layerscope/rng.hpp"

namespace layerscope {
namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) g(r, c) = rng.normal();
  return g;
}

Eigen::MatrixXd round_to_f32(const Eigen::MatrixXd& m) {
  return m.cast<float>().cast<double>();
}

std::vector<float> flatten_layers(const std::vector<std::vector<Eigen::MatrixXd>>& per_sentence,
                                  std::size_t n_layers, std::size_t n_tokens,
                                  std::size_t dim) {
  std::vector<float> data(n_layers * n_tokens * dim);
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::size_t token = 0;
    for (const auto& layers : per_sentence) {
      const auto& m = layers[l];
      for (Eigen::Index r = 0; r < m.rows(); ++r, ++token)
        for (Eigen::Index d = 0; d < m.cols(); ++d)
          data[(l * n_tokens + token) * dim + static_cast<std::size_t>(d)] =
              static_cast<float>(m(r, d));
    }
  }
  return data;
}

}  // namespace

void PlantConfig::validate() const {
  if (n_sentences == 0) throw ConfigError("need at least one sentence");
  if (min_size < 1 || min_size > max_size)
    throw ConfigError("invalid sentence size range");
  if (rank + 1 < max_size)
    throw ConfigError("rank " + std::to_string(rank) +
                      " too small for trees of " + std::to_string(max_size) +
                      " words (needs >= " + std::to_string(max_size - 1) + ")");
  if (rank == 0) throw ConfigError("rank must be positive");
  if (dim < rank) throw ConfigError("dim must be at least rank");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  if (planted_layer >= n_layers) throw ConfigError("planted layer out of range");
}

DepTree random_tree(std::size_t n_words, std::uint64_t seed) {
  if (n_words == 0) throw ConfigError("tree needs at least one word");
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (n_words == 2) {
    edges.emplace_back(0, 1);
  } else if (n_words > 2) {
    std::vector<std::size_t> code(n_words - 2);
    for (auto& c : code) c = rng.below(n_words);
    std::vector<std::size_t> degree(n_words, 1);
    for (auto c : code) ++degree[c];
    for (auto c : code) {
      std::size_t leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      edges.emplace_back(leaf, c);
      --degree[leaf];
      --degree[c];
    }
    std::size_t u = n_words, v = n_words;
    for (std::size_t i = 0; i < n_words; ++i) {
      if (degree[i] != 1) continue;
      (u == n_words ? u : v) = i;
    }
    edges.emplace_back(u, v);
  }

  std::vector<std::vector<std::size_t>> adj(n_words);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  const std::size_t root = rng.below(n_words);
  DepTree tree;
  tree.heads.assign(n_words, -1);
  tree.heads[root] = 0;
  std::deque<std::size_t> queue{root};
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u]) {
      if (tree.heads[v] != -1) continue;
      tree.heads[v] = static_cast<int>(u) + 1;
      queue.push_back(v);
    }
  }
  tree.deprels.assign(n_words, "dep");
  tree.deprels[root] = "root";
  tree.upos.assign(n_words, "X");
  return tree;
}

PlantedCorpus plant_tree_corpus(const PlantConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto m = static_cast<Eigen::Index>(cfg.dim);
  const auto k = static_cast<Eigen::Index>(cfg.rank);

  PlantedCorpus corpus;
  corpus.config = cfg;
  // Entries on a 2^-10 grid keep every root-path sum exactly representable
  // in f32, so the stored dump carries no rounding error at noise 0.
  corpus.embedding = gaussian(m, k, rng).unaryExpr(
      [](double v) { return std::ldexp(std::round(std::ldexp(v, 10)), -10); });
  corpus.planted_decoder =
      (corpus.embedding.transpose() * corpus.embedding)
          .ldlt()
          .solve(corpus.embedding.transpose());

  for (std::size_t s = 0; s < cfg.n_sentences; ++s) {
    const std::size_t n = cfg.min_size + rng.below(cfg.max_size - cfg.min_size + 1);
    PlantedSentence sent;
    sent.parse.tree = random_tree(n, rng.next());
    for (std::size_t i = 0; i < n; ++i) sent.parse.forms.push_back("w" + std::to_string(i + 1));

    // Each non-root word owns the coordinate of the edge to its head.
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) coords[static_cast<std::size_t>(i)] = i;
    rng.shuffle(coords.begin(), coords.end());
    const auto& heads = sent.parse.tree.heads;
    std::vector<Eigen::Index> coord_of(n, -1);
    for (std::size_t w = 0, next = 0; w < n; ++w)
      if (heads[w] != 0) coord_of[w] = coords[next++];
    Eigen::MatrixXd paths = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
    for (std::size_t w = 0; w < n; ++w) {
      for (std::size_t v = w; heads[v] != 0; v = static_cast<std::size_t>(heads[v] - 1))
        paths(static_cast<Eigen::Index>(w), coord_of[v]) = 1.0;
    }

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      Eigen::MatrixXd h;
      if (l == cfg.planted_layer) {
        h = paths * corpus.embedding.transpose();
        if (cfg.noise_sigma > 0.0)
          h += cfg.noise_sigma * gaussian(h.rows(), h.cols(), rng);
      } else {
        h = gaussian(static_cast<Eigen::Index>(n), m, rng);
      }
      sent.layers.push_back(round_to_f32(h));
    }
    corpus.sentences.push_back(std::move(sent));
  }
  return corpus;
}

ActivationSet PlantedCorpus::to_activation_set(const std::string& domain_tag) const {
  std::vector<TokenRecord> tokens;
  std::vector<std::vector<Eigen::MatrixXd>> layers;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& forms = sentences[s].parse.forms;
    for (std::size_t w = 0; w < forms.size(); ++w)
      tokens.push_back({static_cast<std::int64_t>(s), static_cast<std::int64_t>(w),
                        forms[w], false});
    layers.push_back(sentences[s].layers);
  }
  const auto n_tokens = tokens.size();
  return ActivationSet(config.n_layers, config.dim, std::move(tokens),
                       flatten_layers(layers, config.n_layers, n_tokens, config.dim),
                       domain_tag);
}

std::vector<ConlluSentence> PlantedCorpus::parses() const {
  std::vector<ConlluSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.parse);
  return out;
}

Eigen::MatrixXd random_orthogonal(std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ConfigError("orthogonal matrix needs m >= 1");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(m);
  const Eigen::MatrixXd g = gaussian(n, n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  return q;
}

ActivationSet random_activation_set(std::size_t n_layers,
                                    const std::vector<std::size_t>& sentence_lengths,
                                    std::size_t dim, std::uint64_t seed,
                                    const std::string& domain_tag) {
  Rng rng(seed);
  std::vector<TokenRecord> tokens;
  for (std::size_t s = 0; s < sentence_lengths.size(); ++s)
    for (std::size_t w = 0; w < sentence_lengths[s]; ++w)
      tokens.push_back({static_cast<std::int64_t>(s), static_cast<std::int64_t>(w),
                        "t" + std::to_string(w), false});
  std::vector<float> data(n_layers * tokens.size() * dim);
  for (auto& x : data) x = static_cast<float>(rng.normal());
  return ActivationSet(n_layers, dim, std::move(tokens), std::move(data), domain_tag);
}

ActivationSet rerandomize_layers(const ActivationSet& set, std::size_t first_layer,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> data(set.data().begin(), set.data().end());
  const std::size_t layer_size = set.n_tokens() * set.dim();
  for (std::size_t i = std::min(first_layer, set.n_layers()) * layer_size; i < data.size(); ++i)
    data[i] = static_cast<float>(rng.normal());
  return ActivationSet(set.n_layers(), set.dim(), set.tokens(), std::move(data),
                       set.domain_tag());
}

ActivationSet transform_layer(const ActivationSet& set, std::size_t layer,
                              const Eigen::MatrixXd& q) {
  const auto m = static_cast<Eigen::Index>(set.dim());
  if (q.rows() != m || q.cols() != m) throw ShapeError("transform must be dim x dim");
  if (layer >= set.n_layers()) throw ShapeError("layer out of range");
  std::vector<float> data(set.data().begin(), set.data().end());
  Eigen::VectorXd v(m);
  for (std::size_t t = 0; t < set.n_tokens(); ++t) {
    const auto row = set.row(layer, t);
    for (Eigen::Index d = 0; d < m; ++d) v(d) = row[static_cast<std::size_t>(d)];
    const Eigen::VectorXd out = q * v;
    float* dst = data.data() + (layer * set.n_tokens() + t) * set.dim();
    for (Eigen::Index d = 0; d < m; ++d) dst[d] = static_cast<float>(out(d));
  }
  return ActivationSet(set.n_layers(), set.dim(), set.tokens(), std::move(data),
                       set.domain_tag());
}

SpanTask plant_span_task(const SpanTaskConfig& cfg) {
  if (cfg.n_examples == 0 || cfg.n_labels == 0 || cfg.dim == 0 ||
      cfg.examples_per_sentence == 0 || cfg.max_span == 0 ||
      cfg.max_span > cfg.sentence_length)
    throw ConfigError("invalid span task configuration");
  Rng rng(cfg.seed);
  const std::size_t n_sentences =
      (cfg.n_examples + cfg.examples_per_sentence - 1) / cfg.examples_per_sentence;
  SpanTask task;
  task.activations = random_activation_set(1, std::vector<std::size_t>(n_sentences, cfg.sentence_length),
                                           cfg.dim, rng.next(), "synth");
  const std::size_t slots = cfg.two_span ? 2 : 1;
  const auto m = static_cast<Eigen::Index>(cfg.dim);
  task.generator = gaussian(static_cast<Eigen::Index>(cfg.n_labels),
                            static_cast<Eigen::Index>(slots) * m, rng);

  auto& ex = task.examples;
  ex.task_name = cfg.two_span ? "synth-pair" : "synth-span";
  for (std::size_t l = 0; l < cfg.n_labels; ++l) ex.label_vocab.push_back("L" + std::to_string(l));

  std::vector<std::string> tokens;
  for (std::size_t w = 0; w < cfg.sentence_length; ++w) tokens.push_back("t" + std::to_string(w));
  auto draw_span = [&] {
    const std::size_t len = 1 + rng.below(cfg.max_span);
    const std::size_t start = rng.below(cfg.sentence_length - len + 1);
    return Span{start, start + len};
  };
  auto span_mean = [&](std::size_t sentence, Span span) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    for (std::size_t w = span.start; w < span.end; ++w) {
      const auto row = task.activations.row(0, sentence * cfg.sentence_length + w);
      for (Eigen::Index d = 0; d < m; ++d) mean(d) += row[static_cast<std::size_t>(d)];
    }
    return Eigen::VectorXd(mean / static_cast<double>(span.size()));
  };

  for (std::size_t i = 0; i < cfg.n_examples; ++i) {
    const std::size_t sentence = i / cfg.examples_per_sentence;
    SpanExample e;
    e.sentence_index = sentence;
    e.tokens = tokens;
    e.span1 = draw_span();
    Eigen::VectorXd features(static_cast<Eigen::Index>(slots) * m);
    features.head(m) = span_mean(sentence, e.span1);
    if (cfg.two_span) {
      e.span2 = draw_span();
      features.tail(m) = span_mean(sentence, *e.span2);
    }
    const Eigen::VectorXd scores = task.generator * features;
    for (Eigen::Index l = 0; l < scores.size(); ++l)
      if (scores(l) > 0.0) e.labels.push_back(static_cast<std::size_t>(l));
    ex.examples.push_back(std::move(e));
  }
  return task;
}

}  // namespace layerscope
