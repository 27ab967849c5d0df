#include "layerscope/structprobe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "layerscope/adam.hpp"
#include "layerscope/errors.hpp"
#include "layerscope/io_util.hpp"
#include "layerscope/metrics.hpp"
#include "layerscope/rng.hpp"
#include "layerscope/tree.hpp"

namespace layerscope {
namespace {

constexpr char kProbeMagic[4] = {'P', 'R', 'B', 'E'};
constexpr std::uint32_t kProbeVersion = 1;
constexpr std::size_t kProbeHeader = 4 + 4 * 5;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_dim(const ProbeParams& p, Eigen::Index m) {
  if (p.B.cols() != m)
    throw ShapeError("probe expects dim " + std::to_string(p.B.cols()) +
                     ", got " + std::to_string(m));
}

// Adds one sentence's loss and subgradient (unscaled by batch size).
double accumulate(ProbeKind kind, const Eigen::MatrixXd& B,
                  const ProbeSentence& s, Eigen::MatrixXd& grad) {
  const Eigen::Index n = s.words.rows();
  if (n == 0) throw ShapeError("empty sentence in probe batch");
  const Eigen::MatrixXd P = s.words * B.transpose();  // n x k
  const double nd = static_cast<double>(n);

  if (kind == ProbeKind::kDepth) {
    Eigen::VectorXd signs(n);
    double loss = 0.0;
    for (Eigen::Index w = 0; w < n; ++w) {
      const double r = P.row(w).squaredNorm() - s.gold_depths(w);
      loss += std::abs(r);
      signs(w) = sign(r);
    }
    // d/dB |Bh|^2 = 2 (Bh) h^T
    grad.noalias() += (2.0 / nd) * P.transpose() * signs.asDiagonal() * s.words;
    return loss / nd;
  }

  Eigen::MatrixXd S(n, n);
  double loss = 0.0;
  for (Eigen::Index u = 0; u < n; ++u) {
    S(u, u) = 0.0;
    for (Eigen::Index v = u + 1; v < n; ++v) {
      const double r = (P.row(u) - P.row(v)).squaredNorm() - s.gold_distances(u, v);
      loss += 2.0 * std::abs(r);
      S(u, v) = S(v, u) = sign(r);
    }
    // Diagonal terms: prediction and gold are both zero.
  }
  // sum_uv s_uv (h_u - h_v)(h_u - h_v)^T = 2 H^T (diag(S 1) - S) H
  Eigen::MatrixXd L = -S;
  L.diagonal() += S.rowwise().sum();
  grad.noalias() += (4.0 / (nd * nd)) * P.transpose() * L * s.words;
  return loss / (nd * nd);
}

LossAndGrad loss_and_grad(ProbeKind kind, const Eigen::MatrixXd& B,
                          std::span<const ProbeSentence> data,
                          std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("empty probe batch");
  LossAndGrad out{0.0, Eigen::MatrixXd::Zero(B.rows(), B.cols())};
  for (auto i : indices) {
    if (data[i].words.cols() != B.cols())
      throw ShapeError("probe expects dim " + std::to_string(B.cols()) +
                       ", got " + std::to_string(data[i].words.cols()));
    out.loss += accumulate(kind, B, data[i], out.grad);
  }
  const double b = static_cast<double>(indices.size());
  out.loss /= b;
  out.grad /= b;
  return out;
}

double mean_loss(ProbeKind kind, const Eigen::MatrixXd& B,
                 std::span<const ProbeSentence> data,
                 std::span<const std::size_t> indices) {
  return loss_and_grad(kind, B, data, indices).loss;
}

// Correlations need at least two words whatever the configured window.
bool in_window(std::size_t n, const StructEvalOptions& opts) {
  return n >= std::max<std::size_t>(opts.min_length, 2) && n <= opts.max_length;
}

}  // namespace

const char* to_string(ProbeKind kind) {
  return kind == ProbeKind::kDepth ? "depth" : "distance";
}

void ProbeTrainConfig::validate() const {
  if (rank == 0) throw ConfigError("probe rank must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw ConfigError("dev fraction must lie in (0, 1)");
}

ProbeSentence make_probe_sentence(Eigen::MatrixXd words, DepTree tree) {
  validate_tree(tree);
  if (static_cast<std::size_t>(words.rows()) != tree.n_words())
    throw ShapeError("sentence has " + std::to_string(words.rows()) +
                     " vectors but " + std::to_string(tree.n_words()) +
                     " words in its parse");
  ProbeSentence s;
  const auto depths = tree_depths(tree);
  s.gold_depths.resize(static_cast<Eigen::Index>(depths.size()));
  for (std::size_t i = 0; i < depths.size(); ++i)
    s.gold_depths(static_cast<Eigen::Index>(i)) = depths[i];
  s.gold_distances = tree_distances(tree).cast<double>();
  s.words = std::move(words);
  s.tree = std::move(tree);
  return s;
}

std::vector<ProbeSentence> probe_dataset(
    const ActivationSet& set, const std::vector<ConlluSentence>& parses,
    std::size_t layer) {
  const auto sentences = sentence_rows(set);
  if (sentences.size() != parses.size())
    throw ShapeError("dump has " + std::to_string(sentences.size()) +
                     " sentences but the treebank has " +
                     std::to_string(parses.size()));
  std::vector<ProbeSentence> out;
  out.reserve(parses.size());
  for (std::size_t i = 0; i < parses.size(); ++i)
    out.push_back(make_probe_sentence(gather_rows(set, layer, sentences[i].rows),
                                      parses[i].tree));
  return out;
}

double depth_predict(const ProbeParams& p, const Eigen::VectorXd& h) {
  check_dim(p, h.size());
  return (p.B * h).squaredNorm();
}

double dist_predict(const ProbeParams& p, const Eigen::VectorXd& hi,
                    const Eigen::VectorXd& hj) {
  check_dim(p, hi.size());
  check_dim(p, hj.size());
  return (p.B * (hi - hj)).squaredNorm();
}

Eigen::VectorXd predict_depths(const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& words) {
  return (words * B.transpose()).rowwise().squaredNorm();
}

Eigen::MatrixXd predict_distances(const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& words) {
  const Eigen::MatrixXd P = words * B.transpose();
  const Eigen::Index n = P.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    D(u, u) = 0.0;
    for (Eigen::Index v = u + 1; v < n; ++v)
      D(u, v) = D(v, u) = (P.row(u) - P.row(v)).squaredNorm();
  }
  return D;
}

LossAndGrad probe_loss_and_grad(const ProbeParams& p,
                                std::span<const ProbeSentence> batch) {
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_grad(p.kind, p.B, batch, all);
}

ProbeParams init_probe(ProbeKind kind, std::size_t rank, std::size_t dim,
                       std::size_t layer, std::uint64_t seed) {
  if (rank == 0 || dim == 0) throw ConfigError("probe rank and dim must be positive");
  if (rank > dim)
    throw ConfigError("probe rank " + std::to_string(rank) +
                      " exceeds activation dim " + std::to_string(dim));
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  ProbeParams p{kind, Eigen::MatrixXd(rank, dim), layer};
  for (Eigen::Index r = 0; r < p.B.rows(); ++r)
    for (Eigen::Index c = 0; c < p.B.cols(); ++c)
      p.B(r, c) = rng.uniform(-bound, bound);
  return p;
}

ProbeTrainResult train_probe(ProbeKind kind, std::span<const ProbeSentence> data,
                             std::size_t layer, const ProbeTrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("no sentences to train on");
  const auto dim = static_cast<std::size_t>(data.front().words.cols());

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  const auto n_dev = static_cast<std::size_t>(
      std::llround(cfg.dev_fraction * static_cast<double>(data.size())));
  if (n_dev < 1) throw ConfigError("dev split holds no sentence");
  if (n_dev >= data.size()) throw ConfigError("dev split leaves no training data");
  std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_dev), order.end());

  ProbeTrainResult result;
  result.params = init_probe(kind, cfg.rank, dim, layer, cfg.seed);
  Eigen::MatrixXd B = result.params.B;
  result.best_dev_loss = mean_loss(kind, B, data, dev);

  AdamSlot adam(B.rows(), B.cols());
  double lr = cfg.learning_rate;
  std::int64_t step = 0;
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(train.begin(), train.end());
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, train.size());
      const auto batch = std::span<const std::size_t>(train).subspan(start, stop - start);
      const auto lg = loss_and_grad(kind, B, data, batch);
      adam.update(B, lg.grad, lr, ++step);
    }
    ++result.epochs_run;

    const double dev_loss = mean_loss(kind, B, data, dev);
    if (dev_loss < result.best_dev_loss) {
      result.best_dev_loss = dev_loss;
      result.params.B = B;
      stale = 0;
    } else {
      lr *= 0.5;
      if (++stale >= cfg.patience) break;
    }
  }
  return result;
}

void score_depths(const std::vector<Eigen::VectorXd>& predicted,
                  std::span<const ProbeSentence> data,
                  const StructEvalOptions& opts, StructEvalReport& report) {
  std::size_t correct_roots = 0;
  double spearman_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& pred = predicted[i];
    const auto& s = data[i];
    Eigen::Index argmin = 0;
    for (Eigen::Index w = 1; w < pred.size(); ++w)
      if (pred(w) < pred(argmin)) argmin = w;
    if (static_cast<std::size_t>(argmin) == s.tree.root()) ++correct_roots;

    if (!in_window(s.tree.n_words(), opts)) continue;
    try {
      spearman_sum += spearman({pred.data(), static_cast<std::size_t>(pred.size())},
                               {s.gold_depths.data(),
                                static_cast<std::size_t>(s.gold_depths.size())});
      ++report.depth_spearman_sentences;
    } catch (const UndefinedCorrelation&) {
      ++report.depth_spearman_undefined;
    }
  }
  report.n_sentences = data.size();
  if (!data.empty())
    report.root_acc = static_cast<double>(correct_roots) / static_cast<double>(data.size());
  if (report.depth_spearman_sentences > 0)
    report.depth_spearman =
        spearman_sum / static_cast<double>(report.depth_spearman_sentences);
}

void score_distances(const std::vector<Eigen::MatrixXd>& predicted,
                     std::span<const ProbeSentence> data,
                     const StructEvalOptions& opts, StructEvalReport& report) {
  std::size_t matched = 0;
  std::size_t gold_total = 0;
  double spearman_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& pred = predicted[i];
    const auto& s = data[i];
    const auto n = static_cast<Eigen::Index>(s.tree.n_words());

    auto is_punct = [&](int w) {
      return opts.exclude_punct &&
             s.tree.upos[static_cast<std::size_t>(w)] == opts.punct_upos;
    };
    std::set<Edge> gold;
    for (const auto& e : tree_edges(s.tree))
      if (!is_punct(e.first) && !is_punct(e.second)) gold.insert(e);
    gold_total += gold.size();
    for (const auto& e : decode_mst(pred))
      if (gold.count(e)) ++matched;

    if (!in_window(s.tree.n_words(), opts)) continue;
    double row_sum = 0.0;
    std::size_t rows = 0;
    for (Eigen::Index u = 0; u < n; ++u) {
      const Eigen::VectorXd p = pred.row(u).transpose();
      const Eigen::VectorXd g = s.gold_distances.row(u).transpose();
      try {
        row_sum += spearman({p.data(), static_cast<std::size_t>(n)},
                            {g.data(), static_cast<std::size_t>(n)});
        ++rows;
      } catch (const UndefinedCorrelation&) {
      }
    }
    if (rows == 0) {
      ++report.dist_spearman_undefined;
      continue;
    }
    spearman_sum += row_sum / static_cast<double>(rows);
    ++report.dist_spearman_sentences;
  }
  report.n_sentences = data.size();
  if (gold_total > 0)
    report.uuas = static_cast<double>(matched) / static_cast<double>(gold_total);
  if (report.dist_spearman_sentences > 0)
    report.dist_spearman =
        spearman_sum / static_cast<double>(report.dist_spearman_sentences);
}

StructEvalReport eval_depth(const ProbeParams& p,
                            std::span<const ProbeSentence> data,
                            const StructEvalOptions& opts) {
  std::vector<Eigen::VectorXd> pred;
  pred.reserve(data.size());
  for (const auto& s : data) {
    check_dim(p, s.words.cols());
    pred.push_back(predict_depths(p.B, s.words));
  }
  StructEvalReport report;
  score_depths(pred, data, opts, report);
  return report;
}

StructEvalReport eval_distance(const ProbeParams& p,
                               std::span<const ProbeSentence> data,
                               const StructEvalOptions& opts) {
  std::vector<Eigen::MatrixXd> pred;
  pred.reserve(data.size());
  for (const auto& s : data) {
    check_dim(p, s.words.cols());
    pred.push_back(predict_distances(p.B, s.words));
  }
  StructEvalReport report;
  score_distances(pred, data, opts, report);
  return report;
}

StructEvalReport eval_structural(const ProbeParams& p_depth,
                                 const ProbeParams& p_dist,
                                 std::span<const ProbeSentence> data,
                                 const StructEvalOptions& opts) {
  if (p_depth.layer != p_dist.layer)
    throw ShapeError("depth and distance probes were trained at different layers");
  auto report = eval_depth(p_depth, data, opts);
  const auto dist = eval_distance(p_dist, data, opts);
  report.uuas = dist.uuas;
  report.dist_spearman = dist.dist_spearman;
  report.dist_spearman_sentences = dist.dist_spearman_sentences;
  report.dist_spearman_undefined = dist.dist_spearman_undefined;
  return report;
}

std::string encode_probe(const ProbeParams& p) {
  using detail::put_le;
  std::string out(kProbeMagic, 4);
  put_le<std::uint32_t>(out, kProbeVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.kind));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.B.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.B.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.layer));
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(p.B.size()));
  for (Eigen::Index r = 0; r < p.B.rows(); ++r)
    for (Eigen::Index c = 0; c < p.B.cols(); ++c)
      values.push_back(static_cast<float>(p.B(r, c)));
  detail::append_f32(out, values);
  return out;
}

ProbeParams decode_probe(std::string_view bytes) {
  using Kind = FormatError::Kind;
  using detail::get_le;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kProbeMagic, 4) != 0)
    throw FormatError(Kind::kBadMagic, "missing PRBE magic");
  if (bytes.size() < kProbeHeader)
    throw FormatError(Kind::kTruncated, "PRBE header truncated");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kProbeVersion)
    throw FormatError(Kind::kBadVersion,
                      "unsupported PRBE version " + std::to_string(version));
  const auto kind = get_le<std::uint32_t>(bytes, 8);
  if (kind > 1)
    throw FormatError(Kind::kBadMetadata, "unknown probe kind " + std::to_string(kind));
  const std::uint64_t k = get_le<std::uint32_t>(bytes, 12);
  const std::uint64_t m = get_le<std::uint32_t>(bytes, 16);
  const auto layer = get_le<std::uint32_t>(bytes, 20);
  const std::uint64_t payload = k * m * 4;
  if (bytes.size() - kProbeHeader < payload)
    throw FormatError(Kind::kTruncated, "PRBE payload truncated");
  if (bytes.size() - kProbeHeader > payload)
    throw FormatError(Kind::kTrailingBytes, "unexpected bytes after PRBE payload");
  const auto values = detail::decode_f32(bytes.substr(kProbeHeader, payload));
  ProbeParams p{static_cast<ProbeKind>(kind),
                Eigen::MatrixXd(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)),
                layer};
  for (Eigen::Index r = 0; r < p.B.rows(); ++r)
    for (Eigen::Index c = 0; c < p.B.cols(); ++c)
      p.B(r, c) = values[static_cast<std::size_t>(r * p.B.cols() + c)];
  return p;
}

void write_probe(const ProbeParams& p, const std::filesystem::path& path) {
  write_file_atomic(path, encode_probe(p));
}

ProbeParams read_probe(const std::filesystem::path& path) {
  return decode_probe(read_file(path));
}

}  // namespace layerscope
