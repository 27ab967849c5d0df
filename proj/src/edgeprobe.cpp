#include "layerscope/edgeprobe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "layerscope/adam.hpp"
#include "layerscope/errors.hpp"
#include "layerscope/io_util.hpp"
#include "layerscope/rng.hpp"

namespace layerscope {
namespace {

constexpr char kEdgeMagic[4] = {'E', 'P', 'R', 'B'};
constexpr std::uint32_t kEdgeVersion = 1;
constexpr std::size_t kEdgeHeader = 4 + 4 * 7;

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// -[y log p + (1-y) log(1-p)] with p = logistic(z), computed from z.
double bce_from_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
}

void fill_uniform(Eigen::VectorXd& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

void check_span(Span span, Eigen::Index n_words) {
  if (span.start >= span.end) throw ShapeError("empty span");
  if (span.end > static_cast<std::size_t>(n_words))
    throw ShapeError("span [" + std::to_string(span.start) + ", " +
                     std::to_string(span.end) + ") exceeds sentence length " +
                     std::to_string(n_words));
}

// Intermediate values of one forward pass kept for backpropagation.
struct SlotTrace {
  Eigen::MatrixXd inputs;     // len x m
  Eigen::MatrixXd projected;  // len x d_p
  Eigen::VectorXd weights;    // len, softmax
  Eigen::VectorXd pooled;     // d_p
};

struct ForwardTrace {
  std::vector<SlotTrace> slots;
  Eigen::VectorXd concat;
  Eigen::VectorXd hidden;  // after tanh
  Eigen::VectorXd logits;
};

SlotTrace pool_slot(const EdgeProbeModel& model, std::size_t slot,
                    const Eigen::MatrixXd& words, Span span) {
  check_span(span, words.rows());
  if (words.cols() != model.projection.cols())
    throw ShapeError("edge probe expects dim " +
                     std::to_string(model.projection.cols()) + ", got " +
                     std::to_string(words.cols()));
  SlotTrace t;
  const auto len = static_cast<Eigen::Index>(span.size());
  t.inputs = words.middleRows(static_cast<Eigen::Index>(span.start), len);
  t.projected = t.inputs * model.projection.transpose();
  const Eigen::VectorXd scores = t.projected * model.attention[slot];
  const double top = scores.maxCoeff();
  t.weights = (scores.array() - top).exp().matrix();
  t.weights /= t.weights.sum();
  t.pooled = t.projected.transpose() * t.weights;
  return t;
}

ForwardTrace forward(const EdgeProbeModel& model, const Eigen::MatrixXd& words,
                     Span span1, const std::optional<Span>& span2) {
  if (span2.has_value() != model.two_span)
    throw ShapeError(model.two_span ? "two-span model given a single span"
                                    : "single-span model given two spans");
  ForwardTrace t;
  t.slots.push_back(pool_slot(model, 0, words, span1));
  if (span2) t.slots.push_back(pool_slot(model, 1, words, *span2));
  const auto dp = model.projection.rows();
  t.concat.resize(dp * static_cast<Eigen::Index>(t.slots.size()));
  for (std::size_t s = 0; s < t.slots.size(); ++s)
    t.concat.segment(static_cast<Eigen::Index>(s) * dp, dp) = t.slots[s].pooled;
  t.hidden = (model.hidden * t.concat + model.hidden_bias).array().tanh().matrix();
  t.logits = model.output * t.hidden + model.output_bias;
  return t;
}

EdgeProbeModel zeros_like(const EdgeProbeModel& m) {
  EdgeProbeModel z;
  z.layer = m.layer;
  z.two_span = m.two_span;
  z.projection = Eigen::MatrixXd::Zero(m.projection.rows(), m.projection.cols());
  for (const auto& a : m.attention) z.attention.push_back(Eigen::VectorXd::Zero(a.size()));
  z.hidden = Eigen::MatrixXd::Zero(m.hidden.rows(), m.hidden.cols());
  z.hidden_bias = Eigen::VectorXd::Zero(m.hidden_bias.size());
  z.output = Eigen::MatrixXd::Zero(m.output.rows(), m.output.cols());
  z.output_bias = Eigen::VectorXd::Zero(m.output_bias.size());
  return z;
}

Eigen::VectorXd gold_vector(const EdgeItem& item, std::size_t n_labels) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_labels));
  for (auto l : item.labels) y(static_cast<Eigen::Index>(l)) = 1.0;
  return y;
}

// Parameter blocks in declared field order, for the optimizer and the
// serializer.
template <typename Model, typename Fn>
void for_each_block(Model& m, Fn&& fn) {
  fn(m.projection);
  for (auto& a : m.attention) fn(a);
  fn(m.hidden);
  fn(m.hidden_bias);
  fn(m.output);
  fn(m.output_bias);
}

}  // namespace

void EdgeProbeModel::validate() const {
  const auto dp = projection.rows();
  if (attention.size() != slots())
    throw ShapeError("edge probe has " + std::to_string(attention.size()) +
                     " attention scorers for " + std::to_string(slots()) + " slots");
  for (const auto& a : attention)
    if (a.size() != dp) throw ShapeError("attention scorer width mismatch");
  if (hidden.cols() != dp * static_cast<Eigen::Index>(slots()))
    throw ShapeError("hidden layer input width mismatch");
  if (hidden_bias.size() != hidden.rows()) throw ShapeError("hidden bias mismatch");
  if (output.cols() != hidden.rows()) throw ShapeError("output layer width mismatch");
  if (output_bias.size() != output.rows()) throw ShapeError("output bias mismatch");
}

void EdgeTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw ConfigError("dev fraction must lie in (0, 1)");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("decision threshold must lie in (0, 1)");
  if (projection_dim == 0 || hidden_dim == 0)
    throw ConfigError("edge probe widths must be positive");
}

EdgeData edge_dataset(const SpanExampleSet& examples, const ActivationSet& set,
                      std::size_t layer) {
  EdgeData data;
  data.layer = layer;
  data.n_labels = examples.label_vocab.size();
  data.two_span = examples.two_span();

  const auto sentences = sentence_rows(set);
  std::map<std::int64_t, std::size_t> by_id;
  for (std::size_t i = 0; i < sentences.size(); ++i) by_id[sentences[i].sentence_id] = i;

  std::map<std::size_t, std::size_t> loaded;  // dump sentence -> data.sentences slot
  for (const auto& ex : examples.examples) {
    const auto it = by_id.find(static_cast<std::int64_t>(ex.sentence_index));
    if (it == by_id.end())
      throw ShapeError("no activations for sentence " + std::to_string(ex.sentence_index));
    const auto& rows = sentences[it->second].rows;
    if (rows.size() != ex.tokens.size())
      throw ShapeError("sentence " + std::to_string(ex.sentence_index) + " has " +
                       std::to_string(rows.size()) + " vectors but " +
                       std::to_string(ex.tokens.size()) + " tokens");
    if (ex.span2.has_value() != data.two_span)
      throw ShapeError("examples mix single-span and two-span shapes");
    auto [slot, fresh] = loaded.try_emplace(it->second, data.sentences.size());
    if (fresh) data.sentences.push_back(gather_rows(set, layer, rows));
    data.items.push_back({slot->second, ex.span1, ex.span2, ex.labels});
  }
  return data;
}

EdgeProbeModel init_edge_probe(std::size_t dim, std::size_t n_labels,
                               bool two_span, std::size_t layer,
                               std::size_t projection_dim,
                               std::size_t hidden_dim, std::uint64_t seed) {
  if (dim == 0 || n_labels == 0)
    throw ConfigError("edge probe needs a positive input dim and label count");
  Rng rng(seed);
  EdgeProbeModel m;
  m.layer = layer;
  m.two_span = two_span;
  const auto dp = static_cast<Eigen::Index>(projection_dim);
  const auto dh = static_cast<Eigen::Index>(hidden_dim);
  const auto slots = static_cast<Eigen::Index>(m.slots());

  m.projection.resize(dp, static_cast<Eigen::Index>(dim));
  fill_uniform(m.projection, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  for (Eigen::Index s = 0; s < slots; ++s) {
    Eigen::VectorXd a(dp);
    fill_uniform(a, 1.0 / std::sqrt(static_cast<double>(dp)), rng);
    m.attention.push_back(std::move(a));
  }
  m.hidden.resize(dh, dp * slots);
  fill_uniform(m.hidden, 1.0 / std::sqrt(static_cast<double>(dp * slots)), rng);
  m.hidden_bias = Eigen::VectorXd::Zero(dh);
  m.output.resize(static_cast<Eigen::Index>(n_labels), dh);
  fill_uniform(m.output, 1.0 / std::sqrt(static_cast<double>(dh)), rng);
  m.output_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_labels));
  return m;
}

Eigen::VectorXd span_representation(const EdgeProbeModel& model,
                                    std::size_t slot,
                                    const Eigen::MatrixXd& words, Span span) {
  if (slot >= model.attention.size())
    throw ShapeError("span slot " + std::to_string(slot) + " out of range");
  return pool_slot(model, slot, words, span).pooled;
}

Eigen::VectorXd edge_forward(const EdgeProbeModel& model,
                             const Eigen::MatrixXd& words, Span span1,
                             const std::optional<Span>& span2) {
  const auto t = forward(model, words, span1, span2);
  return t.logits.unaryExpr(&logistic);
}

double edge_loss(const EdgeProbeModel& model, const EdgeData& data,
                 std::span<const std::size_t> items) {
  if (items.empty()) throw ShapeError("empty edge-probe batch");
  double total = 0.0;
  for (auto i : items) {
    const auto& item = data.items[i];
    const auto t = forward(model, data.sentences[item.sentence], item.span1, item.span2);
    const auto y = gold_vector(item, data.n_labels);
    for (Eigen::Index l = 0; l < y.size(); ++l) total += bce_from_logit(t.logits(l), y(l));
  }
  return total / (static_cast<double>(items.size()) * static_cast<double>(data.n_labels));
}

EdgeProbeModel edge_loss_grad(const EdgeProbeModel& model, const EdgeData& data,
                              std::span<const std::size_t> items, double* loss) {
  if (items.empty()) throw ShapeError("empty edge-probe batch");
  EdgeProbeModel g = zeros_like(model);
  const double scale =
      1.0 / (static_cast<double>(items.size()) * static_cast<double>(data.n_labels));
  const auto dp = model.projection.rows();
  double total = 0.0;

  for (auto i : items) {
    const auto& item = data.items[i];
    const auto t = forward(model, data.sentences[item.sentence], item.span1, item.span2);
    const auto y = gold_vector(item, data.n_labels);
    for (Eigen::Index l = 0; l < y.size(); ++l) total += bce_from_logit(t.logits(l), y(l));

    const Eigen::VectorXd d_logits = scale * (t.logits.unaryExpr(&logistic) - y);
    g.output.noalias() += d_logits * t.hidden.transpose();
    g.output_bias += d_logits;
    const Eigen::VectorXd d_pre =
        (model.output.transpose() * d_logits).cwiseProduct(
            (1.0 - t.hidden.array().square()).matrix());
    g.hidden.noalias() += d_pre * t.concat.transpose();
    g.hidden_bias += d_pre;
    const Eigen::VectorXd d_concat = model.hidden.transpose() * d_pre;

    for (std::size_t s = 0; s < t.slots.size(); ++s) {
      const auto& st = t.slots[s];
      const Eigen::VectorXd d_pooled = d_concat.segment(static_cast<Eigen::Index>(s) * dp, dp);
      // pooled = Z^T w, w = softmax(Z a)
      Eigen::MatrixXd d_proj = st.weights * d_pooled.transpose();
      const Eigen::VectorXd d_w = st.projected * d_pooled;
      const Eigen::VectorXd d_scores =
          st.weights.cwiseProduct((d_w.array() - st.weights.dot(d_w)).matrix());
      g.attention[s].noalias() += st.projected.transpose() * d_scores;
      d_proj.noalias() += d_scores * model.attention[s].transpose();
      g.projection.noalias() += d_proj.transpose() * st.inputs;
    }
  }
  if (loss) *loss = total * scale;
  return g;
}

EdgeTrainResult train_edge_probe(const EdgeData& data, const EdgeTrainConfig& cfg) {
  cfg.validate();
  if (data.items.empty()) throw ConfigError("no edge-probe examples to train on");
  if (data.n_labels == 0) throw ConfigError("empty label vocabulary");
  const auto dim = static_cast<std::size_t>(data.sentences.front().cols());

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  const auto n_dev = static_cast<std::size_t>(
      std::llround(cfg.dev_fraction * static_cast<double>(order.size())));
  if (n_dev < 1) throw ConfigError("dev split holds no example");
  if (n_dev >= order.size()) throw ConfigError("dev split leaves no training data");
  std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_dev), order.end());

  EdgeTrainResult result;
  result.model = init_edge_probe(dim, data.n_labels, data.two_span, data.layer,
                                 cfg.projection_dim, cfg.hidden_dim, cfg.seed);
  result.best_dev_loss = edge_loss(result.model, data, dev);
  EdgeProbeModel model = result.model;

  std::vector<AdamSlot> slots;
  for_each_block(model, [&](auto& block) { slots.emplace_back(block.rows(), block.cols()); });

  double lr = cfg.learning_rate;
  std::int64_t step = 0;
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(train.begin(), train.end());
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, train.size());
      auto grad = edge_loss_grad(
          model, data, std::span<const std::size_t>(train).subspan(start, stop - start));
      ++step;
      std::vector<Eigen::MatrixXd> grads;
      for_each_block(grad, [&](auto& block) { grads.emplace_back(block); });
      std::size_t k = 0;
      for_each_block(model, [&](auto& block) {
        Eigen::MatrixXd p = block;
        slots[k].update(p, grads[k], lr, step);
        block = p;
        ++k;
      });
    }
    ++result.epochs_run;

    const double dev_loss = edge_loss(model, data, dev);
    if (dev_loss < result.best_dev_loss) {
      result.best_dev_loss = dev_loss;
      result.model = model;
      stale = 0;
    } else {
      lr *= 0.5;
      if (++stale >= cfg.patience) break;
    }
  }
  return result;
}

std::vector<Eigen::VectorXd> edge_probabilities(const EdgeProbeModel& model,
                                                const EdgeData& data) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(data.items.size());
  for (const auto& item : data.items)
    out.push_back(edge_forward(model, data.sentences[item.sentence], item.span1, item.span2));
  return out;
}

PrecisionRecall score_edge_predictions(const std::vector<Eigen::VectorXd>& probs,
                                       const EdgeData& data, double threshold) {
  std::set<LabeledItem> pred, gold;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    for (auto l : data.items[i].labels) gold.emplace(i, l);
    for (Eigen::Index l = 0; l < probs[i].size(); ++l)
      if (probs[i](l) >= threshold) pred.emplace(i, static_cast<std::size_t>(l));
  }
  return micro_f1(pred, gold);
}

PrecisionRecall eval_edge_probe(const EdgeProbeModel& model, const EdgeData& data,
                                double threshold) {
  if (model.n_labels() != data.n_labels)
    throw ShapeError("model predicts " + std::to_string(model.n_labels()) +
                     " labels, data has " + std::to_string(data.n_labels));
  return score_edge_predictions(edge_probabilities(model, data), data, threshold);
}

std::string encode_edge_probe(const EdgeProbeModel& model) {
  using detail::put_le;
  model.validate();
  std::string out(kEdgeMagic, 4);
  put_le<std::uint32_t>(out, kEdgeVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer));
  put_le<std::uint32_t>(out, model.two_span ? 1u : 0u);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.projection.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.projection.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.output.rows()));
  std::vector<float> values;
  for_each_block(model, [&](const auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      for (Eigen::Index c = 0; c < block.cols(); ++c)
        values.push_back(static_cast<float>(block(r, c)));
  });
  detail::append_f32(out, values);
  return out;
}

EdgeProbeModel decode_edge_probe(std::string_view bytes) {
  using Kind = FormatError::Kind;
  using detail::get_le;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEdgeMagic, 4) != 0)
    throw FormatError(Kind::kBadMagic, "missing EPRB magic");
  if (bytes.size() < kEdgeHeader)
    throw FormatError(Kind::kTruncated, "EPRB header truncated");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kEdgeVersion)
    throw FormatError(Kind::kBadVersion, "unsupported EPRB version " + std::to_string(version));
  EdgeProbeModel m;
  m.layer = get_le<std::uint32_t>(bytes, 8);
  const auto two = get_le<std::uint32_t>(bytes, 12);
  if (two > 1) throw FormatError(Kind::kBadMetadata, "bad two-span flag");
  m.two_span = two == 1;
  const Eigen::Index dim = get_le<std::uint32_t>(bytes, 16);
  const Eigen::Index dp = get_le<std::uint32_t>(bytes, 20);
  const Eigen::Index dh = get_le<std::uint32_t>(bytes, 24);
  const Eigen::Index nl = get_le<std::uint32_t>(bytes, 28);
  const auto slots = static_cast<Eigen::Index>(m.slots());

  m.projection.resize(dp, dim);
  m.attention.assign(static_cast<std::size_t>(slots), Eigen::VectorXd(dp));
  m.hidden.resize(dh, dp * slots);
  m.hidden_bias.resize(dh);
  m.output.resize(nl, dh);
  m.output_bias.resize(nl);

  std::uint64_t count = 0;
  for_each_block(m, [&](const auto& block) { count += static_cast<std::uint64_t>(block.size()); });
  const std::uint64_t payload = count * 4;
  if (bytes.size() - kEdgeHeader < payload)
    throw FormatError(Kind::kTruncated, "EPRB payload truncated");
  if (bytes.size() - kEdgeHeader > payload)
    throw FormatError(Kind::kTrailingBytes, "unexpected bytes after EPRB payload");
  const auto values = detail::decode_f32(bytes.substr(kEdgeHeader, payload));
  std::size_t k = 0;
  for_each_block(m, [&](auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = values[k++];
  });
  return m;
}

void write_edge_probe(const EdgeProbeModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_edge_probe(model));
}

EdgeProbeModel read_edge_probe(const std::filesystem::path& path) {
  return decode_edge_probe(read_file(path));
}

}  // namespace layerscope
