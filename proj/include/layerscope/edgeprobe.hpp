#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "layerscope/activations.hpp"
#include "layerscope/metrics.hpp"
#include "layerscope/span_examples.hpp"

namespace layerscope {

/// Shallow span classifier over frozen activations: a shared projection,
/// self-attentive pooling per span slot, one tanh hidden layer, and
/// independent logistic outputs per label.
struct EdgeProbeModel {
  std::size_t layer = 0;
  bool two_span = false;
  Eigen::MatrixXd projection;              // d_p x m
  std::vector<Eigen::VectorXd> attention;  // one d_p scorer per span slot
  Eigen::MatrixXd hidden;                  // d_h x (slots * d_p)
  Eigen::VectorXd hidden_bias;             // d_h
  Eigen::MatrixXd output;                  // labels x d_h
  Eigen::VectorXd output_bias;             // labels

  std::size_t slots() const noexcept { return two_span ? 2 : 1; }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(projection.cols()); }
  std::size_t n_labels() const noexcept { return static_cast<std::size_t>(output.rows()); }

  /// Throws ShapeError unless all blocks agree in shape.
  void validate() const;
};

struct EdgeTrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 40;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  double dev_fraction = 0.1;
  double threshold = 0.5;
  std::size_t projection_dim = 512;
  std::size_t hidden_dim = 256;

  void validate() const;
};

struct EdgeItem {
  std::size_t sentence = 0;  // index into EdgeData::sentences
  Span span1;
  std::optional<Span> span2;
  std::vector<std::size_t> labels;
};

/// Examples bound to their sentences' word vectors at one layer.
struct EdgeData {
  std::size_t layer = 0;
  std::size_t n_labels = 0;
  bool two_span = false;
  std::vector<Eigen::MatrixXd> sentences;  // n_words x m each
  std::vector<EdgeItem> items;
};

/// Binds each example to the dump sentence whose id equals its
/// sentence_index. Throws ShapeError if a sentence is missing or its word
/// count differs from the example's tokens.
EdgeData edge_dataset(const SpanExampleSet& examples, const ActivationSet& set,
                      std::size_t layer);

EdgeProbeModel init_edge_probe(std::size_t dim, std::size_t n_labels,
                               bool two_span, std::size_t layer,
                               std::size_t projection_dim,
                               std::size_t hidden_dim, std::uint64_t seed);

/// Projected, attention-pooled representation of one span.
Eigen::VectorXd span_representation(const EdgeProbeModel& model,
                                    std::size_t slot,
                                    const Eigen::MatrixXd& words, Span span);

Eigen::VectorXd edge_forward(const EdgeProbeModel& model,
                             const Eigen::MatrixXd& words, Span span1,
                             const std::optional<Span>& span2);

/// Mean binary cross-entropy over items and labels.
double edge_loss(const EdgeProbeModel& model, const EdgeData& data,
                 std::span<const std::size_t> items);

/// Gradient of edge_loss in the same layout as EdgeProbeModel.
EdgeProbeModel edge_loss_grad(const EdgeProbeModel& model, const EdgeData& data,
                              std::span<const std::size_t> items,
                              double* loss = nullptr);

struct EdgeTrainResult {
  EdgeProbeModel model;
  double best_dev_loss = 0.0;
  std::size_t epochs_run = 0;
};

EdgeTrainResult train_edge_probe(const EdgeData& data,
                                 const EdgeTrainConfig& cfg);

/// Per-item label probabilities.
std::vector<Eigen::VectorXd> edge_probabilities(const EdgeProbeModel& model,
                                                const EdgeData& data);

/// Scores the labels whose probability reaches `threshold` against gold.
PrecisionRecall score_edge_predictions(const std::vector<Eigen::VectorXd>& probs,
                                       const EdgeData& data, double threshold);

PrecisionRecall eval_edge_probe(const EdgeProbeModel& model,
                                const EdgeData& data, double threshold = 0.5);

std::string encode_edge_probe(const EdgeProbeModel& model);
EdgeProbeModel decode_edge_probe(std::string_view bytes);
void write_edge_probe(const EdgeProbeModel& model,
                      const std::filesystem::path& path);
EdgeProbeModel read_edge_probe(const std::filesystem::path& path);

}  // namespace layerscope
