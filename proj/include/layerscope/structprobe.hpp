#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "layerscope/activations.hpp"
#include "layerscope/conllu.hpp"
#include "layerscope/mst.hpp"

namespace layerscope {

enum class ProbeKind : std::uint32_t { kDepth = 0, kDistance = 1 };

const char* to_string(ProbeKind kind);

/// Learned k x m map whose squared norms (depth) or squared difference
/// norms (distance) approximate parse-tree geometry.
struct ProbeParams {
  ProbeKind kind = ProbeKind::kDepth;
  Eigen::MatrixXd B;
  std::size_t layer = 0;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(B.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(B.cols()); }
};

struct ProbeTrainConfig {
  std::size_t rank = 512;
  double learning_rate = 1e-3;
  std::size_t batch_size = 20;
  std::size_t max_epochs = 40;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  double dev_fraction = 0.1;

  void validate() const;
};

/// One sentence's word vectors at the probed layer with its gold geometry.
struct ProbeSentence {
  Eigen::MatrixXd words;  // n_words x m
  DepTree tree;
  Eigen::VectorXd gold_depths;
  Eigen::MatrixXd gold_distances;
};

ProbeSentence make_probe_sentence(Eigen::MatrixXd words, DepTree tree);

/// Pairs the k-th sentence (ascending sentence id) of a word-level dump
/// with the k-th parse. Throws ShapeError on count or length mismatch.
std::vector<ProbeSentence> probe_dataset(
    const ActivationSet& set, const std::vector<ConlluSentence>& parses,
    std::size_t layer);

double depth_predict(const ProbeParams& p, const Eigen::VectorXd& h);
double dist_predict(const ProbeParams& p, const Eigen::VectorXd& hi,
                    const Eigen::VectorXd& hj);

/// Predicted depth of every word (rows of `words`).
Eigen::VectorXd predict_depths(const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& words);
/// Predicted squared distance between every pair of words.
Eigen::MatrixXd predict_distances(const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& words);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

/// Mean over sentences of the length-normalized L1 loss (1/n for depth,
/// 1/n^2 for distance) and its exact subgradient in B, taking sign(0) = 0.
LossAndGrad probe_loss_and_grad(const ProbeParams& p,
                                std::span<const ProbeSentence> batch);

/// Seeded uniform(-1/sqrt(m), 1/sqrt(m)) initialization.
ProbeParams init_probe(ProbeKind kind, std::size_t rank, std::size_t dim,
                       std::size_t layer, std::uint64_t seed);

struct ProbeTrainResult {
  ProbeParams params;
  double best_dev_loss = 0.0;
  std::size_t epochs_run = 0;
};

/// Adam on minibatches of sentences with a held-out dev split, starting from
/// init_probe(kind, cfg.rank, m, layer, cfg.seed). The learning
/// rate halves whenever an epoch fails to improve dev loss; training stops
/// after `patience` consecutive such epochs or `max_epochs`, returning the
/// dev-best parameters.
ProbeTrainResult train_probe(ProbeKind kind, std::span<const ProbeSentence> data,
                             std::size_t layer, const ProbeTrainConfig& cfg);

struct StructEvalOptions {
  std::size_t min_length = 5;
  std::size_t max_length = 50;
  bool exclude_punct = true;
  std::string punct_upos = "PUNCT";
};

/// Correlation fields are empty when no sentence qualified.
struct StructEvalReport {
  std::optional<double> root_acc;
  std::optional<double> depth_spearman;
  std::optional<double> uuas;
  std::optional<double> dist_spearman;
  std::size_t n_sentences = 0;
  std::size_t depth_spearman_sentences = 0;
  std::size_t depth_spearman_undefined = 0;
  std::size_t dist_spearman_sentences = 0;
  std::size_t dist_spearman_undefined = 0;
};

StructEvalReport eval_depth(const ProbeParams& p,
                            std::span<const ProbeSentence> data,
                            const StructEvalOptions& opts = {});
StructEvalReport eval_distance(const ProbeParams& p,
                               std::span<const ProbeSentence> data,
                               const StructEvalOptions& opts = {});
StructEvalReport eval_structural(const ProbeParams& p_depth,
                                 const ProbeParams& p_dist,
                                 std::span<const ProbeSentence> data,
                                 const StructEvalOptions& opts = {});

/// Depth/distance metrics from already-computed predictions.
void score_depths(const std::vector<Eigen::VectorXd>& predicted,
                  std::span<const ProbeSentence> data,
                  const StructEvalOptions& opts, StructEvalReport& report);
void score_distances(const std::vector<Eigen::MatrixXd>& predicted,
                     std::span<const ProbeSentence> data,
                     const StructEvalOptions& opts, StructEvalReport& report);

std::string encode_probe(const ProbeParams& p);
ProbeParams decode_probe(std::string_view bytes);
void write_probe(const ProbeParams& p, const std::filesystem::path& path);
ProbeParams read_probe(const std::filesystem::path& path);

}  // namespace layerscope
