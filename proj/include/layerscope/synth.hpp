#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "layerscope/activations.hpp"
#include "layerscope/conllu.hpp"
#include "layerscope/span_examples.hpp"

namespace layerscope {

struct PlantConfig {
  std::size_t n_sentences = 100;
  std::size_t min_size = 5;
  std::size_t max_size = 20;
  std::size_t dim = 64;   // m
  std::size_t rank = 32;  // k
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_layers = 1;
  std::size_t planted_layer = 0;

  void validate() const;
};

struct PlantedSentence {
  ConlluSentence parse;
  /// One (n_words x m) f32-rounded matrix per layer.
  std::vector<Eigen::MatrixXd> layers;
};

/// Activations whose geometry encodes planted parse trees: each word maps to
/// the 0/1 indicator of the edges on its root path (so squared Euclidean
/// distance equals tree distance and squared norm equals depth), embedded
/// into m dimensions by a fixed random full-rank map. Layers other than the
/// planted one carry unrelated Gaussian vectors.
struct PlantedCorpus {
  std::vector<PlantedSentence> sentences;
  Eigen::MatrixXd planted_decoder;  // k x m, left inverse of the embedding
  Eigen::MatrixXd embedding;        // m x k
  PlantConfig config;

  ActivationSet to_activation_set(const std::string& domain_tag = "synth") const;
  std::vector<ConlluSentence> parses() const;
};

/// Uniform random labeled tree on n nodes (Pruefer decoding) rooted at a
/// uniformly chosen word.
DepTree random_tree(std::size_t n_words, std::uint64_t seed);

PlantedCorpus plant_tree_corpus(const PlantConfig& cfg);

/// Haar-distributed orthogonal matrix: Householder QR of a seeded Gaussian
/// matrix with the signs of R's diagonal folded into Q.
Eigen::MatrixXd random_orthogonal(std::size_t m, std::uint64_t seed);

/// Word-level set of i.i.d. standard normal vectors.
ActivationSet random_activation_set(std::size_t n_layers,
                                    const std::vector<std::size_t>& sentence_lengths,
                                    std::size_t dim, std::uint64_t seed,
                                    const std::string& domain_tag = "synth");

/// Copy of `set` with every layer >= first_layer replaced by fresh Gaussian
/// vectors.
ActivationSet rerandomize_layers(const ActivationSet& set, std::size_t first_layer,
                                 std::uint64_t seed);

/// Copy of `set` with each vector of `layer` multiplied by `q` (m x m).
ActivationSet transform_layer(const ActivationSet& set, std::size_t layer,
                              const Eigen::MatrixXd& q);

struct SpanTaskConfig {
  std::size_t n_examples = 2000;
  std::size_t n_labels = 4;
  std::size_t dim = 16;
  std::size_t sentence_length = 8;
  std::size_t examples_per_sentence = 4;
  std::size_t max_span = 3;
  bool two_span = false;
  std::uint64_t seed = 0;
};

struct SpanTask {
  ActivationSet activations;
  SpanExampleSet examples;
  Eigen::MatrixXd generator;  // labels x (slots * m)
};

/// Multi-label span task whose labels are a fixed linear function of the
/// span mean vectors: label l holds iff generator.row(l) . means > 0.
SpanTask plant_span_task(const SpanTaskConfig& cfg);

}  // namespace layerscope
