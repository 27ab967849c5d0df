#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace layerscope {

/// Metadata for one row of an activation dump.
struct TokenRecord {
  std::int64_t sentence_id = 0;
  /// Word position inside the sentence; -1 for special tokens.
  std::int64_t word_index = 0;
  std::string text;
  bool is_special = false;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

/// Per-layer, per-token f32 vectors plus token metadata. Layer 0 is the
/// embedding layer. Immutable after construction; the constructor enforces
/// the shape and metadata invariants.
class ActivationSet {
 public:
  ActivationSet() = default;
  ActivationSet(std::size_t n_layers, std::size_t dim,
                std::vector<TokenRecord> tokens, std::vector<float> data,
                std::string domain_tag = {});

  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_tokens() const noexcept { return tokens_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<TokenRecord>& tokens() const noexcept { return tokens_; }
  const std::string& domain_tag() const noexcept { return domain_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> row(std::size_t layer, std::size_t token) const {
    return {data_.data() + offset(layer, token), dim_};
  }
  float at(std::size_t layer, std::size_t token, std::size_t d) const {
    return data_[offset(layer, token) + d];
  }

  friend bool operator==(const ActivationSet&, const ActivationSet&) = default;

 private:
  std::size_t offset(std::size_t layer, std::size_t token) const {
    return (layer * tokens_.size() + token) * dim_;
  }

  std::size_t n_layers_ = 0;
  std::size_t dim_ = 0;
  std::vector<TokenRecord> tokens_;
  std::vector<float> data_;
  std::string domain_;
};

/// Reads an ACTV1 dump. Throws FormatError with a kind per failure mode.
ActivationSet read_activations(const std::filesystem::path& path);

/// Writes an ACTV1 dump (via a temporary file renamed into place).
void write_activations(const ActivationSet& set,
                       const std::filesystem::path& path);

/// Serialized ACTV1 bytes of `set`, exactly as write_activations emits them.
std::string encode_activations(const ActivationSet& set);
ActivationSet decode_activations(std::string_view bytes);

/// Inclusive subword range [first, last] forming one word.
struct WordSpan {
  std::size_t first = 0;
  std::size_t last = 0;
};

struct TokenAlignment {
  std::vector<WordSpan> words;
};

/// Groups consecutive non-special rows sharing (sentence_id, word_index).
TokenAlignment align_by_word_index(const ActivationSet& raw);

/// Mean-pools subword rows into word rows. Special tokens are dropped and
/// each output word is renumbered within its sentence.
ActivationSet pool_subwords(const ActivationSet& raw,
                            const TokenAlignment& align);

/// Non-special rows of one sentence, ordered by word index.
struct SentenceRows {
  std::int64_t sentence_id = 0;
  std::vector<std::size_t> rows;
};

/// Sentences of a word-level set in ascending sentence id. Throws
/// ShapeError if a sentence holds the same word index twice.
std::vector<SentenceRows> sentence_rows(const ActivationSet& set);

/// Copies the given rows of one layer into a (rows x dim) f64 matrix.
Eigen::MatrixXd gather_rows(const ActivationSet& set, std::size_t layer,
                            std::span<const std::size_t> rows);

}  // namespace layerscope
