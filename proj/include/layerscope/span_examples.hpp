#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace layerscope {

/// Half-open word range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct SpanExample {
  /// Ordinal of the source line; matches the sentence id of the dump the
  /// examples were extracted alongside.
  std::size_t sentence_index = 0;
  std::vector<std::string> tokens;
  Span span1;
  std::optional<Span> span2;
  /// Sorted indices into the owning set's label_vocab.
  std::vector<std::size_t> labels;
};

struct SpanExampleSet {
  std::string task_name;
  std::vector<std::string> label_vocab;
  std::vector<SpanExample> examples;

  bool two_span() const {
    return !examples.empty() && examples.front().span2.has_value();
  }
};

/// Reads edge-probing JSONL: one {"tokens":[...],"targets":[...]} object per
/// line. Targets of one line that share their spans merge into a single
/// multi-label example. With no explicit vocabulary the sorted union of
/// observed labels is used; otherwise unknown labels are an error.
SpanExampleSet parse_edge_examples(
    std::istream& in, std::string task_name,
    const std::optional<std::vector<std::string>>& label_vocab = std::nullopt);

SpanExampleSet load_edge_examples(
    const std::filesystem::path& path,
    const std::optional<std::vector<std::string>>& label_vocab = std::nullopt);

void write_edge_examples(std::ostream& out, const SpanExampleSet& set);

}  // namespace layerscope
