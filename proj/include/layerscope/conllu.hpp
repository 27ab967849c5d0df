#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace layerscope {

/// Gold dependency parse of one sentence. `heads[i]` is the 1-based head of
/// word i+1, with 0 marking the root.
struct DepTree {
  std::vector<int> heads;
  std::vector<std::string> deprels;
  std::vector<std::string> upos;

  std::size_t n_words() const noexcept { return heads.size(); }
  /// 0-based index of the root word.
  std::size_t root() const;
};

/// Throws ShapeError unless the tree has exactly one root, heads in range,
/// no cycles, and label lists of matching length.
void validate_tree(const DepTree& tree);

struct ConlluSentence {
  std::vector<std::string> forms;
  DepTree tree;
};

/// Parses CoNLL-U text. Comment lines, multiword-token ranges ("3-4") and
/// empty nodes ("3.1") are skipped; blank lines separate sentences.
std::vector<ConlluSentence> parse_conllu(std::istream& in);
std::vector<ConlluSentence> load_conllu(const std::filesystem::path& path);

void write_conllu(std::ostream& out, const std::vector<ConlluSentence>& sents);
void write_conllu(const std::filesystem::path& path,
                  const std::vector<ConlluSentence>& sents);

}  // namespace layerscope
