#include "layerscope/conllu.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "layerscope/errors.hpp"
#include "layerscope/io_util.hpp"

namespace layerscope {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

}  // namespace

std::size_t DepTree::root() const {
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i] == 0) return i;
  throw ShapeError("tree has no root");
}

void validate_tree(const DepTree& tree) {
  const std::size_t n = tree.n_words();
  if (n == 0) throw ShapeError("empty tree");
  if (tree.deprels.size() != n || tree.upos.size() != n)
    throw ShapeError("tree label lists do not match word count");
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int h = tree.heads[i];
    if (h < 0 || static_cast<std::size_t>(h) > n)
      throw ShapeError("word " + std::to_string(i + 1) + ": head " +
                       std::to_string(h) + " out of range");
    if (h == 0) ++roots;
  }
  if (roots != 1)
    throw ShapeError("tree has " + std::to_string(roots) +
                     " roots, expected exactly one");
  // With one root, the head graph is acyclic iff every walk reaches it
  // within n steps.
  std::vector<int> state(n, 0);  // 0 unseen, 1 on current walk, 2 reaches root
  for (std::size_t start = 0; start < n; ++start) {
    std::size_t w = start;
    std::vector<std::size_t> walk;
    while (state[w] == 0) {
      state[w] = 1;
      walk.push_back(w);
      const int h = tree.heads[w];
      if (h == 0) break;
      w = static_cast<std::size_t>(h - 1);
    }
    if (state[w] == 1 && tree.heads[w] != 0)
      throw ShapeError("cycle through word " + std::to_string(w + 1));
    for (auto v : walk) state[v] = 2;
  }
}

std::vector<ConlluSentence> parse_conllu(std::istream& in) {
  std::vector<ConlluSentence> out;
  ConlluSentence cur;
  std::size_t sentence_line = 0;
  std::size_t lineno = 0;

  auto flush = [&] {
    if (cur.forms.empty()) return;
    try {
      validate_tree(cur.tree);
    } catch (const ShapeError& e) {
      throw ParseError(sentence_line, e.what());
    }
    out.push_back(std::move(cur));
    cur = ConlluSentence{};
  };

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;

    const auto fields = split_tabs(line);
    if (fields.size() < 8)
      throw ParseError(lineno, "expected at least 8 columns, found " +
                                   std::to_string(fields.size()));
    const std::string_view id = fields[0];
    if (id.find('-') != std::string_view::npos ||
        id.find('.') != std::string_view::npos)
      continue;

    int word_id = 0;
    if (!parse_int(id, word_id))
      throw ParseError(lineno, "non-integer ID '" + std::string(id) + "'");
    if (cur.forms.empty()) sentence_line = lineno;
    if (word_id != static_cast<int>(cur.forms.size()) + 1)
      throw ParseError(lineno, "ID " + std::string(id) + " out of sequence");
    int head = 0;
    if (!parse_int(fields[6], head))
      throw ParseError(lineno, "non-integer HEAD '" + std::string(fields[6]) + "'");

    cur.forms.emplace_back(fields[1]);
    cur.tree.upos.emplace_back(fields[3]);
    cur.tree.heads.push_back(head);
    cur.tree.deprels.emplace_back(fields[7]);
  }
  flush();
  return out;
}

std::vector<ConlluSentence> load_conllu(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  return parse_conllu(in);
}

void write_conllu(std::ostream& out, const std::vector<ConlluSentence>& sents) {
  for (const auto& s : sents) {
    const auto& t = s.tree;
    for (std::size_t i = 0; i < t.n_words(); ++i) {
      out << (i + 1) << '\t' << s.forms[i] << "\t_\t" << t.upos[i] << "\t_\t_\t"
          << t.heads[i] << '\t' << t.deprels[i] << "\t_\t_\n";
    }
    out << '\n';
  }
}

void write_conllu(const std::filesystem::path& path,
                  const std::vector<ConlluSentence>& sents) {
  write_file_atomic(path, [&](std::ostream& out) { write_conllu(out, sents); });
}

}  // namespace layerscope
