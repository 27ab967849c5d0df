#include "layerscope/span_examples.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

struct RawExample {
  std::size_t sentence_index;
  std::vector<std::string> tokens;
  Span span1;
  std::optional<Span> span2;
  std::set<std::string> labels;
};

Span parse_span(const nlohmann::json& j, std::size_t n_tokens,
                std::size_t lineno, const char* name) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer())
    throw ParseError(lineno, std::string(name) + " must be [start, end]");
  const auto s = j[0].get<long long>();
  const auto e = j[1].get<long long>();
  if (s < 0 || e < 0)
    throw ParseError(lineno, std::string(name) + " has a negative bound");
  if (s >= e)
    throw ParseError(lineno, std::string(name) + " is empty");
  if (static_cast<std::size_t>(e) > n_tokens)
    throw ParseError(lineno, std::string(name) + " [" + std::to_string(s) +
                                 ", " + std::to_string(e) +
                                 ") out of bounds for " +
                                 std::to_string(n_tokens) + " tokens");
  return {static_cast<std::size_t>(s), static_cast<std::size_t>(e)};
}

}  // namespace

SpanExampleSet parse_edge_examples(
    std::istream& in, std::string task_name,
    const std::optional<std::vector<std::string>>& label_vocab) {
  std::vector<RawExample> raw;
  std::set<std::string> seen_labels;
  std::size_t lineno = 0;
  std::size_t sentence = 0;
  std::optional<bool> two_span;

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("tokens") || !obj["tokens"].is_array())
      throw ParseError(lineno, "missing \"tokens\" array");
    if (!obj.contains("targets") || !obj["targets"].is_array())
      throw ParseError(lineno, "missing \"targets\" array");

    std::vector<std::string> tokens;
    for (const auto& t : obj["tokens"]) {
      if (!t.is_string()) throw ParseError(lineno, "non-string token");
      tokens.push_back(t.get<std::string>());
    }

    const std::size_t first_of_line = raw.size();
    for (const auto& target : obj["targets"]) {
      if (!target.is_object() || !target.contains("span1"))
        throw ParseError(lineno, "target missing \"span1\"");
      const Span s1 = parse_span(target["span1"], tokens.size(), lineno, "span1");
      std::optional<Span> s2;
      if (target.contains("span2") && !target["span2"].is_null())
        s2 = parse_span(target["span2"], tokens.size(), lineno, "span2");
      if (two_span && *two_span != s2.has_value())
        throw ParseError(lineno, "mixes single-span and two-span targets");
      two_span = s2.has_value();

      std::vector<std::string> labels;
      const auto it = target.find("label");
      if (it == target.end())
        throw ParseError(lineno, "target missing \"label\"");
      if (it->is_string()) {
        labels.push_back(it->get<std::string>());
      } else if (it->is_array()) {
        for (const auto& l : *it) {
          if (!l.is_string()) throw ParseError(lineno, "non-string label");
          labels.push_back(l.get<std::string>());
        }
      } else {
        throw ParseError(lineno, "\"label\" must be a string or list");
      }

      auto match = std::find_if(
          raw.begin() + static_cast<std::ptrdiff_t>(first_of_line), raw.end(),
          [&](const RawExample& r) { return r.span1 == s1 && r.span2 == s2; });
      if (match == raw.end()) {
        raw.push_back({sentence, tokens, s1, s2, {}});
        match = raw.end() - 1;
      }
      for (auto& l : labels) {
        seen_labels.insert(l);
        match->labels.insert(std::move(l));
      }
    }
    ++sentence;
  }

  SpanExampleSet out;
  out.task_name = std::move(task_name);
  if (label_vocab) {
    out.label_vocab = *label_vocab;
  } else {
    out.label_vocab.assign(seen_labels.begin(), seen_labels.end());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < out.label_vocab.size(); ++i)
    if (!index.emplace(out.label_vocab[i], i).second)
      throw ConfigError("duplicate label '" + out.label_vocab[i] +
                        "' in vocabulary");

  out.examples.reserve(raw.size());
  for (auto& r : raw) {
    SpanExample ex{r.sentence_index, std::move(r.tokens), r.span1, r.span2, {}};
    for (const auto& l : r.labels) {
      const auto it = index.find(l);
      if (it == index.end())
        throw ConfigError("label '" + l + "' not in vocabulary");
      ex.labels.push_back(it->second);
    }
    std::sort(ex.labels.begin(), ex.labels.end());
    out.examples.push_back(std::move(ex));
  }
  return out;
}

SpanExampleSet load_edge_examples(
    const std::filesystem::path& path,
    const std::optional<std::vector<std::string>>& label_vocab) {
  std::ifstream in(path);
  if (!in)
    throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  return parse_edge_examples(in, path.stem().string(), label_vocab);
}

void write_edge_examples(std::ostream& out, const SpanExampleSet& set) {
  std::size_t i = 0;
  while (i < set.examples.size()) {
    const std::size_t sid = set.examples[i].sentence_index;
    nlohmann::json line = {{"tokens", set.examples[i].tokens},
                           {"targets", nlohmann::json::array()}};
    for (; i < set.examples.size() && set.examples[i].sentence_index == sid; ++i) {
      const auto& ex = set.examples[i];
      nlohmann::json labels = nlohmann::json::array();
      for (auto l : ex.labels) labels.push_back(set.label_vocab[l]);
      nlohmann::json target = {{"span1", {ex.span1.start, ex.span1.end}},
                               {"label", std::move(labels)}};
      if (ex.span2) target["span2"] = {ex.span2->start, ex.span2->end};
      line["targets"].push_back(std::move(target));
    }
    out << line.dump() << '\n';
  }
}

}  // namespace layerscope
