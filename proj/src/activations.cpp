#include "layerscope/activations.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "layerscope/errors.hpp"
#include "layerscope/io_util.hpp"
#include "binary_io.hpp"

namespace layerscope {
namespace {

using detail::append_f32;
using detail::decode_f32;
using detail::get_le;
using detail::put_le;

constexpr char kMagic[4] = {'A', 'C', 'T', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8 + 4 + 4 + 8;

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a)
    throw FormatError(FormatError::Kind::kCountMismatch,
                      "ACTV header sizes overflow");
  return a * b;
}

std::string encode_metadata(const ActivationSet& set) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : set.tokens()) {
    tokens.push_back({{"sid", t.sentence_id},
                      {"wi", t.word_index},
                      {"text", t.text},
                      {"special", t.is_special}});
  }
  nlohmann::json meta = {{"tokens", std::move(tokens)},
                         {"domain", set.domain_tag()}};
  return meta.dump();
}

std::vector<TokenRecord> parse_tokens(const nlohmann::json& meta) {
  std::vector<TokenRecord> tokens;
  const auto& arr = meta.at("tokens");
  if (!arr.is_array()) throw std::invalid_argument("\"tokens\" is not an array");
  tokens.reserve(arr.size());
  for (const auto& t : arr) {
    TokenRecord rec;
    rec.sentence_id = t.at("sid").get<std::int64_t>();
    rec.word_index = t.at("wi").get<std::int64_t>();
    rec.text = t.at("text").get<std::string>();
    rec.is_special = t.at("special").get<bool>();
    tokens.push_back(std::move(rec));
  }
  return tokens;
}

}  // namespace

ActivationSet::ActivationSet(std::size_t n_layers, std::size_t dim,
                             std::vector<TokenRecord> tokens,
                             std::vector<float> data, std::string domain_tag)
    : n_layers_(n_layers),
      dim_(dim),
      tokens_(std::move(tokens)),
      data_(std::move(data)),
      domain_(std::move(domain_tag)) {
  if (data_.size() != n_layers_ * tokens_.size() * dim_)
    throw ShapeError("activation data length " + std::to_string(data_.size()) +
                     " != n_layers * n_tokens * dim");

  // Word indices of each sentence start at 0 and advance by at most one
  // (subword-level dumps repeat an index across pieces of one word).
  std::map<std::int64_t, std::int64_t> last_word;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.sentence_id < 0)
      throw ShapeError("token " + std::to_string(i) + ": negative sentence id");
    if (t.is_special) {
      if (t.word_index != -1)
        throw ShapeError("token " + std::to_string(i) +
                         ": special token must have word index -1");
      continue;
    }
    auto [it, fresh] = last_word.try_emplace(t.sentence_id, -1);
    const std::int64_t prev = it->second;
    if (t.word_index != prev && t.word_index != prev + 1)
      throw ShapeError("token " + std::to_string(i) + ": word index " +
                       std::to_string(t.word_index) +
                       " breaks contiguity in sentence " +
                       std::to_string(t.sentence_id));
    it->second = t.word_index;
  }
}

std::string encode_activations(const ActivationSet& set) {
  const std::string meta = encode_metadata(set);
  std::string out;
  out.reserve(kHeaderSize + meta.size() + set.data().size() * 4);
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.n_layers()));
  put_le<std::uint64_t>(out, set.n_tokens());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  put_le<std::uint32_t>(out, kDtypeF32);
  put_le<std::uint64_t>(out, meta.size());
  out += meta;
  append_f32(out, set.data());
  return out;
}

ActivationSet decode_activations(std::string_view bytes) {
  using Kind = FormatError::Kind;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(Kind::kBadMagic, "missing ACTV magic");
  if (bytes.size() < kHeaderSize)
    throw FormatError(Kind::kTruncated, "ACTV header truncated");

  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kVersion)
    throw FormatError(Kind::kBadVersion,
                      "unsupported ACTV version " + std::to_string(version));
  const auto n_layers = get_le<std::uint32_t>(bytes, 8);
  const auto n_tokens = get_le<std::uint64_t>(bytes, 12);
  const auto dim = get_le<std::uint32_t>(bytes, 20);
  const auto dtype = get_le<std::uint32_t>(bytes, 24);
  const auto meta_len = get_le<std::uint64_t>(bytes, 28);
  if (dtype != kDtypeF32)
    throw FormatError(Kind::kBadDtype,
                      "unsupported dtype code " + std::to_string(dtype));

  if (meta_len > bytes.size() - kHeaderSize)
    throw FormatError(Kind::kTruncated, "ACTV metadata truncated");
  const std::size_t data_bytes =
      checked_mul(checked_mul(checked_mul(n_layers, n_tokens), dim), 4);
  const std::size_t data_start = kHeaderSize + meta_len;
  const std::size_t available = bytes.size() - data_start;
  if (available < data_bytes)
    throw FormatError(Kind::kTruncated,
                      "ACTV payload truncated: expected " +
                          std::to_string(data_bytes) + " bytes, found " +
                          std::to_string(available));
  if (available > data_bytes)
    throw FormatError(Kind::kTrailingBytes,
                      std::to_string(available - data_bytes) +
                          " unexpected bytes after ACTV payload");

  std::vector<TokenRecord> tokens;
  std::string domain;
  try {
    const auto meta = nlohmann::json::parse(bytes.substr(kHeaderSize, meta_len));
    tokens = parse_tokens(meta);
    domain = meta.value("domain", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(Kind::kBadMetadata,
                      std::string("ACTV metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(Kind::kBadMetadata,
                      std::string("ACTV metadata: ") + e.what());
  }
  if (tokens.size() != n_tokens)
    throw FormatError(Kind::kCountMismatch,
                      "header declares " + std::to_string(n_tokens) +
                          " tokens, metadata lists " +
                          std::to_string(tokens.size()));

  try {
    return ActivationSet(n_layers, dim, std::move(tokens),
                         decode_f32(bytes.substr(data_start, data_bytes)),
                         std::move(domain));
  } catch (const ShapeError& e) {
    throw FormatError(Kind::kInvariant, e.what());
  }
}

ActivationSet read_activations(const std::filesystem::path& path) {
  return decode_activations(read_file(path));
}

void write_activations(const ActivationSet& set,
                       const std::filesystem::path& path) {
  write_file_atomic(path, encode_activations(set));
}

TokenAlignment align_by_word_index(const ActivationSet& raw) {
  TokenAlignment align;
  const auto& toks = raw.tokens();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].is_special) continue;
    if (!align.words.empty()) {
      auto& back = align.words.back();
      const auto& prev = toks[back.last];
      if (back.last + 1 == i && prev.sentence_id == toks[i].sentence_id &&
          prev.word_index == toks[i].word_index) {
        back.last = i;
        continue;
      }
    }
    align.words.push_back({i, i});
  }
  return align;
}

ActivationSet pool_subwords(const ActivationSet& raw,
                            const TokenAlignment& align) {
  const auto& toks = raw.tokens();
  std::vector<bool> covered(toks.size(), false);
  std::size_t next_free = 0;
  for (const auto& w : align.words) {
    if (w.first > w.last || w.last >= toks.size())
      throw ShapeError("alignment range [" + std::to_string(w.first) + ", " +
                       std::to_string(w.last) + "] out of range");
    if (w.first < next_free)
      throw ShapeError("alignment ranges overlap or are out of order at " +
                       std::to_string(w.first));
    for (std::size_t i = w.first; i <= w.last; ++i) {
      if (toks[i].is_special)
        throw ShapeError("alignment range covers special token " +
                         std::to_string(i));
      if (toks[i].sentence_id != toks[w.first].sentence_id)
        throw ShapeError("alignment range crosses a sentence boundary at " +
                         std::to_string(i));
      covered[i] = true;
    }
    next_free = w.last + 1;
  }
  for (std::size_t i = 0; i < toks.size(); ++i)
    if (!toks[i].is_special && !covered[i])
      throw ShapeError("alignment does not cover subword " + std::to_string(i));

  const std::size_t n_words = align.words.size();
  const std::size_t dim = raw.dim();
  std::vector<TokenRecord> out_tokens;
  out_tokens.reserve(n_words);
  std::map<std::int64_t, std::int64_t> next_index;
  for (const auto& w : align.words) {
    TokenRecord rec;
    rec.sentence_id = toks[w.first].sentence_id;
    rec.word_index = next_index[rec.sentence_id]++;
    for (std::size_t i = w.first; i <= w.last; ++i) {
      std::string_view piece = toks[i].text;
      if (i != w.first && piece.starts_with("##")) piece.remove_prefix(2);
      rec.text += piece;
    }
    out_tokens.push_back(std::move(rec));
  }

  std::vector<float> data(raw.n_layers() * n_words * dim);
  std::vector<double> acc(dim);
  for (std::size_t l = 0; l < raw.n_layers(); ++l) {
    for (std::size_t t = 0; t < n_words; ++t) {
      const auto& w = align.words[t];
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = w.first; i <= w.last; ++i) {
        const auto row = raw.row(l, i);
        for (std::size_t d = 0; d < dim; ++d) acc[d] += row[d];
      }
      const double count = static_cast<double>(w.last - w.first + 1);
      float* dst = data.data() + (l * n_words + t) * dim;
      for (std::size_t d = 0; d < dim; ++d)
        dst[d] = static_cast<float>(acc[d] / count);
    }
  }
  return ActivationSet(raw.n_layers(), dim, std::move(out_tokens),
                       std::move(data), raw.domain_tag());
}

std::vector<SentenceRows> sentence_rows(const ActivationSet& set) {
  std::map<std::int64_t, std::vector<std::size_t>> by_sentence;
  const auto& toks = set.tokens();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].is_special) continue;
    auto& rows = by_sentence[toks[i].sentence_id];
    if (static_cast<std::int64_t>(rows.size()) != toks[i].word_index)
      throw ShapeError("sentence " + std::to_string(toks[i].sentence_id) +
                       " is not word-level (word index " +
                       std::to_string(toks[i].word_index) + " at row " +
                       std::to_string(i) + ")");
    rows.push_back(i);
  }
  std::vector<SentenceRows> out;
  out.reserve(by_sentence.size());
  for (auto& [sid, rows] : by_sentence) out.push_back({sid, std::move(rows)});
  return out;
}

Eigen::MatrixXd gather_rows(const ActivationSet& set, std::size_t layer,
                            std::span<const std::size_t> rows) {
  if (layer >= set.n_layers())
    throw ShapeError("layer " + std::to_string(layer) + " out of range (" +
                     std::to_string(set.n_layers()) + " layers)");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(set.dim()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= set.n_tokens())
      throw ShapeError("row " + std::to_string(rows[r]) + " out of range");
    const auto src = set.row(layer, rows[r]);
    for (std::size_t d = 0; d < set.dim(); ++d)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = src[d];
  }
  return out;
}

}  // namespace layerscope
