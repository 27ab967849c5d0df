#pragma once

// Little-endian encoding helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace layerscope::detail {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return v;
}

inline void append_f32(std::string& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  if constexpr (std::endian::native == std::endian::little) {
    if (!values.empty())
      std::memcpy(out.data() + start, values.data(), values.size() * 4);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(values[i]);
      for (int b = 0; b < 4; ++b)
        out[start + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

inline std::vector<float> decode_f32(std::string_view bytes) {
  std::vector<float> out(bytes.size() / 4);
  if constexpr (std::endian::native == std::endian::little) {
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), out.size() * 4);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, 4 * i));
  }
  return out;
}

}  // namespace layerscope::detail
