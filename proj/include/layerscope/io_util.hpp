#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace layerscope {

/// Writes through a sibling temporary file and renames it over `path` only
/// once `fill` returns and the stream is flushed without error.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill);

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace layerscope
