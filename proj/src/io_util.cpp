#include "layerscope/io_util.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "layerscope/errors.hpp"

namespace layerscope {

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw FormatError(FormatError::Kind::kIo,
                        "cannot open " + tmp.string() + " for writing");
    try {
      fill(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw FormatError(FormatError::Kind::kIo,
                        "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw FormatError(FormatError::Kind::kIo, "cannot rename " + tmp.string() +
                                                  " to " + path.string() +
                                                  ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes) {
  write_file_atomic(path, [bytes](std::ostream& out) {
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw FormatError(FormatError::Kind::kIo, "read failed for " + path.string());
  return std::move(ss).str();
}

}  // namespace layerscope
