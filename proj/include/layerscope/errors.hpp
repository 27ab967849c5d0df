#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace layerscope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while decoding or encoding an ACTV1 / PRBE / EPRB binary file.
class FormatError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kBadVersion,
    kBadDtype,
    kTruncated,
    kTrailingBytes,
    kCountMismatch,
    kBadMetadata,
    kInvariant,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Malformed text input (CoNLL-U, JSONL). Carries the 1-based line number,
/// or 0 when the problem is not tied to one line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A correlation was requested on input with zero variance.
class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// Shapes, indices or dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A vector fed to the cosine kernel has zero norm.
class ZeroNormError : public Error {
 public:
  explicit ZeroNormError(std::size_t index)
      : Error("stimulus " + std::to_string(index) + " has zero norm"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace layerscope
