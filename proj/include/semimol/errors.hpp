#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semimol {

// Base class for all library errors. Subclasses exist so callers can map
// failure categories to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// SMILES syntax or chemistry error; `offset` is the byte position in the
// input string where the problem was detected.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct WidthMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NotScalar : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };
struct MissingColumn : Error { using Error::Error; };
struct RatioError : Error { using Error::Error; };
struct EmptyStratum : Error { using Error::Error; };
struct SingleClass : Error { using Error::Error; };
struct MissingMetrics : Error { using Error::Error; };
struct EpochNotDumped : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace semimol
