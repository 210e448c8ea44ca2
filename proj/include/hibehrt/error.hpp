#pragma once

#include <stdexcept>
#include <string>

namespace hibehrt {

// Error taxonomy maps onto the process exit codes used by the CLI:
// 2 = configuration, 3 = data / file, 4 = numeric.
enum class ErrorKind { Config = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(std::string m) : Error(ErrorKind::Config, std::move(m)) {}
};
struct DataError : Error {
  explicit DataError(std::string m) : Error(ErrorKind::Data, std::move(m)) {}
};
struct NumericError : Error {
  explicit NumericError(std::string m) : Error(ErrorKind::Numeric, std::move(m)) {}
};

// -- data --
struct ValueOutOfRange : DataError {
  using DataError::DataError;
};
struct EmptyCorpus : DataError {
  EmptyCorpus() : DataError("empty corpus") {}
};
struct UnknownModality : DataError {
  using DataError::DataError;
};
struct ParseError : DataError {
  ParseError(int line_no, const std::string& what)
      : DataError("parse error at line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
  int line;
};
struct FileNotFound : DataError {
  explicit FileNotFound(const std::string& path) : DataError("file not found: " + path) {}
};
struct EmptySequence : DataError {
  EmptySequence() : DataError("sequence has no valid tokens") {}
};
struct BadMagic : DataError {
  BadMagic() : DataError("checkpoint: bad magic bytes") {}
};
struct VersionMismatch : DataError {
  using DataError::DataError;
};
struct TruncatedFile : DataError {
  using DataError::DataError;
};

// -- config --
struct BadRatios : ConfigError {
  using ConfigError::ConfigError;
};
struct ConfigMismatch : ConfigError {
  using ConfigError::ConfigError;
};

// -- numeric --
struct ShapeMismatch : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteValue : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteGradient : NumericError {
  using NumericError::NumericError;
};
struct AllMasked : NumericError {
  AllMasked() : NumericError("attention: all key positions masked") {}
};
struct IdOutOfRange : NumericError {
  using NumericError::NumericError;
};
struct NoValidSegments : NumericError {
  NoValidSegments() : NumericError("no valid segments") {}
};
struct ZeroVector : NumericError {
  ZeroVector() : NumericError("cannot normalize a (near-)zero vector") {}
};
struct NonScalarLoss : NumericError {
  NonScalarLoss() : NumericError("backward requires a scalar loss") {}
};
struct StepOutOfRange : NumericError {
  using NumericError::NumericError;
};
struct SingleClass : NumericError {
  SingleClass() : NumericError("metric undefined: only one class present") {}
};
struct NoPositives : NumericError {
  NoPositives() : NumericError("metric undefined: no positive labels") {}
};

}  // namespace hibehrt
