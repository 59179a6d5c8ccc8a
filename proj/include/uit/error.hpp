#pragma once

#include <stdexcept>
#include <string>

namespace uit {

/// Error categories shared across the pipeline. Each operation documents
/// which of these it can raise.
enum class Errc {
  MissingColumn,
  UnparseableValue,
  UnknownCategory,
  ZeroVariance,
  OneClassOnly,
  KTooLarge,
  SchemaMismatch,
  LengthMismatch,
  TooManyFeatures,
  TooFewRows,
  DegenerateArm,
  ArmTooSmall,
  UnrankedFeature,
  UnknownTreatment,
  PropensityOutOfRange,
  EmptyMatrix,
  InvalidSpec,
  MissingInput,
  IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace uit
