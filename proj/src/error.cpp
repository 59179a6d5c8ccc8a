#include "uit/error.hpp"

namespace uit {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::UnparseableValue: return "UnparseableValue";
    case Errc::UnknownCategory: return "UnknownCategory";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::OneClassOnly: return "OneClassOnly";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooManyFeatures: return "TooManyFeatures";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::DegenerateArm: return "DegenerateArm";
    case Errc::ArmTooSmall: return "ArmTooSmall";
    case Errc::UnrankedFeature: return "UnrankedFeature";
    case Errc::UnknownTreatment: return "UnknownTreatment";
    case Errc::PropensityOutOfRange: return "PropensityOutOfRange";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::MissingInput: return "MissingInput";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace uit
