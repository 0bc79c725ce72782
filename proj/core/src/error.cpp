#include "cvmc/error.hpp"

namespace cvmc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::OnesInColumnSpace: return "OnesInColumnSpace";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateSigma: return "DegenerateSigma";
    case ErrorKind::StudyAborted: return "StudyAborted";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, std::string_view module, const std::string& what)
    : std::runtime_error(std::string(module) + ": " + std::string(to_string(kind)) + ": " + what),
      kind_(kind) {}

}  // namespace cvmc
