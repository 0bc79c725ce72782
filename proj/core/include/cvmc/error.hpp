#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvmc {

enum class ErrorKind {
  InvalidArgument,
  NonFinite,
  RankDeficient,
  SingularGram,
  OnesInColumnSpace,
  InsufficientSamples,
  DegenerateSigma,
  StudyAborted,
  UsageError,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library. The message is prefixed with the
// originating module, e.g. "estimator: SingularGram: ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string_view module, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cvmc
