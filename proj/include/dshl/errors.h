#pragma once

#include <stdexcept>
#include <string>

namespace dshl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DSHL_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

// corpus
DSHL_DEFINE_ERROR(MalformedHeader);
DSHL_DEFINE_ERROR(UnparsableBody);
// features
DSHL_DEFINE_ERROR(FewerThan12Chords);
DSHL_DEFINE_ERROR(InconsistentState);
// pairs
DSHL_DEFINE_ERROR(ExhaustedCandidates);
DSHL_DEFINE_ERROR(InsufficientPairs);
// neural / hashnet
DSHL_DEFINE_ERROR(NonFiniteLoss);
// index
DSHL_DEFINE_ERROR(ShapeMismatch);
DSHL_DEFINE_ERROR(EmptyAfterExclusion);
// generate
DSHL_DEFINE_ERROR(EmptyPool);
// cli
DSHL_DEFINE_ERROR(MissingMetrics);
DSHL_DEFINE_ERROR(ConfigError);
// persisted files
DSHL_DEFINE_ERROR(FormatError);

#undef DSHL_DEFINE_ERROR

}  // namespace dshl
