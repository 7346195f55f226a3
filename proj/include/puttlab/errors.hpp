#pragma once

#include <stdexcept>
#include <string>

namespace puttlab {

// Base class for all library errors. Subcommands map these to exit code 1;
// flag/usage problems are reported separately and map to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PUTTLAB_DEFINE_ERROR(NAME)                                   \
  class NAME : public Error {                                        \
   public:                                                           \
    explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
  }

// signal-core
PUTTLAB_DEFINE_ERROR(UnsupportedFormat);
PUTTLAB_DEFINE_ERROR(CorruptHeader);
PUTTLAB_DEFINE_ERROR(IoFailure);
PUTTLAB_DEFINE_ERROR(ZeroEnergyInput);

// geometry
PUTTLAB_DEFINE_ERROR(DegenerateLine);
PUTTLAB_DEFINE_ERROR(DegenerateBasis);

// autodiff
PUTTLAB_DEFINE_ERROR(ShapeMismatch);
PUTTLAB_DEFINE_ERROR(NotScalar);

// nets
PUTTLAB_DEFINE_ERROR(LengthNotAligned);
PUTTLAB_DEFINE_ERROR(LengthMismatch);
PUTTLAB_DEFINE_ERROR(RoleMismatch);
PUTTLAB_DEFINE_ERROR(VersionMismatch);
PUTTLAB_DEFINE_ERROR(CorruptCheckpoint);

// training
PUTTLAB_DEFINE_ERROR(NonFiniteLoss);
PUTTLAB_DEFINE_ERROR(SegmentTooLong);

// metrics
PUTTLAB_DEFINE_ERROR(ZeroReference);
PUTTLAB_DEFINE_ERROR(TooShort);
PUTTLAB_DEFINE_ERROR(UnsupportedRate);

#undef PUTTLAB_DEFINE_ERROR

}  // namespace puttlab
