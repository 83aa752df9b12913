#pragma once

#include <stdexcept>
#include <string>

namespace celllab {

/// Base of every error raised by the library. Callers that only care about
/// "something went wrong" catch this; tests assert on the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CELLLAB_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

// formulation
CELLLAB_DEFINE_ERROR(TargetExceedsStock);
CELLLAB_DEFINE_ERROR(NonPositiveVolume);
CELLLAB_DEFINE_ERROR(UnreachableTarget);
CELLLAB_DEFINE_ERROR(IncompatibleSolventBlend);
CELLLAB_DEFINE_ERROR(VolumeUnderflow);
CELLLAB_DEFINE_ERROR(InvalidRecipe);

// assembly
CELLLAB_DEFINE_ERROR(InventoryDepleted);

// scheduler
CELLLAB_DEFINE_ERROR(RestViolation);
CELLLAB_DEFINE_ERROR(SchedulerError);

// cellmodel
CELLLAB_DEFINE_ERROR(OutOfRange);
CELLLAB_DEFINE_ERROR(NonconvergentStep);
CELLLAB_DEFINE_ERROR(InvalidProtocol);
CELLLAB_DEFINE_ERROR(InvalidCellParameters);

// eis
CELLLAB_DEFINE_ERROR(NonPositiveFrequency);
CELLLAB_DEFINE_ERROR(InsufficientData);
CELLLAB_DEFINE_ERROR(DegenerateSpectrum);
CELLLAB_DEFINE_ERROR(InvalidSpectrum);

// stats
CELLLAB_DEFINE_ERROR(TooFewSamples);
CELLLAB_DEFINE_ERROR(ZeroMean);
CELLLAB_DEFINE_ERROR(EmptyInput);
CELLLAB_DEFINE_ERROR(TooFewConverged);

// io / cli
CELLLAB_DEFINE_ERROR(ParseError);

#undef CELLLAB_DEFINE_ERROR

/// Campaign configuration rejected. `field()` is the dotted path of the
/// offending entry, e.g. "recipes[0].solvents".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace celllab
