#pragma once

#include <stdexcept>
#include <string>

namespace spurt {

/// Base class for every failure raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define SPURT_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
  }

// model
SPURT_DEFINE_ERROR(NonMonotoneFlowRateMap);
SPURT_DEFINE_ERROR(NoExtrema);
// stepper
SPURT_DEFINE_ERROR(NewtonStallError);
SPURT_DEFINE_ERROR(NonFiniteState);
// krylov
SPURT_DEFINE_ERROR(BreakdownError);
SPURT_DEFINE_ERROR(NotConverged);
SPURT_DEFINE_ERROR(ZeroEigenvalue);
// continuation
SPURT_DEFINE_ERROR(NewtonDiverged);
SPURT_DEFINE_ERROR(StepFailure);
SPURT_DEFINE_ERROR(NoSignChange);
SPURT_DEFINE_ERROR(PeriodCollapse);
SPURT_DEFINE_ERROR(Undecided);
SPURT_DEFINE_ERROR(NoOscillation);
// configuration
SPURT_DEFINE_ERROR(ConfigError);

#undef SPURT_DEFINE_ERROR

} // namespace spurt
