#pragma once

#include <stdexcept>
#include <string>

namespace lsnm {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input, configuration or precondition. The CLI maps these to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure on otherwise valid input. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

#define LSNM_DEFINE_ERROR(Name, Base) \
  class Name : public Base {          \
   public:                            \
    using Base::Base;                 \
  }

LSNM_DEFINE_ERROR(ConfigInvalid, UsageError);
LSNM_DEFINE_ERROR(SchemaError, UsageError);
LSNM_DEFINE_ERROR(DimensionMismatch, UsageError);
LSNM_DEFINE_ERROR(RhoOutOfRange, UsageError);
LSNM_DEFINE_ERROR(MTooLarge, UsageError);
LSNM_DEFINE_ERROR(TooFewScores, UsageError);
LSNM_DEFINE_ERROR(TooFewDraws, UsageError);
LSNM_DEFINE_ERROR(DegenerateLabels, UsageError);
LSNM_DEFINE_ERROR(AlignmentError, UsageError);
LSNM_DEFINE_ERROR(IncompatibleFit, UsageError);

LSNM_DEFINE_ERROR(NotPositiveDefinite, NumericalError);
LSNM_DEFINE_ERROR(IsolatedRegion, NumericalError);
LSNM_DEFINE_ERROR(SingularPrecision, NumericalError);
LSNM_DEFINE_ERROR(NonpositiveVariance, NumericalError);
LSNM_DEFINE_ERROR(RankDeficientDesign, NumericalError);
LSNM_DEFINE_ERROR(NonConvergence, NumericalError);
LSNM_DEFINE_ERROR(ChainDiverged, NumericalError);

#undef LSNM_DEFINE_ERROR

}  // namespace lsnm
