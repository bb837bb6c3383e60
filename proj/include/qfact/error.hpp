#pragma once

#include <stdexcept>
#include <string>

namespace qfact {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define QFACT_DEFINE_ERROR(Name)              \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

// finprob
QFACT_DEFINE_ERROR(UnknownLabelError);       // outcome outside the spectrum (mis-coded)
QFACT_DEFINE_ERROR(EmptyLawError);
QFACT_DEFINE_ERROR(InsufficientDataError);   // fewer than two complete blocks
QFACT_DEFINE_ERROR(SpectrumMismatchError);

// hilbert
QFACT_DEFINE_ERROR(DimensionMismatchError);
QFACT_DEFINE_ERROR(InvariantViolationError);  // non-unitary, non-Hermitian, ...
QFACT_DEFINE_ERROR(DestructiveAnnihilationError);

// genesis
QFACT_DEFINE_ERROR(DestroyedSpecimenError);
QFACT_DEFINE_ERROR(GuidedCodingUnavailableError);
QFACT_DEFINE_ERROR(NonPositiveFlightTimeError);
QFACT_DEFINE_ERROR(InvalidArgumentError);

// probtree / reconstruct
QFACT_DEFINE_ERROR(UnlinkedObservableError);
QFACT_DEFINE_ERROR(InconsistentLawsError);

// dbb
QFACT_DEFINE_ERROR(NodeSingularityError);
QFACT_DEFINE_ERROR(ZeroFieldError);

// cli
QFACT_DEFINE_ERROR(SchemaError);

#undef QFACT_DEFINE_ERROR

}  // namespace qfact
