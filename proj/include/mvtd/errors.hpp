#pragma once

#include <stdexcept>
#include <string>

namespace mvtd {

// Exit-code categories used by the CLI: 0 ok, 2 config, 3 math-regime
// violation, 4 verification failure.
enum class ErrorCategory { config = 2, regime = 3, verification = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& what)
      : std::runtime_error(what), category_(cat) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

#define MVTD_DEFINE_ERROR(NAME, CATEGORY)                       \
  class NAME : public Error {                                   \
   public:                                                      \
    explicit NAME(const std::string& what)                      \
        : Error(ErrorCategory::CATEGORY, #NAME ": " + what) {}  \
  }

MVTD_DEFINE_ERROR(NonStochasticRow, config);
MVTD_DEFINE_ERROR(NegativeProbability, config);
MVTD_DEFINE_ERROR(GammaOutOfRange, config);
MVTD_DEFINE_ERROR(NotIrreducible, config);
MVTD_DEFINE_ERROR(FileParseError, config);
MVTD_DEFINE_ERROR(ParseError, config);
MVTD_DEFINE_ERROR(ConstraintViolation, config);
MVTD_DEFINE_ERROR(DimensionMismatch, config);
MVTD_DEFINE_ERROR(RankDeficient, regime);
MVTD_DEFINE_ERROR(SingularSystem, regime);
MVTD_DEFINE_ERROR(NotPositive, regime);
MVTD_DEFINE_ERROR(MissingProjectionRadius, config);
MVTD_DEFINE_ERROR(StepSizeTooLarge, regime);
MVTD_DEFINE_ERROR(InvalidMixingConstants, config);
MVTD_DEFINE_ERROR(CriticDiverged, regime);
MVTD_DEFINE_ERROR(SeedCollision, config);

#undef MVTD_DEFINE_ERROR

}  // namespace mvtd
