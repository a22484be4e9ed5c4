#pragma once

#include <stdexcept>
#include <string>

namespace ehrd3pm {

enum class Err {
  IndexOutOfRange,
  NonAscendingRow,
  MalformedHeader,
  MalformedRecord,
  EmptyMatrix,
  InvalidHorizon,
  DegenerateSchedule,
  NotOneHot,
  StepOutOfRange,
  UnnormalizedPredictor,
  InvalidConfig,
  ShapeMismatch,
  NonFiniteActivation,
  NonFiniteGradient,
  EmptyDataset,
  InvalidContext,
  NonFiniteLatent,
  DegenerateInput,
  TooFewSamples,
  ExposedTooLarge,
  SingleClassLabels,
  NoPositives,
  InvalidSpec,
  InstanceTooLarge,
  IoFailure,
};

const char* err_name(Err code);

// Validation errors map to CLI exit code 2, numeric errors to 3.
class Error : public std::runtime_error {
public:
  enum class Kind { Validation, Numeric };

  Error(Err code, Kind kind, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code), kind_(kind) {}

  Err code() const { return code_; }
  Kind kind() const { return kind_; }

private:
  Err code_;
  Kind kind_;
};

[[noreturn]] inline void throw_validation(Err code, const std::string& what) {
  throw Error(code, Error::Kind::Validation, what);
}

[[noreturn]] inline void throw_numeric(Err code, const std::string& what) {
  throw Error(code, Error::Kind::Numeric, what);
}

inline void require(bool cond, Err code, const std::string& what) {
  if (!cond) throw_validation(code, what);
}

} // namespace ehrd3pm
