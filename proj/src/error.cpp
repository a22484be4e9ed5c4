#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

const char* err_name(Err code) {
  switch (code) {
    case Err::IndexOutOfRange: return "IndexOutOfRange";
    case Err::NonAscendingRow: return "NonAscendingRow";
    case Err::MalformedHeader: return "MalformedHeader";
    case Err::MalformedRecord: return "MalformedRecord";
    case Err::EmptyMatrix: return "EmptyMatrix";
    case Err::InvalidHorizon: return "InvalidHorizon";
    case Err::DegenerateSchedule: return "DegenerateSchedule";
    case Err::NotOneHot: return "NotOneHot";
    case Err::StepOutOfRange: return "StepOutOfRange";
    case Err::UnnormalizedPredictor: return "UnnormalizedPredictor";
    case Err::InvalidConfig: return "InvalidConfig";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::NonFiniteActivation: return "NonFiniteActivation";
    case Err::NonFiniteGradient: return "NonFiniteGradient";
    case Err::EmptyDataset: return "EmptyDataset";
    case Err::InvalidContext: return "InvalidContext";
    case Err::NonFiniteLatent: return "NonFiniteLatent";
    case Err::DegenerateInput: return "DegenerateInput";
    case Err::TooFewSamples: return "TooFewSamples";
    case Err::ExposedTooLarge: return "ExposedTooLarge";
    case Err::SingleClassLabels: return "SingleClassLabels";
    case Err::NoPositives: return "NoPositives";
    case Err::InvalidSpec: return "InvalidSpec";
    case Err::InstanceTooLarge: return "InstanceTooLarge";
    case Err::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

} // namespace ehrd3pm
