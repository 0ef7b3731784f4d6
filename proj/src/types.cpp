#include "pramana/types.hpp"

namespace pramana {

std::string_view to_string(StageRejected r) {
  switch (r) {
    case StageRejected::transcription_error:
      return "transcription_error";
    case StageRejected::no_agreement:
      return "no_agreement";
    case StageRejected::filtered:
      return "filtered";
    case StageRejected::missing_evaluator_input:
      return "missing_evaluator_input";
  }
  return "unknown";
}

std::optional<StageRejected> stage_rejected_from_string(std::string_view s) {
  if (s == "transcription_error") return StageRejected::transcription_error;
  if (s == "no_agreement") return StageRejected::no_agreement;
  if (s == "filtered") return StageRejected::filtered;
  if (s == "missing_evaluator_input") return StageRejected::missing_evaluator_input;
  return std::nullopt;
}

}  // namespace pramana
