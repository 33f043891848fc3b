#include "xmusic/error.hpp"

namespace xmusic {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::UnencodableScore: return "UnencodableScore";
    case ErrorCode::MalformedSequence: return "MalformedSequence";
    case ErrorCode::InvalidElements: return "InvalidElements";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::EmptyVideo: return "EmptyVideo";
    case ErrorCode::TableEmpty: return "TableEmpty";
    case ErrorCode::TooFewBeats: return "TooFewBeats";
    case ErrorCode::InvalidFeatures: return "InvalidFeatures";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::InvalidCheckpoint: return "InvalidCheckpoint";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoMelodicNotes: return "NoMelodicNotes";
    case ErrorCode::TooFewBars: return "TooFewBars";
    case ErrorCode::EmptyScore: return "EmptyScore";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

bool is_model_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::ContextOverflow:
    case ErrorCode::EmptyBatch:
    case ErrorCode::MissingLabels:
    case ErrorCode::InvalidCheckpoint:
    case ErrorCode::InvalidConfig:
      return true;
    default:
      return false;
  }
}

}  // namespace xmusic
