#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xmusic {

enum class ErrorCode {
  // score / midi
  MalformedFile,
  // token representation
  UnencodableScore,
  MalformedSequence,
  // projection / xprojector
  InvalidElements,
  DimensionMismatch,
  UnknownTag,
  NonPositiveDuration,
  EmptyVideo,
  TableEmpty,
  TooFewBeats,
  InvalidFeatures,
  // models
  ContextOverflow,
  EmptyBatch,
  EmptySequence,
  MissingLabels,
  InvalidCheckpoint,
  InvalidConfig,
  // metrics
  NoMelodicNotes,
  TooFewBars,
  EmptyScore,
  // io
  IOError,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by the model side (checkpoints, configs, sampling),
/// false for errors caused by input data.
bool is_model_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the error-code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace xmusic
