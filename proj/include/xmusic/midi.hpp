#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmusic/score.hpp"

namespace xmusic::midi {

struct ParseReport {
  /// Note-ons still open at end of track; they are closed at the track's end tick.
  std::size_t unresolved_notes = 0;
  /// Notes whose note-off landed on their note-on tick; stretched to one tick.
  std::size_t zero_length_notes = 0;
};

/// Parses a format-0 or format-1 Standard MIDI File. Programs are grouped into
/// instrument classes; all tracks of one class are merged. Throws
/// Error(MalformedFile) on bad headers, truncated chunks or unsupported formats.
Score parse_midi(std::span<const std::uint8_t> bytes, ParseReport* report = nullptr);

/// Writes a format-1 file at 480 ticks per quarter: a conductor track holding
/// tempo and time signature, then one track per instrument class.
std::vector<std::uint8_t> serialize_midi(const Score& score);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace xmusic::midi
