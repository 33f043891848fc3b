#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmusic/events.hpp"

namespace xmusic::event_io {

inline constexpr int kJsonlVersion = 1;
inline constexpr int kBinaryVersion = 1;

/// JSON lines: a header object {"format":"xmusic.events","version":1,...}
/// followed by one object per event mapping every attribute name to its index.
std::string to_jsonl(const EventSequence& seq);
EventSequence from_jsonl(const std::string& text);

/// "XMEV", u16 version, u16 attribute count, u32 event count, then 12 u16
/// indices per event. All integers little-endian.
std::vector<std::uint8_t> to_binary(const EventSequence& seq);
EventSequence from_binary(std::span<const std::uint8_t> bytes);

}  // namespace xmusic::event_io
