#include "xmusic/event_io.hpp"

#include <sstream>

#include "json.hpp"
#include "xmusic/error.hpp"

namespace xmusic::event_io {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& m) { throw Error(ErrorCode::MalformedSequence, m); }

}  // namespace

std::string to_jsonl(const EventSequence& seq) {
  json header = {{"format", "xmusic.events"}, {"version", kJsonlVersion}, {"source", seq.source}};
  header["emotion"] = seq.labels.emotion ? json(name_of(*seq.labels.emotion)) : json(nullptr);
  header["genre"] = seq.labels.genre ? json(name_of(*seq.labels.genre)) : json(nullptr);
  std::string out = header.dump() + "\n";
  for (const auto& e : seq.events) {
    // Keys in attribute order, so the text reads like the event layout.
    std::string s = "{";
    for (int a = 0; a < kAttributeCount; ++a) {
      if (a) s += ",";
      s += "\"" + std::string(kAttributeNames[a]) + "\":" + std::to_string(e.values[a]);
    }
    out += s + "}\n";
  }
  return out;
}

EventSequence from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  EventSequence seq;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      bad("line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!have_header) {
      if (j.value("format", "") != "xmusic.events") bad("missing xmusic.events header");
      if (j.value("version", 0) != kJsonlVersion) bad("unsupported events version");
      seq.source = j.value("source", "");
      if (j.contains("emotion") && j["emotion"].is_string()) {
        auto e = emotion_from_name(j["emotion"].get<std::string>());
        if (!e) bad("unknown emotion label");
        seq.labels.emotion = e;
      }
      if (j.contains("genre") && j["genre"].is_string()) {
        auto g = genre_from_name(j["genre"].get<std::string>());
        if (!g) bad("unknown genre label");
        seq.labels.genre = g;
      }
      have_header = true;
      continue;
    }
    CompoundEvent e;
    for (int a = 0; a < kAttributeCount; ++a) {
      const std::string key(kAttributeNames[a]);
      if (!j.contains(key) || !j[key].is_number_unsigned() || j[key].get<std::uint64_t>() > 0xFFFF)
        bad("line " + std::to_string(line_no) + ": missing or invalid '" + key + "'");
      e.values[a] = j[key].get<std::uint16_t>();
    }
    seq.events.push_back(e);
  }
  if (!have_header) bad("empty events file");
  return seq;
}

std::vector<std::uint8_t> to_binary(const EventSequence& seq) {
  std::vector<std::uint8_t> out = {'X', 'M', 'E', 'V'};
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  u16(kBinaryVersion);
  u16(kAttributeCount);
  const auto n = static_cast<std::uint32_t>(seq.events.size());
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((n >> s) & 0xFF));
  for (const auto& e : seq.events)
    for (auto v : e.values) u16(v);
  return out;
}

EventSequence from_binary(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || b[0] != 'X' || b[1] != 'M' || b[2] != 'E' || b[3] != 'V') bad("missing XMEV magic");
  auto u16 = [&](std::size_t at) { return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8)); };
  if (u16(4) != kBinaryVersion) bad("unsupported binary events version");
  if (u16(6) != kAttributeCount) bad("unexpected attribute count");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(b[8 + i]) << (8 * i);
  if (b.size() != 12 + static_cast<std::size_t>(n) * kAttributeCount * 2) bad("binary events size mismatch");
  EventSequence seq;
  seq.events.resize(n);
  std::size_t at = 12;
  for (auto& e : seq.events)
    for (auto& v : e.values) {
      v = u16(at);
      at += 2;
    }
  return seq;
}

}  // namespace xmusic::event_io
