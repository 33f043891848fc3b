#include "xmusic/midi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <tuple>

#include "xmusic/error.hpp"

namespace xmusic::midi {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedFile, what); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t u8() {
    if (pos_ >= data_.size()) malformed("unexpected end of data");
    return data_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= data_.size()) malformed("unexpected end of data");
    return data_[pos_];
  }
  std::uint16_t u16() {
    std::uint16_t hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    malformed("variable-length quantity longer than 4 bytes");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) malformed("chunk extends past end of file");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

struct RawNote {
  InstrumentClass instrument;
  Note note;
};

struct TrackResult {
  std::vector<RawNote> notes;
  std::vector<TempoChange> tempos;
  std::optional<std::pair<std::int64_t, TimeSignature>> time_signature;
};

TrackResult parse_track(std::span<const std::uint8_t> body, ParseReport& report) {
  TrackResult out;
  Reader r(body);
  std::int64_t tick = 0;
  std::uint8_t running = 0;
  std::array<int, 16> program{};
  // Open note-ons per (channel, pitch), closed first-in first-out.
  std::map<std::pair<int, int>, std::deque<std::pair<std::int64_t, int>>> open;

  auto close = [&](int channel, int pitch, std::int64_t at) {
    auto it = open.find({channel, pitch});
    if (it == open.end() || it->second.empty()) return;  // stray note-off
    auto [on, vel] = it->second.front();
    it->second.pop_front();
    std::int64_t off = at;
    if (off <= on) {
      off = on + 1;
      ++report.zero_length_notes;
    }
    out.notes.push_back({group_instruments(program[channel], channel == 9), {pitch, on, off, vel}});
  };

  while (!r.done()) {
    tick += r.vlq();
    std::uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (running == 0) malformed("data byte without running status");
      status = running;
    }

    if (status == 0xFF) {
      std::uint8_t type = r.u8();
      auto data = r.take(r.vlq());
      if (type == 0x51 && data.size() == 3) {
        std::uint32_t uspq = (data[0] << 16) | (data[1] << 8) | data[2];
        if (uspq == 0) malformed("zero tempo");
        out.tempos.push_back({tick, 60'000'000.0 / uspq});
      } else if (type == 0x58 && data.size() >= 2) {
        if (!out.time_signature) out.time_signature = {{tick, {data[0], 1 << std::min<int>(data[1], 6)}}};
      } else if (type == 0x2F) {
        break;
      }
      running = 0;
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.take(r.vlq());
      running = 0;
      continue;
    }
    if (status >= 0xF0) malformed("unsupported system message in file");

    running = status;
    const int channel = status & 0x0F;
    switch (status & 0xF0) {
      case 0x80: {
        int pitch = r.u8() & 0x7F;
        r.u8();
        close(channel, pitch, tick);
        break;
      }
      case 0x90: {
        int pitch = r.u8() & 0x7F;
        int vel = r.u8() & 0x7F;
        if (vel == 0) {
          close(channel, pitch, tick);
        } else {
          open[{channel, pitch}].emplace_back(tick, vel);
        }
        break;
      }
      case 0xA0:
      case 0xB0:
      case 0xE0:
        r.u8();
        r.u8();
        break;
      case 0xC0:
        program[channel] = r.u8() & 0x7F;
        break;
      case 0xD0:
        r.u8();
        break;
      default:
        malformed("unknown status byte");
    }
  }

  for (auto& [key, queue] : open) {
    while (!queue.empty()) {
      ++report.unresolved_notes;
      close(key.first, key.second, tick);
    }
  }
  return out;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n) out.push_back(buf[--n]);
}

struct TimedEvent {
  std::int64_t tick;
  int order;  // note-offs sort before note-ons at the same tick
  std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> track_chunk(std::vector<TimedEvent> events, std::int64_t end_tick) {
  std::stable_sort(events.begin(), events.end(), [](const TimedEvent& a, const TimedEvent& b) {
    return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
  });
  std::vector<std::uint8_t> body;
  std::int64_t prev = 0;
  for (const auto& e : events) {
    put_vlq(body, static_cast<std::uint32_t>(e.tick - prev));
    body.insert(body.end(), e.bytes.begin(), e.bytes.end());
    prev = e.tick;
  }
  put_vlq(body, static_cast<std::uint32_t>(std::max<std::int64_t>(0, end_tick - prev)));
  body.insert(body.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> chunk = {'M', 'T', 'r', 'k'};
  put_u32(chunk, static_cast<std::uint32_t>(body.size()));
  chunk.insert(chunk.end(), body.begin(), body.end());
  return chunk;
}

}  // namespace

Score parse_midi(std::span<const std::uint8_t> bytes, ParseReport* report) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;
  Reader r(bytes);
  if (r.remaining() < 14) malformed("file too short for a header chunk");
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), "MThd")) malformed("missing MThd header");
  std::uint32_t header_len = r.u32();
  if (header_len < 6) malformed("header chunk too short");
  std::uint16_t format = r.u16();
  std::uint16_t ntracks = r.u16();
  std::uint16_t division = r.u16();
  r.take(header_len - 6);
  if (format > 1) malformed("only SMF formats 0 and 1 are supported");
  if (division & 0x8000) malformed("SMPTE time division is not supported");
  if (division == 0) malformed("zero ticks per quarter");

  Score score;
  score.ticks_per_quarter = division;
  std::array<std::vector<Note>, kInstrumentClassCount> by_class;
  std::optional<std::pair<std::int64_t, TimeSignature>> ts;

  int seen = 0;
  while (seen < ntracks) {
    if (r.remaining() < 8) malformed("missing track chunk");
    auto id = r.take(4);
    std::uint32_t len = r.u32();
    auto body = r.take(len);
    if (!std::equal(id.begin(), id.end(), "MTrk")) continue;  // unknown chunk type
    ++seen;
    TrackResult tr = parse_track(body, rep);
    for (auto& rn : tr.notes) by_class[static_cast<int>(rn.instrument)].push_back(rn.note);
    score.tempo_map.insert(score.tempo_map.end(), tr.tempos.begin(), tr.tempos.end());
    if (tr.time_signature && (!ts || tr.time_signature->first < ts->first)) ts = tr.time_signature;
  }

  std::stable_sort(score.tempo_map.begin(), score.tempo_map.end(),
                   [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
  if (ts) score.time_signature = ts->second;
  for (int c = 0; c < kInstrumentClassCount; ++c) {
    if (by_class[c].empty()) continue;
    std::sort(by_class[c].begin(), by_class[c].end(), note_before);
    score.tracks.push_back({static_cast<InstrumentClass>(c), std::move(by_class[c])});
  }
  return score;
}

std::vector<std::uint8_t> serialize_midi(const Score& score) {
  constexpr int kTpq = 480;
  const int src_tpq = score.ticks_per_quarter > 0 ? score.ticks_per_quarter : kTpq;
  auto rescale = [&](std::int64_t t) -> std::int64_t {
    if (src_tpq == kTpq) return t;
    return (t * kTpq * 2 + src_tpq) / (2 * static_cast<std::int64_t>(src_tpq));
  };

  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
  put_u32(out, 6);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(1 + score.tracks.size()));
  put_u16(out, kTpq);

  const std::int64_t end = rescale(score.end_tick());

  std::vector<TimedEvent> conductor;
  {
    int denom_pow = 0;
    while ((1 << denom_pow) < score.time_signature.denominator && denom_pow < 6) ++denom_pow;
    conductor.push_back({0, 0,
                         {0xFF, 0x58, 0x04, static_cast<std::uint8_t>(score.time_signature.numerator),
                          static_cast<std::uint8_t>(denom_pow), 24, 8}});
  }
  for (const auto& tc : score.tempo_map) {
    auto uspq = static_cast<std::uint32_t>(std::lround(60'000'000.0 / tc.bpm));
    conductor.push_back({rescale(tc.tick), 1,
                         {0xFF, 0x51, 0x03, static_cast<std::uint8_t>(uspq >> 16),
                          static_cast<std::uint8_t>((uspq >> 8) & 0xFF),
                          static_cast<std::uint8_t>(uspq & 0xFF)}});
  }
  auto chunk = track_chunk(std::move(conductor), end);
  out.insert(out.end(), chunk.begin(), chunk.end());

  for (const auto& track : score.tracks) {
    const bool drum = track.instrument == InstrumentClass::Drum;
    const std::uint8_t ch = drum ? 9 : 0;
    std::vector<TimedEvent> events;
    events.push_back({0, 0, {static_cast<std::uint8_t>(0xC0 | ch),
                             static_cast<std::uint8_t>(representative_program(track.instrument))}});
    for (const auto& n : track.notes) {
      auto p = static_cast<std::uint8_t>(n.pitch & 0x7F);
      events.push_back({rescale(n.onset), 2,
                        {static_cast<std::uint8_t>(0x90 | ch), p, static_cast<std::uint8_t>(n.velocity & 0x7F)}});
      events.push_back({rescale(n.offset), 1, {static_cast<std::uint8_t>(0x80 | ch), p, 0x40}});
    }
    auto tc = track_chunk(std::move(events), end);
    out.insert(out.end(), tc.begin(), tc.end());
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IOError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IOError, "write failed for " + path);
}

}  // namespace xmusic::midi
