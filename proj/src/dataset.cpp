#include "xmusic/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "xmusic/error.hpp"
#include "xmusic/midi.hpp"

namespace xmusic::dataset {

std::string hash_bytes(std::span<const std::uint8_t> bytes, HashAlgorithm algo) {
  const EVP_MD* md = algo == HashAlgorithm::Md5 ? EVP_md5() : EVP_sha256();
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!md || !ctx || EVP_DigestInit_ex(ctx.get(), md, nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), out, &len) != 1)
    throw Error(ErrorCode::InvalidConfig, "digest unavailable");
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[out[i] >> 4];
    s += hex[out[i] & 15];
  }
  return s;
}

Profile pitch_class_profile(const Score& score) {
  Profile p{};
  for (const auto& t : score.tracks) {
    if (t.instrument == InstrumentClass::Drum) continue;
    for (const auto& n : t.notes) p[static_cast<std::size_t>(n.pitch % 12)] += static_cast<double>(n.offset - n.onset);
  }
  double norm = 0;
  for (double x : p) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (double& x : p) x /= norm;
  return p;
}

double cosine(const Profile& a, const Profile& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / std::sqrt(na * nb);
}

LabelMap parse_labels_csv(const std::string& text) {
  LabelMap out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (lineno == 1 && !cells.empty() && cells[0] == "path") continue;
    if (cells.empty() || cells.size() > 3 || cells[0].empty())
      throw Error(ErrorCode::InvalidFeatures, "labels line " + std::to_string(lineno) + ": expected path,emotion,genre");
    SequenceLabels l;
    if (cells.size() > 1 && !cells[1].empty()) {
      l.emotion = emotion_from_name(cells[1]);
      if (!l.emotion) throw Error(ErrorCode::InvalidFeatures, "labels line " + std::to_string(lineno) + ": unknown emotion '" + cells[1] + "'");
    }
    if (cells.size() > 2 && !cells[2].empty()) {
      l.genre = genre_from_name(cells[2]);
      if (!l.genre) throw Error(ErrorCode::InvalidFeatures, "labels line " + std::to_string(lineno) + ": unknown genre '" + cells[2] + "'");
    }
    out[cells[0]] = l;
  }
  return out;
}

LabelMap read_labels_csv(const std::string& path) {
  const auto bytes = midi::read_file(path);
  return parse_labels_csv(std::string(bytes.begin(), bytes.end()));
}

CorpusEntry index_bytes(const std::string& path, std::span<const std::uint8_t> bytes, HashAlgorithm algo,
                        const LabelMap& labels) {
  CorpusEntry e;
  e.path = path;
  e.hash = hash_bytes(bytes, algo);
  const Score s = midi::parse_midi(bytes);
  e.profile = pitch_class_profile(s);
  e.duration_s = s.seconds_at(s.end_tick());
  if (auto it = labels.find(path); it != labels.end()) e.labels = it->second;
  return e;
}

CorpusIndex index_files(const std::vector<std::string>& paths, const LabelMap& labels, HashAlgorithm algo, int jobs) {
  std::vector<std::string> sorted = paths;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::optional<CorpusEntry>> entries(sorted.size());
  std::vector<std::string> errors(sorted.size());
  const long n = static_cast<long>(sorted.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const auto bytes = midi::read_file(sorted[k]);
      entries[k] = index_bytes(sorted[k], bytes, algo, labels);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  CorpusIndex idx;
  std::unordered_map<std::string, std::string> seen;  // hash -> path
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (!entries[k]) {
      idx.failures.push_back({sorted[k], errors[k]});
      continue;
    }
    idx.entries.push_back(std::move(*entries[k]));
  }
  // a collision would make two different files share a digest
  for (const auto& e : idx.entries) {
    auto [it, fresh] = seen.emplace(e.hash, e.path);
    if (!fresh && midi::read_file(it->second) != midi::read_file(e.path))
      throw Error(ErrorCode::InvalidConfig, "digest collision between " + it->second + " and " + e.path);
  }
  return idx;
}

ExactDedup dedup_exact(const std::vector<CorpusEntry>& corpus) {
  std::vector<const CorpusEntry*> order;
  for (const auto& e : corpus) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->path < b->path; });
  ExactDedup out;
  std::unordered_map<std::string, std::string> survivor;
  for (const CorpusEntry* e : order) {
    auto [it, fresh] = survivor.emplace(e->hash, e->path);
    if (fresh)
      out.kept.push_back(*e);
    else
      out.dropped.emplace_back(e->path, it->second);
  }
  return out;
}

SimilarityDedup dedup_similarity(const std::vector<CorpusEntry>& corpus, double threshold) {
  if (!(threshold > 0 && threshold <= 1)) throw Error(ErrorCode::InvalidConfig, "similarity threshold must lie in (0, 1]");
  std::vector<const CorpusEntry*> order;
  for (const auto& e : corpus) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) {
    if (a->duration_s != b->duration_s) return a->duration_s > b->duration_s;
    return a->path < b->path;
  });
  SimilarityDedup out;
  for (const CorpusEntry* e : order) {
    const CorpusEntry* match = nullptr;
    double best = 0;
    for (const auto& k : out.kept) {
      const double c = cosine(e->profile, k.profile);
      if (c >= threshold - kCosineTolerance && (!match || c > best)) {
        match = &k;
        best = c;
      }
    }
    if (match)
      out.dropped.push_back({e->path, match->path, best});
    else
      out.kept.push_back(*e);
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<CorpusEntry>& corpus, double duration_bin_s) {
  if (!(duration_bin_s > 0)) throw Error(ErrorCode::InvalidConfig, "duration bin width must be positive");
  CorpusStats s;
  s.files = corpus.size();
  s.duration_bin_s = duration_bin_s;
  double total = 0;
  for (const auto& e : corpus) {
    if (e.labels.emotion) ++s.emotion[static_cast<std::size_t>(*e.labels.emotion)];
    else ++s.emotion_unlabeled;
    if (e.labels.genre) ++s.genre[static_cast<std::size_t>(*e.labels.genre)];
    else ++s.genre_unlabeled;
    const auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(e.duration_s / duration_bin_s)));
    if (s.duration.size() <= bin) s.duration.resize(bin + 1, 0);
    ++s.duration[bin];
    total += e.duration_s;
  }
  s.mean_duration_s = corpus.empty() ? 0 : total / static_cast<double>(corpus.size());
  return s;
}

nlohmann::json to_json(const CorpusStats& s) {
  nlohmann::json emo = nlohmann::json::object(), gen = nlohmann::json::object();
  for (int i = 0; i < kEmotionCount; ++i) emo[std::string(kEmotionNames[static_cast<std::size_t>(i)])] = s.emotion[static_cast<std::size_t>(i)];
  emo["unlabeled"] = s.emotion_unlabeled;
  for (int i = 0; i < kGenreCount; ++i) gen[std::string(kGenreNames[static_cast<std::size_t>(i)])] = s.genre[static_cast<std::size_t>(i)];
  gen["unlabeled"] = s.genre_unlabeled;
  return {{"schema", "xmusic.corpus_stats"},
          {"version", 1},
          {"files", s.files},
          {"emotion", emo},
          {"genre", gen},
          {"duration", {{"bin_seconds", s.duration_bin_s}, {"counts", s.duration}}},
          {"mean_duration_s", s.mean_duration_s}};
}

}  // namespace xmusic::dataset
