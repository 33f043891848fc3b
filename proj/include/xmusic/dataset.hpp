/**
 * @file dataset.hpp
 * @brief Corpus indexing, duplicate removal and label statistics.
 */
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmusic/events.hpp"
#include "xmusic/score.hpp"

namespace xmusic::dataset {

enum class HashAlgorithm { Sha256, Md5 };

/// Lowercase hex digest. Throws InvalidConfig if the digest is unavailable.
std::string hash_bytes(std::span<const std::uint8_t> bytes, HashAlgorithm algo = HashAlgorithm::Sha256);

using Profile = std::array<double, 12>;

/// Duration-weighted pitch-class profile over non-drum notes, L2-normalized.
/// All zeros when the score has no non-drum notes.
Profile pitch_class_profile(const Score& score);
/// Cosine of two L2-normalized profiles; 0 when either is all zeros.
double cosine(const Profile& a, const Profile& b);

struct CorpusEntry {
  std::string path;
  std::string hash;
  Profile profile{};
  double duration_s = 0;
  SequenceLabels labels;
};

struct IndexFailure {
  std::string path;
  std::string error;
};

struct CorpusIndex {
  std::vector<CorpusEntry> entries;  // sorted by path
  std::vector<IndexFailure> failures;
};

using LabelMap = std::map<std::string, SequenceLabels>;

/// Reads `path,emotion,genre` rows (optional header; empty cells mean unlabeled).
/// Throws IOError when unreadable and InvalidFeatures on an unknown label.
LabelMap read_labels_csv(const std::string& path);
LabelMap parse_labels_csv(const std::string& text);

/// Hashes and profiles MIDI files, `jobs` at a time. Unreadable or
/// unparseable files are skipped and reported. Throws InvalidConfig if the
/// digest collides for different contents.
CorpusIndex index_files(const std::vector<std::string>& paths, const LabelMap& labels = {},
                        HashAlgorithm algo = HashAlgorithm::Sha256, int jobs = 1);

/// Entry built from bytes already in memory.
CorpusEntry index_bytes(const std::string& path, std::span<const std::uint8_t> bytes, HashAlgorithm algo,
                        const LabelMap& labels = {});

struct ExactDedup {
  std::vector<CorpusEntry> kept;
  std::vector<std::pair<std::string, std::string>> dropped;  // (dropped path, survivor path)
};

/// One survivor per content hash, the first by path order.
ExactDedup dedup_exact(const std::vector<CorpusEntry>& corpus);

struct SimilarPair {
  std::string dropped;
  std::string kept;
  double cosine = 0;
};

struct SimilarityDedup {
  std::vector<CorpusEntry> kept;
  std::vector<SimilarPair> dropped;
};

inline constexpr double kDefaultSimilarityThreshold = 0.95;
/// Cosine comparisons use this slack so equal profiles meet a threshold of 1.
inline constexpr double kCosineTolerance = 1e-12;

/// Files are visited longest first (path order breaks ties); a file whose
/// profile meets the threshold against an already kept file is dropped.
/// Throws InvalidConfig unless 0 < threshold <= 1.
SimilarityDedup dedup_similarity(const std::vector<CorpusEntry>& corpus,
                                 double threshold = kDefaultSimilarityThreshold);

struct CorpusStats {
  std::size_t files = 0;
  std::array<std::size_t, kEmotionCount> emotion{};
  std::size_t emotion_unlabeled = 0;
  std::array<std::size_t, kGenreCount> genre{};
  std::size_t genre_unlabeled = 0;
  double duration_bin_s = 30;
  std::vector<std::size_t> duration;  // bin k counts durations in [k, k+1) * duration_bin_s
  double mean_duration_s = 0;
};

CorpusStats corpus_stats(const std::vector<CorpusEntry>& corpus, double duration_bin_s = 30);
nlohmann::json to_json(const CorpusStats& s);

}  // namespace xmusic::dataset
