#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace xmusic {

enum class Emotion : std::uint8_t {
  Exciting,
  Warm,
  Happy,
  Romantic,
  Funny,
  Sad,
  Angry,
  Lazy,
  Quiet,
  Fear,
  Magnificent,
};

enum class Genre : std::uint8_t {
  Rock,
  Pop,
  Country,
  Jazz,
  Classical,
  Folk,
};

inline constexpr int kEmotionCount = 11;
inline constexpr int kGenreCount = 6;

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "exciting", "warm", "happy", "romantic", "funny", "sad",
    "angry",    "lazy", "quiet", "fear",     "magnificent"};

inline constexpr std::array<std::string_view, kGenreCount> kGenreNames = {
    "rock", "pop", "country", "jazz", "classical", "folk"};

inline std::string_view name_of(Emotion e) { return kEmotionNames[static_cast<int>(e)]; }
inline std::string_view name_of(Genre g) { return kGenreNames[static_cast<int>(g)]; }

std::optional<Emotion> emotion_from_name(std::string_view name);
std::optional<Genre> genre_from_name(std::string_view name);

}  // namespace xmusic
