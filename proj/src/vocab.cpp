#include "xmusic/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xmusic {

int VocabSpec::total_base() const { return std::accumulate(base.begin(), base.end(), 0); }
int VocabSpec::total_special() const { return std::accumulate(special.begin(), special.end(), 0); }
int VocabSpec::total_embed_width() const {
  return std::accumulate(embed_width.begin(), embed_width.end(), 0);
}

VocabSpec VocabSpec::standard(double width_factor) {
  VocabSpec v;
  //                   family emo genre barbeat tempo chord dens str prog pitch dur vel
  v.base =            {5,     11, 6,    33,     65,   133,  33,  37, 17,  256,  32, 44};
  v.special =         {0,     1,  1,    1,      2,    2,    1,   1,  1,   1,    1,  1};
  const std::array<int, kAttributeCount> widths = {64, 64, 64, 256, 256, 256, 128, 128, 64, 1024, 512, 512};
  for (int i = 0; i < kAttributeCount; ++i)
    v.embed_width[i] = std::max(1, static_cast<int>(std::lround(widths[i] * width_factor)));
  return v;
}

}  // namespace xmusic
