// Central finite-difference oracle shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "xmusic/nn/params.hpp"
#include "xmusic/rng.hpp"

namespace xmusic::testing {

struct Probe {
  std::string param;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is numerically zero from dividing rounding noise by ~0.
inline double relative_error(double a, double n, double floor = 1e-7) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// `loss` rebuilds the forward pass from the current parameter values and,
/// when `backward` is true, accumulates analytic gradients into the store.
/// Probes pick a random tensor, then a random entry with a non-zero analytic
/// gradient (up to 50 tries, else any entry).
inline std::vector<Probe> gradient_check(nn::ParamStore& store, const std::function<double(bool backward)>& loss,
                                         int probes, std::uint64_t seed, double h = 1e-5) {
  store.zero_grad();
  loss(true);
  Rng rng(seed);
  auto params = store.all();
  std::vector<Probe> out;
  for (int i = 0; i < probes; ++i) {
    nn::Parameter* p = nullptr;
    std::size_t idx = 0;
    for (int attempt = 0; attempt < 50; ++attempt) {
      p = params[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(params.size()) - 1))];
      idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(p->value.size()) - 1));
      if (p->grad.data[idx] != 0.0) break;
    }
    const double saved = p->value.data[idx];
    p->value.data[idx] = saved + h;
    const double up = loss(false);
    p->value.data[idx] = saved - h;
    const double down = loss(false);
    p->value.data[idx] = saved;
    Probe pr;
    pr.param = p->name;
    pr.index = idx;
    pr.analytic = p->grad.data[idx];
    pr.numeric = (up - down) / (2 * h);
    pr.rel_error = relative_error(pr.analytic, pr.numeric);
    out.push_back(pr);
  }
  store.zero_grad();
  return out;
}

}  // namespace xmusic::testing
