#include "xmusic/nn/params.hpp"

#include <cmath>

#include "xmusic/error.hpp"

namespace xmusic::nn {

Parameter& ParamStore::adopt(const std::string& name, Matrix value) {
  if (by_name_.count(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix(value.rows, value.cols);
  p->adam_m = Matrix(value.rows, value.cols);
  p->adam_v = Matrix(value.rows, value.cols);
  p->value = std::move(value);
  Parameter& ref = *p;
  by_name_[name] = p.get();
  params_.push_back(std::move(p));
  return ref;
}

Parameter& ParamStore::create(const std::string& name, int rows, int cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.normal() * scale;
  return adopt(name, std::move(m));
}

Parameter& ParamStore::create_filled(const std::string& name, int rows, int cols, double fill) {
  return adopt(name, Matrix(rows, cols, fill));
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParamStore::at(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw Error(ErrorCode::InvalidCheckpoint, "missing parameter '" + name + "'");
}

const Parameter& ParamStore::at(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw Error(ErrorCode::InvalidCheckpoint, "missing parameter '" + name + "'");
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.zero();
}

void ParamStore::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& p : params_)
    if (p->name.rfind(prefix, 0) == 0) p->frozen = frozen;
}

double grad_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const auto* p : store.all()) {
    if (p->frozen) continue;
    for (double g : p->grad.data) sq += g * g;
  }
  return std::sqrt(sq);
}

double Adam::step(ParamStore& store) {
  const double norm = grad_norm(store);
  const double scale = opts_.clip_norm > 0 && norm > opts_.clip_norm ? opts_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (auto* p : store.all()) {
    if (!p->frozen) {
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad.data[i] * scale;
        double& m = p->adam_m.data[i];
        double& v = p->adam_v.data[i];
        m = opts_.beta1 * m + (1.0 - opts_.beta1) * g;
        v = opts_.beta2 * v + (1.0 - opts_.beta2) * g * g;
        p->value.data[i] -= opts_.lr * (m / c1) / (std::sqrt(v / c2) + opts_.eps);
      }
    }
    p->grad.zero();
  }
  return norm;
}

}  // namespace xmusic::nn
