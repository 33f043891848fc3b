#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xmusic/nn/matrix.hpp"
#include "xmusic/rng.hpp"

namespace xmusic::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  bool frozen = false;  // excluded from updates and from the clipping norm
};

/// Named parameters in creation order.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// Normal(0, scale) entries; throws InvalidConfig on a duplicate name.
  Parameter& create(const std::string& name, int rows, int cols, double scale, Rng& rng);
  /// Constant-filled entries.
  Parameter& create_filled(const std::string& name, int rows, int cols, double fill);
  /// Takes over a tensor, e.g. when loading a checkpoint.
  Parameter& adopt(const std::string& name, Matrix value);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  /// Throws InvalidCheckpoint when missing.
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t scalar_count() const;
  void zero_grad();
  /// Freezes every parameter whose name starts with `prefix`.
  void set_frozen(const std::string& prefix, bool frozen);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.5;  // global gradient-norm clip; <= 0 disables
};

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}
  /// Clips, updates every unfrozen parameter, zeroes all gradients.
  /// Returns the pre-clip global gradient norm.
  double step(ParamStore& store);
  double lr() const { return opts_.lr; }
  void set_lr(double lr) { opts_.lr = lr; }
  long steps() const { return t_; }

 private:
  AdamOptions opts_;
  long t_ = 0;
};

/// Global L2 norm of the gradients of unfrozen parameters.
double grad_norm(const ParamStore& store);

}  // namespace xmusic::nn
