#ifndef TRANSSENT_NN_PARAMS_HPP
#define TRANSSENT_NN_PARAMS_HPP

#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "transsent/nn/matrix.hpp"
#include "transsent/nn/tape.hpp"

namespace transsent::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;    // accumulated across a step, zeroed by the optimizer
  Matrix adam_m;  // optimizer state lives with the parameter so that
  Matrix adam_v;  // checkpoints can resume exactly
};

// Named parameters in fixed registration order. Order determines both
// serialization layout and RNG draw order at init, so it must be stable.
class ParamStore {
 public:
  ParamStore() = default;
  // moving keeps element addresses valid (deque storage); copying would leave
  // cached Parameter* members pointing at the source, so it is forbidden
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Parameter& add(std::string name, int rows, int cols);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  std::size_t num_scalars() const;
  void zero_grads();

 private:
  std::deque<Parameter> items_;  // deque keeps addresses stable
  std::unordered_map<std::string, Parameter*> by_name_;
};

// Bridges parameters onto a tape. In trainable mode each parameter becomes a
// grad-tracked leaf (registered once, so gradients accumulate across every
// use in the step); in frozen mode it becomes a constant.
class Binding {
 public:
  Binding(Tape& tape, bool trainable) : tape_(tape), trainable_(trainable) {}

  VarId operator()(const Parameter& p);

  // pulls tape gradients into Parameter::grad after backward()
  void read_grads();

  bool trainable() const { return trainable_; }

 private:
  Tape& tape_;
  bool trainable_;
  std::unordered_map<const Parameter*, VarId> ids_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // applies Parameter::grad to every store and zeroes the grads;
  // stores passed together share one time step
  void step(std::vector<ParamStore*> stores);

  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace transsent::nn

#endif  // TRANSSENT_NN_PARAMS_HPP
