#ifndef TESTS_SUPPORT_GRAD_CHECK_HPP
#define TESTS_SUPPORT_GRAD_CHECK_HPP

#include <cmath>
#include <string>
#include <vector>

#include "transsent/nn/params.hpp"
#include "transsent/nn/tape.hpp"

namespace test_support {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
};

// Compares tape gradients against central finite differences for every
// scalar in the given stores. `build` must construct the same loss graph on
// every call (any randomness fixed by the caller).
template <typename BuildFn>
GradCheckResult check_gradients(std::vector<transsent::nn::ParamStore*> stores, BuildFn&& build,
                                double fd_step = 1e-5, double tiny_skip = 1e-10) {
  using transsent::nn::Binding;
  using transsent::nn::Parameter;
  using transsent::nn::ParamStore;
  using transsent::nn::Tape;
  using transsent::nn::VarId;

  auto eval_loss = [&]() {
    Tape t;
    Binding b(t, false);
    VarId loss = build(t, b);
    return t.val(loss).at(0, 0);
  };

  for (ParamStore* s : stores) s->zero_grads();
  {
    Tape t;
    Binding b(t, true);
    VarId loss = build(t, b);
    t.backward(loss);
    b.read_grads();
  }

  GradCheckResult result;
  for (ParamStore* s : stores) {
    for (Parameter& p : *s) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double orig = p.value.data()[i];
        p.value.data()[i] = orig + fd_step;
        const double up = eval_loss();
        p.value.data()[i] = orig - fd_step;
        const double down = eval_loss();
        p.value.data()[i] = orig;
        const double fd = (up - down) / (2.0 * fd_step);
        const double an = p.grad.data()[i];
        if (std::fabs(fd) < tiny_skip && std::fabs(an) < tiny_skip) continue;
        const double rel =
            std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-10});
        if (rel > result.max_rel_err) {
          result.max_rel_err = rel;
          result.worst_param = p.name + "[" + std::to_string(i) + "]";
        }
      }
    }
  }
  for (ParamStore* s : stores) s->zero_grads();
  return result;
}

}  // namespace test_support

#endif  // TESTS_SUPPORT_GRAD_CHECK_HPP
