#include "transsent/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace transsent::nn {

Parameter& ParamStore::add(std::string name, int rows, int cols) {
  if (by_name_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  items_.push_back(Parameter{name, Matrix::zeros(rows, cols), Matrix::zeros(rows, cols),
                             Matrix::zeros(rows, cols), Matrix::zeros(rows, cols)});
  Parameter& p = items_.back();
  by_name_[p.name] = &p;
  return p;
}

Parameter* ParamStore::find(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const Parameter& p : items_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (Parameter& p : items_) p.grad.fill(0.0);
}

VarId Binding::operator()(const Parameter& p) {
  auto it = ids_.find(&p);
  if (it != ids_.end()) return it->second;
  VarId id = trainable_ ? tape_.leaf(p.value) : tape_.constant(p.value);
  ids_.emplace(&p, id);
  return id;
}

void Binding::read_grads() {
  if (!trainable_) return;
  for (auto& [p, id] : ids_) {
    const Matrix& g = tape_.grad(id);
    if (g.empty()) continue;  // parameter did not reach the loss
    const_cast<Parameter*>(p)->grad.add_(g);
  }
}

void Adam::step(std::vector<ParamStore*> stores) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (ParamStore* store : stores) {
    for (Parameter& p : *store) {
      double* w = p.value.data();
      double* g = p.grad.data();
      double* m = p.adam_m.data();
      double* v = p.adam_v.data();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      p.grad.fill(0.0);
    }
  }
}

}  // namespace transsent::nn
