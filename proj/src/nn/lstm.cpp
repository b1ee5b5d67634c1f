#include "transsent/nn/lstm.hpp"

#include <cmath>

namespace transsent::nn {

LstmParams add_lstm(ParamStore& store, const std::string& prefix, int input_dim, int hidden,
                    Rng& rng) {
  LstmParams p;
  p.hidden = hidden;
  p.wx = &store.add(prefix + ".wx", input_dim, 4 * hidden);
  p.wh = &store.add(prefix + ".wh", hidden, 4 * hidden);
  p.b = &store.add(prefix + ".b", 1, 4 * hidden);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.wx->value = Matrix::rand_uniform(input_dim, 4 * hidden, bound, rng);
  p.wh->value = Matrix::rand_uniform(hidden, 4 * hidden, bound, rng);
  for (int j = hidden; j < 2 * hidden; ++j) p.b->value.at(0, j) = 1.0;  // forget gate
  return p;
}

LstmState lstm_step(Tape& t, Binding& b, const LstmParams& p, VarId x, const LstmState& prev) {
  const int h = p.hidden;
  VarId gates = t.add(t.matmul(x, b(*p.wx)), t.matmul(prev.h, b(*p.wh)));
  gates = t.add_row(gates, b(*p.b));
  VarId gi = t.sigmoid(t.slice_cols(gates, 0, h));
  VarId gf = t.sigmoid(t.slice_cols(gates, h, h));
  VarId gg = t.tanh_op(t.slice_cols(gates, 2 * h, h));
  VarId go = t.sigmoid(t.slice_cols(gates, 3 * h, h));
  VarId c = t.add(t.mul(gf, prev.c), t.mul(gi, gg));
  VarId hs = t.mul(go, t.tanh_op(c));
  return LstmState{hs, c};
}

}  // namespace transsent::nn
