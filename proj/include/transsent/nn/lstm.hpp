#ifndef TRANSSENT_NN_LSTM_HPP
#define TRANSSENT_NN_LSTM_HPP

#include <string>

#include "transsent/nn/params.hpp"
#include "transsent/nn/tape.hpp"

namespace transsent::nn {

// Single LSTM cell, gate order [input, forget, cell, output].
struct LstmParams {
  Parameter* wx;  // input_dim x 4H
  Parameter* wh;  // H x 4H
  Parameter* b;   // 1 x 4H
  int hidden = 0;
};

struct LstmState {
  VarId h;
  VarId c;
};

// Registers parameters and initializes them uniform(-1/sqrt(H), 1/sqrt(H)),
// forget-gate bias set to 1.
LstmParams add_lstm(ParamStore& store, const std::string& prefix, int input_dim, int hidden,
                    Rng& rng);

LstmState lstm_step(Tape& t, Binding& b, const LstmParams& p, VarId x, const LstmState& prev);

}  // namespace transsent::nn

#endif  // TRANSSENT_NN_LSTM_HPP
