#include "transsent/decoder.hpp"

#include <cmath>

#include "transsent/errors.hpp"
#include "transsent/vocab.hpp"

namespace transsent {

void DecoderConfig::validate() const {
  if (hidden <= 0 || repr_dim <= 0) throw UsageError("decoder dims must be positive");
  if (vocab_size <= 0) throw UsageError("decoder vocab_size must be positive");
  if (max_decode_len < 17) throw UsageError("decoder max_decode_len must be at least 17");
}

Decoder::Decoder(DecoderConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  const int h = cfg_.hidden;
  const int k = cfg_.repr_dim;
  nn::Rng rng(init_seed);
  const double emb_std = 0.02;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));

  emb_ = &params_.add("emb", cfg_.vocab_size, h);
  emb_->value = nn::Matrix::randn(cfg_.vocab_size, h, emb_std, rng);
  init_wh_ = &params_.add("init.wh", k, h);
  init_wh_->value = nn::Matrix::rand_uniform(k, h, bound, rng);
  init_bh_ = &params_.add("init.bh", 1, h);
  init_wc_ = &params_.add("init.wc", k, h);
  init_wc_->value = nn::Matrix::rand_uniform(k, h, bound, rng);
  init_bc_ = &params_.add("init.bc", 1, h);
  lstm_ = nn::add_lstm(params_, "lstm", h, h, rng);
  out_w_ = &params_.add("out.w", h, cfg_.vocab_size);
  out_w_->value = nn::Matrix::rand_uniform(h, cfg_.vocab_size, bound, rng);
  out_b_ = &params_.add("out.b", 1, cfg_.vocab_size);
}

nn::LstmState Decoder::build_init_state(nn::Tape& t, nn::Binding& b, nn::VarId z) const {
  nn::VarId h0 = t.tanh_op(t.add_row(t.matmul(z, b(*init_wh_)), b(*init_bh_)));
  nn::VarId c0 = t.tanh_op(t.add_row(t.matmul(z, b(*init_wc_)), b(*init_bc_)));
  return nn::LstmState{h0, c0};
}

nn::VarId Decoder::step_logits(nn::Tape& t, nn::Binding& b, nn::LstmState& state, int input_id,
                               const nn::DropoutCtx& drop) const {
  nn::VarId x = t.gather_rows(b(*emb_), {input_id});
  x = nn::maybe_dropout(t, x, drop);
  state = nn::lstm_step(t, b, lstm_, x, state);
  return t.add_row(t.matmul(state.h, b(*out_w_)), b(*out_b_));
}

nn::VarId Decoder::build_nll(nn::Tape& t, nn::Binding& b, nn::VarId z,
                             const std::vector<int>& target, const nn::DropoutCtx& drop) const {
  if (target.empty()) throw DataError("decoder target is empty");
  if (static_cast<int>(target.size()) > cfg_.max_decode_len)
    throw DataError("decoder target longer than max_decode_len (" +
                    std::to_string(target.size()) + " > " +
                    std::to_string(cfg_.max_decode_len) + ")");
  nn::LstmState state = build_init_state(t, b, z);
  std::vector<nn::VarId> step_nll;
  step_nll.reserve(target.size());
  int input_id = Vocabulary::kBos;
  for (int token : target) {
    nn::VarId logits = step_logits(t, b, state, input_id, drop);
    step_nll.push_back(t.cross_entropy(logits, token));
    input_id = token;
  }
  return t.mean_stack(step_nll);
}

double Decoder::teacher_forced_nll(const nn::Matrix& z, const std::vector<int>& target) const {
  nn::Tape t;
  nn::Binding b(t, false);
  return t.val(build_nll(t, b, t.constant(z), target, {})).at(0, 0);
}

DecodeResult Decoder::greedy_decode(const nn::Matrix& z) const {
  nn::Tape t;
  nn::Binding b(t, false);
  nn::LstmState state = build_init_state(t, b, t.constant(z));
  DecodeResult result;
  int input_id = Vocabulary::kBos;
  for (int step = 0; step < cfg_.max_decode_len; ++step) {
    nn::VarId logits = step_logits(t, b, state, input_id, {});
    const nn::Matrix& lv = t.val(logits);
    int best = 0;
    double mx = lv.at(0, 0);
    for (int j = 1; j < cfg_.vocab_size; ++j)
      if (lv.at(0, j) > mx) {
        mx = lv.at(0, j);
        best = j;
      }
    double lse = 0.0;
    for (int j = 0; j < cfg_.vocab_size; ++j) lse += std::exp(lv.at(0, j) - mx);
    const double logprob = -std::log(lse);  // log p(best) = best_logit - (mx + log sum)
    result.logprobs.push_back(logprob);
    result.total_nll -= logprob;
    if (best == Vocabulary::kEos) {
      result.terminated = true;
      break;
    }
    result.ids.push_back(best);
    input_id = best;
  }
  result.mean_nll =
      result.logprobs.empty() ? 0.0 : result.total_nll / static_cast<double>(result.logprobs.size());
  return result;
}

double reconstruction_loss(const Decoder& decoder, const nn::Matrix& z_head,
                           const std::vector<int>& head_target, const nn::Matrix& z_tail,
                           const std::vector<int>& tail_target) {
  return 0.5 * (decoder.teacher_forced_nll(z_head, head_target) +
                decoder.teacher_forced_nll(z_tail, tail_target));
}

}  // namespace transsent
