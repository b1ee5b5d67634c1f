#ifndef TRANSSENT_DECODER_HPP
#define TRANSSENT_DECODER_HPP

#include <cstdint>
#include <vector>

#include "transsent/nn/lstm.hpp"
#include "transsent/nn/params.hpp"
#include "transsent/nn/tape.hpp"

namespace transsent {

struct DecoderConfig {
  int hidden = 64;  // recurrent size; embeddings share it
  int vocab_size = 0;
  int repr_dim = 64;        // dimension of the conditioning vector z
  int max_decode_len = 24;  // >= 17 so a 15-word discourse plus BOS/EOS fits
  double dropout = 0.1;

  void validate() const;
};

struct DecodeResult {
  std::vector<int> ids;             // emitted tokens, EOS not included
  std::vector<double> logprobs;     // log p of each emitted step (EOS step included)
  double total_nll = 0.0;
  double mean_nll = 0.0;
  bool terminated = false;  // false when max length was hit without EOS
};

// Unidirectional LSTM decoder conditioned on a discourse representation via
// learned projections to the initial hidden and cell state.
class Decoder {
 public:
  Decoder(DecoderConfig cfg, std::uint64_t init_seed);

  const DecoderConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Mean per-token negative log-likelihood of target under teacher forcing.
  // target must end with EOS; throws DataError when longer than
  // max_decode_len.
  nn::VarId build_nll(nn::Tape& t, nn::Binding& b, nn::VarId z, const std::vector<int>& target,
                      const nn::DropoutCtx& drop) const;

  double teacher_forced_nll(const nn::Matrix& z, const std::vector<int>& target) const;

  // Deterministic argmax decoding from BOS until EOS or max_decode_len.
  DecodeResult greedy_decode(const nn::Matrix& z) const;

 private:
  nn::LstmState build_init_state(nn::Tape& t, nn::Binding& b, nn::VarId z) const;
  nn::VarId step_logits(nn::Tape& t, nn::Binding& b, nn::LstmState& state, int input_id,
                        const nn::DropoutCtx& drop) const;

  DecoderConfig cfg_;
  nn::ParamStore params_;
  nn::Parameter* emb_;
  nn::Parameter *init_wh_, *init_bh_, *init_wc_, *init_bc_;
  nn::LstmParams lstm_;
  nn::Parameter *out_w_, *out_b_;
};

// L_rec: the mean of the two teacher-forced NLLs.
double reconstruction_loss(const Decoder& decoder, const nn::Matrix& z_head,
                           const std::vector<int>& head_target, const nn::Matrix& z_tail,
                           const std::vector<int>& tail_target);

}  // namespace transsent

#endif  // TRANSSENT_DECODER_HPP
