#ifndef TRANSSENT_HEADGEN_HPP
#define TRANSSENT_HEADGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "transsent/decoder.hpp"
#include "transsent/nn/lstm.hpp"
#include "transsent/nn/params.hpp"
#include "transsent/vocab.hpp"

namespace transsent {

struct VaeConfig {
  int latent_dim = 16;
  int hidden = 64;
  int max_sample_len = 24;
  double anneal_portion = 0.3;  // linear KL ramp over this fraction of steps
  double word_dropout = 0.25;
  int vocab_size = 0;
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct VaeEpochMetrics {
  int epoch = 0;
  double rec_nll = 0.0;  // mean per-sequence reconstruction NLL (summed over tokens)
  double kl = 0.0;       // mean per-sequence KL
  double beta = 0.0;     // anneal weight at epoch end
};

struct VaeMetrics {
  std::vector<VaeEpochMetrics> epochs;
};

struct LoadedVae;

// Recurrent VAE over head discourses; used to sample novel heads for free
// text generation.
class HeadVae {
 public:
  HeadVae(VaeConfig cfg, std::uint64_t init_seed);

  const VaeConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  struct ElboNodes {
    nn::VarId loss;     // rec_sum + beta * kl
    nn::VarId rec_sum;  // summed over tokens
    nn::VarId kl;
  };

  // tokens: content ids, no BOS/EOS. noise: fixed 1 x latent_dim draw.
  // dropped_inputs: decoder input ids after word dropout (BOS-led, same
  // length as tokens).
  ElboNodes build_elbo(nn::Tape& t, nn::Binding& b, const std::vector<int>& tokens,
                       const nn::Matrix& noise, const std::vector<int>& dropped_inputs,
                       double beta) const;

  // greedy decode from a latent vector (1 x latent_dim)
  DecodeResult decode_latent(const nn::Matrix& z) const;

  // deterministic reconstruction through the posterior mean
  DecodeResult reconstruct(const std::vector<int>& tokens) const;

  // z ~ N(0, I) from the seed, then greedy decode
  DecodeResult sample(std::uint64_t seed) const;

  void save(const std::string& dir, bool with_optimizer_state, std::int64_t adam_t,
            int epochs_done, std::int64_t global_step) const;

  static LoadedVae load(const std::string& dir, bool with_optimizer_state);

 private:
  nn::VarId encode_posterior(nn::Tape& t, nn::Binding& b, const std::vector<int>& tokens,
                             nn::VarId* logvar_out) const;
  nn::LstmState decoder_init(nn::Tape& t, nn::Binding& b, nn::VarId z) const;

  VaeConfig cfg_;
  nn::ParamStore params_;
  nn::Parameter* emb_;
  nn::LstmParams enc_lstm_;
  nn::Parameter *mu_w_, *mu_b_, *lv_w_, *lv_b_;
  nn::Parameter *dec_wh_, *dec_bh_, *dec_wc_, *dec_bc_;
  nn::LstmParams dec_lstm_;
  nn::Parameter *out_w_, *out_b_;
};

struct LoadedVae {
  HeadVae vae;
  std::int64_t adam_t = 0;
  int epochs_done = 0;
  std::int64_t global_step = 0;
};

struct VaeTrainState {
  nn::Adam adam;
  int epochs_done = 0;
  std::int64_t global_step = 0;
  VaeMetrics metrics;
};

// Optimizes reconstruction NLL + annealed KL. Throws DataError when heads is
// empty.
void train_vae(HeadVae& vae, const std::vector<std::vector<int>>& heads, VaeTrainState& state);

}  // namespace transsent

#endif  // TRANSSENT_HEADGEN_HPP
