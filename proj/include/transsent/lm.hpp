#ifndef TRANSSENT_LM_HPP
#define TRANSSENT_LM_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "transsent/nn/lstm.hpp"
#include "transsent/nn/params.hpp"
#include "transsent/vocab.hpp"

namespace transsent {

struct LmConfig {
  int hidden = 64;
  int vocab_size = 0;
  int max_len = 48;
  int epochs = 10;
  double lr = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LmEpochMetrics {
  int epoch = 0;
  double train_nll = 0.0;  // per token
};

struct LmMetrics {
  std::vector<LmEpochMetrics> epochs;
};

struct LoadedLm;

// Small autoregressive LSTM language model used as the fluency judge:
// it scores sentences by mean per-token NLL, and PPL = exp(NLL).
class LanguageModel {
 public:
  LanguageModel(LmConfig cfg, std::uint64_t init_seed);

  const LmConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  nn::VarId build_nll_mean(nn::Tape& t, nn::Binding& b, const std::vector<int>& ids) const;

  // total NLL and token count (EOS included) for one sentence
  std::pair<double, int> score_ids(const std::vector<int>& ids) const;

  void save(const std::string& dir, bool with_optimizer_state, std::int64_t adam_t,
            int epochs_done, std::uint64_t vocab_hash) const;

  static LoadedLm load(const std::string& dir, bool with_optimizer_state);

 private:
  LmConfig cfg_;
  nn::ParamStore params_;
  nn::Parameter* emb_;
  nn::LstmParams lstm_;
  nn::Parameter *out_w_, *out_b_;
};

struct LoadedLm {
  LanguageModel lm;
  std::int64_t adam_t = 0;
  int epochs_done = 0;
  std::uint64_t vocab_hash = 0;
};

struct LmTrainState {
  nn::Adam adam;
  int epochs_done = 0;
  LmMetrics metrics;
};

void train_lm(LanguageModel& lm, const std::vector<std::vector<int>>& sentences,
              LmTrainState& state);

}  // namespace transsent

#endif  // TRANSSENT_LM_HPP
