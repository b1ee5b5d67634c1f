#include "transsent/headgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "transsent/errors.hpp"
#include "transsent/nn/tensor_io.hpp"

namespace transsent {

namespace {
constexpr int kConfigVersion = 1;
}

void VaeConfig::validate() const {
  if (latent_dim <= 0 || hidden <= 0) throw UsageError("vae dims must be positive");
  if (vocab_size <= 0) throw UsageError("vae vocab_size must be positive");
  if (anneal_portion < 0.0 || anneal_portion > 1.0)
    throw UsageError("vae anneal_portion must be in [0, 1]");
  if (word_dropout < 0.0 || word_dropout >= 1.0)
    throw UsageError("vae word_dropout must be in [0, 1)");
}

HeadVae::HeadVae(VaeConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  const int h = cfg_.hidden;
  const int L = cfg_.latent_dim;
  nn::Rng rng(init_seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));

  emb_ = &params_.add("emb", cfg_.vocab_size, h);
  emb_->value = nn::Matrix::randn(cfg_.vocab_size, h, 0.02, rng);
  enc_lstm_ = nn::add_lstm(params_, "enc.lstm", h, h, rng);
  mu_w_ = &params_.add("post.mu.w", h, L);
  mu_w_->value = nn::Matrix::rand_uniform(h, L, bound, rng);
  mu_b_ = &params_.add("post.mu.b", 1, L);
  lv_w_ = &params_.add("post.lv.w", h, L);
  lv_w_->value = nn::Matrix::rand_uniform(h, L, bound, rng);
  lv_b_ = &params_.add("post.lv.b", 1, L);
  dec_wh_ = &params_.add("dec.init.wh", L, h);
  dec_wh_->value = nn::Matrix::rand_uniform(L, h, bound, rng);
  dec_bh_ = &params_.add("dec.init.bh", 1, h);
  dec_wc_ = &params_.add("dec.init.wc", L, h);
  dec_wc_->value = nn::Matrix::rand_uniform(L, h, bound, rng);
  dec_bc_ = &params_.add("dec.init.bc", 1, h);
  dec_lstm_ = nn::add_lstm(params_, "dec.lstm", h, h, rng);
  out_w_ = &params_.add("out.w", h, cfg_.vocab_size);
  out_w_->value = nn::Matrix::rand_uniform(h, cfg_.vocab_size, bound, rng);
  out_b_ = &params_.add("out.b", 1, cfg_.vocab_size);
}

nn::VarId HeadVae::encode_posterior(nn::Tape& t, nn::Binding& b, const std::vector<int>& tokens,
                                    nn::VarId* logvar_out) const {
  nn::LstmState state{t.constant(nn::Matrix(1, cfg_.hidden)),
                      t.constant(nn::Matrix(1, cfg_.hidden))};
  for (int id : tokens) {
    nn::VarId x = t.gather_rows(b(*emb_), {id});
    state = nn::lstm_step(t, b, enc_lstm_, x, state);
  }
  nn::VarId mu = t.add_row(t.matmul(state.h, b(*mu_w_)), b(*mu_b_));
  if (logvar_out) *logvar_out = t.add_row(t.matmul(state.h, b(*lv_w_)), b(*lv_b_));
  return mu;
}

nn::LstmState HeadVae::decoder_init(nn::Tape& t, nn::Binding& b, nn::VarId z) const {
  nn::VarId h0 = t.tanh_op(t.add_row(t.matmul(z, b(*dec_wh_)), b(*dec_bh_)));
  nn::VarId c0 = t.tanh_op(t.add_row(t.matmul(z, b(*dec_wc_)), b(*dec_bc_)));
  return nn::LstmState{h0, c0};
}

HeadVae::ElboNodes HeadVae::build_elbo(nn::Tape& t, nn::Binding& b,
                                       const std::vector<int>& tokens, const nn::Matrix& noise,
                                       const std::vector<int>& dropped_inputs,
                                       double beta) const {
  if (tokens.empty()) throw DataError("vae example is empty");
  nn::VarId logvar = 0;
  nn::VarId mu = encode_posterior(t, b, tokens, &logvar);

  // z = mu + exp(logvar / 2) * eps
  nn::VarId sigma = t.exp_op(t.scale(logvar, 0.5));
  nn::VarId z = t.add(mu, t.mul(sigma, t.constant(noise)));

  // KL(q || N(0, I)) = 0.5 * sum(mu^2 + exp(lv) - lv - 1)
  nn::VarId kl_terms =
      t.add_scalar(t.sub(t.add(t.mul(mu, mu), t.exp_op(logvar)), logvar), -1.0);
  nn::VarId kl = t.scale(t.sum(kl_terms), 0.5);

  nn::LstmState state = decoder_init(t, b, z);
  std::vector<int> targets = tokens;
  targets.push_back(Vocabulary::kEos);
  std::vector<nn::VarId> step_nll;
  step_nll.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int input_id = i == 0 ? Vocabulary::kBos : dropped_inputs[i - 1];
    nn::VarId x = t.gather_rows(b(*emb_), {input_id});
    state = nn::lstm_step(t, b, dec_lstm_, x, state);
    nn::VarId logits = t.add_row(t.matmul(state.h, b(*out_w_)), b(*out_b_));
    step_nll.push_back(t.cross_entropy(logits, targets[i]));
  }
  nn::VarId rec_sum =
      t.scale(t.mean_stack(step_nll), static_cast<double>(step_nll.size()));

  ElboNodes nodes;
  nodes.rec_sum = rec_sum;
  nodes.kl = kl;
  nodes.loss = t.add(rec_sum, t.scale(kl, beta));
  return nodes;
}

DecodeResult HeadVae::decode_latent(const nn::Matrix& z) const {
  nn::Tape t;
  nn::Binding b(t, false);
  nn::LstmState state = decoder_init(t, b, t.constant(z));
  DecodeResult result;
  int input_id = Vocabulary::kBos;
  for (int step = 0; step < cfg_.max_sample_len; ++step) {
    nn::VarId x = t.gather_rows(b(*emb_), {input_id});
    state = nn::lstm_step(t, b, dec_lstm_, x, state);
    nn::VarId logits = t.add_row(t.matmul(state.h, b(*out_w_)), b(*out_b_));
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
    const double logprob = -std::log(lse);
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

DecodeResult HeadVae::reconstruct(const std::vector<int>& tokens) const {
  nn::Tape t;
  nn::Binding b(t, false);
  nn::VarId mu = encode_posterior(t, b, tokens, nullptr);
  return decode_latent(t.val(mu));
}

DecodeResult HeadVae::sample(std::uint64_t seed) const {
  nn::Rng rng(seed);
  nn::Matrix z(1, cfg_.latent_dim);
  for (int i = 0; i < cfg_.latent_dim; ++i) z.at(0, i) = rng.normal();
  return decode_latent(z);
}

void HeadVae::save(const std::string& dir, bool with_optimizer_state, std::int64_t adam_t,
                   int epochs_done, std::int64_t global_step) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["version"] = kConfigVersion;
  j["latent_dim"] = cfg_.latent_dim;
  j["hidden"] = cfg_.hidden;
  j["max_sample_len"] = cfg_.max_sample_len;
  j["anneal_portion"] = cfg_.anneal_portion;
  j["word_dropout"] = cfg_.word_dropout;
  j["vocab_size"] = cfg_.vocab_size;
  j["epochs"] = cfg_.epochs;
  j["lr"] = cfg_.lr;
  j["batch_size"] = cfg_.batch_size;
  j["seed"] = cfg_.seed;
  j["epochs_done"] = epochs_done;
  j["global_step"] = global_step;
  std::ofstream os(dir + "/config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + dir + "/config.json");
  os << j.dump(2) << "\n";
  nn::save_param_store(dir + "/weights.bin", params_, with_optimizer_state, adam_t);
}

LoadedVae HeadVae::load(const std::string& dir, bool with_optimizer_state) {
  std::ifstream is(dir + "/config.json");
  if (!is) throw DataError("cannot open vae checkpoint: " + dir + "/config.json");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("corrupt vae config: " + dir + "/config.json");
  }
  if (j.value("version", -1) != kConfigVersion)
    throw DataError("vae checkpoint version mismatch in " + dir);
  VaeConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.max_sample_len = j.at("max_sample_len").get<int>();
  c.anneal_portion = j.at("anneal_portion").get<double>();
  c.word_dropout = j.at("word_dropout").get<double>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  HeadVae vae(c, 0);
  const std::int64_t adam_t =
      nn::load_param_store(dir + "/weights.bin", vae.params_, with_optimizer_state);
  return LoadedVae{std::move(vae), adam_t, j.value("epochs_done", 0),
                j.value("global_step", std::int64_t{0})};
}

void train_vae(HeadVae& vae, const std::vector<std::vector<int>>& heads, VaeTrainState& state) {
  if (heads.empty()) throw DataError("VAE training corpus is empty");
  const VaeConfig& cfg = vae.config();
  state.adam.set_lr(cfg.lr);
  const int batch = std::max(1, cfg.batch_size);
  const std::int64_t steps_per_epoch =
      static_cast<std::int64_t>((heads.size() + batch - 1) / batch);
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  const double anneal_steps =
      std::max(1.0, cfg.anneal_portion * static_cast<double>(total_steps));

  for (int epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    nn::Rng shuffle_rng(nn::derive_seed(cfg.seed, "vae.shuffle", epoch));
    nn::Rng noise_rng(nn::derive_seed(cfg.seed, "vae.noise", epoch));
    nn::Rng drop_rng(nn::derive_seed(cfg.seed, "vae.worddrop", epoch));
    std::vector<std::size_t> order(heads.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    double rec_sum = 0.0, kl_sum = 0.0, beta = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      beta = std::min(1.0, static_cast<double>(state.global_step) / anneal_steps);
      nn::Tape t;
      nn::Binding b(t, true);
      std::vector<nn::VarId> losses;
      for (std::size_t i = start; i < end; ++i) {
        const std::vector<int>& tokens = heads[order[i]];
        nn::Matrix noise(1, cfg.latent_dim);
        for (int d = 0; d < cfg.latent_dim; ++d) noise.at(0, d) = noise_rng.normal();
        std::vector<int> dropped = tokens;
        for (int& id : dropped)
          if (drop_rng.bernoulli(cfg.word_dropout)) id = Vocabulary::kUnk;
        HeadVae::ElboNodes nodes = vae.build_elbo(t, b, tokens, noise, dropped, beta);
        losses.push_back(nodes.loss);
        rec_sum += t.val(nodes.rec_sum).at(0, 0);
        kl_sum += t.val(nodes.kl).at(0, 0);
      }
      t.backward(t.mean_stack(losses));
      b.read_grads();
      state.adam.step({&vae.params()});
      ++state.global_step;
    }

    VaeEpochMetrics m;
    m.epoch = epoch;
    m.rec_nll = rec_sum / static_cast<double>(heads.size());
    m.kl = kl_sum / static_cast<double>(heads.size());
    m.beta = beta;
    state.metrics.epochs.push_back(m);
    state.epochs_done = epoch + 1;
  }
}

}  // namespace transsent
