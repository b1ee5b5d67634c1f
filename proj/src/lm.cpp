#include "transsent/lm.hpp"

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

void LmConfig::validate() const {
  if (hidden <= 0) throw UsageError("lm hidden must be positive");
  if (vocab_size <= 0) throw UsageError("lm vocab_size must be positive");
  if (max_len < 4) throw UsageError("lm max_len too small");
}

LanguageModel::LanguageModel(LmConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  const int h = cfg_.hidden;
  nn::Rng rng(init_seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  emb_ = &params_.add("emb", cfg_.vocab_size, h);
  emb_->value = nn::Matrix::randn(cfg_.vocab_size, h, 0.02, rng);
  lstm_ = nn::add_lstm(params_, "lstm", h, h, rng);
  out_w_ = &params_.add("out.w", h, cfg_.vocab_size);
  out_w_->value = nn::Matrix::rand_uniform(h, cfg_.vocab_size, bound, rng);
  out_b_ = &params_.add("out.b", 1, cfg_.vocab_size);
}

nn::VarId LanguageModel::build_nll_mean(nn::Tape& t, nn::Binding& b,
                                        const std::vector<int>& ids) const {
  if (ids.empty()) throw DataError("cannot score an empty sentence");
  std::vector<int> body = ids;
  if (static_cast<int>(body.size()) > cfg_.max_len - 1) body.resize(cfg_.max_len - 1);
  std::vector<int> targets = body;
  targets.push_back(Vocabulary::kEos);

  nn::LstmState state{t.constant(nn::Matrix(1, cfg_.hidden)),
                      t.constant(nn::Matrix(1, cfg_.hidden))};
  std::vector<nn::VarId> step_nll;
  step_nll.reserve(targets.size());
  int input_id = Vocabulary::kBos;
  for (int target : targets) {
    nn::VarId x = t.gather_rows(b(*emb_), {input_id});
    state = nn::lstm_step(t, b, lstm_, x, state);
    nn::VarId logits = t.add_row(t.matmul(state.h, b(*out_w_)), b(*out_b_));
    step_nll.push_back(t.cross_entropy(logits, target));
    input_id = target;
  }
  return t.mean_stack(step_nll);
}

std::pair<double, int> LanguageModel::score_ids(const std::vector<int>& ids) const {
  nn::Tape t;
  nn::Binding b(t, false);
  nn::VarId mean_nll = build_nll_mean(t, b, ids);
  const int count = std::min(static_cast<int>(ids.size()), cfg_.max_len - 1) + 1;
  return {t.val(mean_nll).at(0, 0) * count, count};
}

void LanguageModel::save(const std::string& dir, bool with_optimizer_state, std::int64_t adam_t,
                         int epochs_done, std::uint64_t vocab_hash) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["version"] = kConfigVersion;
  j["hidden"] = cfg_.hidden;
  j["vocab_size"] = cfg_.vocab_size;
  j["max_len"] = cfg_.max_len;
  j["epochs"] = cfg_.epochs;
  j["lr"] = cfg_.lr;
  j["batch_size"] = cfg_.batch_size;
  j["seed"] = cfg_.seed;
  j["epochs_done"] = epochs_done;
  j["vocab_hash"] = vocab_hash;
  std::ofstream os(dir + "/config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + dir + "/config.json");
  os << j.dump(2) << "\n";
  nn::save_param_store(dir + "/weights.bin", params_, with_optimizer_state, adam_t);
}

LoadedLm LanguageModel::load(const std::string& dir, bool with_optimizer_state) {
  std::ifstream is(dir + "/config.json");
  if (!is) throw DataError("cannot open lm checkpoint: " + dir + "/config.json");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("corrupt lm config: " + dir + "/config.json");
  }
  if (j.value("version", -1) != kConfigVersion)
    throw DataError("lm checkpoint version mismatch in " + dir);
  LmConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  LanguageModel lm(c, 0);
  const std::int64_t adam_t =
      nn::load_param_store(dir + "/weights.bin", lm.params_, with_optimizer_state);
  return LoadedLm{std::move(lm), adam_t, j.value("epochs_done", 0),
                j.value("vocab_hash", std::uint64_t{0})};
}

void train_lm(LanguageModel& lm, const std::vector<std::vector<int>>& sentences,
              LmTrainState& state) {
  if (sentences.empty()) throw DataError("LM training corpus is empty");
  const LmConfig& cfg = lm.config();
  state.adam.set_lr(cfg.lr);
  const int batch = std::max(1, cfg.batch_size);

  for (int epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    nn::Rng shuffle_rng(nn::derive_seed(cfg.seed, "lm.shuffle", epoch));
    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    double nll_sum = 0.0;
    std::int64_t token_count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      nn::Tape t;
      nn::Binding b(t, true);
      std::vector<nn::VarId> losses;
      for (std::size_t i = start; i < end; ++i) {
        const std::vector<int>& ids = sentences[order[i]];
        nn::VarId mean_nll = lm.build_nll_mean(t, b, ids);
        losses.push_back(mean_nll);
        const int count = std::min(static_cast<int>(ids.size()), cfg.max_len - 1) + 1;
        nll_sum += t.val(mean_nll).at(0, 0) * count;
        token_count += count;
      }
      t.backward(t.mean_stack(losses));
      b.read_grads();
      state.adam.step({&lm.params()});
    }

    LmEpochMetrics m;
    m.epoch = epoch;
    m.train_nll = token_count > 0 ? nll_sum / static_cast<double>(token_count) : 0.0;
    state.metrics.epochs.push_back(m);
    state.epochs_done = epoch + 1;
  }
}

}  // namespace transsent
