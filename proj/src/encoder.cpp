#include "transsent/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "transsent/errors.hpp"
#include "transsent/log.hpp"
#include "transsent/nn/tensor_io.hpp"

namespace transsent {

namespace {
constexpr double kMaskValue = -1e9;
constexpr double kInitStd = 0.02;
constexpr int kConfigVersion = 1;
}  // namespace

void EncoderConfig::validate() const {
  if (hidden_dim <= 0 || num_heads <= 0 || hidden_dim % num_heads != 0)
    throw UsageError("encoder hidden_dim must be positive and divisible by num_heads");
  if (max_tokens < 17) throw UsageError("encoder max_tokens must be at least 17");
  if (repr_dim <= 0) throw UsageError("encoder repr_dim must be positive");
  if (num_layers <= 0 || ffn_dim <= 0) throw UsageError("encoder layer shape must be positive");
  if (vocab_size <= 0) throw UsageError("encoder vocab_size must be positive");
}

Encoder::Encoder(EncoderConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  const int h = cfg_.hidden_dim;
  const int n = cfg_.max_tokens;
  const int f = cfg_.ffn_dim;
  const int k = cfg_.repr_dim;

  tok_emb_ = &params_.add("tok_emb", cfg_.vocab_size + 1, h);  // extra row: [SEP]
  pos_emb_ = &params_.add("pos_emb", n, h);
  seg_emb_ = &params_.add("seg_emb", 2, h);
  layers_.resize(cfg_.num_layers);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerParams& lp = layers_[l];
    lp.ln1_g = &params_.add(pre + "ln1.g", 1, h);
    lp.ln1_b = &params_.add(pre + "ln1.b", 1, h);
    lp.wq = &params_.add(pre + "attn.wq", h, h);
    lp.bq = &params_.add(pre + "attn.bq", 1, h);
    lp.wk = &params_.add(pre + "attn.wk", h, h);
    lp.bk = &params_.add(pre + "attn.bk", 1, h);
    lp.wv = &params_.add(pre + "attn.wv", h, h);
    lp.bv = &params_.add(pre + "attn.bv", 1, h);
    lp.wo = &params_.add(pre + "attn.wo", h, h);
    lp.bo = &params_.add(pre + "attn.bo", 1, h);
    lp.ln2_g = &params_.add(pre + "ln2.g", 1, h);
    lp.ln2_b = &params_.add(pre + "ln2.b", 1, h);
    lp.w1 = &params_.add(pre + "ffn.w1", h, f);
    lp.b1 = &params_.add(pre + "ffn.b1", 1, f);
    lp.w2 = &params_.add(pre + "ffn.w2", f, h);
    lp.b2 = &params_.add(pre + "ffn.b2", 1, h);
  }
  lnf_g_ = &params_.add("lnf.g", 1, h);
  lnf_b_ = &params_.add("lnf.b", 1, h);
  proj_w_ = &params_.add("proj.w", n * h, k);
  proj_b_ = &params_.add("proj.b", 1, k);
  cls_w_ = &params_.add("cls.w", k, kNumMarkers);
  cls_b_ = &params_.add("cls.b", 1, kNumMarkers);

  nn::Rng rng(init_seed);
  for (nn::Parameter& p : params_) {
    const bool is_gain = p.name.ends_with("ln1.g") || p.name.ends_with("ln2.g") ||
                         p.name.ends_with("lnf.g");
    const bool is_bias = p.name.ends_with(".b") || p.name.ends_with(".bq") ||
                         p.name.ends_with(".bk") || p.name.ends_with(".bv") ||
                         p.name.ends_with(".bo") || p.name.ends_with(".b1") ||
                         p.name.ends_with(".b2");
    if (is_gain) {
      p.value.fill(1.0);
    } else if (is_bias) {
      p.value.fill(0.0);
    } else {
      p.value = nn::Matrix::randn(p.value.rows(), p.value.cols(), kInitStd, rng);
    }
  }
}

EncodedInput Encoder::make_single_input(const std::vector<int>& ids) const {
  if (ids.empty()) throw DataError("cannot encode an empty discourse");
  const int n = cfg_.max_tokens;
  EncodedInput in;
  std::vector<int> body = ids;
  if (static_cast<int>(body.size()) > n - 2) {
    body.resize(n - 2);
    in.truncated = true;
    log_warn("discourse longer than encoder window; truncated to " + std::to_string(n - 2) +
             " tokens");
  }
  in.ids.push_back(Vocabulary::kBos);
  for (int id : body) in.ids.push_back(id);
  in.ids.push_back(Vocabulary::kEos);
  in.segments.assign(in.ids.size(), 0);
  in.key_mask = nn::Matrix(1, n, 0.0);
  for (int i = static_cast<int>(in.ids.size()); i < n; ++i) in.key_mask.at(0, i) = kMaskValue;
  in.ids.resize(n, Vocabulary::kPad);
  in.segments.resize(n, 0);
  return in;
}

EncodedInput Encoder::make_pair_input(const std::vector<int>& head_ids,
                                      const std::vector<int>& tail_ids) const {
  if (head_ids.empty() || tail_ids.empty())
    throw DataError("cannot encode an empty discourse pair");
  const int n = cfg_.max_tokens;
  const int budget = n - 3;  // BOS, SEP, EOS
  int nh = static_cast<int>(head_ids.size());
  int nt = static_cast<int>(tail_ids.size());
  EncodedInput in;
  if (nh + nt > budget) {
    in.truncated = true;
    nt = std::max(1, std::min(nt, budget - std::min(nh, budget - 1)));
    nh = std::min(nh, budget - nt);
    log_warn("discourse pair longer than encoder window; truncated");
  }
  in.ids.push_back(Vocabulary::kBos);
  for (int i = 0; i < nh; ++i) in.ids.push_back(head_ids[i]);
  in.ids.push_back(sep_id());
  const int seg_boundary = static_cast<int>(in.ids.size());  // tail starts here
  for (int i = 0; i < nt; ++i) in.ids.push_back(tail_ids[i]);
  in.ids.push_back(Vocabulary::kEos);

  in.segments.assign(in.ids.size(), 0);
  for (int i = seg_boundary; i < static_cast<int>(in.segments.size()); ++i) in.segments[i] = 1;
  in.key_mask = nn::Matrix(1, n, 0.0);
  for (int i = static_cast<int>(in.ids.size()); i < n; ++i) in.key_mask.at(0, i) = kMaskValue;
  in.ids.resize(n, Vocabulary::kPad);
  in.segments.resize(n, 0);
  return in;
}

nn::VarId Encoder::build_token_reprs(nn::Tape& t, nn::Binding& b, const EncodedInput& in,
                                     const nn::DropoutCtx& drop) const {
  const int h = cfg_.hidden_dim;
  const int heads = cfg_.num_heads;
  const int dh = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  nn::VarId x = t.add(t.gather_rows(b(*tok_emb_), in.ids), b(*pos_emb_));
  x = t.add(x, t.gather_rows(b(*seg_emb_), in.segments));
  x = nn::maybe_dropout(t, x, drop);
  const nn::VarId mask = t.constant(in.key_mask);

  for (const LayerParams& lp : layers_) {
    nn::VarId a = t.layer_norm(x, b(*lp.ln1_g), b(*lp.ln1_b));
    nn::VarId q = t.add_row(t.matmul(a, b(*lp.wq)), b(*lp.bq));
    nn::VarId k = t.add_row(t.matmul(a, b(*lp.wk)), b(*lp.bk));
    nn::VarId v = t.add_row(t.matmul(a, b(*lp.wv)), b(*lp.bv));
    std::vector<nn::VarId> head_ctx;
    head_ctx.reserve(heads);
    for (int j = 0; j < heads; ++j) {
      nn::VarId qj = t.slice_cols(q, j * dh, dh);
      nn::VarId kj = t.slice_cols(k, j * dh, dh);
      nn::VarId vj = t.slice_cols(v, j * dh, dh);
      nn::VarId scores = t.scale(t.matmul(qj, t.transpose(kj)), scale);
      scores = t.add_row(scores, mask);
      nn::VarId attn = t.softmax_rows(scores);
      head_ctx.push_back(t.matmul(attn, vj));
    }
    nn::VarId ctx = t.concat_cols(head_ctx);
    nn::VarId attn_out = t.add_row(t.matmul(ctx, b(*lp.wo)), b(*lp.bo));
    attn_out = nn::maybe_dropout(t, attn_out, drop);
    x = t.add(x, attn_out);

    nn::VarId f = t.layer_norm(x, b(*lp.ln2_g), b(*lp.ln2_b));
    f = t.relu(t.add_row(t.matmul(f, b(*lp.w1)), b(*lp.b1)));
    f = t.add_row(t.matmul(f, b(*lp.w2)), b(*lp.b2));
    f = nn::maybe_dropout(t, f, drop);
    x = t.add(x, f);
  }
  return t.layer_norm(x, b(*lnf_g_), b(*lnf_b_));
}

nn::VarId Encoder::build_repr(nn::Tape& t, nn::Binding& b, const EncodedInput& in,
                              const nn::DropoutCtx& drop) const {
  nn::VarId tokens = build_token_reprs(t, b, in, drop);
  nn::VarId flat = t.reshape(tokens, 1, cfg_.max_tokens * cfg_.hidden_dim);
  return t.relu(t.add_row(t.matmul(flat, b(*proj_w_)), b(*proj_b_)));
}

nn::VarId Encoder::build_dmp_logits(nn::Tape& t, nn::Binding& b, const EncodedInput& in,
                                    const nn::DropoutCtx& drop) const {
  nn::VarId z = build_repr(t, b, in, drop);
  return t.add_row(t.matmul(z, b(*cls_w_)), b(*cls_b_));
}

nn::Matrix Encoder::token_representations(const std::vector<int>& ids) const {
  nn::Tape t;
  nn::Binding b(t, false);
  return t.val(build_token_reprs(t, b, make_single_input(ids), {}));
}

nn::Matrix Encoder::represent_ids(const std::vector<int>& ids) const {
  nn::Tape t;
  nn::Binding b(t, false);
  return t.val(build_repr(t, b, make_single_input(ids), {}));
}

DmpDistribution Encoder::classify_ids(const std::vector<int>& head_ids,
                                      const std::vector<int>& tail_ids) const {
  nn::Tape t;
  nn::Binding b(t, false);
  nn::VarId logits = t.softmax_rows(build_dmp_logits(t, b, make_pair_input(head_ids, tail_ids), {}));
  DmpDistribution dist{};
  for (int j = 0; j < kNumMarkers; ++j) dist[j] = t.val(logits).at(0, j);
  return dist;
}

void Encoder::save(const std::string& dir, const std::string& vocab_path,
                   std::uint64_t vocab_hash, bool with_optimizer_state, std::int64_t adam_t,
                   int epochs_done) const {
  std::filesystem::create_directories(dir);
  nlohmann::json cfg;
  cfg["version"] = kConfigVersion;
  cfg["num_layers"] = cfg_.num_layers;
  cfg["num_heads"] = cfg_.num_heads;
  cfg["hidden_dim"] = cfg_.hidden_dim;
  cfg["ffn_dim"] = cfg_.ffn_dim;
  cfg["max_tokens"] = cfg_.max_tokens;
  cfg["repr_dim"] = cfg_.repr_dim;
  cfg["dropout"] = cfg_.dropout;
  cfg["vocab_size"] = cfg_.vocab_size;
  cfg["vocab_path"] = vocab_path;
  cfg["vocab_hash"] = vocab_hash;
  cfg["epochs_done"] = epochs_done;
  std::ofstream os(dir + "/config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + dir + "/config.json");
  os << cfg.dump(2) << "\n";
  nn::save_param_store(dir + "/weights.bin", params_, with_optimizer_state, adam_t);
}

LoadedEncoder Encoder::load(const std::string& dir, bool with_optimizer_state) {
  std::ifstream is(dir + "/config.json");
  if (!is) throw DataError("cannot open encoder checkpoint: " + dir + "/config.json");
  nlohmann::json cfg;
  try {
    is >> cfg;
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("corrupt encoder config: " + dir + "/config.json");
  }
  if (cfg.value("version", -1) != kConfigVersion)
    throw DataError("encoder checkpoint version mismatch in " + dir);
  EncoderConfig c;
  c.num_layers = cfg.at("num_layers").get<int>();
  c.num_heads = cfg.at("num_heads").get<int>();
  c.hidden_dim = cfg.at("hidden_dim").get<int>();
  c.ffn_dim = cfg.at("ffn_dim").get<int>();
  c.max_tokens = cfg.at("max_tokens").get<int>();
  c.repr_dim = cfg.at("repr_dim").get<int>();
  c.dropout = cfg.at("dropout").get<double>();
  c.vocab_size = cfg.at("vocab_size").get<int>();
  Encoder enc(c, 0);
  const std::int64_t adam_t =
      nn::load_param_store(dir + "/weights.bin", enc.params_, with_optimizer_state);
  return LoadedEncoder{std::move(enc), cfg.at("vocab_path").get<std::string>(),
                cfg.at("vocab_hash").get<std::uint64_t>(), adam_t,
                cfg.value("epochs_done", 0)};
}

nn::Matrix FrozenEncoder::represent(const std::vector<std::string>& discourse) const {
  if (discourse.empty()) throw DataError("cannot represent an empty discourse");
  return encoder_.represent_ids(vocab_.encode(discourse));
}

DmpDistribution FrozenEncoder::classify_pair(const std::vector<std::string>& head,
                                             const std::vector<std::string>& tail) const {
  return encoder_.classify_ids(vocab_.encode(head), vocab_.encode(tail));
}

Marker FrozenEncoder::classify_argmax(const std::vector<std::string>& head,
                                      const std::vector<std::string>& tail) const {
  const DmpDistribution dist = classify_pair(head, tail);
  int best = 0;
  for (int j = 1; j < kNumMarkers; ++j)
    if (dist[j] > dist[best]) best = j;  // strict: ties keep enumeration order
  return kAllMarkers[best];
}

FrozenEncoder FrozenEncoder::load(const std::string& dir) {
  LoadedEncoder loaded = Encoder::load(dir, false);
  Vocabulary vocab = Vocabulary::load(loaded.vocab_path);
  if (vocab.content_hash() != loaded.vocab_hash)
    throw DataError("vocabulary file " + loaded.vocab_path +
                    " does not match the one this encoder was trained with");
  return FrozenEncoder(std::move(loaded.encoder), std::move(vocab));
}

FrozenEncoder freeze(Encoder encoder, Vocabulary vocab) {
  return FrozenEncoder(std::move(encoder), std::move(vocab));
}

namespace {

struct DmpExample {
  std::vector<int> head;
  std::vector<int> tail;
  int label;
};

double eval_dmp(const Encoder& enc, const std::vector<DmpExample>& examples, double* acc_out) {
  double loss = 0.0;
  int correct = 0;
  for (const DmpExample& ex : examples) {
    nn::Tape t;
    nn::Binding b(t, false);
    nn::VarId logits = enc.build_dmp_logits(t, b, enc.make_pair_input(ex.head, ex.tail), {});
    nn::VarId nll = t.cross_entropy(logits, ex.label);
    loss += t.val(nll).at(0, 0);
    const nn::Matrix& lv = t.val(logits);
    int best = 0;
    for (int j = 1; j < kNumMarkers; ++j)
      if (lv.at(0, j) > lv.at(0, best)) best = j;
    if (best == ex.label) ++correct;
  }
  if (acc_out)
    *acc_out = examples.empty() ? 0.0 : static_cast<double>(correct) / examples.size();
  return examples.empty() ? 0.0 : loss / examples.size();
}

}  // namespace

void train_dmp(Encoder& encoder, const Vocabulary& vocab, const DatasetSplit& data,
               const DmpTrainOptions& opt, DmpTrainState& state) {
  if (data.train.empty()) throw DataError("DMP training split is empty");

  auto encode_all = [&](const std::vector<DiscourseTriple>& triples) {
    std::vector<DmpExample> out;
    out.reserve(triples.size());
    for (const DiscourseTriple& t : triples)
      out.push_back(DmpExample{vocab.encode(t.head), vocab.encode(t.tail),
                               static_cast<int>(t.marker)});
    return out;
  };
  const std::vector<DmpExample> train = encode_all(data.train);
  const std::vector<DmpExample> dev = encode_all(data.dev);

  state.adam.set_lr(opt.lr);
  const int batch = std::max(1, opt.batch_size);

  for (int epoch = state.epochs_done; epoch < opt.epochs; ++epoch) {
    nn::Rng shuffle_rng(nn::derive_seed(opt.seed, "dmp.shuffle", epoch));
    nn::Rng drop_rng(nn::derive_seed(opt.seed, "dmp.dropout", epoch));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      nn::Tape t;
      nn::Binding b(t, true);
      nn::DropoutCtx drop{&drop_rng, encoder.config().dropout};
      std::vector<nn::VarId> losses;
      losses.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const DmpExample& ex = train[order[i]];
        nn::VarId logits =
            encoder.build_dmp_logits(t, b, encoder.make_pair_input(ex.head, ex.tail), drop);
        losses.push_back(t.cross_entropy(logits, ex.label));
        loss_sum += t.val(losses.back()).at(0, 0);
        const nn::Matrix& lv = t.val(logits);
        int best = 0;
        for (int j = 1; j < kNumMarkers; ++j)
          if (lv.at(0, j) > lv.at(0, best)) best = j;
        if (best == ex.label) ++correct;
      }
      t.backward(t.mean_stack(losses));
      b.read_grads();
      state.adam.step({&encoder.params()});
    }

    DmpEpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    if (!dev.empty()) m.dev_loss = eval_dmp(encoder, dev, &m.dev_acc);
    state.metrics.epochs.push_back(m);
    state.epochs_done = epoch + 1;

    if (opt.early_stop_train_acc > 0.0 && m.train_acc >= opt.early_stop_train_acc) break;
  }

  // flag runs whose train loss never moved down early on
  const auto& eps = state.metrics.epochs;
  if (eps.size() >= 5 && state.metrics.warning.empty()) {
    bool non_decreasing = true;
    for (int i = 0; i < 4; ++i)
      // shuffle order perturbs the sum in the last bits; require a real drop
      if (eps[i + 1].train_loss < eps[i].train_loss - 1e-9 * std::abs(eps[i].train_loss)) {
        non_decreasing = false;
        break;
      }
    if (non_decreasing)
      state.metrics.warning = "train loss non-decreasing over the first 5 epochs";
  }
}

}  // namespace transsent
