#include "transsent/trainer.hpp"

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

constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["lambda_d"] = c.lambda_d;
  j["lambda_r"] = c.lambda_r;
  j["lambda_inv"] = c.lambda_inv;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["cache_representations"] = c.cache_representations;
  j["dropout"] = c.dropout;
  j["decoder"] = {{"hidden", c.decoder.hidden},
                  {"vocab_size", c.decoder.vocab_size},
                  {"repr_dim", c.decoder.repr_dim},
                  {"max_decode_len", c.decoder.max_decode_len},
                  {"dropout", c.decoder.dropout}};
  j["relation"] = {{"repr_dim", c.relation.repr_dim},
                   {"relation_dim", c.relation.relation_dim},
                   {"translation_bias", c.relation.translation_bias},
                   {"ratio_eps", c.relation.ratio_eps}};
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.lambda_d = j.at("lambda_d").get<double>();
  c.lambda_r = j.at("lambda_r").get<double>();
  c.lambda_inv = j.at("lambda_inv").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
  c.cache_representations = j.at("cache_representations").get<bool>();
  c.dropout = j.at("dropout").get<double>();
  const auto& d = j.at("decoder");
  c.decoder.hidden = d.at("hidden").get<int>();
  c.decoder.vocab_size = d.at("vocab_size").get<int>();
  c.decoder.repr_dim = d.at("repr_dim").get<int>();
  c.decoder.max_decode_len = d.at("max_decode_len").get<int>();
  c.decoder.dropout = d.at("dropout").get<double>();
  const auto& r = j.at("relation");
  c.relation.repr_dim = r.at("repr_dim").get<int>();
  c.relation.relation_dim = r.at("relation_dim").get<int>();
  c.relation.translation_bias = r.at("translation_bias").get<bool>();
  c.relation.ratio_eps = r.at("ratio_eps").get<double>();
  return c;
}

nlohmann::json history_to_json(const TrainHistory& h) {
  nlohmann::json j;
  j["steps"] = nlohmann::json::array();
  for (const StepRecord& s : h.steps)
    j["steps"].push_back({{"step", s.step},
                          {"rec", s.rec},
                          {"dis", s.dis},
                          {"ratio", s.ratio},
                          {"inv", s.inv},
                          {"total", s.total}});
  auto summary_json = [](const LossSummary& s) {
    return nlohmann::json{{"rec", s.rec},
                          {"dis", s.dis},
                          {"ratio", s.ratio},
                          {"inv", s.inv},
                          {"total", s.total}};
  };
  j["epochs"] = nlohmann::json::array();
  for (const EpochRecord& e : h.epochs) {
    nlohmann::json ej;
    ej["epoch"] = e.epoch;
    ej["train"] = summary_json(e.train);
    if (e.dev) ej["dev"] = summary_json(*e.dev);
    j["epochs"].push_back(std::move(ej));
  }
  j["best_epoch"] = h.best_epoch;
  j["best_dev_total"] = h.best_dev_total;
  return j;
}

TrainHistory history_from_json(const nlohmann::json& j) {
  TrainHistory h;
  for (const auto& sj : j.at("steps"))
    h.steps.push_back(StepRecord{sj.at("step").get<std::int64_t>(), sj.at("rec").get<double>(),
                                 sj.at("dis").get<double>(), sj.at("ratio").get<double>(),
                                 sj.at("inv").get<double>(), sj.at("total").get<double>()});
  auto summary_from = [](const nlohmann::json& sj) {
    LossSummary s;
    s.rec = sj.at("rec").get<double>();
    s.dis = sj.at("dis").get<double>();
    s.ratio = sj.at("ratio").get<double>();
    s.inv = sj.at("inv").get<double>();
    s.total = sj.at("total").get<double>();
    return s;
  };
  for (const auto& ej : j.at("epochs")) {
    EpochRecord e;
    e.epoch = ej.at("epoch").get<int>();
    e.train = summary_from(ej.at("train"));
    if (ej.contains("dev")) e.dev = summary_from(ej.at("dev"));
    h.epochs.push_back(std::move(e));
  }
  h.best_epoch = j.at("best_epoch").get<int>();
  h.best_dev_total = j.at("best_dev_total").get<double>();
  return h;
}

void check_finite(double v, const char* component) {
  if (!std::isfinite(v))
    throw NumericalError(component,
                         std::string("non-finite value in loss component ") + component);
}

// A triple prepared for the step: frozen-encoder representations plus
// decoder targets ending in EOS.
struct PreparedTriple {
  nn::Matrix z_head;
  nn::Matrix z_tail;
  std::vector<int> head_target;
  std::vector<int> tail_target;
  Marker marker;
};

std::vector<int> make_target(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                             int max_len) {
  std::vector<int> ids = vocab.encode(tokens);
  if (static_cast<int>(ids.size()) > max_len - 1) {
    ids.resize(max_len - 1);
    log_warn("decoder target truncated to fit max_decode_len");
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

PreparedTriple prepare_triple(const DiscourseTriple& t, const FrozenEncoder& encoder,
                              int max_decode_len) {
  PreparedTriple p;
  p.z_head = encoder.represent(t.head);
  p.z_tail = encoder.represent(t.tail);
  p.head_target = make_target(encoder.vocab(), t.head, max_decode_len);
  p.tail_target = make_target(encoder.vocab(), t.tail, max_decode_len);
  p.marker = t.marker;
  return p;
}

struct TripleLossNodes {
  nn::VarId rec;
  nn::VarId dis;
  nn::VarId ratio;
  nn::VarId inv;
  nn::VarId objective;  // rec + lambda_d*dis + lambda_r*ratio (the logged L)
  nn::VarId optimized;  // objective + lambda_inv*inv
};

TripleLossNodes build_triple_loss(nn::Tape& t, nn::Binding& b, const ModelCheckpoint& ckpt,
                                  const PreparedTriple& p, const nn::DropoutCtx& drop) {
  const TrainConfig& cfg = ckpt.config;
  TripleLossNodes nodes{};
  nn::VarId z_h = t.constant(p.z_head);
  nn::VarId z_t = t.constant(p.z_tail);

  nn::VarId nll_h = ckpt.decoder.build_nll(t, b, z_h, p.head_target, drop);
  nn::VarId nll_t = ckpt.decoder.build_nll(t, b, z_t, p.tail_target, drop);
  nodes.rec = t.scale(t.add(nll_h, nll_t), 0.5);

  nn::VarId zh_r = ckpt.relations.build_project(t, b, z_h, p.marker);
  nn::VarId zt_r = ckpt.relations.build_project(t, b, z_t, p.marker);
  nn::VarId translated = ckpt.relations.build_translate(t, b, zh_r, p.marker);
  nodes.dis = build_squared_distance(t, translated, zt_r);
  nodes.ratio = build_ratio_loss(t, translated, zh_r, zt_r, cfg.relation.ratio_eps);

  nn::VarId z_t_star = ckpt.relations.build_invert(t, b, translated, p.marker);
  nodes.inv = build_squared_distance(t, z_t_star, z_t);

  nodes.objective = t.add(
      nodes.rec, t.add(t.scale(nodes.dis, cfg.lambda_d), t.scale(nodes.ratio, cfg.lambda_r)));
  nodes.optimized = t.add(nodes.objective, t.scale(nodes.inv, cfg.lambda_inv));
  return nodes;
}

void save_model_dir(const std::string& dir, const ModelCheckpoint& ckpt, bool with_optimizer) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(ckpt.config);
  j["encoder_dir"] = ckpt.encoder_dir;
  j["vocab_path"] = ckpt.vocab_path;
  j["vocab_hash"] = ckpt.vocab_hash;
  j["epochs_done"] = ckpt.epochs_done;
  j["global_step"] = ckpt.global_step;
  std::ofstream os(dir + "/config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + dir + "/config.json");
  os << j.dump(2) << "\n";
  nn::save_param_store(dir + "/weights.bin", ckpt.decoder.params(), with_optimizer,
                       ckpt.adam.t());
  nn::save_param_store(dir + "/relations.bin", ckpt.relations.params(), with_optimizer,
                       ckpt.adam.t());
  std::ofstream hs(dir + "/history.json", std::ios::trunc);
  if (!hs) throw DataError("cannot write file: " + dir + "/history.json");
  hs << history_to_json(ckpt.history).dump(2) << "\n";
}

}  // namespace

ModelCheckpoint::ModelCheckpoint(TrainConfig cfg, std::uint64_t init_seed)
    : config(cfg),
      decoder(cfg.decoder, nn::derive_seed(init_seed, "decoder.init")),
      relations(cfg.relation, nn::derive_seed(init_seed, "relation.init")) {}

ModelCheckpoint make_checkpoint(TrainConfig cfg, const std::string& encoder_dir,
                                const std::string& vocab_path, std::uint64_t vocab_hash) {
  ModelCheckpoint ckpt(cfg, cfg.seed);
  ckpt.encoder_dir = encoder_dir;
  ckpt.vocab_path = vocab_path;
  ckpt.vocab_hash = vocab_hash;
  return ckpt;
}

void ModelCheckpoint::save(const std::string& dir) const { save_model_dir(dir, *this, true); }

ModelCheckpoint ModelCheckpoint::load(const std::string& dir) {
  std::ifstream is(dir + "/config.json");
  if (!is) throw DataError("cannot open checkpoint: " + dir + "/config.json");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("corrupt checkpoint config: " + dir + "/config.json");
  }
  if (j.value("version", -1) != kCheckpointVersion)
    throw DataError("checkpoint version mismatch in " + dir);
  ModelCheckpoint ckpt(config_from_json(j.at("config")), 0);
  ckpt.encoder_dir = j.at("encoder_dir").get<std::string>();
  ckpt.vocab_path = j.at("vocab_path").get<std::string>();
  ckpt.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
  ckpt.epochs_done = j.at("epochs_done").get<int>();
  ckpt.global_step = j.at("global_step").get<std::int64_t>();
  const std::int64_t adam_t = nn::load_param_store(dir + "/weights.bin", ckpt.decoder.params(), true);
  nn::load_param_store(dir + "/relations.bin", ckpt.relations.params(), true);
  ckpt.adam.set_t(adam_t);
  std::ifstream hs(dir + "/history.json");
  if (!hs) throw DataError("cannot open checkpoint history: " + dir + "/history.json");
  nlohmann::json hj;
  try {
    hs >> hj;
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("corrupt checkpoint history: " + dir + "/history.json");
  }
  ckpt.history = history_from_json(hj);
  return ckpt;
}

LossSummary evaluate_epoch(const std::vector<DiscourseTriple>& dev, const ModelCheckpoint& ckpt,
                           const FrozenEncoder& encoder) {
  if (dev.empty()) throw DataError("evaluation list is empty");
  LossSummary sum;
  for (const DiscourseTriple& triple : dev) {
    const PreparedTriple p =
        prepare_triple(triple, encoder, ckpt.config.decoder.max_decode_len);
    nn::Tape t;
    nn::Binding b(t, false);
    const TripleLossNodes nodes = build_triple_loss(t, b, ckpt, p, {});
    sum.rec += t.val(nodes.rec).at(0, 0);
    sum.dis += t.val(nodes.dis).at(0, 0);
    sum.ratio += t.val(nodes.ratio).at(0, 0);
    sum.inv += t.val(nodes.inv).at(0, 0);
    sum.total += t.val(nodes.objective).at(0, 0);
  }
  const double n = static_cast<double>(dev.size());
  sum.rec /= n;
  sum.dis /= n;
  sum.ratio /= n;
  sum.inv /= n;
  sum.total /= n;
  return sum;
}

void train_transsent(ModelCheckpoint& ckpt, const DatasetSplit& data,
                     const FrozenEncoder& encoder, const std::string& checkpoint_dir) {
  if (data.train.empty()) throw DataError("training split is empty");
  const TrainConfig& cfg = ckpt.config;
  ckpt.adam.set_lr(cfg.lr);
  const int batch = std::max(1, cfg.batch_size);

  // optional precomputation of frozen-encoder representations
  std::vector<PreparedTriple> cache;
  if (cfg.cache_representations) {
    cache.reserve(data.train.size());
    for (const DiscourseTriple& t : data.train)
      cache.push_back(prepare_triple(t, encoder, cfg.decoder.max_decode_len));
  }
  auto prepared = [&](std::size_t idx) {
    return cfg.cache_representations
               ? cache[idx]
               : prepare_triple(data.train[idx], encoder, cfg.decoder.max_decode_len);
  };

  for (int epoch = ckpt.epochs_done; epoch < cfg.epochs; ++epoch) {
    nn::Rng shuffle_rng(nn::derive_seed(cfg.seed, "transsent.shuffle", epoch));
    nn::Rng drop_rng(nn::derive_seed(cfg.seed, "transsent.dropout", epoch));
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    LossSummary epoch_sum;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      nn::Tape t;
      nn::Binding b(t, true);
      nn::DropoutCtx drop{&drop_rng, cfg.dropout};
      std::vector<nn::VarId> optimized;
      StepRecord rec;
      for (std::size_t i = start; i < end; ++i) {
        const PreparedTriple p = prepared(order[i]);
        const TripleLossNodes nodes = build_triple_loss(t, b, ckpt, p, drop);
        optimized.push_back(nodes.optimized);
        rec.rec += t.val(nodes.rec).at(0, 0);
        rec.dis += t.val(nodes.dis).at(0, 0);
        rec.ratio += t.val(nodes.ratio).at(0, 0);
        rec.inv += t.val(nodes.inv).at(0, 0);
        rec.total += t.val(nodes.objective).at(0, 0);
      }
      const double bn = static_cast<double>(end - start);
      rec.rec /= bn;
      rec.dis /= bn;
      rec.ratio /= bn;
      rec.inv /= bn;
      rec.total /= bn;
      check_finite(rec.rec, "L_rec");
      check_finite(rec.dis, "L_dis");
      check_finite(rec.ratio, "L_ratio");
      check_finite(rec.inv, "L_inv");
      check_finite(rec.total, "L");
      rec.step = ckpt.global_step++;
      ckpt.history.steps.push_back(rec);

      epoch_sum.rec += rec.rec * bn;
      epoch_sum.dis += rec.dis * bn;
      epoch_sum.ratio += rec.ratio * bn;
      epoch_sum.inv += rec.inv * bn;
      epoch_sum.total += rec.total * bn;

      t.backward(t.mean_stack(optimized));
      b.read_grads();
      ckpt.adam.step({&ckpt.decoder.params(), &ckpt.relations.params()});
    }

    const double n = static_cast<double>(data.train.size());
    EpochRecord erec;
    erec.epoch = epoch;
    erec.train = LossSummary{epoch_sum.rec / n, epoch_sum.dis / n, epoch_sum.ratio / n,
                             epoch_sum.inv / n, epoch_sum.total / n};
    if (!data.dev.empty()) erec.dev = evaluate_epoch(data.dev, ckpt, encoder);
    ckpt.history.epochs.push_back(erec);
    ckpt.epochs_done = epoch + 1;
    if (erec.dev &&
        (ckpt.history.best_epoch < 0 || erec.dev->total < ckpt.history.best_dev_total)) {
      ckpt.history.best_epoch = epoch;
      ckpt.history.best_dev_total = erec.dev->total;
      if (!checkpoint_dir.empty()) save_model_dir(checkpoint_dir + "/best", ckpt, false);
    }

    if (!checkpoint_dir.empty() && cfg.checkpoint_interval > 0 &&
        ((epoch + 1) % cfg.checkpoint_interval == 0 || epoch + 1 == cfg.epochs))
      ckpt.save(checkpoint_dir);
  }
}

}  // namespace transsent
