#include "transsent/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "transsent/corpus.hpp"
#include "transsent/decoder.hpp"
#include "transsent/encoder.hpp"
#include "transsent/errors.hpp"
#include "transsent/headgen.hpp"
#include "transsent/lm.hpp"
#include "transsent/log.hpp"
#include "transsent/nn/tensor_io.hpp"
#include "transsent/pipeline.hpp"
#include "transsent/trainer.hpp"
#include "transsent/vocab.hpp"

namespace transsent::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string default_out_dir(const std::string& subcommand) {
  const char* env = std::getenv("TRANSSENT_RUN_DIR");
  const std::string base = env && *env ? env : "runs";
  return base + "/" + subcommand;
}

void write_effective_config(const std::string& out_dir, const json& cfg) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir + "/effective_config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + out_dir + "/effective_config.json");
  os << cfg.dump(2) << "\n";
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw DataError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError("config file " + path + " must hold a JSON object");
  return j;
}

// Flag > config file > default.
template <typename T>
void resolve(const CLI::Option* opt, const json& cfg, const char* key, T& value) {
  if (opt != nullptr && opt->count() > 0) return;  // flag already wrote the value
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

struct DataDir {
  DatasetSplit split;
  Vocabulary vocab;
  std::string vocab_path;
  std::uint64_t vocab_hash;
};

DataDir load_data_dir(const std::string& dir) {
  DataDir d;
  d.split.train = read_triples_jsonl(dir + "/train.jsonl");
  d.split.dev = read_triples_jsonl(dir + "/dev.jsonl");
  d.split.test = read_triples_jsonl(dir + "/test.jsonl");
  d.vocab_path = dir + "/vocab.txt";
  d.vocab = Vocabulary::load(d.vocab_path);
  d.vocab_hash = d.vocab.content_hash();
  return d;
}

json stats_to_json(const ExtractionStats& s) {
  json j;
  j["sentences_seen"] = s.sentences_seen;
  j["no_marker"] = s.no_marker;
  j["multi_marker"] = s.multi_marker;
  j["unparseable"] = s.unparseable;
  j["emitted"] = s.emitted;
  j["duplicates_removed"] = s.duplicates_removed;
  j["length_filtered"] = s.length_filtered;
  j["per_marker"] = s.per_marker;
  return j;
}

// ---------------------------------------------------------------- extract
int cmd_extract(const std::vector<std::string>& inputs, std::string out_dir,
                const std::string& config_path, CLI::App* sub) {
  const json cfg = load_config_file(config_path);
  std::vector<std::string> input_paths = inputs;
  std::uint64_t seed = 0;
  double train_ratio = 0.8, dev_ratio = 0.1, test_ratio = 0.1;
  int min_count = 1;
  resolve(sub->get_option_no_throw("--seed"), cfg, "seed", seed);
  resolve(sub->get_option_no_throw("--train-ratio"), cfg, "train_ratio", train_ratio);
  resolve(sub->get_option_no_throw("--dev-ratio"), cfg, "dev_ratio", dev_ratio);
  resolve(sub->get_option_no_throw("--test-ratio"), cfg, "test_ratio", test_ratio);
  resolve(sub->get_option_no_throw("--min-count"), cfg, "min_count", min_count);
  if (input_paths.empty() && cfg.contains("inputs"))
    input_paths = cfg.at("inputs").get<std::vector<std::string>>();
  if (out_dir.empty() && cfg.contains("out")) out_dir = cfg.at("out").get<std::string>();
  if (out_dir.empty()) out_dir = default_out_dir("extract");
  if (input_paths.empty()) throw UsageError("extract requires at least one --input path");

  // deterministic merge order: sort by source path, offsets are in-file order
  std::vector<std::string> sorted_inputs = input_paths;
  std::sort(sorted_inputs.begin(), sorted_inputs.end());

  ExtractionStats stats;
  std::vector<DiscourseTriple> triples;
  for (const std::string& path : sorted_inputs) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open input file: " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    ExtractResult result = extract_triples(buffer.str(), path);
    stats.merge(result.stats);
    for (DiscourseTriple& t : result.triples) triples.push_back(std::move(t));
  }
  stats.duplicates_removed = dedupe_triples(triples);

  std::vector<DiscourseTriple> kept;
  for (DiscourseTriple& t : triples) {
    if (filter_by_length(t))
      kept.push_back(std::move(t));
    else
      ++stats.length_filtered;
  }

  DatasetSplit split = balance_and_split(std::move(kept), {train_ratio, dev_ratio, test_ratio},
                                         seed);
  fs::create_directories(out_dir);
  write_triples_jsonl(out_dir + "/train.jsonl", split.train);
  write_triples_jsonl(out_dir + "/dev.jsonl", split.dev);
  write_triples_jsonl(out_dir + "/test.jsonl", split.test);
  Vocabulary vocab = Vocabulary::build(split.train, min_count);
  vocab.save(out_dir + "/vocab.txt");

  std::ofstream ss(out_dir + "/stats.json", std::ios::trunc);
  if (!ss) throw DataError("cannot write file: " + out_dir + "/stats.json");
  ss << stats_to_json(stats).dump(2) << "\n";

  json eff;
  eff["command"] = "extract";
  eff["inputs"] = sorted_inputs;
  eff["out"] = out_dir;
  eff["seed"] = seed;
  eff["train_ratio"] = train_ratio;
  eff["dev_ratio"] = dev_ratio;
  eff["test_ratio"] = test_ratio;
  eff["min_count"] = min_count;
  write_effective_config(out_dir, eff);

  std::cout << "extract: " << split.train.size() << " train / " << split.dev.size() << " dev / "
            << split.test.size() << " test triples, |V| = " << vocab.size() << "\n";
  return 0;
}

// --------------------------------------------------------------- train-dmp
int cmd_train_dmp(std::string data_dir, std::string out_dir, const std::string& config_path,
                  bool resume, CLI::App* sub) {
  const json cfg = load_config_file(config_path);
  EncoderConfig enc_cfg;
  DmpTrainOptions opt;
  std::uint64_t seed = 0;
  resolve(sub->get_option_no_throw("--data"), cfg, "data", data_dir);
  resolve(sub->get_option_no_throw("--out"), cfg, "out", out_dir);
  resolve(sub->get_option_no_throw("--layers"), cfg, "num_layers", enc_cfg.num_layers);
  resolve(sub->get_option_no_throw("--heads"), cfg, "num_heads", enc_cfg.num_heads);
  resolve(sub->get_option_no_throw("--hidden"), cfg, "hidden_dim", enc_cfg.hidden_dim);
  resolve(sub->get_option_no_throw("--ffn"), cfg, "ffn_dim", enc_cfg.ffn_dim);
  resolve(sub->get_option_no_throw("--max-tokens"), cfg, "max_tokens", enc_cfg.max_tokens);
  resolve(sub->get_option_no_throw("--repr-dim"), cfg, "repr_dim", enc_cfg.repr_dim);
  resolve(sub->get_option_no_throw("--dropout"), cfg, "dropout", enc_cfg.dropout);
  resolve(sub->get_option_no_throw("--epochs"), cfg, "epochs", opt.epochs);
  resolve(sub->get_option_no_throw("--lr"), cfg, "lr", opt.lr);
  resolve(sub->get_option_no_throw("--batch-size"), cfg, "batch_size", opt.batch_size);
  resolve(sub->get_option_no_throw("--early-stop-acc"), cfg, "early_stop_train_acc",
          opt.early_stop_train_acc);
  resolve(sub->get_option_no_throw("--seed"), cfg, "seed", seed);
  if (data_dir.empty()) throw UsageError("train-dmp requires --data");
  if (out_dir.empty()) out_dir = default_out_dir("train-dmp");
  opt.seed = nn::derive_seed(seed, "dmp");

  DataDir data = load_data_dir(data_dir);
  enc_cfg.vocab_size = data.vocab.size();

  DmpTrainState state;
  std::optional<Encoder> encoder;
  if (resume) {
    LoadedEncoder loaded = Encoder::load(out_dir, true);
    if (loaded.vocab_hash != data.vocab_hash)
      throw DataError("vocabulary in " + data_dir + " does not match checkpoint " + out_dir);
    encoder.emplace(std::move(loaded.encoder));
    state.adam.set_t(loaded.adam_t);
    state.epochs_done = loaded.epochs_done;
    std::ifstream ms(out_dir + "/metrics.json");
    if (ms) {
      json mj;
      ms >> mj;
      for (const auto& ej : mj.at("epochs"))
        state.metrics.epochs.push_back(DmpEpochMetrics{
            ej.at("epoch").get<int>(), ej.at("train_loss").get<double>(),
            ej.at("train_acc").get<double>(), ej.at("dev_loss").get<double>(),
            ej.at("dev_acc").get<double>()});
      state.metrics.warning = mj.value("warning", "");
    }
  } else {
    encoder.emplace(enc_cfg, nn::derive_seed(seed, "encoder.init"));
  }

  train_dmp(*encoder, data.vocab, data.split, opt, state);

  encoder->save(out_dir, data.vocab_path, data.vocab_hash, true, state.adam.t(),
                state.epochs_done);
  json mj;
  mj["epochs"] = json::array();
  for (const DmpEpochMetrics& e : state.metrics.epochs)
    mj["epochs"].push_back({{"epoch", e.epoch},
                            {"train_loss", e.train_loss},
                            {"train_acc", e.train_acc},
                            {"dev_loss", e.dev_loss},
                            {"dev_acc", e.dev_acc}});
  if (!state.metrics.warning.empty()) mj["warning"] = state.metrics.warning;
  std::ofstream ms(out_dir + "/metrics.json", std::ios::trunc);
  if (!ms) throw DataError("cannot write file: " + out_dir + "/metrics.json");
  ms << mj.dump(2) << "\n";

  json eff;
  eff["command"] = "train-dmp";
  eff["data"] = data_dir;
  eff["out"] = out_dir;
  eff["seed"] = seed;
  eff["num_layers"] = enc_cfg.num_layers;
  eff["num_heads"] = enc_cfg.num_heads;
  eff["hidden_dim"] = enc_cfg.hidden_dim;
  eff["ffn_dim"] = enc_cfg.ffn_dim;
  eff["max_tokens"] = enc_cfg.max_tokens;
  eff["repr_dim"] = enc_cfg.repr_dim;
  eff["dropout"] = enc_cfg.dropout;
  eff["epochs"] = opt.epochs;
  eff["lr"] = opt.lr;
  eff["batch_size"] = opt.batch_size;
  eff["early_stop_train_acc"] = opt.early_stop_train_acc;
  write_effective_config(out_dir, eff);

  if (!state.metrics.epochs.empty()) {
    const DmpEpochMetrics& last = state.metrics.epochs.back();
    std::cout << "train-dmp: epoch " << last.epoch << " train_acc " << last.train_acc
              << " dev_acc " << last.dev_acc << "\n";
  }
  if (!state.metrics.warning.empty()) log_warn(state.metrics.warning);
  return 0;
}

// --------------------------------------------------------- train-transsent
int cmd_train_transsent(std::string data_dir, std::string encoder_dir, std::string out_dir,
                        const std::string& config_path, bool resume, CLI::App* sub) {
  const json cfg = load_config_file(config_path);
  TrainConfig tc;
  resolve(sub->get_option_no_throw("--data"), cfg, "data", data_dir);
  resolve(sub->get_option_no_throw("--encoder"), cfg, "encoder", encoder_dir);
  resolve(sub->get_option_no_throw("--out"), cfg, "out", out_dir);
  resolve(sub->get_option_no_throw("--epochs"), cfg, "epochs", tc.epochs);
  resolve(sub->get_option_no_throw("--lr"), cfg, "lr", tc.lr);
  resolve(sub->get_option_no_throw("--lambda-d"), cfg, "lambda_d", tc.lambda_d);
  resolve(sub->get_option_no_throw("--lambda-r"), cfg, "lambda_r", tc.lambda_r);
  resolve(sub->get_option_no_throw("--lambda-inv"), cfg, "lambda_inv", tc.lambda_inv);
  resolve(sub->get_option_no_throw("--batch-size"), cfg, "batch_size", tc.batch_size);
  resolve(sub->get_option_no_throw("--seed"), cfg, "seed", tc.seed);
  resolve(sub->get_option_no_throw("--ckpt-interval"), cfg, "checkpoint_interval",
          tc.checkpoint_interval);
  resolve(sub->get_option_no_throw("--cache-reps"), cfg, "cache_representations",
          tc.cache_representations);
  resolve(sub->get_option_no_throw("--dropout"), cfg, "dropout", tc.dropout);
  resolve(sub->get_option_no_throw("--decoder-hidden"), cfg, "decoder_hidden", tc.decoder.hidden);
  resolve(sub->get_option_no_throw("--max-decode-len"), cfg, "max_decode_len",
          tc.decoder.max_decode_len);
  resolve(sub->get_option_no_throw("--relation-dim"), cfg, "relation_dim",
          tc.relation.relation_dim);
  resolve(sub->get_option_no_throw("--ratio-eps"), cfg, "ratio_eps", tc.relation.ratio_eps);
  bool no_translation_bias = false;
  resolve(sub->get_option_no_throw("--no-translation-bias"), cfg, "no_translation_bias",
          no_translation_bias);
  tc.relation.translation_bias = !no_translation_bias;
  if (data_dir.empty()) throw UsageError("train-transsent requires --data");
  if (encoder_dir.empty()) throw UsageError("train-transsent requires --encoder");
  if (out_dir.empty()) out_dir = default_out_dir("train-transsent");

  DataDir data = load_data_dir(data_dir);
  FrozenEncoder encoder = FrozenEncoder::load(encoder_dir);
  if (encoder.vocab().content_hash() != data.vocab_hash)
    throw DataError("vocabulary in " + data_dir + " does not match encoder " + encoder_dir);
  tc.decoder.vocab_size = data.vocab.size();
  tc.decoder.repr_dim = encoder.encoder().config().repr_dim;
  tc.decoder.dropout = tc.dropout;
  tc.relation.repr_dim = encoder.encoder().config().repr_dim;

  std::optional<ModelCheckpoint> ckpt;
  if (resume) {
    ckpt.emplace(ModelCheckpoint::load(out_dir));
    if (ckpt->vocab_hash != data.vocab_hash)
      throw DataError("vocabulary in " + data_dir + " does not match checkpoint " + out_dir);
    ckpt->config.epochs = tc.epochs;  // allow extending a finished run
  } else {
    ckpt.emplace(make_checkpoint(tc, encoder_dir, data.vocab_path, data.vocab_hash));
  }

  train_transsent(*ckpt, data.split, encoder, out_dir);

  json eff;
  eff["command"] = "train-transsent";
  eff["data"] = data_dir;
  eff["encoder"] = encoder_dir;
  eff["out"] = out_dir;
  eff["epochs"] = tc.epochs;
  eff["lr"] = tc.lr;
  eff["lambda_d"] = tc.lambda_d;
  eff["lambda_r"] = tc.lambda_r;
  eff["lambda_inv"] = tc.lambda_inv;
  eff["batch_size"] = tc.batch_size;
  eff["seed"] = tc.seed;
  eff["checkpoint_interval"] = tc.checkpoint_interval;
  eff["cache_representations"] = tc.cache_representations;
  eff["dropout"] = tc.dropout;
  eff["decoder_hidden"] = tc.decoder.hidden;
  eff["max_decode_len"] = tc.decoder.max_decode_len;
  eff["relation_dim"] = tc.relation.relation_dim;
  eff["ratio_eps"] = tc.relation.ratio_eps;
  eff["no_translation_bias"] = no_translation_bias;
  write_effective_config(out_dir, eff);

  if (!ckpt->history.epochs.empty()) {
    const EpochRecord& last = ckpt->history.epochs.back();
    std::cout << "train-transsent: epoch " << last.epoch << " L " << last.train.total;
    if (last.dev) std::cout << " dev L " << last.dev->total;
    std::cout << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- train-vae
int cmd_train_vae(std::string data_dir, std::string out_dir, const std::string& config_path,
                  bool resume, CLI::App* sub) {
  const json cfg = load_config_file(config_path);
  VaeConfig vc;
  std::uint64_t seed = 0;
  resolve(sub->get_option_no_throw("--data"), cfg, "data", data_dir);
  resolve(sub->get_option_no_throw("--out"), cfg, "out", out_dir);
  resolve(sub->get_option_no_throw("--latent"), cfg, "latent_dim", vc.latent_dim);
  resolve(sub->get_option_no_throw("--hidden"), cfg, "hidden", vc.hidden);
  resolve(sub->get_option_no_throw("--epochs"), cfg, "epochs", vc.epochs);
  resolve(sub->get_option_no_throw("--lr"), cfg, "lr", vc.lr);
  resolve(sub->get_option_no_throw("--batch-size"), cfg, "batch_size", vc.batch_size);
  resolve(sub->get_option_no_throw("--word-dropout"), cfg, "word_dropout", vc.word_dropout);
  resolve(sub->get_option_no_throw("--anneal-portion"), cfg, "anneal_portion", vc.anneal_portion);
  resolve(sub->get_option_no_throw("--max-sample-len"), cfg, "max_sample_len", vc.max_sample_len);
  resolve(sub->get_option_no_throw("--seed"), cfg, "seed", seed);
  if (data_dir.empty()) throw UsageError("train-vae requires --data");
  if (out_dir.empty()) out_dir = default_out_dir("train-vae");
  vc.seed = nn::derive_seed(seed, "vae");

  DataDir data = load_data_dir(data_dir);
  vc.vocab_size = data.vocab.size();
  std::vector<std::vector<int>> heads;
  heads.reserve(data.split.train.size());
  for (const DiscourseTriple& t : data.split.train) heads.push_back(data.vocab.encode(t.head));

  VaeTrainState state;
  std::optional<HeadVae> vae;
  if (resume) {
    LoadedVae loaded = HeadVae::load(out_dir, true);
    vae.emplace(std::move(loaded.vae));
    state.adam.set_t(loaded.adam_t);
    state.epochs_done = loaded.epochs_done;
    state.global_step = loaded.global_step;
  } else {
    vae.emplace(vc, nn::derive_seed(seed, "vae.init"));
  }

  train_vae(*vae, heads, state);
  vae->save(out_dir, true, state.adam.t(), state.epochs_done, state.global_step);

  json mj;
  mj["epochs"] = json::array();
  for (const VaeEpochMetrics& e : state.metrics.epochs)
    mj["epochs"].push_back(
        {{"epoch", e.epoch}, {"rec_nll", e.rec_nll}, {"kl", e.kl}, {"beta", e.beta}});
  std::ofstream ms(out_dir + "/metrics.json", std::ios::trunc);
  if (!ms) throw DataError("cannot write file: " + out_dir + "/metrics.json");
  ms << mj.dump(2) << "\n";

  json eff;
  eff["command"] = "train-vae";
  eff["data"] = data_dir;
  eff["out"] = out_dir;
  eff["seed"] = seed;
  eff["latent_dim"] = vc.latent_dim;
  eff["hidden"] = vc.hidden;
  eff["epochs"] = vc.epochs;
  eff["lr"] = vc.lr;
  eff["batch_size"] = vc.batch_size;
  eff["word_dropout"] = vc.word_dropout;
  eff["anneal_portion"] = vc.anneal_portion;
  eff["max_sample_len"] = vc.max_sample_len;
  write_effective_config(out_dir, eff);

  if (!state.metrics.epochs.empty()) {
    const VaeEpochMetrics& last = state.metrics.epochs.back();
    std::cout << "train-vae: epoch " << last.epoch << " rec " << last.rec_nll << " kl "
              << last.kl << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- train-lm
int cmd_train_lm(std::string data_dir, std::string out_dir, const std::string& config_path,
                 bool resume, CLI::App* sub) {
  const json cfg = load_config_file(config_path);
  LmConfig lc;
  std::uint64_t seed = 0;
  resolve(sub->get_option_no_throw("--data"), cfg, "data", data_dir);
  resolve(sub->get_option_no_throw("--out"), cfg, "out", out_dir);
  resolve(sub->get_option_no_throw("--hidden"), cfg, "hidden", lc.hidden);
  resolve(sub->get_option_no_throw("--epochs"), cfg, "epochs", lc.epochs);
  resolve(sub->get_option_no_throw("--lr"), cfg, "lr", lc.lr);
  resolve(sub->get_option_no_throw("--batch-size"), cfg, "batch_size", lc.batch_size);
  resolve(sub->get_option_no_throw("--max-len"), cfg, "max_len", lc.max_len);
  resolve(sub->get_option_no_throw("--seed"), cfg, "seed", seed);
  if (data_dir.empty()) throw UsageError("train-lm requires --data");
  if (out_dir.empty()) out_dir = default_out_dir("train-lm");
  lc.seed = nn::derive_seed(seed, "lm");

  DataDir data = load_data_dir(data_dir);
  lc.vocab_size = data.vocab.size();
  // the LM learns full structured sentences: head marker tail
  std::vector<std::vector<int>> sentences;
  sentences.reserve(data.split.train.size());
  for (const DiscourseTriple& t : data.split.train) {
    std::vector<int> ids = data.vocab.encode(t.head);
    ids.push_back(data.vocab.id(marker_name(t.marker)));
    const std::vector<int> tail = data.vocab.encode(t.tail);
    ids.insert(ids.end(), tail.begin(), tail.end());
    sentences.push_back(std::move(ids));
  }

  LmTrainState state;
  std::optional<LanguageModel> lm;
  if (resume) {
    LoadedLm loaded = LanguageModel::load(out_dir, true);
    if (loaded.vocab_hash != data.vocab_hash)
      throw DataError("vocabulary in " + data_dir + " does not match checkpoint " + out_dir);
    lm.emplace(std::move(loaded.lm));
    state.adam.set_t(loaded.adam_t);
    state.epochs_done = loaded.epochs_done;
  } else {
    lm.emplace(lc, nn::derive_seed(seed, "lm.init"));
  }

  train_lm(*lm, sentences, state);
  lm->save(out_dir, true, state.adam.t(), state.epochs_done, data.vocab_hash);

  json mj;
  mj["epochs"] = json::array();
  for (const LmEpochMetrics& e : state.metrics.epochs)
    mj["epochs"].push_back({{"epoch", e.epoch}, {"train_nll", e.train_nll}});
  std::ofstream ms(out_dir + "/metrics.json", std::ios::trunc);
  if (!ms) throw DataError("cannot write file: " + out_dir + "/metrics.json");
  ms << mj.dump(2) << "\n";

  json eff;
  eff["command"] = "train-lm";
  eff["data"] = data_dir;
  eff["out"] = out_dir;
  eff["seed"] = seed;
  eff["hidden"] = lc.hidden;
  eff["epochs"] = lc.epochs;
  eff["lr"] = lc.lr;
  eff["batch_size"] = lc.batch_size;
  eff["max_len"] = lc.max_len;
  write_effective_config(out_dir, eff);

  if (!state.metrics.epochs.empty())
    std::cout << "train-lm: epoch " << state.metrics.epochs.back().epoch << " nll "
              << state.metrics.epochs.back().train_nll << "\n";
  return 0;
}

// ----------------------------------------------------------------- generate
int cmd_generate(const std::string& mode, const std::string& ckpt_dir, std::string encoder_dir,
                 const std::string& vae_dir, const std::string& input_path,
                 const std::string& head_text, const std::string& marker_name_arg, int count,
                 std::uint64_t seed, std::string out_path) {
  if (mode != "transfer" && mode != "free")
    throw UsageError("generate --mode must be \"transfer\" or \"free\"");
  if (ckpt_dir.empty()) throw UsageError("generate requires --checkpoint");
  if (out_path.empty()) out_path = default_out_dir("generate") + "/generated.jsonl";
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? "."
                             : fs::path(out_path).parent_path().string());

  ModelCheckpoint ckpt = ModelCheckpoint::load(ckpt_dir);
  if (encoder_dir.empty()) encoder_dir = ckpt.encoder_dir;
  FrozenEncoder encoder = FrozenEncoder::load(encoder_dir);
  if (encoder.vocab().content_hash() != ckpt.vocab_hash)
    throw DataError("encoder " + encoder_dir + " and checkpoint " + ckpt_dir +
                    " use different vocabularies");

  std::vector<GeneratedSentence> out;
  if (mode == "transfer") {
    std::vector<std::pair<std::vector<std::string>, Marker>> requests;
    if (!head_text.empty()) {
      if (marker_name_arg.empty()) throw UsageError("--head requires --marker");
      requests.emplace_back(tokenize(head_text), parse_marker_or_throw(marker_name_arg));
    }
    if (!input_path.empty()) {
      std::ifstream is(input_path);
      if (!is) throw DataError("cannot open input file: " + input_path);
      std::string line;
      int line_no = 0;
      while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
          obj = json::parse(line);
        } catch (const json::parse_error&) {
          throw DataError(input_path + ":" + std::to_string(line_no) + ": malformed JSON line");
        }
        if (!obj.contains("head") || !obj.contains("marker"))
          throw DataError(input_path + ":" + std::to_string(line_no) +
                          ": line is missing head/marker");
        requests.emplace_back(tokenize(obj["head"].get<std::string>()),
                              parse_marker_or_throw(obj["marker"].get<std::string>()));
      }
    }
    if (requests.empty())
      throw UsageError("transfer mode needs --head/--marker or --input");
    for (const auto& [head, marker] : requests)
      out.push_back(discourse_transfer(head, marker, ckpt, encoder));
  } else {
    if (vae_dir.empty()) throw UsageError("free mode requires --vae");
    if (count <= 0) throw UsageError("free mode requires --count > 0");
    LoadedVae vae = HeadVae::load(vae_dir, false);
    std::optional<Marker> marker;
    if (!marker_name_arg.empty()) marker = parse_marker_or_throw(marker_name_arg);
    for (int i = 0; i < count; ++i)
      out.push_back(free_generate(marker, ckpt, encoder, vae.vae,
                                  nn::derive_seed(seed, "generate", i)));
  }

  write_generated_jsonl(out_path, out);
  std::cout << "generate: wrote " << out.size() << " sentences to " << out_path << "\n";
  return 0;
}

// ----------------------------------------------------------------- evaluate
int cmd_evaluate(const std::string& input_path, const std::string& encoder_dir,
                 const std::string& lm_dir, std::string out_path) {
  if (input_path.empty()) throw UsageError("evaluate requires --input");
  if (encoder_dir.empty()) throw UsageError("evaluate requires --encoder");
  if (lm_dir.empty()) throw UsageError("evaluate requires --lm");

  const std::vector<GeneratedSentence> sentences = read_generated_jsonl(input_path);
  FrozenEncoder encoder = FrozenEncoder::load(encoder_dir);
  LoadedLm lm = LanguageModel::load(lm_dir, false);
  if (lm.vocab_hash != 0 && lm.vocab_hash != encoder.vocab().content_hash())
    throw DataError("language model " + lm_dir + " and encoder " + encoder_dir +
                    " use different vocabularies");

  const EvalReport report = evaluate_generated(sentences, encoder, lm.lm, encoder.vocab());
  std::cout << report.to_table();
  if (out_path.empty()) out_path = default_out_dir("evaluate") + "/report.json";
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? "."
                             : fs::path(out_path).parent_path().string());
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + out_path);
  os << report.to_json() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"transsent: structured sentence generation via discourse-marker translation"};
  app.require_subcommand(1);

  // extract
  auto* ext = app.add_subcommand("extract", "mine discourse triples from raw text");
  std::vector<std::string> ext_inputs;
  std::string ext_out, ext_config;
  std::uint64_t ext_seed = 0;
  double ext_train = 0.8, ext_dev = 0.1, ext_test = 0.1;
  int ext_min_count = 1;
  ext->add_option("--input", ext_inputs, "input text file(s)");
  ext->add_option("--out", ext_out, "output dataset directory");
  ext->add_option("--config", ext_config, "JSON config file");
  ext->add_option("--seed", ext_seed, "split seed");
  ext->add_option("--train-ratio", ext_train, "train fraction");
  ext->add_option("--dev-ratio", ext_dev, "dev fraction");
  ext->add_option("--test-ratio", ext_test, "test fraction");
  ext->add_option("--min-count", ext_min_count, "vocabulary min frequency");

  // train-dmp
  auto* dmp = app.add_subcommand("train-dmp", "train the marker-prediction encoder");
  std::string dmp_data, dmp_out, dmp_config;
  bool dmp_resume = false;
  int dmp_layers = 2, dmp_heads = 4, dmp_hidden = 64, dmp_ffn = 256, dmp_maxtok = 34,
      dmp_repr = 64, dmp_epochs = 8, dmp_batch = 16;
  double dmp_dropout = 0.1, dmp_lr = 1e-3, dmp_early = -1.0;
  std::uint64_t dmp_seed = 0;
  dmp->add_option("--data", dmp_data, "dataset directory from extract");
  dmp->add_option("--out", dmp_out, "encoder checkpoint directory");
  dmp->add_option("--config", dmp_config, "JSON config file");
  dmp->add_flag("--resume", dmp_resume, "continue from the checkpoint in --out");
  dmp->add_option("--layers", dmp_layers, "encoder layers");
  dmp->add_option("--heads", dmp_heads, "attention heads");
  dmp->add_option("--hidden", dmp_hidden, "hidden size");
  dmp->add_option("--ffn", dmp_ffn, "feed-forward size");
  dmp->add_option("--max-tokens", dmp_maxtok, "encoder window");
  dmp->add_option("--repr-dim", dmp_repr, "discourse representation size");
  dmp->add_option("--dropout", dmp_dropout, "dropout rate");
  dmp->add_option("--epochs", dmp_epochs, "training epochs");
  dmp->add_option("--lr", dmp_lr, "learning rate");
  dmp->add_option("--batch-size", dmp_batch, "batch size");
  dmp->add_option("--early-stop-acc", dmp_early, "stop at this train accuracy");
  dmp->add_option("--seed", dmp_seed, "global seed");

  // train-transsent
  auto* ts = app.add_subcommand("train-transsent", "train decoder + relation translation");
  std::string ts_data, ts_encoder, ts_out, ts_config;
  bool ts_resume = false, ts_cache = false, ts_nobias = false;
  TrainConfig ts_defaults;
  int ts_epochs = ts_defaults.epochs, ts_batch = ts_defaults.batch_size,
      ts_interval = ts_defaults.checkpoint_interval, ts_dec_hidden = 64, ts_maxdec = 24,
      ts_reldim = 64;
  double ts_lr = ts_defaults.lr, ts_ld = 1.0, ts_lrt = 1.0, ts_linv = 1.0, ts_dropout = 0.1,
         ts_eps = 1e-8;
  std::uint64_t ts_seed = 0;
  ts->add_option("--data", ts_data, "dataset directory");
  ts->add_option("--encoder", ts_encoder, "frozen encoder checkpoint");
  ts->add_option("--out", ts_out, "checkpoint directory");
  ts->add_option("--config", ts_config, "JSON config file");
  ts->add_flag("--resume", ts_resume, "continue from the checkpoint in --out");
  ts->add_option("--epochs", ts_epochs, "training epochs");
  ts->add_option("--lr", ts_lr, "learning rate");
  ts->add_option("--lambda-d", ts_ld, "distance loss weight");
  ts->add_option("--lambda-r", ts_lrt, "ratio loss weight");
  ts->add_option("--lambda-inv", ts_linv, "inverse-map alignment weight");
  ts->add_option("--batch-size", ts_batch, "batch size");
  ts->add_option("--seed", ts_seed, "global seed");
  ts->add_option("--ckpt-interval", ts_interval, "epochs between checkpoints");
  ts->add_flag("--cache-reps", ts_cache, "precompute frozen-encoder representations");
  ts->add_option("--dropout", ts_dropout, "decoder input dropout");
  ts->add_option("--decoder-hidden", ts_dec_hidden, "decoder hidden size");
  ts->add_option("--max-decode-len", ts_maxdec, "decode length cap");
  ts->add_option("--relation-dim", ts_reldim, "relation space size");
  ts->add_option("--ratio-eps", ts_eps, "ratio loss denominator guard");
  ts->add_flag("--no-translation-bias", ts_nobias, "drop the translation bias term");

  // train-vae
  auto* vae = app.add_subcommand("train-vae", "train the head-discourse VAE");
  std::string vae_data, vae_out, vae_config;
  bool vae_resume = false;
  int vae_latent = 16, vae_hidden = 64, vae_epochs = 30, vae_batch = 16, vae_maxlen = 24;
  double vae_lr = 1e-3, vae_wd = 0.25, vae_anneal = 0.3;
  std::uint64_t vae_seed = 0;
  vae->add_option("--data", vae_data, "dataset directory");
  vae->add_option("--out", vae_out, "VAE checkpoint directory");
  vae->add_option("--config", vae_config, "JSON config file");
  vae->add_flag("--resume", vae_resume, "continue from the checkpoint in --out");
  vae->add_option("--latent", vae_latent, "latent size");
  vae->add_option("--hidden", vae_hidden, "hidden size");
  vae->add_option("--epochs", vae_epochs, "training epochs");
  vae->add_option("--lr", vae_lr, "learning rate");
  vae->add_option("--batch-size", vae_batch, "batch size");
  vae->add_option("--word-dropout", vae_wd, "decoder input word dropout");
  vae->add_option("--anneal-portion", vae_anneal, "fraction of steps to ramp KL weight");
  vae->add_option("--max-sample-len", vae_maxlen, "sample length cap");
  vae->add_option("--seed", vae_seed, "global seed");

  // train-lm
  auto* lm = app.add_subcommand("train-lm", "train the evaluation language model");
  std::string lm_data, lm_out, lm_config;
  bool lm_resume = false;
  int lm_hidden = 64, lm_epochs = 10, lm_batch = 16, lm_maxlen = 48;
  double lm_lr = 1e-3;
  std::uint64_t lm_seed = 0;
  lm->add_option("--data", lm_data, "dataset directory");
  lm->add_option("--out", lm_out, "LM checkpoint directory");
  lm->add_option("--config", lm_config, "JSON config file");
  lm->add_flag("--resume", lm_resume, "continue from the checkpoint in --out");
  lm->add_option("--hidden", lm_hidden, "hidden size");
  lm->add_option("--epochs", lm_epochs, "training epochs");
  lm->add_option("--lr", lm_lr, "learning rate");
  lm->add_option("--batch-size", lm_batch, "batch size");
  lm->add_option("--max-len", lm_maxlen, "sentence length cap");
  lm->add_option("--seed", lm_seed, "global seed");

  // generate
  auto* gen = app.add_subcommand("generate", "generate structured sentences");
  std::string gen_mode = "transfer", gen_ckpt, gen_encoder, gen_vae, gen_input, gen_head,
              gen_marker, gen_out;
  int gen_count = 1;
  std::uint64_t gen_seed = 0;
  gen->add_option("--mode", gen_mode, "transfer or free");
  gen->add_option("--checkpoint", gen_ckpt, "trained checkpoint directory");
  gen->add_option("--encoder", gen_encoder, "frozen encoder (defaults to checkpoint's)");
  gen->add_option("--vae", gen_vae, "head VAE checkpoint (free mode)");
  gen->add_option("--input", gen_input, "JSONL of {head, marker} requests");
  gen->add_option("--head", gen_head, "single head discourse");
  gen->add_option("--marker", gen_marker, "discourse marker");
  gen->add_option("--count", gen_count, "number of sentences (free mode)");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output JSONL path");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score generated sentences");
  std::string ev_input, ev_encoder, ev_lm, ev_out;
  ev->add_option("--input", ev_input, "generated JSONL");
  ev->add_option("--encoder", ev_encoder, "discriminator encoder checkpoint");
  ev->add_option("--lm", ev_lm, "evaluation LM checkpoint");
  ev->add_option("--out", ev_out, "report JSON path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (ext->parsed()) return cmd_extract(ext_inputs, ext_out, ext_config, ext);
    if (dmp->parsed()) return cmd_train_dmp(dmp_data, dmp_out, dmp_config, dmp_resume, dmp);
    if (ts->parsed())
      return cmd_train_transsent(ts_data, ts_encoder, ts_out, ts_config, ts_resume, ts);
    if (vae->parsed()) return cmd_train_vae(vae_data, vae_out, vae_config, vae_resume, vae);
    if (lm->parsed()) return cmd_train_lm(lm_data, lm_out, lm_config, lm_resume, lm);
    if (gen->parsed())
      return cmd_generate(gen_mode, gen_ckpt, gen_encoder, gen_vae, gen_input, gen_head,
                          gen_marker, gen_count, gen_seed, gen_out);
    if (ev->parsed()) return cmd_evaluate(ev_input, ev_encoder, ev_lm, ev_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure in " << e.component() << ": " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace transsent::cli
