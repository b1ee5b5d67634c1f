#ifndef TRANSSENT_TRAINER_HPP
#define TRANSSENT_TRAINER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "transsent/corpus.hpp"
#include "transsent/decoder.hpp"
#include "transsent/encoder.hpp"
#include "transsent/translate.hpp"
#include "transsent/vocab.hpp"

namespace transsent {

struct TrainConfig {
  int epochs = 20;
  double lr = 1e-3;
  double lambda_d = 1.0;
  double lambda_r = 1.0;
  // weight of the discourse-space alignment ||z_t* - z_t||^2 that trains the
  // inverse map; logged separately from the composite objective
  double lambda_inv = 1.0;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int checkpoint_interval = 1;
  bool cache_representations = false;
  double dropout = 0.1;

  DecoderConfig decoder;
  RelationConfig relation;
};

struct StepRecord {
  std::int64_t step = 0;
  double rec = 0.0;
  double dis = 0.0;
  double ratio = 0.0;
  double inv = 0.0;
  double total = 0.0;  // rec + lambda_d * dis + lambda_r * ratio
};

struct LossSummary {
  double rec = 0.0;
  double dis = 0.0;
  double ratio = 0.0;
  double inv = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  LossSummary train;
  std::optional<LossSummary> dev;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_dev_total = 0.0;
};

// Decoder + relation parameters plus everything needed to resume or
// generate. The encoder itself stays in its own frozen checkpoint; only the
// reference is recorded here.
struct ModelCheckpoint {
  TrainConfig config;
  Decoder decoder;
  RelationNet relations;
  std::string encoder_dir;
  std::string vocab_path;
  std::uint64_t vocab_hash = 0;
  int epochs_done = 0;
  std::int64_t global_step = 0;
  TrainHistory history;
  nn::Adam adam;

  ModelCheckpoint(TrainConfig cfg, std::uint64_t init_seed);

  void save(const std::string& dir) const;
  static ModelCheckpoint load(const std::string& dir);
};

ModelCheckpoint make_checkpoint(TrainConfig cfg, const std::string& encoder_dir,
                                const std::string& vocab_path, std::uint64_t vocab_hash);

// One full pass of the training loop: representations from the frozen
// encoder, reconstruction + translation losses, Adam updates on decoder and
// relation parameters only. Saves into checkpoint_dir every
// checkpoint_interval epochs when the path is non-empty; a best-dev snapshot
// goes into checkpoint_dir/best. Throws NumericalError on NaN/Inf losses,
// leaving the last saved checkpoint on disk.
void train_transsent(ModelCheckpoint& ckpt, const DatasetSplit& data,
                     const FrozenEncoder& encoder, const std::string& checkpoint_dir);

// Mean losses over a dev list without updating anything. Throws DataError on
// an empty list.
LossSummary evaluate_epoch(const std::vector<DiscourseTriple>& dev, const ModelCheckpoint& ckpt,
                           const FrozenEncoder& encoder);

}  // namespace transsent

#endif  // TRANSSENT_TRAINER_HPP
