#ifndef TRANSSENT_ENCODER_HPP
#define TRANSSENT_ENCODER_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "transsent/corpus.hpp"
#include "transsent/nn/params.hpp"
#include "transsent/nn/tape.hpp"
#include "transsent/vocab.hpp"

namespace transsent {

struct EncoderConfig {
  int num_layers = 2;
  int num_heads = 4;
  int hidden_dim = 64;  // h
  int ffn_dim = 256;
  int max_tokens = 34;  // n; fits [BOS] 15 words [SEP] 15 words [EOS] plus padding slack
  int repr_dim = 64;    // k
  double dropout = 0.1;
  int vocab_size = 0;

  // BERT-base shape, kept as a documented preset; not trained at desk scale.
  static EncoderConfig paper_scale() {
    EncoderConfig c;
    c.num_layers = 12;
    c.num_heads = 12;
    c.hidden_dim = 768;
    c.ffn_dim = 3072;
    c.max_tokens = 34;
    c.repr_dim = 768;
    return c;
  }

  void validate() const;  // throws UsageError on bad shapes
};

// Fixed-width encoder input: ids/segments padded to max_tokens plus the
// additive attention mask over key positions.
struct EncodedInput {
  std::vector<int> ids;
  std::vector<int> segments;
  nn::Matrix key_mask;  // 1 x n, 0 for real positions, large negative for PAD
  bool truncated = false;
};

using DmpDistribution = std::array<double, kNumMarkers>;

struct LoadedEncoder;

// Bidirectional self-attention encoder trained on discourse marker
// prediction. After training it is frozen and serves as both the
// representation extractor and the evaluation discriminator.
class Encoder {
 public:
  Encoder(EncoderConfig cfg, std::uint64_t init_seed);

  const EncoderConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // separator between the two discourses of a DMP pair; lives in the extra
  // embedding row just past the vocabulary
  int sep_id() const { return cfg_.vocab_size; }

  EncodedInput make_single_input(const std::vector<int>& ids) const;
  EncodedInput make_pair_input(const std::vector<int>& head_ids,
                               const std::vector<int>& tail_ids) const;

  // tape builders (shared by training and inference)
  nn::VarId build_token_reprs(nn::Tape& t, nn::Binding& b, const EncodedInput& in,
                              const nn::DropoutCtx& drop) const;  // n x h
  nn::VarId build_repr(nn::Tape& t, nn::Binding& b, const EncodedInput& in,
                       const nn::DropoutCtx& drop) const;  // 1 x k, relu'd
  nn::VarId build_dmp_logits(nn::Tape& t, nn::Binding& b, const EncodedInput& in,
                             const nn::DropoutCtx& drop) const;  // 1 x 5

  // inference-mode ops over token ids
  nn::Matrix token_representations(const std::vector<int>& ids) const;
  nn::Matrix represent_ids(const std::vector<int>& ids) const;
  DmpDistribution classify_ids(const std::vector<int>& head_ids,
                               const std::vector<int>& tail_ids) const;

  void save(const std::string& dir, const std::string& vocab_path, std::uint64_t vocab_hash,
            bool with_optimizer_state, std::int64_t adam_t, int epochs_done) const;

  static LoadedEncoder load(const std::string& dir, bool with_optimizer_state);

 private:
  struct LayerParams {
    nn::Parameter *ln1_g, *ln1_b;
    nn::Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    nn::Parameter *ln2_g, *ln2_b;
    nn::Parameter *w1, *b1, *w2, *b2;
  };

  EncoderConfig cfg_;
  nn::ParamStore params_;
  nn::Parameter *tok_emb_, *pos_emb_, *seg_emb_;
  std::vector<LayerParams> layers_;
  nn::Parameter *lnf_g_, *lnf_b_;
  nn::Parameter *proj_w_, *proj_b_;  // (n*h) x k affine, relu on top
  nn::Parameter *cls_w_, *cls_b_;    // k x 5
};

struct LoadedEncoder {
  Encoder encoder;
  std::string vocab_path;
  std::uint64_t vocab_hash = 0;
  std::int64_t adam_t = 0;
  int epochs_done = 0;
};

// Immutable trained encoder bundled with its vocabulary. Safe for concurrent
// read-only use; nothing downstream can touch the weights.
class FrozenEncoder {
 public:
  FrozenEncoder(Encoder encoder, Vocabulary vocab)
      : encoder_(std::move(encoder)), vocab_(std::move(vocab)) {}

  const Encoder& encoder() const { return encoder_; }
  const Vocabulary& vocab() const { return vocab_; }

  // throws DataError on an empty discourse
  nn::Matrix represent(const std::vector<std::string>& discourse) const;
  DmpDistribution classify_pair(const std::vector<std::string>& head,
                                const std::vector<std::string>& tail) const;
  Marker classify_argmax(const std::vector<std::string>& head,
                         const std::vector<std::string>& tail) const;

  static FrozenEncoder load(const std::string& dir);

 private:
  Encoder encoder_;
  Vocabulary vocab_;
};

FrozenEncoder freeze(Encoder encoder, Vocabulary vocab);

struct DmpEpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double dev_loss = 0.0;
  double dev_acc = 0.0;
};

struct DmpMetrics {
  std::vector<DmpEpochMetrics> epochs;
  std::string warning;  // set when train loss fails to decrease early on
};

struct DmpTrainOptions {
  int epochs = 8;
  double lr = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  // stop once train accuracy reaches this level (<= 0 disables)
  double early_stop_train_acc = -1.0;
};

struct DmpTrainState {
  nn::Adam adam;
  int epochs_done = 0;
  DmpMetrics metrics;
};

// DMP fine-tuning: minimizes -log p(marker | head, tail) with Adam.
// Appends per-epoch metrics to state. Throws DataError on an empty train set.
void train_dmp(Encoder& encoder, const Vocabulary& vocab, const DatasetSplit& data,
               const DmpTrainOptions& opt, DmpTrainState& state);

}  // namespace transsent

#endif  // TRANSSENT_ENCODER_HPP
