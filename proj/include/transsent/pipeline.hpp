#ifndef TRANSSENT_PIPELINE_HPP
#define TRANSSENT_PIPELINE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "transsent/encoder.hpp"
#include "transsent/headgen.hpp"
#include "transsent/lm.hpp"
#include "transsent/trainer.hpp"

namespace transsent {

struct GeneratedSentence {
  std::vector<std::string> head;
  Marker marker = Marker::And;
  std::vector<std::string> tail;
  std::string surface;  // join(head) + " " + marker + " " + join(tail)
  bool tail_terminated = true;
};

std::string make_surface(const std::vector<std::string>& head, Marker marker,
                         const std::vector<std::string>& tail);

// The generation chain: represent the head, project into relation space,
// translate, map back to discourse space, greedy-decode the tail.
GeneratedSentence discourse_transfer(const std::vector<std::string>& head, Marker marker,
                                     const ModelCheckpoint& ckpt, const FrozenEncoder& encoder);

// Samples a head from the VAE (marker drawn uniformly when absent), then
// runs discourse_transfer. Deterministic given (checkpoints, seed).
GeneratedSentence free_generate(std::optional<Marker> marker, const ModelCheckpoint& ckpt,
                                const FrozenEncoder& encoder, const HeadVae& vae,
                                std::uint64_t seed);

struct RelationAccuracy {
  double overall = 0.0;
  std::map<std::string, double> per_marker;
  std::map<std::string, int> per_marker_count;
};

// Fraction of sentences whose (head, generated tail) pair the discriminator
// assigns to the intended marker. Throws DataError on an empty list.
RelationAccuracy relation_accuracy(const std::vector<GeneratedSentence>& sentences,
                                   const FrozenEncoder& discriminator);

// Token-weighted mean NLL over the sentences plus PPL = exp(NLL).
// Throws DataError on an empty list.
std::pair<double, double> lm_nll_ppl(const std::vector<std::string>& sentences,
                                     const LanguageModel& lm, const Vocabulary& vocab);

struct EvalReport {
  int samples = 0;
  double relation_acc = 0.0;
  double nll = 0.0;  // full sentences (primary)
  double ppl = 1.0;
  double tail_nll = 0.0;  // generated tails only (secondary)
  double tail_ppl = 1.0;
  std::map<std::string, double> per_marker_acc;
  std::map<std::string, int> per_marker_count;

  std::string to_table() const;
  std::string to_json() const;
};

EvalReport evaluate_generated(const std::vector<GeneratedSentence>& sentences,
                              const FrozenEncoder& discriminator, const LanguageModel& lm,
                              const Vocabulary& vocab);

// JSONL persistence: keys head/marker/tail/surface. Reading accepts dataset
// triples too (surface reconstructed); errors cite the line number.
void write_generated_jsonl(const std::string& path,
                           const std::vector<GeneratedSentence>& sentences);
std::vector<GeneratedSentence> read_generated_jsonl(const std::string& path);

}  // namespace transsent

#endif  // TRANSSENT_PIPELINE_HPP
