#include "transsent/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "transsent/errors.hpp"

namespace transsent {

std::string make_surface(const std::vector<std::string>& head, Marker marker,
                         const std::vector<std::string>& tail) {
  std::string s = join_tokens(head);
  s += ' ';
  s += marker_name(marker);
  if (!tail.empty()) {
    s += ' ';
    s += join_tokens(tail);
  }
  return s;
}

GeneratedSentence discourse_transfer(const std::vector<std::string>& head, Marker marker,
                                     const ModelCheckpoint& ckpt, const FrozenEncoder& encoder) {
  if (head.empty()) throw DataError("discourse_transfer requires a non-empty head");
  const nn::Matrix z_h = encoder.represent(head);
  const nn::Matrix z_h_r = ckpt.relations.project(z_h, marker);
  const nn::Matrix z_t_r_star = ckpt.relations.translate(z_h_r, marker);
  const nn::Matrix z_t_star = ckpt.relations.invert(z_t_r_star, marker);
  const DecodeResult decoded = ckpt.decoder.greedy_decode(z_t_star);

  GeneratedSentence out;
  out.head = head;
  out.marker = marker;
  out.tail = encoder.vocab().decode(decoded.ids);
  out.tail_terminated = decoded.terminated;
  out.surface = make_surface(out.head, marker, out.tail);
  return out;
}

GeneratedSentence free_generate(std::optional<Marker> marker, const ModelCheckpoint& ckpt,
                                const FrozenEncoder& encoder, const HeadVae& vae,
                                std::uint64_t seed) {
  Marker m;
  if (marker) {
    m = *marker;
  } else {
    nn::Rng rng(nn::derive_seed(seed, "free.marker"));
    m = kAllMarkers[rng.uniform_int(kNumMarkers)];
  }
  // resample on an empty decode; bounded so a degenerate model still returns
  std::vector<std::string> head;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const DecodeResult sample =
        vae.sample(nn::derive_seed(seed, "free.head", static_cast<std::uint64_t>(attempt)));
    if (!sample.ids.empty()) {
      head = encoder.vocab().decode(sample.ids);
      break;
    }
  }
  if (head.empty()) throw DataError("head generator produced only empty samples");
  return discourse_transfer(head, m, ckpt, encoder);
}

RelationAccuracy relation_accuracy(const std::vector<GeneratedSentence>& sentences,
                                   const FrozenEncoder& discriminator) {
  if (sentences.empty()) throw DataError("relation_accuracy requires at least one sentence");
  RelationAccuracy acc;
  std::map<std::string, int> correct;
  for (const GeneratedSentence& s : sentences) {
    const std::string name(marker_name(s.marker));
    ++acc.per_marker_count[name];
    if (!s.tail.empty() && discriminator.classify_argmax(s.head, s.tail) == s.marker)
      ++correct[name];
  }
  int total_correct = 0;
  for (const auto& [name, count] : acc.per_marker_count) {
    acc.per_marker[name] = static_cast<double>(correct[name]) / count;
    total_correct += correct[name];
  }
  acc.overall = static_cast<double>(total_correct) / static_cast<double>(sentences.size());
  return acc;
}

std::pair<double, double> lm_nll_ppl(const std::vector<std::string>& sentences,
                                     const LanguageModel& lm, const Vocabulary& vocab) {
  if (sentences.empty()) throw DataError("lm_nll_ppl requires at least one sentence");
  double total_nll = 0.0;
  std::int64_t total_tokens = 0;
  for (const std::string& s : sentences) {
    const std::vector<int> ids = vocab.encode(tokenize(s));
    if (ids.empty()) continue;
    const auto [nll, count] = lm.score_ids(ids);
    total_nll += nll;
    total_tokens += count;
  }
  if (total_tokens == 0) throw DataError("lm_nll_ppl saw no scorable tokens");
  const double mean_nll = total_nll / static_cast<double>(total_tokens);
  return {mean_nll, std::exp(mean_nll)};
}

EvalReport evaluate_generated(const std::vector<GeneratedSentence>& sentences,
                              const FrozenEncoder& discriminator, const LanguageModel& lm,
                              const Vocabulary& vocab) {
  EvalReport report;
  report.samples = static_cast<int>(sentences.size());
  const RelationAccuracy acc = relation_accuracy(sentences, discriminator);
  report.relation_acc = acc.overall;
  report.per_marker_acc = acc.per_marker;
  report.per_marker_count = acc.per_marker_count;

  std::vector<std::string> full, tails;
  for (const GeneratedSentence& s : sentences) {
    full.push_back(s.surface);
    if (!s.tail.empty()) tails.push_back(join_tokens(s.tail));
  }
  const auto [nll, ppl] = lm_nll_ppl(full, lm, vocab);
  report.nll = nll;
  report.ppl = ppl;
  if (!tails.empty()) {
    const auto [tnll, tppl] = lm_nll_ppl(tails, lm, vocab);
    report.tail_nll = tnll;
    report.tail_ppl = tppl;
  }
  return report;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(18) << "metric" << "value\n";
  os << std::left << std::setw(18) << "samples" << samples << "\n";
  os << std::left << std::setw(18) << "relation_acc" << relation_acc << "\n";
  os << std::left << std::setw(18) << "nll" << nll << "\n";
  os << std::left << std::setw(18) << "ppl" << ppl << "\n";
  os << std::left << std::setw(18) << "tail_nll" << tail_nll << "\n";
  os << std::left << std::setw(18) << "tail_ppl" << tail_ppl << "\n";
  for (const auto& [name, value] : per_marker_acc) {
    std::string label = "acc[" + name + "]";
    os << std::left << std::setw(18) << label << value;
    auto it = per_marker_count.find(name);
    if (it != per_marker_count.end()) os << "  (n=" << it->second << ")";
    os << "\n";
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["samples"] = samples;
  j["relation_accuracy"] = relation_acc;
  j["nll"] = nll;
  j["ppl"] = ppl;
  j["tail_nll"] = tail_nll;
  j["tail_ppl"] = tail_ppl;
  j["per_marker_accuracy"] = per_marker_acc;
  j["per_marker_count"] = per_marker_count;
  return j.dump(2);
}

void write_generated_jsonl(const std::string& path,
                           const std::vector<GeneratedSentence>& sentences) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + path);
  for (const GeneratedSentence& s : sentences) {
    nlohmann::json obj;
    obj["head"] = join_tokens(s.head);
    obj["marker"] = std::string(marker_name(s.marker));
    obj["tail"] = join_tokens(s.tail);
    obj["surface"] = s.surface;
    os << obj.dump() << "\n";
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<GeneratedSentence> read_generated_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open file: " + path);
  std::vector<GeneratedSentence> out;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": " << why;
    throw DataError(msg.str());
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail("malformed JSON line");
    }
    if (!obj.is_object() || !obj.contains("head") || !obj.contains("marker") ||
        !obj.contains("tail"))
      fail("line is missing head/marker/tail");
    GeneratedSentence s;
    std::istringstream hs(obj["head"].get<std::string>());
    for (std::string tok; hs >> tok;) s.head.push_back(tok);
    std::istringstream ts(obj["tail"].get<std::string>());
    for (std::string tok; ts >> tok;) s.tail.push_back(tok);
    auto marker = parse_marker(obj["marker"].get<std::string>());
    if (!marker) fail("unknown marker \"" + obj["marker"].get<std::string>() + "\"");
    s.marker = *marker;
    s.surface = obj.contains("surface") ? obj["surface"].get<std::string>()
                                        : make_surface(s.head, s.marker, s.tail);
    if (s.head.empty()) fail("empty head");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace transsent
