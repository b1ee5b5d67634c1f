#include "transsent/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "transsent/errors.hpp"
#include "transsent/nn/rng.hpp"

namespace transsent {

namespace {

bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_word_char(char c) {
  // non-ASCII bytes stay inside words so UTF-8 sequences survive intact
  return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view marker_name(Marker m) {
  switch (m) {
    case Marker::And: return "and";
    case Marker::But: return "but";
    case Marker::Because: return "because";
    case Marker::If: return "if";
    case Marker::When: return "when";
  }
  return "and";
}

std::optional<Marker> parse_marker(std::string_view name) {
  for (Marker m : kAllMarkers)
    if (marker_name(m) == name) return m;
  return std::nullopt;
}

Marker parse_marker_or_throw(std::string_view name) {
  auto m = parse_marker(name);
  if (!m) {
    std::ostringstream msg;
    msg << "unknown marker \"" << name << "\"; legal markers are";
    for (Marker k : kAllMarkers) msg << " " << marker_name(k);
    throw UsageError(msg.str());
  }
  return *m;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::string_view chunk = text.substr(i, j - i);
    i = j;

    // peel leading punctuation
    std::size_t begin = 0;
    while (begin < chunk.size() && !is_word_char(chunk[begin])) {
      tokens.emplace_back(1, chunk[begin]);
      ++begin;
    }
    // find the end of the word core
    std::size_t end = chunk.size();
    while (end > begin && !is_word_char(chunk[end - 1])) --end;
    if (end > begin) {
      std::string word(chunk.substr(begin, end - begin));
      for (char& c : word) c = ascii_lower(c);
      tokens.push_back(std::move(word));
    }
    // peel trailing punctuation, in order
    for (std::size_t k = end; k < chunk.size(); ++k) tokens.emplace_back(1, chunk[k]);
  }
  return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    current += c;
    if (is_terminal(c)) {
      // swallow a run of terminal punctuation, then require whitespace or EOF
      std::size_t j = i + 1;
      while (j < text.size() && is_terminal(text[j])) {
        current += text[j];
        ++j;
      }
      if (j >= text.size() || is_space(text[j])) {
        // trim
        std::size_t b = current.find_first_not_of(" \t\r\n");
        std::size_t e = current.find_last_not_of(" \t\r\n");
        if (b != std::string::npos) sentences.push_back(current.substr(b, e - b + 1));
        current.clear();
      }
      i = j - 1;
    }
  }
  std::size_t b = current.find_first_not_of(" \t\r\n");
  if (b != std::string::npos) {
    std::size_t e = current.find_last_not_of(" \t\r\n");
    sentences.push_back(current.substr(b, e - b + 1));
  }
  return sentences;
}

int word_count(const std::vector<std::string>& tokens) {
  int n = 0;
  for (const std::string& t : tokens)
    for (char c : t)
      if (is_word_char(c)) {
        ++n;
        break;
      }
  return n;
}

void ExtractionStats::merge(const ExtractionStats& o) {
  sentences_seen += o.sentences_seen;
  no_marker += o.no_marker;
  multi_marker += o.multi_marker;
  unparseable += o.unparseable;
  emitted += o.emitted;
  duplicates_removed += o.duplicates_removed;
  length_filtered += o.length_filtered;
  for (const auto& [k, v] : o.per_marker) per_marker[k] += v;
}

namespace {

bool is_punct_token(const std::string& t) {
  for (char c : t)
    if (is_word_char(c)) return false;
  return true;
}

// Extracts one triple from a tokenized sentence, or nullopt. `stats` is
// bumped for skip reasons other than emission.
std::optional<DiscourseTriple> extract_from_sentence(std::vector<std::string> tokens,
                                                     ExtractionStats& stats) {
  // strip trailing punctuation-only tokens (terminal . ! ? and friends)
  while (!tokens.empty() && is_punct_token(tokens.back())) tokens.pop_back();
  if (tokens.empty()) {
    ++stats.no_marker;
    return std::nullopt;
  }

  std::vector<std::size_t> marker_positions;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (parse_marker(tokens[i])) marker_positions.push_back(i);

  if (marker_positions.empty()) {
    ++stats.no_marker;
    return std::nullopt;
  }
  if (marker_positions.size() > 1) {
    ++stats.multi_marker;
    return std::nullopt;
  }

  const std::size_t pos = marker_positions[0];
  const Marker marker = *parse_marker(tokens[pos]);
  std::vector<std::string> head, tail;

  if (pos == 0) {
    // "<Marker> S2, S1" -> (S1, marker, S2); split at the first comma
    std::size_t comma = 0;
    for (std::size_t i = 1; i < tokens.size(); ++i)
      if (tokens[i] == ",") {
        comma = i;
        break;
      }
    if (comma == 0 || comma == 1 || comma + 1 >= tokens.size()) {
      ++stats.unparseable;
      return std::nullopt;
    }
    tail.assign(tokens.begin() + 1, tokens.begin() + static_cast<std::ptrdiff_t>(comma));
    head.assign(tokens.begin() + static_cast<std::ptrdiff_t>(comma) + 1, tokens.end());
  } else {
    // "S1 [,] <marker> S2" -> (S1, marker, S2)
    std::size_t head_end = pos;
    if (head_end > 0 && tokens[head_end - 1] == ",") --head_end;
    if (head_end == 0 || pos + 1 >= tokens.size()) {
      ++stats.unparseable;
      return std::nullopt;
    }
    head.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(head_end));
    tail.assign(tokens.begin() + static_cast<std::ptrdiff_t>(pos) + 1, tokens.end());
  }

  if (head.empty() || tail.empty()) {
    ++stats.unparseable;
    return std::nullopt;
  }
  DiscourseTriple t;
  t.head = std::move(head);
  t.marker = marker;
  t.tail = std::move(tail);
  return t;
}

}  // namespace

ExtractResult extract_triples(std::string_view text, std::string_view source_name) {
  ExtractResult result;
  const std::vector<std::string> sentences = split_sentences(text);
  for (std::size_t idx = 0; idx < sentences.size(); ++idx) {
    ++result.stats.sentences_seen;
    auto triple = extract_from_sentence(tokenize(sentences[idx]), result.stats);
    if (!triple) continue;
    std::ostringstream sid;
    sid << source_name << "#" << idx;
    triple->source_id = sid.str();
    ++result.stats.emitted;
    ++result.stats.per_marker[std::string(marker_name(triple->marker))];
    result.triples.push_back(std::move(*triple));
  }
  return result;
}

bool filter_by_length(const DiscourseTriple& triple) {
  const int h = word_count(triple.head);
  const int t = word_count(triple.tail);
  return h >= 5 && h <= 15 && t >= 5 && t <= 15;
}

std::int64_t dedupe_triples(std::vector<DiscourseTriple>& triples) {
  std::set<std::string> seen;
  std::vector<DiscourseTriple> kept;
  kept.reserve(triples.size());
  std::int64_t removed = 0;
  for (DiscourseTriple& t : triples) {
    std::string key = join_tokens(t.head);
    key += '\x01';
    key += marker_name(t.marker);
    key += '\x01';
    key += join_tokens(t.tail);
    if (seen.insert(std::move(key)).second)
      kept.push_back(std::move(t));
    else
      ++removed;
  }
  triples = std::move(kept);
  return removed;
}

DatasetSplit balance_and_split(std::vector<DiscourseTriple> triples,
                               const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");

  std::array<std::vector<DiscourseTriple>, kNumMarkers> by_marker;
  for (DiscourseTriple& t : triples)
    by_marker[static_cast<int>(t.marker)].push_back(std::move(t));

  std::size_t min_count = SIZE_MAX;
  for (int m = 0; m < kNumMarkers; ++m) {
    if (by_marker[m].empty())
      throw DataError(std::string("no triples for marker \"") +
                      std::string(marker_name(kAllMarkers[m])) + "\"");
    min_count = std::min(min_count, by_marker[m].size());
  }

  DatasetSplit split;
  split.split_seed = seed;
  const auto n_train = static_cast<std::size_t>(static_cast<double>(min_count) * ratios[0]);
  const auto n_dev = static_cast<std::size_t>(static_cast<double>(min_count) * ratios[1]);
  for (int m = 0; m < kNumMarkers; ++m) {
    nn::Rng rng(nn::derive_seed(seed, "corpus.split", static_cast<std::uint64_t>(m)));
    rng.shuffle(by_marker[m]);
    by_marker[m].resize(min_count);
    for (std::size_t i = 0; i < min_count; ++i) {
      if (i < n_train)
        split.train.push_back(std::move(by_marker[m][i]));
      else if (i < n_train + n_dev)
        split.dev.push_back(std::move(by_marker[m][i]));
      else
        split.test.push_back(std::move(by_marker[m][i]));
    }
  }
  return split;
}

void write_triples_jsonl(const std::string& path, const std::vector<DiscourseTriple>& triples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + path);
  for (const DiscourseTriple& t : triples) {
    nlohmann::json obj;
    obj["head"] = join_tokens(t.head);
    obj["marker"] = std::string(marker_name(t.marker));
    obj["tail"] = join_tokens(t.tail);
    obj["source_id"] = t.source_id;
    os << obj.dump() << "\n";
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<DiscourseTriple> read_triples_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open file: " + path);
  std::vector<DiscourseTriple> triples;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": malformed JSON line";
      throw DataError(msg.str());
    }
    if (!obj.is_object() || !obj.contains("head") || !obj.contains("marker") ||
        !obj.contains("tail")) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": line is missing head/marker/tail";
      throw DataError(msg.str());
    }
    DiscourseTriple t;
    std::istringstream hs(obj["head"].get<std::string>());
    for (std::string tok; hs >> tok;) t.head.push_back(tok);
    std::istringstream ts(obj["tail"].get<std::string>());
    for (std::string tok; ts >> tok;) t.tail.push_back(tok);
    auto marker = parse_marker(obj["marker"].get<std::string>());
    if (!marker) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": unknown marker \"" << obj["marker"].get<std::string>()
          << "\"";
      throw DataError(msg.str());
    }
    t.marker = *marker;
    if (obj.contains("source_id")) t.source_id = obj["source_id"].get<std::string>();
    triples.push_back(std::move(t));
  }
  return triples;
}

}  // namespace transsent
