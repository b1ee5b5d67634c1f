#ifndef TRANSSENT_CORPUS_HPP
#define TRANSSENT_CORPUS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace transsent {

// The five discourse markers this project handles. Enumeration order is the
// canonical tie-break order everywhere (classifier outputs, reports).
enum class Marker { And, But, Because, If, When };

inline constexpr int kNumMarkers = 5;
inline constexpr std::array<Marker, kNumMarkers> kAllMarkers = {
    Marker::And, Marker::But, Marker::Because, Marker::If, Marker::When};

std::string_view marker_name(Marker m);
std::optional<Marker> parse_marker(std::string_view name);
// throws UsageError listing the legal names
Marker parse_marker_or_throw(std::string_view name);

// One mined example: (head discourse, marker, tail discourse).
struct DiscourseTriple {
  std::vector<std::string> head;
  Marker marker = Marker::And;
  std::vector<std::string> tail;
  std::string source_id;

  bool same_content(const DiscourseTriple& o) const {
    return marker == o.marker && head == o.head && tail == o.tail;
  }
};

std::string join_tokens(const std::vector<std::string>& tokens);

// Lowercased whitespace-plus-punctuation tokenization. Leading/trailing
// punctuation splits off into separate tokens; inner punctuation
// ("don't", "face-to-face") stays attached.
std::vector<std::string> tokenize(std::string_view text);

// Sentence boundaries at terminal punctuation (. ! ?) followed by whitespace.
std::vector<std::string> split_sentences(std::string_view text);

// Tokens that carry at least one alphanumeric character; bare punctuation
// tokens do not count as words.
int word_count(const std::vector<std::string>& tokens);

struct ExtractionStats {
  std::int64_t sentences_seen = 0;
  std::int64_t no_marker = 0;
  std::int64_t multi_marker = 0;
  std::int64_t unparseable = 0;
  std::int64_t emitted = 0;
  std::int64_t duplicates_removed = 0;
  std::int64_t length_filtered = 0;
  std::map<std::string, std::int64_t> per_marker;

  void merge(const ExtractionStats& o);
};

struct ExtractResult {
  std::vector<DiscourseTriple> triples;
  ExtractionStats stats;
};

// Mines canonical triples from raw text. Medial "S1 <marker> S2" and
// sentence-initial "<Marker> S2, S1" both normalize to (S1, marker, S2).
// Sentences with zero or multiple marker occurrences are skipped and counted.
ExtractResult extract_triples(std::string_view text, std::string_view source_name);

// true iff both sides have 5..15 words inclusive
bool filter_by_length(const DiscourseTriple& triple);

// Removes exact-duplicate (head, marker, tail) triples, keeping the first
// occurrence. Returns the number removed.
std::int64_t dedupe_triples(std::vector<DiscourseTriple>& triples);

struct DatasetSplit {
  std::vector<DiscourseTriple> train;
  std::vector<DiscourseTriple> dev;
  std::vector<DiscourseTriple> test;
  std::uint64_t split_seed = 0;
};

// Downsamples every marker class to the smallest class size, then splits
// per marker by the given ratios. Deterministic for a fixed seed.
// Throws DataError naming any marker with no triples.
DatasetSplit balance_and_split(std::vector<DiscourseTriple> triples,
                               const std::array<double, 3>& ratios, std::uint64_t seed);

// JSONL persistence: one object per line, keys head/marker/tail/source_id.
void write_triples_jsonl(const std::string& path, const std::vector<DiscourseTriple>& triples);
std::vector<DiscourseTriple> read_triples_jsonl(const std::string& path);

}  // namespace transsent

#endif  // TRANSSENT_CORPUS_HPP
