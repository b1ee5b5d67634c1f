#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support/fixture.hpp"
#include "support/toy_data.hpp"
#include "transsent/corpus.hpp"
#include "transsent/errors.hpp"
#include "transsent/nn/rng.hpp"
#include "transsent/vocab.hpp"

using namespace transsent;
using test_support::triple;
using test_support::words;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kFixturePath = TESTS_DIR "/fixtures/fixture_corpus.txt";

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation off word edges") {
  CHECK(tokenize("She was late, very late!") ==
        std::vector<std::string>{"she", "was", "late", ",", "very", "late", "!"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("face-to-face talk") == std::vector<std::string>{"face-to-face", "talk"});
  CHECK(tokenize("(hello) world") == std::vector<std::string>{"(", "hello", ")", "world"});
  CHECK(tokenize("  spaced   out  ") == std::vector<std::string>{"spaced", "out"});
}

TEST_CASE("word_count ignores bare punctuation tokens") {
  CHECK(word_count(words("a b c")) == 3);
  CHECK(word_count(tokenize("it was , in fact , cold")) == 5);
  CHECK(word_count({}) == 0);
}

TEST_CASE("split_sentences uses terminal punctuation followed by whitespace") {
  auto s = split_sentences("Dogs bark. Cats meow! Why? Last one");
  REQUIRE(s.size() == 4);
  CHECK(s[0] == "Dogs bark.");
  CHECK(s[1] == "Cats meow!");
  CHECK(s[2] == "Why?");
  CHECK(s[3] == "Last one");
  // a period not followed by whitespace does not split
  CHECK(split_sentences("version 1.2 shipped.").size() == 1);
}

TEST_CASE("extract_triples handles the canonical medial form") {
  auto r = extract_triples("She was late to class because she missed the bus.", "t");
  REQUIRE(r.triples.size() == 1);
  CHECK(join_tokens(r.triples[0].head) == "she was late to class");
  CHECK(r.triples[0].marker == Marker::Because);
  CHECK(join_tokens(r.triples[0].tail) == "she missed the bus");
  CHECK(r.triples[0].source_id == "t#0");
}

TEST_CASE("extract_triples normalizes the sentence-initial form") {
  auto r = extract_triples("Because it was cold outside, I wore a jacket.", "t");
  REQUIRE(r.triples.size() == 1);
  CHECK(join_tokens(r.triples[0].head) == "i wore a jacket");
  CHECK(r.triples[0].marker == Marker::Because);
  CHECK(join_tokens(r.triples[0].tail) == "it was cold outside");
}

TEST_CASE("extract_triples skips markerless and multi-marker sentences") {
  auto none = extract_triples("The sun rose slowly over the hills.", "t");
  CHECK(none.triples.empty());
  CHECK(none.stats.no_marker == 1);

  auto multi = extract_triples("I ran because I was late and I was scared.", "t");
  CHECK(multi.triples.empty());
  CHECK(multi.stats.multi_marker == 1);
}

TEST_CASE("marker matching is token-exact, not substring") {
  auto r = extract_triples("The sand castle stood tall near the quiet shore.", "t");
  CHECK(r.triples.empty());
  CHECK(r.stats.no_marker == 1);
}

TEST_CASE("initial-marker sentences without a comma are unparseable") {
  auto r = extract_triples("When did the old train finally arrive at the station?", "t");
  CHECK(r.triples.empty());
  CHECK(r.stats.unparseable == 1);
}

TEST_CASE("order normalization makes both surface forms byte-identical") {
  nn::Rng rng(99);
  static const std::vector<std::string> pool = {"river", "stone", "walks", "sings", "bright",
                                                "slow",  "hour",  "night", "road",  "wind"};
  auto random_clause = [&](int len) {
    std::string out;
    for (int i = 0; i < len; ++i) {
      if (i) out += ' ';
      out += pool[rng.uniform_int(pool.size())];
    }
    return out;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const Marker m = kAllMarkers[rng.uniform_int(kNumMarkers)];
    const std::string s1 = random_clause(3 + static_cast<int>(rng.uniform_int(4)));
    const std::string s2 = random_clause(3 + static_cast<int>(rng.uniform_int(4)));
    const std::string medial = s1 + " " + std::string(marker_name(m)) + " " + s2 + ".";
    std::string initial = std::string(marker_name(m)) + " " + s2 + ", " + s1 + ".";
    initial[0] = static_cast<char>(std::toupper(initial[0]));
    auto a = extract_triples(medial, "m");
    auto b = extract_triples(initial, "i");
    REQUIRE(a.triples.size() == 1);
    REQUIRE(b.triples.size() == 1);
    CHECK(a.triples[0].head == b.triples[0].head);
    CHECK(a.triples[0].marker == b.triples[0].marker);
    CHECK(a.triples[0].tail == b.triples[0].tail);
  }
}

TEST_CASE("extraction is a pure function of its input") {
  const std::string text = read_file(kFixturePath);
  auto a = extract_triples(text, "f");
  auto b = extract_triples(text, "f");
  REQUIRE(a.triples.size() == b.triples.size());
  for (std::size_t i = 0; i < a.triples.size(); ++i) {
    CHECK(a.triples[i].head == b.triples[i].head);
    CHECK(a.triples[i].tail == b.triples[i].tail);
    CHECK(a.triples[i].source_id == b.triples[i].source_id);
  }
}

TEST_CASE("fixture corpus extracts the hand-annotated triple set") {
  const std::string text = read_file(kFixturePath);
  auto r = extract_triples(text, "fixture");
  CHECK(r.stats.sentences_seen == 21);
  CHECK(r.stats.no_marker == 3);
  CHECK(r.stats.multi_marker == 1);
  CHECK(r.stats.unparseable == 1);
  CHECK(r.stats.emitted == 16);
  CHECK(test_support::triple_keys(r.triples) == test_support::expected_keys(false));

  std::vector<DiscourseTriple> kept;
  for (const auto& t : r.triples)
    if (filter_by_length(t)) kept.push_back(t);
  CHECK(test_support::triple_keys(kept) == test_support::expected_keys(true));
}

TEST_CASE("filter_by_length keeps only 5..15 word sides") {
  CHECK_FALSE(filter_by_length(triple("i wore a jacket", Marker::Because, "it was cold outside")));
  CHECK(filter_by_length(
      triple("she was late to class", Marker::Because, "she missed the bus today")));
  CHECK_FALSE(filter_by_length(
      triple("one two three four five six seven eight nine ten eleven twelve thirteen fourteen "
             "fifteen sixteen",
             Marker::And, "one two three four five")));
  // boundary: exactly 15 on one side
  CHECK(filter_by_length(
      triple("one two three four five six seven eight nine ten eleven twelve thirteen fourteen "
             "fifteen",
             Marker::And, "one two three four five")));
}

TEST_CASE("dedupe_triples removes exact duplicates only") {
  std::vector<DiscourseTriple> ts = {
      triple("a b c d e", Marker::And, "f g h i j", "s1"),
      triple("a b c d e", Marker::And, "f g h i j", "s2"),
      triple("a b c d e", Marker::But, "f g h i j", "s3"),
  };
  CHECK(dedupe_triples(ts) == 1);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0].source_id == "s1");  // first occurrence wins
}

namespace {

std::vector<DiscourseTriple> counted_triples(const std::array<int, 5>& counts) {
  std::vector<DiscourseTriple> ts;
  for (int m = 0; m < kNumMarkers; ++m)
    for (int i = 0; i < counts[m]; ++i) {
      std::ostringstream head, tail;
      head << "head " << marker_name(kAllMarkers[m]) << " number " << i << " words";
      tail << "tail " << marker_name(kAllMarkers[m]) << " number " << i << " words";
      ts.push_back(triple(head.str(), kAllMarkers[m], tail.str(),
                          std::string(marker_name(kAllMarkers[m])) + std::to_string(i)));
    }
  return ts;
}

}  // namespace

TEST_CASE("balance_and_split downsamples to the smallest marker class") {
  auto split = balance_and_split(counted_triples({100, 80, 90, 80, 120}), {0.8, 0.1, 0.1}, 7);
  const std::size_t total = split.train.size() + split.dev.size() + split.test.size();
  CHECK(total == 400);  // 80 per marker
  CHECK(split.train.size() == 320);
  CHECK(split.dev.size() == 40);
  CHECK(split.test.size() == 40);

  // per-marker equality inside each split
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    std::array<int, 5> counts{};
    for (const auto& t : *part) ++counts[static_cast<int>(t.marker)];
    for (int m = 1; m < kNumMarkers; ++m) CHECK(counts[m] == counts[0]);
  }
}

TEST_CASE("balance_and_split is deterministic and splits are disjoint") {
  auto a = balance_and_split(counted_triples({20, 20, 20, 20, 20}), {0.8, 0.1, 0.1}, 5);
  auto b = balance_and_split(counted_triples({20, 20, 20, 20, 20}), {0.8, 0.1, 0.1}, 5);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].source_id == b.train[i].source_id);

  std::set<std::string> seen;
  for (const auto* part : {&a.train, &a.dev, &a.test})
    for (const auto& t : *part) CHECK(seen.insert(t.source_id).second);
}

TEST_CASE("balance_and_split names the missing marker") {
  auto ts = counted_triples({3, 3, 0, 3, 3});
  CHECK_THROWS_WITH_AS(balance_and_split(std::move(ts), {0.8, 0.1, 0.1}, 1),
                       doctest::Contains("because"), DataError);
}

TEST_CASE("vocabulary counts head, marker, and tail tokens from train only") {
  // 7 distinct words total: a b c and d e f
  std::vector<DiscourseTriple> train = {triple("a b c", Marker::And, "d e f")};
  Vocabulary v = Vocabulary::build(train, 1);
  CHECK(v.size() == 7 + Vocabulary::kNumReserved);
  CHECK(v.id("a") >= Vocabulary::kNumReserved);
  CHECK(v.id("and") >= Vocabulary::kNumReserved);
  // dev-only token is unknown
  CHECK(v.id("zebra") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary honors min_count") {
  std::vector<DiscourseTriple> train = {triple("rare common common", Marker::And, "common x")};
  Vocabulary v = Vocabulary::build(train, 2);
  CHECK(v.id("common") >= Vocabulary::kNumReserved);
  CHECK(v.id("rare") == Vocabulary::kUnk);
  CHECK(v.id("x") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary file round-trips with reserved tokens first") {
  std::vector<DiscourseTriple> train = {triple("a b c", Marker::And, "d e f")};
  Vocabulary v = Vocabulary::build(train, 1);
  const std::string path = "build_test_vocab.txt";
  v.save(path);

  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "<pad>");
  std::getline(is, line);
  CHECK(line == "<unk>");
  std::getline(is, line);
  CHECK(line == "<bos>");
  std::getline(is, line);
  CHECK(line == "<eos>");

  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.content_hash() == v.content_hash());
  CHECK(loaded.id("a") == v.id("a"));
  std::filesystem::remove(path);
}

TEST_CASE("triples JSONL round-trips and reports malformed lines") {
  const std::string path = "build_test_triples.jsonl";
  std::vector<DiscourseTriple> ts = {
      triple("a b c d e", Marker::When, "f g h i j", "x#1"),
      triple("k l m n o", Marker::If, "p q r s t", "x#2"),
  };
  write_triples_jsonl(path, ts);
  auto back = read_triples_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].head == ts[0].head);
  CHECK(back[0].marker == ts[0].marker);
  CHECK(back[1].tail == ts[1].tail);
  CHECK(back[1].source_id == "x#2");

  std::ofstream os(path, std::ios::app);
  os << "{not json\n";
  os.close();
  CHECK_THROWS_WITH_AS(read_triples_jsonl(path), doctest::Contains(":3"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("parse_marker_or_throw lists the legal markers") {
  CHECK(parse_marker_or_throw("when") == Marker::When);
  CHECK_THROWS_WITH_AS(parse_marker_or_throw("although"),
                       doctest::Contains("and but because if when"), UsageError);
}
