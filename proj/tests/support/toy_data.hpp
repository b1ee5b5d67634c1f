#ifndef TESTS_SUPPORT_TOY_DATA_HPP
#define TESTS_SUPPORT_TOY_DATA_HPP

#include <array>
#include <sstream>
#include <string>
#include <vector>

#include "transsent/corpus.hpp"

namespace test_support {

inline std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline transsent::DiscourseTriple triple(const std::string& head, transsent::Marker m,
                                         const std::string& tail, const std::string& sid = "") {
  transsent::DiscourseTriple t;
  t.head = words(head);
  t.marker = m;
  t.tail = words(tail);
  t.source_id = sid;
  return t;
}

// Three real discourse pairs with their correct markers; part of the toy DMP
// set so overfit classification can be probed on them.
inline std::vector<transsent::DiscourseTriple> table_pairs() {
  using transsent::Marker;
  return {
      triple("she was late to class", Marker::Because, "she missed the bus"),
      triple("she was good at soccer", Marker::But, "she missed the goal"),
      triple("she had a clever son", Marker::And, "she loved him"),
  };
}

// A 100-pair DMP toy set, 20 per marker, separable by construction: each
// marker owns a distinctive tail verb.
inline std::vector<transsent::DiscourseTriple> toy_dmp_pairs() {
  using transsent::Marker;
  static const std::array<const char*, 20> nouns = {
      "fox",   "wolf",  "crane", "otter", "heron", "badger", "mole",  "hare",  "lynx", "stoat",
      "raven", "finch", "robin", "wren",  "owl",   "deer",   "moose", "bison", "seal", "whale"};
  static const std::array<const char*, 5> verbs = {"greets", "avoids", "needs", "tests",
                                                   "finds"};
  std::vector<transsent::DiscourseTriple> out = table_pairs();
  // table pairs cover and/but/because; fill to 20 per marker
  const std::array<int, 5> fill = {19, 19, 19, 20, 20};
  for (int m = 0; m < transsent::kNumMarkers; ++m) {
    for (int i = 0; i < fill[m]; ++i) {
      const std::string head = std::string("the ") + nouns[i] + " looked very calm";
      const std::string tail = std::string("it ") + verbs[m] + " the brown " + nouns[i];
      out.push_back(triple(head, transsent::kAllMarkers[m], tail));
    }
  }
  return out;
}

// Synthetic grammar for end-to-end transfer: the tail is a deterministic
// template function of (head index, marker). 5 markers x `num_heads` heads.
inline std::vector<transsent::DiscourseTriple> synthetic_grammar(int num_heads = 40) {
  using transsent::Marker;
  static const std::array<const char*, 40> nouns = {
      "fox",   "wolf",  "crane",  "otter", "heron", "badger", "mole",   "hare",
      "lynx",  "stoat", "raven",  "finch", "robin", "wren",   "owl",    "deer",
      "moose", "bison", "seal",   "whale", "trout", "perch",  "pike",   "carp",
      "bee",   "wasp",  "ant",    "moth",  "crab",  "gull",   "tern",   "swan",
      "goose", "duck",  "swift",  "lark",  "thrush", "ferret", "mink",  "vole"};
  static const std::array<const char*, 40> places = {
      "harbor",  "meadow",  "forest",  "valley",  "garden",  "market",  "bridge",  "castle",
      "temple",  "museum",  "library", "station", "airport", "bakery",  "cinema",  "stadium",
      "chapel",  "cottage", "quarry",  "canyon",  "desert",  "island",  "lagoon",  "tunnel",
      "tower",   "palace",  "prison",  "school",  "office",  "studio",  "theater", "village",
      "suburb",  "kitchen", "cellar",  "attic",   "balcony", "courtyard", "orchard", "vineyard"};
  static const std::array<const char*, 5> verbs = {"joins", "avoids", "needs", "tests", "finds"};

  std::vector<transsent::DiscourseTriple> out;
  for (int m = 0; m < transsent::kNumMarkers; ++m) {
    for (int i = 0; i < num_heads; ++i) {
      const std::string head = std::string("the ") + nouns[i] + " waits near the " + places[i];
      const std::string tail =
          std::string("it ") + verbs[m] + " the " + nouns[i] + " by the " + places[i];
      std::ostringstream sid;
      sid << "grammar#" << m << "." << i;
      out.push_back(triple(head, transsent::kAllMarkers[m], tail, sid.str()));
    }
  }
  return out;
}

// gold tail for a grammar entry, mirroring synthetic_grammar
inline std::vector<std::string> grammar_gold_tail(const transsent::DiscourseTriple& t) {
  return t.tail;
}

}  // namespace test_support

#endif  // TESTS_SUPPORT_TOY_DATA_HPP
