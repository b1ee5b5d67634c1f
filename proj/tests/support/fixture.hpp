#ifndef TESTS_SUPPORT_FIXTURE_HPP
#define TESTS_SUPPORT_FIXTURE_HPP

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "support/toy_data.hpp"
#include "transsent/corpus.hpp"

namespace test_support {

// Hand-annotated expectations for tests/fixtures/fixture_corpus.txt.
// Triples are extraction output in document order; `kept` marks the ones
// surviving the 5..15 word length filter.
struct FixtureTriple {
  const char* head;
  transsent::Marker marker;
  const char* tail;
  bool kept;
};

inline const std::vector<FixtureTriple>& fixture_expectations() {
  using transsent::Marker;
  static const std::vector<FixtureTriple> expected = {
      {"she was late to class", Marker::Because, "she missed the bus", false},
      {"i wore a jacket", Marker::Because, "it was cold outside", false},
      {"she was good at soccer", Marker::But, "she missed the goal yesterday", true},
      {"the old man smiled warmly", Marker::And, "the children laughed with joy", true},
      {"we will walk to the harbor", Marker::If, "the winter rain ever stops", true},
      {"every student rushed into the yard", Marker::When, "the morning bell rang loudly", true},
      {"all the lights went out", Marker::When, "the storm hit our town", true},
      {"the tired crew of the little red boat rowed hard against the rising evening tide",
       Marker::Because, "they feared the sudden storm", true},
      {"the very tired crew of the little red boat rowed hard against the rising evening tide",
       Marker::Because, "they feared the sudden storm", false},
      {"the crowd cheered wildly", Marker::And, "the band played on", false},
      {"she waited by the phone all night", Marker::But, "he never called her back", true},
      {"the chef cooked a fine meal", Marker::Because, "the guests arrived very hungry", true},
      {"you should bring a warm coat", Marker::If, "the mountain weather turns cold", true},
      {"my brother plays the old piano", Marker::And, "my sister sings every evening", true},
      {"the team kept training hard", Marker::Because, "the final match was near", true},
      {"cats meow loudly in the dark garden", Marker::When, "strangers pass the gate", false},
  };
  return expected;
}

inline std::set<std::string> triple_keys(const std::vector<transsent::DiscourseTriple>& ts) {
  std::set<std::string> keys;
  for (const auto& t : ts)
    keys.insert(transsent::join_tokens(t.head) + " | " + std::string(marker_name(t.marker)) +
                " | " + transsent::join_tokens(t.tail));
  return keys;
}

inline std::set<std::string> expected_keys(bool kept_only) {
  std::set<std::string> keys;
  for (const FixtureTriple& f : fixture_expectations()) {
    if (kept_only && !f.kept) continue;
    keys.insert(std::string(f.head) + " | " + std::string(marker_name(f.marker)) + " | " +
                f.tail);
  }
  return keys;
}

}  // namespace test_support

#endif  // TESTS_SUPPORT_FIXTURE_HPP
