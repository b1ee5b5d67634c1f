#ifndef TRANSSENT_VOCAB_HPP
#define TRANSSENT_VOCAB_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "transsent/corpus.hpp"

namespace transsent {

// Token <-> id map with four fixed reserved ids. Unknown lookups return UNK.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();

  // Counts tokens over head, marker, and tail of every training triple; every
  // token with frequency >= min_count gets an id. Ordered by descending
  // frequency, ties broken lexicographically.
  static Vocabulary build(const std::vector<DiscourseTriple>& train, int min_count);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_[id]; }
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  // One token per line, line number = id, reserved tokens first.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  std::uint64_t content_hash() const;

 private:
  void push(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace transsent

#endif  // TRANSSENT_VOCAB_HPP
