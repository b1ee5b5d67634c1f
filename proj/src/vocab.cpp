#include "transsent/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "transsent/errors.hpp"

namespace transsent {

Vocabulary::Vocabulary() {
  push("<pad>");
  push("<unk>");
  push("<bos>");
  push("<eos>");
}

void Vocabulary::push(std::string token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<DiscourseTriple>& train, int min_count) {
  std::map<std::string, std::int64_t> counts;  // ordered map keeps ties deterministic
  for (const DiscourseTriple& t : train) {
    for (const std::string& tok : t.head) ++counts[tok];
    for (const std::string& tok : t.tail) ++counts[tok];
    ++counts[std::string(marker_name(t.marker))];
  }
  std::vector<std::pair<std::string, std::int64_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, count] : sorted)
    if (count >= min_count) v.push(tok);
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + path);
  for (const std::string& t : tokens_) os << t << "\n";
  if (!os) throw DataError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    if (line_no < kNumReserved) {
      if (line != v.tokens_[line_no])
        throw DataError("vocabulary file " + path + " has wrong reserved token at line " +
                        std::to_string(line_no + 1));
    } else {
      if (v.ids_.count(line))
        throw DataError("vocabulary file " + path + " has duplicate token: " + line);
      v.push(line);
    }
    ++line_no;
  }
  if (line_no < kNumReserved) throw DataError("vocabulary file " + path + " is truncated");
  return v;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ull;
    }
  };
  for (const std::string& t : tokens_) {
    mix(t.data(), t.size());
    mix("\n", 1);
  }
  return h;
}

}  // namespace transsent
