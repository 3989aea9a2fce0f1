#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vlc::data {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kCls = 1;
inline constexpr TokenId kMask = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReserved = 4;
inline constexpr std::size_t kNoMinCount = std::numeric_limits<std::size_t>::max();

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// Word-level vocabulary with four reserved ids in front.
class Vocab {
 public:
  Vocab() : words_{"[PAD]", "[CLS]", "[MASK]", "[UNK]"} {}

  // Words seen at least `min_count` times, ordered by (count desc, word asc).
  template <typename Range>
  static Vocab build(const Range& captions, std::size_t min_count) {
    std::map<std::string, std::size_t> counts;
    std::size_t seen = 0;
    for (const auto& caption : captions) {
      ++seen;
      for (auto& w : split_words(caption)) ++counts[w];
    }
    if (seen == 0) throw std::invalid_argument("build_vocab: empty corpus");
    std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (const auto& [word, count] : sorted)
      if (count >= min_count) v.add(word);
    return v;
  }

  static Vocab from_words(const std::vector<std::string>& words) {
    Vocab v;
    for (const auto& w : words) v.add(w);
    return v;
  }

  std::size_t size() const { return words_.size(); }
  bool contains(const std::string& word) const { return ids_.count(word) > 0; }

  TokenId id(const std::string& word) const {
    auto it = ids_.find(word);
    return it == ids_.end() ? kUnk : it->second;
  }

  const std::string& word(TokenId id) const { return words_.at(static_cast<std::size_t>(id)); }

  // Non-reserved tokens in id order.
  std::vector<std::string> entries() const { return {words_.begin() + kReserved, words_.end()}; }

  // One token per line; line i holds id kReserved + i.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocab file " + path);
    for (std::size_t i = kReserved; i < words_.size(); ++i) out << words_[i] << '\n';
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read vocab file " + path);
    Vocab v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || v.contains(line)) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty or duplicate token");
      }
      v.add(line);
    }
    return v;
  }

  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  void add(const std::string& word) {
    ids_.emplace(word, static_cast<TokenId>(words_.size()));
    words_.push_back(word);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

template <typename Range>
Vocab build_vocab(const Range& captions, std::size_t min_count) {
  return Vocab::build(captions, min_count);
}

// Token ids for one caption: CLS first, then words, then PAD up to max_len.
struct EncodedText {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> valid;  // 0 at PAD positions
};

inline EncodedText encode(std::string_view caption, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw std::invalid_argument("encode: max_len must be >= 2");
  EncodedText out;
  out.ids.assign(max_len, kPad);
  out.valid.assign(max_len, 0);
  out.ids[0] = kCls;
  out.valid[0] = 1;
  std::size_t pos = 1;
  for (const auto& w : split_words(caption)) {
    if (pos == max_len) break;
    out.ids[pos] = vocab.id(w);
    out.valid[pos] = 1;
    ++pos;
  }
  return out;
}

// Words for non-PAD, non-CLS ids, space separated.
inline std::string decode(const std::vector<TokenId>& ids, const Vocab& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPad || id == kCls) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.word(id);
  }
  return out;
}

}  // namespace vlc::data
