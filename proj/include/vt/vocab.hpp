#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace vt {

// Subword vocabulary with fixed special ids. Immutable after build;
// encode/decode are pure.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kBos = 5;
  static constexpr int kEos = 6;
  static constexpr int kNumSpecials = 7;

  static const std::vector<std::string>& special_tokens();

  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::string& token(int id) const;
  std::optional<int> id(const std::string& token) const;
  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  // lowercased whitespace word tokens
  static std::vector<std::string> word_tokens(const std::string& text);

  // greedy longest-match-first; nullopt when the word cannot be fully covered
  std::optional<std::vector<int>> segment_word(const std::string& word) const;

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend Vocab build_vocab(const std::vector<std::string>& corpus, int max_size,
                           int min_freq);

 private:
  void add_token(const std::string& token);
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Frequency-ranked whole words plus greedily derived "##" continuation
// subword units, truncated to max_size (specials included in the budget).
Vocab build_vocab(const std::vector<std::string>& corpus, int max_size, int min_freq);

}  // namespace vt
