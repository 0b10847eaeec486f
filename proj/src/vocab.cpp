#include "vt/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "vt/check.hpp"
#include "vt/checkpoint.hpp"

namespace vt {

namespace {
std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}
}  // namespace

const std::vector<std::string>& Vocab::special_tokens() {
  static const std::vector<std::string> kSpecials = {
      "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[BOS]", "[EOS]"};
  return kSpecials;
}

const std::string& Vocab::token(int id) const {
  VT_CHECK(id >= 0 && id < size(), "vocab: id ", id, " out of range [0,", size(), ")");
  return id_to_token_[id];
}

std::optional<int> Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

void Vocab::add_token(const std::string& token) {
  token_to_id_.emplace(token, size());
  id_to_token_.push_back(token);
}

std::vector<std::string> Vocab::word_tokens(const std::string& text) {
  std::istringstream is(lowercase(text));
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::optional<std::vector<int>> Vocab::segment_word(const std::string& word) const {
  std::vector<int> pieces;
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::size_t best_len = 0;
    int best_id = -1;
    for (std::size_t len = word.size() - pos; len >= 1; --len) {
      std::string cand = word.substr(pos, len);
      if (pos > 0) cand = "##" + cand;
      auto it = token_to_id_.find(cand);
      if (it != token_to_id_.end() && !is_special(it->second)) {
        best_len = len;
        best_id = it->second;
        break;
      }
    }
    if (best_id < 0) return std::nullopt;
    pieces.push_back(best_id);
    pos += best_len;
  }
  return pieces;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> out;
  for (const auto& w : word_tokens(text)) {
    auto pieces = segment_word(w);
    if (pieces)
      out.insert(out.end(), pieces->begin(), pieces->end());
    else
      out.push_back(kUnk);
  }
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    VT_CHECK(id >= 0 && id < size(), "decode: id ", id, " out of range [0,", size(), ")");
    if (is_special(id)) continue;
    const std::string& tok = id_to_token_[id];
    if (tok.rfind("##", 0) == 0 && !out.empty() && out.back() != ' ') {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += tok.rfind("##", 0) == 0 ? tok.substr(2) : tok;
    }
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  std::string contents;
  for (const auto& t : id_to_token_) {
    contents += t;
    contents += '\n';
  }
  atomic_write(path, contents);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  VT_CHECK(is.good(), "vocab: cannot open ", path);
  Vocab v;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) v.add_token(line);
  }
  VT_CHECK(v.size() >= kNumSpecials, "vocab: file ", path, " too small");
  for (int i = 0; i < kNumSpecials; ++i)
    VT_CHECK(v.id_to_token_[i] == special_tokens()[i],
             "vocab: special token mismatch at id ", i);
  return v;
}

Vocab build_vocab(const std::vector<std::string>& corpus, int max_size, int min_freq) {
  VT_CHECK(max_size > Vocab::kNumSpecials, "build_vocab: max_size must exceed ",
           Vocab::kNumSpecials);
  VT_CHECK(min_freq >= 1, "build_vocab: min_freq must be >= 1");

  std::map<std::string, long long> counts;
  bool any = false;
  for (const auto& line : corpus) {
    for (const auto& w : Vocab::word_tokens(line)) {
      any = true;
      counts[w] += 1;
      // continuation units: suffixes usable after a word-initial match
      for (std::size_t i = 1; i < w.size(); ++i) counts["##" + w.substr(i)] += 1;
    }
  }
  VT_CHECK(any, "build_vocab: empty corpus");

  // corpus counting never yields special tokens
  for (const auto& s : Vocab::special_tokens()) counts.erase(lowercase(s));

  std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  for (const auto& s : Vocab::special_tokens()) v.add_token(s);
  for (const auto& [tok, freq] : ranked) {
    if (v.size() >= max_size) break;
    if (freq < min_freq) break;
    v.add_token(tok);
  }
  return v;
}

}  // namespace vt
