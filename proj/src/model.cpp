#include "vt/model.hpp"

#include <algorithm>

#include "vt/check.hpp"

namespace vt {

Example make_example(const std::string& src_text, const std::string& tgt_text,
                     const Vocab& vocab) {
  Example ex;
  for (const auto& w : Vocab::word_tokens(src_text)) {
    auto pieces = vocab.segment_word(w);
    if (pieces) {
      for (int id : *pieces) {
        ex.src_ids.push_back(id);
        ex.src_ext_ids.push_back(id);
      }
    } else {
      // per-example extended id, assigned in source order, reused on repeats
      auto it = std::find(ex.oov_words.begin(), ex.oov_words.end(), w);
      int ext;
      if (it == ex.oov_words.end()) {
        ext = vocab.size() + static_cast<int>(ex.oov_words.size());
        ex.oov_words.push_back(w);
      } else {
        ext = vocab.size() + static_cast<int>(it - ex.oov_words.begin());
      }
      ex.src_ids.push_back(Vocab::kUnk);
      ex.src_ext_ids.push_back(ext);
    }
  }
  for (const auto& w : Vocab::word_tokens(tgt_text)) {
    auto pieces = vocab.segment_word(w);
    if (pieces) {
      for (int id : *pieces) {
        ex.tgt_ids.push_back(id);
        ex.tgt_ext_ids.push_back(id);
      }
    } else {
      auto it = std::find(ex.oov_words.begin(), ex.oov_words.end(), w);
      int ext = it == ex.oov_words.end()
                    ? Vocab::kUnk
                    : vocab.size() + static_cast<int>(it - ex.oov_words.begin());
      ex.tgt_ids.push_back(Vocab::kUnk);
      ex.tgt_ext_ids.push_back(ext);
    }
  }
  return ex;
}

std::string extended_token(int id, const Example& ex, const Vocab& vocab) {
  if (id < vocab.size()) return vocab.token(id);
  int oov = id - vocab.size();
  VT_CHECK(oov < static_cast<int>(ex.oov_words.size()), "extended id ", id,
           " outside this example's extended vocabulary");
  return ex.oov_words[static_cast<std::size_t>(oov)];
}

std::string decode_extended(const std::vector<int>& ids, const Example& ex,
                            const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (id < vocab.size() && vocab.is_special(id)) continue;
    std::string tok = extended_token(id, ex, vocab);
    if (tok.rfind("##", 0) == 0 && !out.empty()) {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += tok.rfind("##", 0) == 0 ? tok.substr(2) : tok;
    }
  }
  return out;
}

}  // namespace vt
