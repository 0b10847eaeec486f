#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vt/vocab.hpp"

namespace vt {

struct TitlePair {
  std::string web_title;
  std::string voice_title;
  std::map<std::string, std::string> metadata;  // brand, container, size
};

struct CorpusStats {
  double avg_web_len = 0.0;
  double avg_voice_len = 0.0;
  double avg_unique_web = 0.0;
  double avg_unique_voice = 0.0;
  double avg_novel_unigrams = 0.0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
};

struct SplitResult {
  std::vector<TitlePair> train, val, test;
};

struct SyntheticData {
  std::vector<TitlePair> pairs;
  std::vector<std::string> descriptions;
};

struct PretrainInstance {
  std::vector<int> ids;               // [CLS] a [SEP] b [SEP], length <= 128
  std::vector<int> masked_positions;  // distinct, never special positions, <= 20
  std::vector<int> original_ids;      // gold ids at masked positions
  bool is_next = false;
};

inline constexpr int kMaxPretrainLen = 128;
inline constexpr int kMaxPredictions = 20;

// Tab-separated: web_title, voice_title, optional "k=v;k=v" metadata.
std::vector<TitlePair> load_pairs(const std::string& path);
void save_pairs(const std::vector<TitlePair>& pairs, const std::string& path);

// web_title followed by " | " and metadata values in brand, container, size order.
std::string augment_with_metadata(const TitlePair& pair);

// Deterministic shuffle, 72/10/18 partition.
SplitResult split(const std::vector<TitlePair>& pairs, std::uint64_t seed);

CorpusStats compute_stats(const std::vector<TitlePair>& pairs);

// "a"/"an" by the vowel sound of the spoken form of the following word.
std::string article_for(const std::string& word);

// Templated grocery-style pairs plus multi-sentence product descriptions.
SyntheticData generate_synthetic(int n, std::uint64_t seed);

// Brand surface forms the generator can emit; exposed so holdout experiments
// can exclude specific brands from training.
const std::vector<std::string>& synthetic_brands();
// Single-token brands that never segment into pieces of the rest of the grammar.
const std::vector<std::string>& synthetic_exotic_brands();

std::vector<PretrainInstance> make_pretrain_instances(
    const std::vector<std::string>& descriptions, const Vocab& vocab,
    std::uint64_t seed);

}  // namespace vt
