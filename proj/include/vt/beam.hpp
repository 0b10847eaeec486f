#pragma once

#include <array>
#include <set>
#include <vector>

#include "vt/model.hpp"

namespace vt {

struct Hypothesis {
  std::vector<int> ids;  // starts with [BOS]; [EOS] never appended
  double log_prob = 0.0;
  bool alive = true;
  bool via_fallback = false;  // contains an admitted repeated trigram
  std::set<std::array<int, 3>> trigrams;

  int gen_len() const { return static_cast<int>(ids.size()) - 1; }
  void append(int id, double logp);
};

struct BeamConfig {
  int beam = 5;
  double alpha = 0.95;
  int min_len = 4;
  int max_len = 50;
};

struct BeamResult {
  std::vector<int> ids;  // generated tokens, no [BOS]/[EOS]
  double score = 0.0;    // log_prob / length_penalty
  bool blocked_fallback = false;  // a repeated trigram had to be admitted
};

// ((5 + len) / 6)^alpha
double length_penalty(int len, double alpha);

// true iff (last two ids, candidate) already occurs in hyp
bool blocks_trigram(const Hypothesis& hyp, int candidate_id);

// [EOS] is suppressed below min_len, hypotheses are force-finished at
// max_len, and ties break toward the lower token id.
BeamResult beam_search(DecodeSession& session, const BeamConfig& config);

}  // namespace vt
