#include "vt/beam.hpp"

#include <algorithm>
#include <cmath>

#include "vt/check.hpp"

namespace vt {

void Hypothesis::append(int id, double logp) {
  if (ids.size() >= 2) {
    int n = static_cast<int>(ids.size());
    trigrams.insert({ids[n - 2], ids[n - 1], id});
  }
  ids.push_back(id);
  log_prob = logp;
}

double length_penalty(int len, double alpha) {
  VT_CHECK(len >= 1, "length_penalty: len must be >= 1, got ", len);
  return std::pow((5.0 + len) / 6.0, alpha);
}

bool blocks_trigram(const Hypothesis& hyp, int candidate_id) {
  if (hyp.ids.size() < 2) return false;
  int n = static_cast<int>(hyp.ids.size());
  return hyp.trigrams.count({hyp.ids[n - 2], hyp.ids[n - 1], candidate_id}) > 0;
}

namespace {
struct Candidate {
  double log_prob;
  int token;
  int parent;
  bool blocked;
};

bool candidate_order(const Candidate& a, const Candidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.token != b.token) return a.token < b.token;
  return a.parent < b.parent;
}

bool never_generated(int id) {
  return id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep ||
         id == Vocab::kMask || id == Vocab::kBos;
}
}  // namespace

BeamResult beam_search(DecodeSession& session, const BeamConfig& config) {
  VT_CHECK(config.beam >= 1, "beam_search: beam must be >= 1, got ", config.beam);
  VT_CHECK(config.min_len >= 1 && config.max_len >= config.min_len,
           "beam_search: bad length bounds ", config.min_len, "/", config.max_len);

  const int vocab = session.vocab_size();
  VT_CHECK(vocab > Vocab::kEos, "beam_search: vocabulary too small");

  Hypothesis root;
  root.ids = {Vocab::kBos};
  std::vector<Hypothesis> alive = {root};

  BeamResult best;
  bool have_finished = false;
  auto offer_finished = [&](double score, const std::vector<int>& gen,
                            bool fallback) {
    if (!have_finished || score > best.score ||
        (score == best.score && gen < best.ids)) {
      best.score = score;
      best.ids = gen;
      best.blocked_fallback = fallback;
      have_finished = true;
    }
  };

  while (!alive.empty()) {
    std::vector<Candidate> open, blocked;
    for (int p = 0; p < static_cast<int>(alive.size()); ++p) {
      const Hypothesis& hyp = alive[p];
      auto lps = session.next_log_probs(hyp.ids);
      VT_CHECK(static_cast<int>(lps.size()) == vocab,
               "beam_search: scorer returned ", lps.size(), " log-probs for vocab ",
               vocab);
      for (int t = 0; t < vocab; ++t) {
        if (never_generated(t)) continue;
        if (t == Vocab::kEos && hyp.gen_len() < config.min_len) continue;
        double lp = hyp.log_prob + lps[t];
        bool blocks = t != Vocab::kEos && blocks_trigram(hyp, t);
        Candidate c{lp, t, p, blocks};
        (blocks ? blocked : open).push_back(c);
      }
    }

    std::sort(open.begin(), open.end(), candidate_order);
    bool fallback = false;
    if (open.empty() && !blocked.empty()) {
      // every continuation repeats a trigram: admit the best blocked
      // candidate rather than return nothing
      std::sort(blocked.begin(), blocked.end(), candidate_order);
      open.push_back(blocked.front());
      fallback = true;
    }

    // finished hypotheses compete for beam slots, so beam = 1 is greedy
    std::vector<Hypothesis> next;
    int taken = 0;
    for (const auto& c : open) {
      if (taken >= config.beam) break;
      ++taken;
      Hypothesis hyp = alive[c.parent];
      hyp.via_fallback = hyp.via_fallback || fallback;
      if (c.token == Vocab::kEos) {
        offer_finished(c.log_prob / length_penalty(hyp.gen_len(), config.alpha),
                       std::vector<int>(hyp.ids.begin() + 1, hyp.ids.end()),
                       hyp.via_fallback);
        continue;
      }
      hyp.append(c.token, c.log_prob);
      if (hyp.gen_len() >= config.max_len) {
        offer_finished(hyp.log_prob / length_penalty(hyp.gen_len(), config.alpha),
                       std::vector<int>(hyp.ids.begin() + 1, hyp.ids.end()),
                       hyp.via_fallback);
      } else {
        hyp.alive = true;
        next.push_back(std::move(hyp));
      }
    }

    // a hypothesis with log-prob L can never beat L / lp(max_len)
    if (have_finished) {
      std::erase_if(next, [&](const Hypothesis& h) {
        return h.log_prob / length_penalty(config.max_len, config.alpha) <
               best.score;
      });
    }
    alive = std::move(next);
  }

  VT_CHECK(have_finished, "beam_search: no hypothesis finished");
  return best;
}

}  // namespace vt
