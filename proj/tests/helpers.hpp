#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "vt/rng.hpp"
#include "vt/tensor.hpp"

namespace testutil {

inline vt::Tensor random_tensor(vt::Shape shape, vt::Rng& rng, double lim = 1.0,
                                bool requires_grad = true) {
  vt::Tensor t = vt::Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = rng.uniform(-lim, lim);
  return t;
}

// --- independent metric oracles -------------------------------------------

// clipped n-gram overlap F1 via explicit multiset maps
inline double oracle_rouge_n(const std::vector<std::string>& cand,
                             const std::vector<std::string>& ref, int n) {
  auto grams = [&](const std::vector<std::string>& words) {
    std::map<std::vector<std::string>, int> counts;
    for (int i = 0; i + n <= static_cast<int>(words.size()); ++i)
      ++counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)];
    return counts;
  };
  auto gc = grams(cand), gr = grams(ref);
  long long total_c = 0, total_r = 0, overlap = 0;
  for (const auto& [g, c] : gc) total_c += c;
  for (const auto& [g, c] : gr) total_r += c;
  for (const auto& [g, c] : gc) {
    auto it = gr.find(g);
    if (it != gr.end()) overlap += std::min(c, it->second);
  }
  if (total_c == 0 || total_r == 0 || overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / total_c;
  double r = static_cast<double>(overlap) / total_r;
  return 2.0 * p * r / (p + r);
}

// plain recursion, no DP table; fine for the short sequences tested
inline int oracle_lcs(const std::vector<std::string>& a,
                      const std::vector<std::string>& b, std::size_t i,
                      std::size_t j) {
  if (i == a.size() || j == b.size()) return 0;
  if (a[i] == b[j]) return 1 + oracle_lcs(a, b, i + 1, j + 1);
  return std::max(oracle_lcs(a, b, i + 1, j), oracle_lcs(a, b, i, j + 1));
}

inline double oracle_rouge_l(const std::vector<std::string>& cand,
                             const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  int l = oracle_lcs(cand, ref, 0, 0);
  if (l == 0) return 0.0;
  double p = static_cast<double>(l) / cand.size();
  double r = static_cast<double>(l) / ref.size();
  return 2.0 * p * r / (p + r);
}

inline int oracle_duplicates(const std::vector<std::string>& words) {
  int dup = 0;
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (words[i] == words[j]) {
        ++dup;
        break;
      }
  return dup;
}

}  // namespace testutil
