#include "vt/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vt/check.hpp"
#include "vt/vocab.hpp"

namespace vt {

std::string EvalReport::to_keyvalue() const {
  std::ostringstream os;
  os << "rouge1_f1=" << rouge1_f1 << "\n"
     << "rouge2_f1=" << rouge2_f1 << "\n"
     << "rougeL_f1=" << rougeL_f1 << "\n"
     << "avg_duplicates=" << avg_duplicates << "\n"
     << "n_examples=" << n_examples << "\n";
  return os.str();
}

std::string EvalReport::to_csv_row() const {
  std::ostringstream os;
  os << rouge1_f1 << "," << rouge2_f1 << "," << rougeL_f1 << "," << avg_duplicates
     << "," << n_examples;
  return os.str();
}

std::vector<std::string> metric_tokens(const std::string& sentence) {
  return Vocab::word_tokens(sentence);
}

namespace {

double f1(double p, double r) {
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& words, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i)
    counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)] += 1;
  return counts;
}

}  // namespace

double rouge_n(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference, int n) {
  VT_CHECK(n == 1 || n == 2, "rouge_n: n must be 1 or 2, got ", n);
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  long long cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [g, c] : cand) cand_total += c;
  for (const auto& [g, c] : ref) ref_total += c;
  if (cand_total == 0 || ref_total == 0) return 0.0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);  // clipped
  }
  double p = static_cast<double>(overlap) / static_cast<double>(cand_total);
  double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
  return f1(p, r);
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
  std::size_t m = candidate.size(), n = reference.size();
  if (m == 0 || n == 0) return 0.0;
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  int lcs = prev[n];
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(m);
  double r = static_cast<double>(lcs) / static_cast<double>(n);
  return f1(p, r);
}

int duplicate_unigrams(const std::vector<std::string>& sentence) {
  std::set<std::string> distinct(sentence.begin(), sentence.end());
  return static_cast<int>(sentence.size()) - static_cast<int>(distinct.size());
}

EvalReport evaluate_corpus(const std::vector<std::string>& predictions,
                           const std::vector<std::string>& references) {
  VT_CHECK(predictions.size() == references.size(),
           "evaluate_corpus: line count mismatch: ", predictions.size(),
           " predictions vs ", references.size(), " references");
  VT_CHECK(!predictions.empty(), "evaluate_corpus: no examples");
  EvalReport rep;
  rep.n_examples = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto cand = metric_tokens(predictions[i]);
    auto ref = metric_tokens(references[i]);
    rep.rouge1_f1 += rouge_n(cand, ref, 1);
    rep.rouge2_f1 += rouge_n(cand, ref, 2);
    rep.rougeL_f1 += rouge_l(cand, ref);
    rep.avg_duplicates += duplicate_unigrams(cand);
  }
  double n = static_cast<double>(rep.n_examples);
  rep.rouge1_f1 /= n;
  rep.rouge2_f1 /= n;
  rep.rougeL_f1 /= n;
  rep.avg_duplicates /= n;
  return rep;
}

namespace {
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  VT_CHECK(is.good(), "cannot open ", path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}
}  // namespace

EvalReport evaluate_corpus_files(const std::string& predictions_path,
                                 const std::string& references_path) {
  return evaluate_corpus(read_lines(predictions_path), read_lines(references_path));
}

}  // namespace vt
