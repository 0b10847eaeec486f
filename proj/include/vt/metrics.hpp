#pragma once

#include <string>
#include <vector>

namespace vt {

struct EvalReport {
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougeL_f1 = 0.0;
  double avg_duplicates = 0.0;
  std::size_t n_examples = 0;

  std::string to_keyvalue() const;
  std::string to_csv_row() const;
};

// All metrics operate on lowercase whitespace word tokens.
std::vector<std::string> metric_tokens(const std::string& sentence);

// Clipped n-gram overlap F1, n in {1, 2}.
double rouge_n(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference, int n);

// LCS-based F1.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference);

// total tokens minus distinct tokens
int duplicate_unigrams(const std::vector<std::string>& sentence);

EvalReport evaluate_corpus(const std::vector<std::string>& predictions,
                           const std::vector<std::string>& references);

// File variant: one sentence per line; errors on line-count mismatch.
EvalReport evaluate_corpus_files(const std::string& predictions_path,
                                 const std::string& references_path);

}  // namespace vt
