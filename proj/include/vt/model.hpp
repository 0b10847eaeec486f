#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vt/checkpoint.hpp"
#include "vt/corpus.hpp"
#include "vt/tensor.hpp"
#include "vt/vocab.hpp"

namespace vt {

// A tokenized training/decoding example. Extended ids cover the base
// vocabulary plus this example's OOV source words, assigned in source order.
struct Example {
  std::vector<int> src_ids;       // base vocab, OOV words as [UNK]
  std::vector<int> src_ext_ids;   // extended ids per source position
  std::vector<int> tgt_ids;       // base vocab gold, no [BOS]/[EOS]
  std::vector<int> tgt_ext_ids;   // extended-vocab gold
  std::vector<std::string> oov_words;  // extended id base+i -> source word
};

Example make_example(const std::string& src_text, const std::string& tgt_text,
                     const Vocab& vocab);

// surface form of an extended id (vocab token or copied source word)
std::string extended_token(int id, const Example& ex, const Vocab& vocab);
// decode a generated extended-id sequence to a sentence
std::string decode_extended(const std::vector<int>& ids, const Example& ex,
                            const Vocab& vocab);

// Next-token scorer over a frozen model for one source example.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;
  // log-probabilities over the (extended) vocabulary given the prefix,
  // which always starts with [BOS]
  virtual std::vector<double> next_log_probs(const std::vector<int>& prefix) = 0;
  virtual int vocab_size() const = 0;
};

class SummarizationModel {
 public:
  virtual ~SummarizationModel() = default;
  virtual ParamMap& params() = 0;
  virtual const ParamMap& params() const = 0;
  // teacher-forced NLL (plus any auxiliary terms) for one example
  virtual Tensor loss(Tape& tape, const Example& ex) = 0;
  virtual bool is_encoder_param(const std::string& name) const = 0;
  virtual std::unique_ptr<DecodeSession> decode_session(const Example& ex) const = 0;
};

}  // namespace vt
