#pragma once

#include <cstdint>

#include "vt/corpus.hpp"
#include "vt/transformer.hpp"

namespace vt {

struct PretrainConfig {
  std::int64_t steps = 2000;  // desk-scale default; the paper-scale run is 200,000
  double lr = 2e-5;           // flat Adam rate
  int batch_size = 8;
  std::int64_t eval_every = 200;
  double holdout_frac = 0.05;
  std::uint64_t seed = 0;
};

struct PretrainReportRow {
  std::int64_t step = 0;
  double mlm_accuracy = 0.0;
  double nsp_accuracy = 0.0;
  double loss = 0.0;
};

struct PretrainReport {
  std::vector<PretrainReportRow> rows;
  std::string to_csv() const;  // step,mlm_acc,nsp_acc,loss
};

struct MlmResult {
  Tensor loss;              // mean NLL over masked positions
  int correct = 0;          // argmax hits
  int total = 0;
};

struct NspResult {
  Tensor loss;  // binary cross-entropy on the [CLS] state
  bool correct = false;
};

struct PretrainResult {
  ParamMap checkpoint;
  PretrainReport report;
};

// Encoder further-pretraining with masked-token and next-sentence heads.
class Pretrainer {
 public:
  Pretrainer(LayerConfig config, int vocab_size, std::uint64_t seed);
  explicit Pretrainer(LayerConfig config, int vocab_size, ParamMap params);

  ParamMap& params() { return params_; }
  const ParamMap& params() const { return params_; }

  Tensor encode(Tape& tape, const PretrainInstance& inst) const {
    return encoder_.encode(tape, inst.ids);
  }

  MlmResult mlm_loss(Tape& tape, const PretrainInstance& inst,
                     const Tensor& encoder_out) const;
  NspResult nsp_loss(Tape& tape, const PretrainInstance& inst,
                     const Tensor& encoder_out) const;

  // mean (mlm + nsp) loss and task accuracies over a fixed slice
  PretrainReportRow evaluate(const std::vector<PretrainInstance>& slice,
                             std::int64_t step) const;

 private:
  friend PretrainResult pretrain(const std::vector<std::string>& descriptions,
                                 const Vocab& vocab, LayerConfig layer_config,
                                 const PretrainConfig& config);
  LayerConfig layer_config_;
  int vocab_size_;
  TransformerModel encoder_;  // dec_layers forced to 0
  ParamMap params_;           // encoder parameters plus mlm/nsp heads
};

PretrainResult pretrain(const std::vector<std::string>& descriptions,
                        const Vocab& vocab, LayerConfig layer_config,
                        const PretrainConfig& config);

}  // namespace vt
