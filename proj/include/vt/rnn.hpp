#pragma once

#include <cstdint>
#include <optional>

#include "vt/model.hpp"

namespace vt {

enum class RnnFamily { kSeq2Seq, kPtrNet, kPtrNetCoverage };

RnnFamily rnn_family_from_string(const std::string& name);
std::string rnn_family_name(RnnFamily family);

struct RnnConfig {
  RnnFamily family = RnnFamily::kSeq2Seq;
  int embed = 64;
  int hidden = 64;
  int attn = 64;
  double coverage_weight = 1.0;
  bool coverage_enabled = false;  // phase two of Ptr-Net + Coverage training
};

struct AttentionParams {
  Tensor w_h;     // [hidden x attn]
  Tensor w_s;     // [hidden x attn]
  Tensor b_attn;  // [attn]
  Tensor v;       // [attn x 1]
};

struct PointerParams {
  Tensor w_hstar;  // [hidden x 1]
  Tensor w_s;      // [hidden x 1]
  Tensor w_x;      // [embed x 1]
  Tensor b_ptr;    // [1]
};

struct AttendResult {
  Tensor attn;     // [src_len], sums to 1
  Tensor context;  // [hidden]
};

// a_i = softmax_i(v . tanh(W_h h_i + W_s s_t + b_attn)); context = sum a_i h_i
AttendResult attend(Tape& tape, const Tensor& enc_states, const Tensor& dec_state,
                    const AttentionParams& p);

// sigma(w_hstar.context + w_s.s_t + w_x.x_t + b_ptr), scalar in (0,1)
Tensor generation_prob(Tape& tape, const Tensor& context, const Tensor& dec_state,
                       const Tensor& input_embedding, const PointerParams& p);

// P(w) = p_gen * P_vocab(w) + (1 - p_gen) * sum_{i: w_i = w} a_i over the
// extended vocabulary; OOV source tokens receive only copy mass.
Tensor final_distribution(Tape& tape, const Tensor& p_vocab, const Tensor& attn,
                          const Tensor& p_gen, const std::vector<int>& src_ext_ids,
                          int extended_size);

// sum_i min(a_i, c_i)
Tensor coverage_loss(Tape& tape, const Tensor& attn, const Tensor& coverage);

// Single-layer unidirectional LSTM encoder, LSTM decoder with additive
// attention; pointer mixing and coverage per family.
class RnnModel : public SummarizationModel {
 public:
  RnnModel(RnnConfig config, int vocab_size, std::uint64_t seed);
  RnnModel(RnnConfig config, int vocab_size, ParamMap params);

  ParamMap& params() override { return params_; }
  const ParamMap& params() const override { return params_; }
  Tensor loss(Tape& tape, const Example& ex) override {
    return loss_impl(tape, ex, std::nullopt);
  }
  // pgen_override pins the generation probability (used to show p_gen = 1
  // collapses the pointer model onto plain seq2seq)
  Tensor loss_impl(Tape& tape, const Example& ex, std::optional<double> pgen_override);

  bool is_encoder_param(const std::string& name) const override;
  std::unique_ptr<DecodeSession> decode_session(const Example& ex) const override;

  const RnnConfig& config() const { return config_; }
  void set_coverage_enabled(bool on) { config_.coverage_enabled = on; }
  int vocab_size() const { return vocab_size_; }

 private:
  friend class RnnDecodeSession;
  struct StepOut {
    Tensor dist;  // extended (pointer) or base (seq2seq) distribution
    Tensor attn;
  };
  // one teacher-forced / decoding step; state tensors are updated in place
  StepOut step(Tape& tape, const Example& ex, int input_id, Tensor& s, Tensor& c,
               const Tensor& enc_states, std::optional<double> pgen_override) const;
  Tensor param(const std::string& suffix) const;

  RnnConfig config_;
  int vocab_size_ = 0;
  ParamMap params_;
};

}  // namespace vt
