#pragma once

#include <cstdint>

#include "vt/model.hpp"

namespace vt {

struct LayerConfig {
  int hidden = 64;
  int heads = 4;
  int ffn = 128;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_positions = 128;
};

void validate(const LayerConfig& config);

// Post-norm transformer encoder-decoder with BERT-style input construction
// on the encoder side ([CLS] ... [SEP], token + position + segment sums).
class TransformerModel : public SummarizationModel {
 public:
  TransformerModel(LayerConfig config, int vocab_size, std::uint64_t seed);
  TransformerModel(LayerConfig config, int vocab_size, ParamMap params);

  ParamMap& params() override { return params_; }
  const ParamMap& params() const override { return params_; }

  // x_i = E_token + E_pos + E_A; caller provides [CLS]/[SEP] framing
  Tensor embed_input(Tape& tape, const std::vector<int>& ids) const;

  // one encoder layer; key_mask (optional) excludes padding key positions
  Tensor transformer_layer(Tape& tape, const Tensor& h_prev, int layer,
                           const std::vector<bool>* key_mask = nullptr) const;

  // full encoder stack over framed ids
  Tensor encode(Tape& tape, const std::vector<int>& framed_ids,
                const std::vector<bool>* key_mask = nullptr) const;

  // causally masked decoder with cross-attention over z; rows are
  // softmax-normalized next-token distributions
  Tensor decode_probs(Tape& tape, const std::vector<int>& prefix_ids,
                      const Tensor& z) const;

  Tensor loss(Tape& tape, const Example& ex) override;
  bool is_encoder_param(const std::string& name) const override;
  std::unique_ptr<DecodeSession> decode_session(const Example& ex) const override;

  // replaces the token embedding table (eBERT initialization)
  void load_encoder_init(const ParamMap& pretrained);

  const LayerConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }
  static std::vector<int> frame_source(const std::vector<int>& src_ids);

 private:
  Tensor param(const std::string& name) const;
  Tensor attention_block(Tape& tape, const Tensor& queries, const Tensor& keys,
                         const std::string& prefix,
                         const std::vector<double>* mask) const;

  LayerConfig config_;
  int vocab_size_ = 0;
  ParamMap params_;
};

}  // namespace vt
