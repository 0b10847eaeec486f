#include "vt/transformer.hpp"

#include <cmath>
#include <limits>

#include "vt/check.hpp"
#include "vt/rng.hpp"

namespace vt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor fanin_init(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape, true);
  double std = 1.0 / std::sqrt(static_cast<double>(shape[0]));
  for (auto& v : t.values()) v = rng.normal(0.0, std);
  return t;
}

Tensor ones(Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = 1.0;
  return t;
}

}  // namespace

void validate(const LayerConfig& config) {
  VT_CHECK(config.hidden > 0 && config.heads > 0 && config.ffn > 0 &&
               config.enc_layers >= 0 && config.dec_layers >= 0 &&
               config.max_positions > 0,
           "layer config fields must be positive");
  VT_CHECK(config.hidden % config.heads == 0, "hidden (", config.hidden,
           ") must be divisible by heads (", config.heads, ")");
}

TransformerModel::TransformerModel(LayerConfig config, int vocab_size,
                                   std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  validate(config_);
  Rng rng(seed);
  int hid = config_.hidden, dh = hid / config_.heads;

  params_["encoder.embed.token"] = fanin_init({vocab_size, hid}, rng);
  params_["encoder.embed.pos"] = fanin_init({config_.max_positions, hid}, rng);
  params_["encoder.embed.seg"] = fanin_init({1, hid}, rng);
  params_["decoder.embed.pos"] = fanin_init({config_.max_positions, hid}, rng);

  auto add_attention = [&](const std::string& prefix) {
    for (int h = 0; h < config_.heads; ++h) {
      std::string hp = prefix + ".h" + std::to_string(h);
      params_[hp + ".wq"] = fanin_init({hid, dh}, rng);
      params_[hp + ".wk"] = fanin_init({hid, dh}, rng);
      params_[hp + ".wv"] = fanin_init({hid, dh}, rng);
    }
    params_[prefix + ".proj_w"] = fanin_init({hid, hid}, rng);
    params_[prefix + ".proj_b"] = Tensor::zeros({hid}, true);
  };
  auto add_ln = [&](const std::string& prefix) {
    params_[prefix + ".g"] = ones({hid});
    params_[prefix + ".b"] = Tensor::zeros({hid}, true);
  };
  auto add_ffn = [&](const std::string& prefix) {
    params_[prefix + ".w1"] = fanin_init({hid, config_.ffn}, rng);
    params_[prefix + ".b1"] = Tensor::zeros({config_.ffn}, true);
    params_[prefix + ".w2"] = fanin_init({config_.ffn, hid}, rng);
    params_[prefix + ".b2"] = Tensor::zeros({hid}, true);
  };

  for (int l = 0; l < config_.enc_layers; ++l) {
    std::string lp = "encoder.L" + std::to_string(l);
    add_attention(lp + ".attn");
    add_ln(lp + ".ln1");
    add_ffn(lp + ".ffn");
    add_ln(lp + ".ln2");
  }
  for (int l = 0; l < config_.dec_layers; ++l) {
    std::string lp = "decoder.L" + std::to_string(l);
    add_attention(lp + ".self");
    add_ln(lp + ".ln1");
    add_attention(lp + ".cross");
    add_ln(lp + ".ln2");
    add_ffn(lp + ".ffn");
    add_ln(lp + ".ln3");
  }
  params_["decoder.out_w"] = fanin_init({hid, vocab_size}, rng);
  params_["decoder.out_b"] = Tensor::zeros({vocab_size}, true);
}

TransformerModel::TransformerModel(LayerConfig config, int vocab_size,
                                   ParamMap params)
    : config_(config), vocab_size_(vocab_size), params_(std::move(params)) {
  validate(config_);
  for (auto& [name, p] : params_) p.set_requires_grad(true);
  VT_CHECK(params_.count("encoder.embed.token"),
           "transformer checkpoint missing encoder.embed.token");
}

Tensor TransformerModel::param(const std::string& name) const {
  auto it = params_.find(name);
  VT_CHECK(it != params_.end(), "missing parameter ", name);
  return it->second;
}

bool TransformerModel::is_encoder_param(const std::string& name) const {
  return name.rfind("encoder.", 0) == 0;
}

void TransformerModel::load_encoder_init(const ParamMap& pretrained) {
  int copied = 0;
  for (auto& [name, p] : params_) {
    if (!is_encoder_param(name)) continue;
    auto it = pretrained.find(name);
    if (it == pretrained.end()) continue;
    VT_CHECK(it->second.shape() == p.shape(), "pretrained parameter ", name,
             " has shape ", shape_str(it->second.shape()), ", expected ",
             shape_str(p.shape()));
    p.values() = it->second.values();
    ++copied;
  }
  VT_CHECK(copied > 0, "pretrained checkpoint shares no encoder parameters");
}

std::vector<int> TransformerModel::frame_source(const std::vector<int>& src_ids) {
  std::vector<int> framed;
  framed.reserve(src_ids.size() + 2);
  framed.push_back(Vocab::kCls);
  framed.insert(framed.end(), src_ids.begin(), src_ids.end());
  framed.push_back(Vocab::kSep);
  return framed;
}

Tensor TransformerModel::embed_input(Tape& tape, const std::vector<int>& ids) const {
  int len = static_cast<int>(ids.size());
  VT_CHECK(len >= 1, "embed_input: empty input");
  VT_CHECK(len <= config_.max_positions, "embed_input: length ", len,
           " exceeds max positions ", config_.max_positions);
  std::vector<int> positions(ids.size());
  for (int i = 0; i < len; ++i) positions[i] = i;
  Tensor tok = tape.embedding_lookup(param("encoder.embed.token"), ids);
  Tensor pos = tape.embedding_lookup(param("encoder.embed.pos"), positions);
  // single-sentence inputs: only segment A is used
  Tensor seg = tape.reshape(param("encoder.embed.seg"), {config_.hidden});
  return tape.add(tape.add(tok, pos), seg);
}

Tensor TransformerModel::attention_block(Tape& tape, const Tensor& queries,
                                         const Tensor& keys,
                                         const std::string& prefix,
                                         const std::vector<double>* mask) const {
  int dh = config_.hidden / config_.heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  for (int h = 0; h < config_.heads; ++h) {
    std::string hp = prefix + ".h" + std::to_string(h);
    Tensor q = tape.matmul(queries, param(hp + ".wq"));
    Tensor k = tape.matmul(keys, param(hp + ".wk"));
    Tensor v = tape.matmul(keys, param(hp + ".wv"));
    Tensor scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt);
    if (mask) scores = tape.mask_add(scores, *mask);
    Tensor attn = tape.softmax(scores);
    heads.push_back(tape.matmul(attn, v));
  }
  Tensor merged = config_.heads == 1 ? heads[0] : tape.concat(heads, 1);
  return tape.linear(merged, param(prefix + ".proj_w"), param(prefix + ".proj_b"));
}

Tensor TransformerModel::transformer_layer(Tape& tape, const Tensor& h_prev,
                                           int layer,
                                           const std::vector<bool>* key_mask) const {
  VT_CHECK(h_prev.shape().size() == 2 && h_prev.cols() == config_.hidden,
           "transformer_layer: input must be [len x ", config_.hidden, "], got ",
           shape_str(h_prev.shape()));
  int len = h_prev.rows();
  std::string lp = "encoder.L" + std::to_string(layer);
  std::vector<double> mask;
  if (key_mask) {
    VT_CHECK(static_cast<int>(key_mask->size()) == len,
             "transformer_layer: key mask length mismatch");
    mask.assign(static_cast<std::size_t>(len) * len, 0.0);
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < len; ++j)
        if ((*key_mask)[j]) mask[i * len + j] = kNegInf;
  }
  Tensor attn = attention_block(tape, h_prev, h_prev, lp + ".attn",
                                key_mask ? &mask : nullptr);
  Tensor h_mid = tape.layer_norm(tape.add(h_prev, attn), param(lp + ".ln1.g"),
                                 param(lp + ".ln1.b"));
  Tensor f = tape.linear(tape.tanh(tape.linear(h_mid, param(lp + ".ffn.w1"),
                                               param(lp + ".ffn.b1"))),
                         param(lp + ".ffn.w2"), param(lp + ".ffn.b2"));
  return tape.layer_norm(tape.add(h_mid, f), param(lp + ".ln2.g"),
                         param(lp + ".ln2.b"));
}

Tensor TransformerModel::encode(Tape& tape, const std::vector<int>& framed_ids,
                                const std::vector<bool>* key_mask) const {
  Tensor h = embed_input(tape, framed_ids);
  for (int l = 0; l < config_.enc_layers; ++l)
    h = transformer_layer(tape, h, l, key_mask);
  return h;
}

Tensor TransformerModel::decode_probs(Tape& tape, const std::vector<int>& prefix_ids,
                                      const Tensor& z) const {
  VT_CHECK(!prefix_ids.empty(), "decode_probs: empty prefix (must start with [BOS])");
  int m = static_cast<int>(prefix_ids.size());
  VT_CHECK(m <= config_.max_positions, "decode_probs: prefix length ", m,
           " exceeds max positions ", config_.max_positions);
  std::vector<int> positions(prefix_ids.size());
  for (int i = 0; i < m; ++i) positions[i] = i;
  Tensor tok = tape.embedding_lookup(param("encoder.embed.token"), prefix_ids);
  Tensor pos = tape.embedding_lookup(param("decoder.embed.pos"), positions);
  Tensor h = tape.add(tok, pos);

  std::vector<double> causal(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) causal[i * m + j] = kNegInf;

  for (int l = 0; l < config_.dec_layers; ++l) {
    std::string lp = "decoder.L" + std::to_string(l);
    Tensor self = attention_block(tape, h, h, lp + ".self", &causal);
    h = tape.layer_norm(tape.add(h, self), param(lp + ".ln1.g"), param(lp + ".ln1.b"));
    Tensor cross = attention_block(tape, h, z, lp + ".cross", nullptr);
    h = tape.layer_norm(tape.add(h, cross), param(lp + ".ln2.g"), param(lp + ".ln2.b"));
    Tensor f = tape.linear(tape.tanh(tape.linear(h, param(lp + ".ffn.w1"),
                                                 param(lp + ".ffn.b1"))),
                           param(lp + ".ffn.w2"), param(lp + ".ffn.b2"));
    h = tape.layer_norm(tape.add(h, f), param(lp + ".ln3.g"), param(lp + ".ln3.b"));
  }
  return tape.softmax(tape.linear(h, param("decoder.out_w"), param("decoder.out_b")));
}

Tensor TransformerModel::loss(Tape& tape, const Example& ex) {
  VT_CHECK(!ex.src_ids.empty(), "transformer loss: empty source");
  VT_CHECK(!ex.tgt_ids.empty(), "transformer loss: empty target");
  Tensor z = encode(tape, frame_source(ex.src_ids));
  std::vector<int> inputs = {Vocab::kBos};
  inputs.insert(inputs.end(), ex.tgt_ids.begin(), ex.tgt_ids.end());
  std::vector<int> golds = ex.tgt_ids;
  golds.push_back(Vocab::kEos);
  Tensor probs = decode_probs(tape, inputs, z);
  int m = static_cast<int>(golds.size());
  Tensor nll;
  for (int t = 0; t < m; ++t) {
    VT_CHECK(golds[t] >= 0 && golds[t] < vocab_size_, "transformer loss: gold id ",
             golds[t], " outside vocabulary");
    Tensor lt = tape.scale(tape.log(tape.pick(probs, t * vocab_size_ + golds[t])), -1.0);
    nll = nll.defined() ? tape.add(nll, lt) : lt;
  }
  return tape.scale(nll, 1.0 / m);
}

class TransformerDecodeSession : public DecodeSession {
 public:
  TransformerDecodeSession(const TransformerModel& model, Example ex)
      : model_(model), ex_(std::move(ex)) {
    Tape tape;
    z_ = model_.encode(tape, TransformerModel::frame_source(ex_.src_ids));
  }

  int vocab_size() const override { return model_.vocab_size(); }

  std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
    std::vector<int> base(prefix.size());
    for (std::size_t i = 0; i < prefix.size(); ++i)
      base[i] = prefix[i] < model_.vocab_size() ? prefix[i] : Vocab::kUnk;
    Tape tape;
    Tensor probs = model_.decode_probs(tape, base, z_);
    int v = model_.vocab_size();
    int last = probs.rows() - 1;
    std::vector<double> lp(static_cast<std::size_t>(v));
    for (int j = 0; j < v; ++j)
      lp[j] = std::log(std::max(probs.values()[last * v + j], 1e-300));
    return lp;
  }

 private:
  const TransformerModel& model_;
  Example ex_;
  Tensor z_;
};

std::unique_ptr<DecodeSession> TransformerModel::decode_session(
    const Example& ex) const {
  return std::make_unique<TransformerDecodeSession>(*this, ex);
}

}  // namespace vt
