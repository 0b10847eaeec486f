#include "vt/rnn.hpp"

#include <cmath>
#include <map>

#include "vt/check.hpp"
#include "vt/rng.hpp"

namespace vt {

RnnFamily rnn_family_from_string(const std::string& name) {
  if (name == "seq2seq") return RnnFamily::kSeq2Seq;
  if (name == "ptrnet") return RnnFamily::kPtrNet;
  if (name == "ptrnet_cov") return RnnFamily::kPtrNetCoverage;
  VT_CHECK(false, "unknown recurrent model family '", name, "'");
  return RnnFamily::kSeq2Seq;
}

std::string rnn_family_name(RnnFamily family) {
  switch (family) {
    case RnnFamily::kSeq2Seq: return "seq2seq";
    case RnnFamily::kPtrNet: return "ptrnet";
    case RnnFamily::kPtrNetCoverage: return "ptrnet_cov";
  }
  return "?";
}

AttendResult attend(Tape& tape, const Tensor& enc_states, const Tensor& dec_state,
                    const AttentionParams& p) {
  VT_CHECK(enc_states.shape().size() == 2 && enc_states.rows() >= 1,
           "attend: encoder states must be a [src_len x hidden] matrix with src_len >= 1");
  int src_len = enc_states.rows();
  int hidden = enc_states.cols();
  int attn_dim = p.w_h.cols();
  Tensor proj_h = tape.matmul(enc_states, p.w_h);  // [src x attn]
  Tensor proj_s = tape.reshape(
      tape.matmul(tape.reshape(dec_state, {1, hidden}), p.w_s), {attn_dim});
  Tensor pre = tape.tanh(tape.add(tape.add(proj_h, proj_s), p.b_attn));
  Tensor scores = tape.reshape(tape.matmul(pre, p.v), {src_len});
  Tensor a = tape.softmax(scores);
  Tensor context =
      tape.reshape(tape.matmul(tape.reshape(a, {1, src_len}), enc_states), {hidden});
  return {a, context};
}

Tensor generation_prob(Tape& tape, const Tensor& context, const Tensor& dec_state,
                       const Tensor& input_embedding, const PointerParams& p) {
  auto dot = [&](const Tensor& x, const Tensor& w) {
    return tape.reshape(tape.matmul(tape.reshape(x, {1, x.size()}), w), {1});
  };
  Tensor z = tape.add(tape.add(dot(context, p.w_hstar), dot(dec_state, p.w_s)),
                      tape.add(dot(input_embedding, p.w_x), p.b_ptr));
  return tape.sigmoid(z);
}

Tensor final_distribution(Tape& tape, const Tensor& p_vocab, const Tensor& attn,
                          const Tensor& p_gen, const std::vector<int>& src_ext_ids,
                          int extended_size) {
  int base = p_vocab.size();
  VT_CHECK(extended_size >= base, "final_distribution: extended size ", extended_size,
           " smaller than base vocabulary ", base);
  for (int id : src_ext_ids)
    VT_CHECK(id >= 0 && id < extended_size, "final_distribution: source id ", id,
             " outside extended vocabulary [0,", extended_size, ")");
  Tensor padded = p_vocab;
  if (extended_size > base)
    padded = tape.concat({p_vocab, Tensor::zeros({extended_size - base})}, 0);
  Tensor one_minus = tape.add_const(tape.scale(p_gen, -1.0), 1.0);
  Tensor copy = tape.scatter_add(attn, src_ext_ids, extended_size);
  return tape.add(tape.mul_scalar(padded, p_gen), tape.mul_scalar(copy, one_minus));
}

Tensor coverage_loss(Tape& tape, const Tensor& attn, const Tensor& coverage) {
  VT_CHECK(attn.shape() == coverage.shape(),
           "coverage_loss: attention and coverage length mismatch");
  return tape.sum(tape.min_elem(attn, coverage));
}

// ---------------------------------------------------------------------------

namespace {

Tensor uniform_init(Shape shape, Rng& rng, double lim = 0.1) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = rng.uniform(-lim, lim);
  return t;
}

Tensor fanin_init(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape, true);
  double std = 1.0 / std::sqrt(static_cast<double>(shape[0]));
  for (auto& v : t.values()) v = rng.normal(0.0, std);
  return t;
}

}  // namespace

RnnModel::RnnModel(RnnConfig config, int vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  Rng rng(seed);
  const std::string pre = rnn_family_name(config_.family) + ".";
  int e = config_.embed, h = config_.hidden, a = config_.attn;
  params_[pre + "embed"] = uniform_init({vocab_size, e}, rng);
  params_[pre + "enc_lstm_w"] = uniform_init({4 * h, e + h}, rng);
  params_[pre + "enc_lstm_b"] = Tensor::zeros({4 * h}, true);
  params_[pre + "dec_lstm_w"] = uniform_init({4 * h, e + h}, rng);
  params_[pre + "dec_lstm_b"] = Tensor::zeros({4 * h}, true);
  // forget-gate bias starts at 1
  for (const char* n : {"enc_lstm_b", "dec_lstm_b"})
    for (int j = h; j < 2 * h; ++j) params_[pre + n].values()[j] = 1.0;
  params_[pre + "attn_wh"] = fanin_init({h, a}, rng);
  params_[pre + "attn_ws"] = fanin_init({h, a}, rng);
  params_[pre + "attn_b"] = Tensor::zeros({a}, true);
  params_[pre + "attn_v"] = fanin_init({a, 1}, rng);
  params_[pre + "out_w"] = fanin_init({2 * h, vocab_size}, rng);
  params_[pre + "out_b"] = Tensor::zeros({vocab_size}, true);
  if (config_.family != RnnFamily::kSeq2Seq) {
    params_[pre + "ptr_wh"] = fanin_init({h, 1}, rng);
    params_[pre + "ptr_ws"] = fanin_init({h, 1}, rng);
    params_[pre + "ptr_wx"] = fanin_init({e, 1}, rng);
    params_[pre + "ptr_b"] = Tensor::zeros({1}, true);
  }
}

RnnModel::RnnModel(RnnConfig config, int vocab_size, ParamMap params)
    : config_(config), vocab_size_(vocab_size), params_(std::move(params)) {
  for (auto& [name, p] : params_) p.set_requires_grad(true);
  VT_CHECK(params_.count(rnn_family_name(config_.family) + ".embed"),
           "rnn checkpoint does not contain parameters for family ",
           rnn_family_name(config_.family));
}

Tensor RnnModel::param(const std::string& suffix) const {
  auto it = params_.find(rnn_family_name(config_.family) + "." + suffix);
  VT_CHECK(it != params_.end(), "missing parameter ", suffix);
  return it->second;
}

bool RnnModel::is_encoder_param(const std::string&) const {
  // recurrent family trains with a single flat-lr group
  return false;
}

RnnModel::StepOut RnnModel::step(Tape& tape, const Example& ex, int input_id,
                                 Tensor& s, Tensor& c, const Tensor& enc_states,
                                 std::optional<double> pgen_override) const {
  int e = config_.embed;
  int base_id = input_id < vocab_size_ ? input_id : Vocab::kUnk;
  Tensor x = tape.reshape(tape.embedding_lookup(param("embed"), {base_id}), {e});
  auto st = tape.lstm_cell(x, s, c, param("dec_lstm_w"), param("dec_lstm_b"));
  s = st.h;
  c = st.c;
  AttentionParams ap{param("attn_wh"), param("attn_ws"), param("attn_b"),
                     param("attn_v")};
  auto att = attend(tape, enc_states, s, ap);
  Tensor features =
      tape.reshape(tape.concat({s, att.context}, 0), {1, 2 * config_.hidden});
  Tensor p_vocab = tape.reshape(
      tape.softmax(tape.linear(features, param("out_w"), param("out_b"))),
      {vocab_size_});
  if (config_.family == RnnFamily::kSeq2Seq) return {p_vocab, att.attn};

  Tensor p_gen;
  if (pgen_override) {
    p_gen = Tensor::scalar(*pgen_override);
  } else {
    PointerParams pp{param("ptr_wh"), param("ptr_ws"), param("ptr_wx"),
                     param("ptr_b")};
    p_gen = generation_prob(tape, att.context, s, x, pp);
  }
  int ext_size = vocab_size_ + static_cast<int>(ex.oov_words.size());
  Tensor dist =
      final_distribution(tape, p_vocab, att.attn, p_gen, ex.src_ext_ids, ext_size);
  return {dist, att.attn};
}

Tensor RnnModel::loss_impl(Tape& tape, const Example& ex,
                           std::optional<double> pgen_override) {
  VT_CHECK(!ex.src_ids.empty(), "rnn loss: empty source");
  int h = config_.hidden, e = config_.embed;
  int src_len = static_cast<int>(ex.src_ids.size());

  Tensor s = Tensor::zeros({h});
  Tensor c = Tensor::zeros({h});
  std::vector<Tensor> enc_h;
  for (int id : ex.src_ids) {
    Tensor x = tape.reshape(tape.embedding_lookup(param("embed"), {id}), {e});
    auto st = tape.lstm_cell(x, s, c, param("enc_lstm_w"), param("enc_lstm_b"));
    s = st.h;
    c = st.c;
    enc_h.push_back(st.h);
  }
  Tensor enc_states = tape.reshape(tape.concat(enc_h, 0), {src_len, h});

  bool pointer = config_.family != RnnFamily::kSeq2Seq;
  std::vector<int> inputs = {Vocab::kBos};
  inputs.insert(inputs.end(), ex.tgt_ids.begin(), ex.tgt_ids.end());
  std::vector<int> golds = pointer ? ex.tgt_ext_ids : ex.tgt_ids;
  golds.push_back(Vocab::kEos);
  int steps = static_cast<int>(golds.size());
  int ext_size = vocab_size_ + static_cast<int>(ex.oov_words.size());

  Tensor nll;
  Tensor cov_total;
  Tensor coverage = Tensor::zeros({src_len});
  for (int t = 0; t < steps; ++t) {
    auto out = step(tape, ex, inputs[t], s, c, enc_states, pgen_override);
    int gold = golds[t];
    VT_CHECK(gold >= 0 && gold < (pointer ? ext_size : vocab_size_),
             "rnn loss: gold id ", gold, " outside vocabulary");
    Tensor lt = tape.scale(tape.log(tape.pick(out.dist, gold)), -1.0);
    nll = nll.defined() ? tape.add(nll, lt) : lt;
    if (config_.coverage_enabled) {
      Tensor cl = coverage_loss(tape, out.attn, coverage);
      cov_total = cov_total.defined() ? tape.add(cov_total, cl) : cl;
      coverage = tape.add(coverage, out.attn);
    }
  }
  Tensor loss = tape.scale(nll, 1.0 / steps);
  if (cov_total.defined())
    loss = tape.add(loss,
                    tape.scale(cov_total, config_.coverage_weight / steps));
  return loss;
}

class RnnDecodeSession : public DecodeSession {
 public:
  RnnDecodeSession(const RnnModel& model, Example ex)
      : model_(model), ex_(std::move(ex)) {
    VT_CHECK(!ex_.src_ids.empty(), "decode: empty source");
    int h = model_.config().hidden, e = model_.config().embed;
    Tensor s = Tensor::zeros({h});
    Tensor c = Tensor::zeros({h});
    std::vector<Tensor> enc_h;
    const Tensor embed = model_.params().at(prefix() + "embed");
    const Tensor w = model_.params().at(prefix() + "enc_lstm_w");
    const Tensor b = model_.params().at(prefix() + "enc_lstm_b");
    for (int id : ex_.src_ids) {
      Tensor x = tape_.reshape(tape_.embedding_lookup(embed, {id}), {e});
      auto st = tape_.lstm_cell(x, s, c, w, b);
      s = st.h;
      c = st.c;
      enc_h.push_back(st.h);
    }
    enc_states_ = tape_.reshape(tape_.concat(enc_h, 0),
                                {static_cast<int>(ex_.src_ids.size()), h});
    states_[{}] = {s, c};
    tape_.clear();  // values stay alive on the tensors
  }

  int vocab_size() const override {
    return model_.config().family == RnnFamily::kSeq2Seq
               ? model_.vocab_size()
               : model_.vocab_size() + static_cast<int>(ex_.oov_words.size());
  }

  std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
    VT_CHECK(!prefix.empty() && prefix[0] == Vocab::kBos,
             "decode: prefix must start with [BOS]");
    auto [s, c] = state_after(std::vector<int>(prefix.begin(), prefix.end() - 1));
    Tape tape;
    Tensor s2 = s, c2 = c;
    auto out = model_.step(tape, ex_, prefix.back(), s2, c2, enc_states_,
                           std::nullopt);
    states_[prefix] = {s2, c2};
    std::vector<double> lp(out.dist.values().size());
    for (std::size_t i = 0; i < lp.size(); ++i)
      lp[i] = std::log(std::max(out.dist.values()[i], 1e-300));
    return lp;
  }

 private:
  std::string prefix() const {
    return rnn_family_name(model_.config().family) + ".";
  }

  std::pair<Tensor, Tensor> state_after(const std::vector<int>& consumed) {
    auto it = states_.find(consumed);
    if (it != states_.end()) return it->second;
    VT_CHECK(!consumed.empty(), "decode: missing initial state");
    auto [s, c] =
        state_after(std::vector<int>(consumed.begin(), consumed.end() - 1));
    Tape tape;
    Tensor s2 = s, c2 = c;
    model_.step(tape, ex_, consumed.back(), s2, c2, enc_states_, std::nullopt);
    auto st = std::make_pair(s2, c2);
    states_[consumed] = st;
    return st;
  }

  const RnnModel& model_;
  Example ex_;
  Tape tape_;
  Tensor enc_states_;
  std::map<std::vector<int>, std::pair<Tensor, Tensor>> states_;
};

std::unique_ptr<DecodeSession> RnnModel::decode_session(const Example& ex) const {
  return std::make_unique<RnnDecodeSession>(*this, ex);
}

}  // namespace vt
