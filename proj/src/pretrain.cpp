#include "vt/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vt/adam.hpp"
#include "vt/check.hpp"
#include "vt/rng.hpp"

namespace vt {

std::string PretrainReport::to_csv() const {
  std::ostringstream os;
  os << "step,mlm_acc,nsp_acc,loss\n";
  for (const auto& r : rows)
    os << r.step << "," << r.mlm_accuracy << "," << r.nsp_accuracy << "," << r.loss
       << "\n";
  return os.str();
}

namespace {
LayerConfig encoder_only(LayerConfig c) {
  c.dec_layers = 0;
  return c;
}

Tensor head_init(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(shape, true);
  double std = 1.0 / std::sqrt(static_cast<double>(shape[0]));
  for (auto& v : t.values()) v = rng.normal(0.0, std);
  return t;
}
}  // namespace

Pretrainer::Pretrainer(LayerConfig config, int vocab_size, std::uint64_t seed)
    : layer_config_(encoder_only(config)),
      vocab_size_(vocab_size),
      encoder_(layer_config_, vocab_size, seed) {
  params_ = encoder_.params();  // shared tensor storage
  params_["mlm.w"] = head_init({config.hidden, vocab_size}, seed ^ 0x9e3779b9ULL);
  params_["mlm.b"] = Tensor::zeros({vocab_size}, true);
  params_["nsp.w"] = head_init({config.hidden, 1}, seed ^ 0x7f4a7c15ULL);
  params_["nsp.b"] = Tensor::zeros({1}, true);
}

Pretrainer::Pretrainer(LayerConfig config, int vocab_size, ParamMap params)
    : layer_config_(encoder_only(config)),
      vocab_size_(vocab_size),
      encoder_(layer_config_, vocab_size, std::move(params)) {
  params_ = encoder_.params();
  for (const char* n : {"mlm.w", "mlm.b", "nsp.w", "nsp.b"})
    VT_CHECK(params_.count(n), "pretrainer checkpoint missing ", n);
}

MlmResult Pretrainer::mlm_loss(Tape& tape, const PretrainInstance& inst,
                               const Tensor& encoder_out) const {
  VT_CHECK(!inst.masked_positions.empty(), "mlm_loss: instance has no masked positions");
  Tensor states = tape.gather_rows(encoder_out, inst.masked_positions);
  Tensor probs = tape.softmax(
      tape.linear(states, params_.at("mlm.w"), params_.at("mlm.b")));
  int k = static_cast<int>(inst.masked_positions.size());
  MlmResult res;
  res.total = k;
  Tensor nll;
  for (int i = 0; i < k; ++i) {
    int gold = inst.original_ids[i];
    Tensor lt = tape.scale(tape.log(tape.pick(probs, i * vocab_size_ + gold)), -1.0);
    nll = nll.defined() ? tape.add(nll, lt) : lt;
    const double* row = probs.values().data() + i * vocab_size_;
    int argmax = static_cast<int>(std::max_element(row, row + vocab_size_) - row);
    if (argmax == gold) ++res.correct;
  }
  res.loss = tape.scale(nll, 1.0 / k);
  return res;
}

NspResult Pretrainer::nsp_loss(Tape& tape, const PretrainInstance& inst,
                               const Tensor& encoder_out) const {
  VT_CHECK(!inst.ids.empty() && inst.ids[0] == Vocab::kCls,
           "nsp_loss: instance lacks a [CLS] position");
  Tensor cls = tape.gather_rows(encoder_out, {0});
  Tensor z = tape.linear(cls, params_.at("nsp.w"), params_.at("nsp.b"));
  double p = 1.0 / (1.0 + std::exp(-z.values()[0]));
  NspResult res;
  res.correct = (p > 0.5) == inst.is_next;
  // -log sigmoid(z) for positives, -log sigmoid(-z) for negatives
  Tensor signed_z = tape.scale(tape.reshape(z, {1}), inst.is_next ? 1.0 : -1.0);
  res.loss = tape.scale(tape.log(tape.sigmoid(signed_z)), -1.0);
  return res;
}

PretrainReportRow Pretrainer::evaluate(const std::vector<PretrainInstance>& slice,
                                       std::int64_t step) const {
  VT_CHECK(!slice.empty(), "evaluate: empty slice");
  PretrainReportRow row;
  row.step = step;
  long long mlm_correct = 0, mlm_total = 0, nsp_correct = 0;
  double loss = 0.0;
  for (const auto& inst : slice) {
    Tape tape;
    Tensor enc = encode(tape, inst);
    auto mlm = mlm_loss(tape, inst, enc);
    auto nsp = nsp_loss(tape, inst, enc);
    mlm_correct += mlm.correct;
    mlm_total += mlm.total;
    nsp_correct += nsp.correct ? 1 : 0;
    loss += mlm.loss.item() + nsp.loss.item();
  }
  row.mlm_accuracy = static_cast<double>(mlm_correct) / static_cast<double>(mlm_total);
  row.nsp_accuracy =
      static_cast<double>(nsp_correct) / static_cast<double>(slice.size());
  row.loss = loss / static_cast<double>(slice.size());
  return row;
}

PretrainResult pretrain(const std::vector<std::string>& descriptions,
                        const Vocab& vocab, LayerConfig layer_config,
                        const PretrainConfig& config) {
  auto instances = make_pretrain_instances(descriptions, vocab, config.seed);
  VT_CHECK(!instances.empty(), "pretrain: no instances");

  Rng rng(config.seed + 1);
  std::vector<int> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  std::size_t n_holdout = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.holdout_frac *
                                  static_cast<double>(instances.size())));
  n_holdout = std::min(n_holdout, instances.size() - (instances.size() > 1 ? 1 : 0));
  std::vector<PretrainInstance> holdout, train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_holdout)
      holdout.push_back(instances[order[i]]);
    else
      train.push_back(instances[order[i]]);
  }
  if (train.empty()) train = holdout;

  Pretrainer pt(layer_config, vocab.size(), config.seed);
  Adam adam;
  PretrainResult out;
  out.report.rows.push_back(pt.evaluate(holdout, 0));

  for (std::int64_t step = 1; step <= config.steps; ++step) {
    zero_grads(pt.params());
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& inst = train[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(train.size())))];
      Tape tape;
      Tensor enc = pt.encode(tape, inst);
      Tensor total = tape.add(pt.mlm_loss(tape, inst, enc).loss,
                              pt.nsp_loss(tape, inst, enc).loss);
      Tensor scaled = tape.scale(total, 1.0 / config.batch_size);
      tape.backward(scaled);
      batch_loss += scaled.item();
    }
    VT_CHECK(std::isfinite(batch_loss), "pretrain: non-finite loss at step ", step);
    adam.step(pt.params(), config.lr);
    if (step % config.eval_every == 0 || step == config.steps)
      out.report.rows.push_back(pt.evaluate(holdout, step));
  }
  out.checkpoint = pt.params();
  return out;
}

}  // namespace vt
