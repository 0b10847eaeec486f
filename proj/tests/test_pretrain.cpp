#include <cmath>

#include "doctest.h"
#include "vt/corpus.hpp"
#include "vt/pretrain.hpp"

using namespace vt;

namespace {

LayerConfig tiny_config() {
  LayerConfig c;
  c.hidden = 4;
  c.heads = 2;
  c.ffn = 6;
  c.enc_layers = 1;
  c.dec_layers = 0;
  c.max_positions = 128;
  return c;
}

PretrainInstance tiny_instance() {
  PretrainInstance inst;
  inst.ids = {Vocab::kCls, 7, Vocab::kMask, 9, Vocab::kSep, 8, Vocab::kSep};
  inst.masked_positions = {2};
  inst.original_ids = {8};
  inst.is_next = true;
  return inst;
}

}  // namespace

TEST_CASE("mlm_loss fixtures") {
  const int vocab = 11;
  Pretrainer pt(tiny_config(), vocab, 1);
  PretrainInstance inst = tiny_instance();

  SUBCASE("probability 1 on gold ids gives zero loss, full accuracy") {
    // rig the head so the gold logit dominates
    Tensor& w = pt.params().at("mlm.w");
    for (auto& v : w.values()) v = 0.0;
    Tensor& b = pt.params().at("mlm.b");
    for (auto& v : b.values()) v = -1e4;
    b.values()[8] = 1e4;
    Tape tape;
    auto res = pt.mlm_loss(tape, inst, pt.encode(tape, inst));
    CHECK(res.loss.item() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.correct == 1);
    CHECK(res.total == 1);
  }

  SUBCASE("uniform head gives log V") {
    Tensor& w = pt.params().at("mlm.w");
    for (auto& v : w.values()) v = 0.0;
    Tensor& b = pt.params().at("mlm.b");
    for (auto& v : b.values()) v = 0.0;
    Tape tape;
    auto res = pt.mlm_loss(tape, inst, pt.encode(tape, inst));
    CHECK(res.loss.item() == doctest::Approx(std::log(vocab)).epsilon(1e-12));
  }

  SUBCASE("multi-position loss is the mean of hand-summed NLL terms") {
    PretrainInstance two = tiny_instance();
    two.ids[3] = Vocab::kMask;
    two.masked_positions = {2, 3};
    two.original_ids = {8, 9};
    Tape tape;
    Tensor enc = pt.encode(tape, two);
    auto res = pt.mlm_loss(tape, two, enc);

    double total = 0.0;
    for (std::size_t k = 0; k < two.masked_positions.size(); ++k) {
      PretrainInstance one = two;
      one.masked_positions = {two.masked_positions[k]};
      one.original_ids = {two.original_ids[k]};
      Tape t2;
      total += pt.mlm_loss(t2, one, pt.encode(t2, one)).loss.item();
    }
    CHECK(std::abs(res.loss.item() - total / 2.0) < 1e-10);
  }

  SUBCASE("zero masked positions is an error") {
    PretrainInstance bad = tiny_instance();
    bad.masked_positions.clear();
    bad.original_ids.clear();
    Tape tape;
    CHECK_THROWS(pt.mlm_loss(tape, bad, pt.encode(tape, bad)));
  }
}

TEST_CASE("nsp_loss fixtures") {
  Pretrainer pt(tiny_config(), 11, 2);
  PretrainInstance inst = tiny_instance();

  SUBCASE("indifferent head gives ln 2") {
    for (auto& v : pt.params().at("nsp.w").values()) v = 0.0;
    pt.params().at("nsp.b").values()[0] = 0.0;
    Tape tape;
    auto res = pt.nsp_loss(tape, inst, pt.encode(tape, inst));
    CHECK(res.loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("confident-correct head drives the loss toward zero") {
    for (auto& v : pt.params().at("nsp.w").values()) v = 0.0;
    pt.params().at("nsp.b").values()[0] = 30.0;  // is_next = true
    Tape tape;
    auto res = pt.nsp_loss(tape, inst, pt.encode(tape, inst));
    CHECK(res.loss.item() < 1e-10);
    CHECK(res.correct);

    inst.is_next = false;
    Tape t2;
    auto wrong = pt.nsp_loss(t2, inst, pt.encode(t2, inst));
    CHECK_FALSE(wrong.correct);
    CHECK(wrong.loss.item() > 10.0);
  }
}

TEST_CASE("evaluate averages instance losses") {
  Pretrainer pt(tiny_config(), 11, 3);
  PretrainInstance a = tiny_instance();
  PretrainInstance b = tiny_instance();
  b.is_next = false;
  std::vector<PretrainInstance> batch = {a, b, a, b};
  auto row = pt.evaluate(batch, 7);
  CHECK(row.step == 7);

  double total = 0.0;
  for (const auto& inst : batch) {
    Tape tape;
    Tensor enc = pt.encode(tape, inst);
    total += pt.mlm_loss(tape, inst, enc).loss.item() +
             pt.nsp_loss(tape, inst, enc).loss.item();
  }
  CHECK(std::abs(row.loss - total / 4.0) < 1e-12);
}

TEST_CASE("pretrain is deterministic and zero steps keep the init") {
  SyntheticData d = generate_synthetic(40, 8);
  std::vector<std::string> lines = d.descriptions;
  Vocab v = build_vocab(lines, 600, 1);

  PretrainConfig cfg;
  cfg.steps = 0;
  cfg.seed = 4;
  PretrainResult frozen = pretrain(d.descriptions, v, tiny_config(), cfg);
  Pretrainer init(tiny_config(), v.size(), cfg.seed);
  for (const auto& [name, t] : init.params())
    CHECK(frozen.checkpoint.at(name).values() == t.values());

  cfg.steps = 5;
  cfg.batch_size = 2;
  cfg.eval_every = 5;
  PretrainResult r1 = pretrain(d.descriptions, v, tiny_config(), cfg);
  PretrainResult r2 = pretrain(d.descriptions, v, tiny_config(), cfg);
  REQUIRE(r1.report.rows.size() == r2.report.rows.size());
  for (std::size_t i = 0; i < r1.report.rows.size(); ++i) {
    CHECK(r1.report.rows[i].loss == r2.report.rows[i].loss);
    CHECK(r1.report.rows[i].mlm_accuracy == r2.report.rows[i].mlm_accuracy);
  }
  CHECK(r1.report.rows.front().step == 0);
  CHECK(r1.report.rows.back().step == 5);
}

TEST_CASE("checkpoint round-trip reproduces held-out loss bit-identically") {
  SyntheticData d = generate_synthetic(30, 18);
  Vocab v = build_vocab(d.descriptions, 600, 1);
  PretrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 2;
  cfg.eval_every = 3;
  PretrainResult r = pretrain(d.descriptions, v, tiny_config(), cfg);

  save_checkpoint(r.checkpoint, "pretrain_roundtrip_tmp.ckpt");
  ParamMap loaded = load_checkpoint("pretrain_roundtrip_tmp.ckpt");
  std::remove("pretrain_roundtrip_tmp.ckpt");

  Pretrainer a(tiny_config(), v.size(), std::move(r.checkpoint));
  Pretrainer b(tiny_config(), v.size(), std::move(loaded));
  auto instances = make_pretrain_instances(d.descriptions, v, cfg.seed);
  std::vector<PretrainInstance> slice(instances.begin(), instances.begin() + 5);
  CHECK(a.evaluate(slice, 0).loss == b.evaluate(slice, 0).loss);
}

TEST_CASE("report serializes as csv") {
  PretrainReport rep;
  rep.rows.push_back({0, 0.25, 0.5, 3.0});
  std::string csv = rep.to_csv();
  CHECK(csv.find("step,mlm_acc,nsp_acc,loss") == 0);
  CHECK(csv.find("0,0.25,0.5,3") != std::string::npos);
}
