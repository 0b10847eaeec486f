#include <sstream>

#include "doctest.h"
#include "vt/corpus.hpp"
#include "vt/rnn.hpp"
#include "vt/schedule.hpp"
#include "vt/trainer.hpp"
#include "vt/transformer.hpp"
#include "vt/vocab.hpp"

using namespace vt;

namespace {

struct Fixture {
  Vocab vocab;
  std::vector<Example> train, val;

  explicit Fixture(int n = 24) {
    SyntheticData d = generate_synthetic(n, 77);
    std::vector<std::string> lines;
    for (const auto& p : d.pairs) {
      lines.push_back(augment_with_metadata(p));
      lines.push_back(p.voice_title);
    }
    vocab = build_vocab(lines, 800, 1);
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      Example ex = make_example(augment_with_metadata(d.pairs[i]),
                                d.pairs[i].voice_title, vocab);
      (i % 4 == 0 ? val : train).push_back(std::move(ex));
    }
  }
};

std::vector<std::vector<double>> parse_log(const std::string& csv) {
  std::vector<std::vector<double>> rows;
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("family grouping") {
  CHECK_FALSE(uses_warmup_schedules("seq2seq"));
  CHECK_FALSE(uses_warmup_schedules("ptrnet"));
  CHECK_FALSE(uses_warmup_schedules("ptrnet_cov"));
  CHECK(uses_warmup_schedules("transformer"));
  CHECK(uses_warmup_schedules("bertsum"));
  CHECK(uses_warmup_schedules("ebertsum"));
}

TEST_CASE("clone_params deep-copies values") {
  ParamMap p;
  p.emplace("w", Tensor({2}, {1.0, 2.0}, true));
  ParamMap q = clone_params(p);
  q.at("w").values()[0] = 9.0;
  CHECK(p.at("w").values()[0] == 1.0);
  CHECK(q.at("w").requires_grad());
}

TEST_CASE("one final checkpoint when total_steps < checkpoint_every") {
  Fixture fx;
  RnnConfig rc;
  rc.embed = 12;
  rc.hidden = 12;
  rc.attn = 12;
  RnnModel model(rc, fx.vocab.size(), 1);
  TrainConfig cfg;
  cfg.family = "seq2seq";
  cfg.total_steps = 5;
  cfg.checkpoint_every = 100;
  cfg.batch_size = 2;
  TrainResult r = train(model, fx.train, fx.val, cfg);
  CHECK(r.best_step == 5);
  CHECK(parse_log(r.log_csv).size() == 1);
}

TEST_CASE("same config and seed give an identical trace") {
  Fixture fx;
  TrainConfig cfg;
  cfg.family = "seq2seq";
  cfg.total_steps = 8;
  cfg.checkpoint_every = 4;
  cfg.batch_size = 2;
  auto run = [&] {
    RnnConfig rc;
    rc.embed = 12;
    rc.hidden = 12;
    rc.attn = 12;
    RnnModel model(rc, fx.vocab.size(), 3);
    return train(model, fx.train, fx.val, cfg);
  };
  TrainResult a = run();
  TrainResult b = run();
  CHECK(a.log_csv == b.log_csv);
  CHECK(a.best_val_loss == b.best_val_loss);
}

TEST_CASE("returned checkpoint has the lowest logged validation loss") {
  Fixture fx;
  RnnConfig rc;
  rc.embed = 16;
  rc.hidden = 16;
  rc.attn = 16;
  RnnModel model(rc, fx.vocab.size(), 5);
  TrainConfig cfg;
  cfg.family = "seq2seq";
  cfg.total_steps = 40;
  cfg.checkpoint_every = 10;
  cfg.batch_size = 4;
  TrainResult r = train(model, fx.train, fx.val, cfg);
  auto rows = parse_log(r.log_csv);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) CHECK(r.best_val_loss <= row[4]);
}

TEST_CASE("training reduces the loss on a small corpus") {
  Fixture fx;
  RnnConfig rc;
  rc.embed = 24;
  rc.hidden = 24;
  rc.attn = 24;
  RnnModel model(rc, fx.vocab.size(), 9);
  TrainConfig cfg;
  cfg.family = "seq2seq";
  cfg.total_steps = 300;
  cfg.checkpoint_every = 75;
  cfg.batch_size = 4;
  cfg.flat_lr = 3e-3;
  TrainResult r = train(model, fx.train, fx.val, cfg);
  auto rows = parse_log(r.log_csv);
  CHECK(rows.back()[3] < 0.5 * rows.front()[3]);
}

TEST_CASE("transformer families route the dual schedules") {
  Fixture fx(12);
  LayerConfig lc;
  lc.hidden = 8;
  lc.heads = 2;
  lc.ffn = 12;
  lc.enc_layers = 1;
  lc.dec_layers = 1;
  TransformerModel model(lc, fx.vocab.size(), 2);
  TrainConfig cfg;
  cfg.family = "bertsum";
  cfg.total_steps = 4;
  cfg.checkpoint_every = 2;
  cfg.batch_size = 2;
  cfg.lr_e = 2e-3;
  cfg.warmup_e = 20000;
  cfg.lr_d = 0.2;
  cfg.warmup_d = 10000;
  TrainResult r = train(model, fx.train, fx.val, cfg);
  auto rows = parse_log(r.log_csv);
  REQUIRE(rows.size() == 2);
  // lr columns follow the closed-form schedules exactly
  CHECK(rows[0][1] == doctest::Approx(lr_at(2, 2e-3, 20000)).epsilon(1e-12));
  CHECK(rows[0][2] == doctest::Approx(lr_at(2, 0.2, 10000)).epsilon(1e-12));
  CHECK(rows[1][1] == doctest::Approx(lr_at(4, 2e-3, 20000)).epsilon(1e-12));
}

TEST_CASE("bad configurations are rejected") {
  Fixture fx(12);
  RnnConfig rc;
  rc.embed = 8;
  rc.hidden = 8;
  rc.attn = 8;
  RnnModel model(rc, fx.vocab.size(), 1);
  TrainConfig cfg;
  cfg.total_steps = 0;
  CHECK_THROWS(train(model, fx.train, fx.val, cfg));
  cfg.total_steps = 1;
  CHECK_THROWS(train(model, {}, fx.val, cfg));
  cfg.warmup_e = 0;
  CHECK_THROWS(train(model, fx.train, fx.val, cfg));
}
