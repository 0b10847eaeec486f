#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "vt/transformer.hpp"

using namespace vt;

namespace {

LayerConfig tiny_config() {
  LayerConfig c;
  c.hidden = 4;
  c.heads = 2;
  c.ffn = 6;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.max_positions = 16;
  return c;
}

Example tiny_example() {
  Example ex;
  ex.src_ids = {7, 8, 9};
  ex.src_ext_ids = {7, 8, 9};
  ex.tgt_ids = {8, 7};
  ex.tgt_ext_ids = {8, 7};
  return ex;
}

}  // namespace

TEST_CASE("layer config validation") {
  LayerConfig c = tiny_config();
  validate(c);
  c.hidden = 5;  // not divisible by heads
  CHECK_THROWS(validate(c));
  c = tiny_config();
  c.heads = 0;
  CHECK_THROWS(validate(c));
}

TEST_CASE("embed_input sums token, position, and segment embeddings exactly") {
  TransformerModel model(tiny_config(), 12, 5);
  auto& p = model.params();

  SUBCASE("all-zero tables give a zero matrix") {
    for (const char* n : {"encoder.embed.token", "encoder.embed.pos",
                          "encoder.embed.seg"})
      for (auto& v : p.at(n).values()) v = 0.0;
    Tape tape;
    Tensor x = model.embed_input(tape, {Vocab::kCls, 7, Vocab::kSep});
    for (double v : x.values()) CHECK(v == 0.0);
  }

  SUBCASE("single [CLS] equals the sum of the three lookups") {
    Tape tape;
    Tensor x = model.embed_input(tape, {Vocab::kCls});
    for (int j = 0; j < 4; ++j) {
      double expect = p.at("encoder.embed.token").values()[Vocab::kCls * 4 + j] +
                      p.at("encoder.embed.pos").values()[j] +
                      p.at("encoder.embed.seg").values()[j];
      CHECK(x.values()[j] == expect);  // exact additivity
    }
  }

  SUBCASE("length-4 input matches an independent elementwise sum") {
    std::vector<int> ids = {Vocab::kCls, 9, 10, Vocab::kSep};
    Tape tape;
    Tensor x = model.embed_input(tape, ids);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double expect = p.at("encoder.embed.token").values()[ids[i] * 4 + j] +
                        p.at("encoder.embed.pos").values()[i * 4 + j] +
                        p.at("encoder.embed.seg").values()[j];
        CHECK(std::abs(x.values()[i * 4 + j] - expect) < 1e-12);
      }
  }

  SUBCASE("over-length input is rejected") {
    std::vector<int> ids(17, 7);
    Tape tape;
    CHECK_THROWS(model.embed_input(tape, ids));
  }
}

TEST_CASE("transformer_layer output rows are layer-normalized") {
  // fresh models have LN gain 1 / bias 0, so rows carry the raw statistics
  TransformerModel model(tiny_config(), 12, 8);
  Tape tape;
  Tensor h = model.transformer_layer(
      tape, model.embed_input(tape, {Vocab::kCls, 7, 8, Vocab::kSep}), 0);
  for (int i = 0; i < 4; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 4; ++j) mean += h.values()[i * 4 + j];
    mean /= 4;
    for (int j = 0; j < 4; ++j) {
      double d = h.values()[i * 4 + j] - mean;
      var += d * d;
    }
    var /= 4;
    CHECK(std::abs(mean) < 1e-8);
    CHECK(std::abs(var - 1.0) < 1e-8);
  }
}

TEST_CASE("encode with zero layers returns the embedding unchanged") {
  LayerConfig c = tiny_config();
  c.enc_layers = 0;
  TransformerModel model(c, 12, 3);
  Tape tape;
  std::vector<int> ids = {Vocab::kCls, 7, Vocab::kSep};
  Tensor z = model.encode(tape, ids);
  Tensor e = model.embed_input(tape, ids);
  CHECK(z.values() == e.values());
}

TEST_CASE("layer count changes the encoding") {
  LayerConfig one = tiny_config();
  one.enc_layers = 1;
  LayerConfig two = tiny_config();
  two.enc_layers = 2;
  TransformerModel m2(two, 12, 9);
  TransformerModel m1(one, 12, 9);
  // share the embedding and first-layer weights so only depth differs
  for (auto& [name, t] : m1.params()) t.values() = m2.params().at(name).values();
  Tape t1, t2;
  std::vector<int> ids = {Vocab::kCls, 7, 8, Vocab::kSep};
  CHECK(m1.encode(t1, ids).values() != m2.encode(t2, ids).values());
}

TEST_CASE("desk config stays finite on a max-length input") {
  LayerConfig c;  // desk defaults: hidden 64, heads 4, ffn 128, 2 layers
  TransformerModel model(c, 40, 1);
  std::vector<int> ids(128, 9);
  ids.front() = Vocab::kCls;
  ids.back() = Vocab::kSep;
  Tape tape;
  Tensor z = model.encode(tape, ids);
  for (double v : z.values()) CHECK(std::isfinite(v));
}

TEST_CASE("padding key positions are inert") {
  TransformerModel model(tiny_config(), 12, 13);
  std::vector<int> a = {Vocab::kCls, 7, Vocab::kPad, Vocab::kPad, Vocab::kSep};
  std::vector<int> b = {Vocab::kCls, 7, Vocab::kPad, Vocab::kPad, Vocab::kSep};
  std::swap(a[2], a[3]);  // identical here; now change one padding token id
  b[2] = 9;
  b[3] = 10;
  std::vector<bool> mask = {false, false, true, true, false};
  Tape t1, t2;
  Tensor za = model.encode(t1, a, &mask);
  Tensor zb = model.encode(t2, b, &mask);
  for (int i : {0, 1, 4})
    for (int j = 0; j < 4; ++j)
      CHECK(za.values()[i * 4 + j] == doctest::Approx(zb.values()[i * 4 + j])
                                          .epsilon(1e-12));
}

TEST_CASE("decode_probs rows are distributions and causally masked") {
  TransformerModel model(tiny_config(), 12, 21);
  Tape tape;
  Tensor z = model.encode(tape, {Vocab::kCls, 7, 8, Vocab::kSep});
  std::vector<int> prefix = {Vocab::kBos, 8, 7};
  Tensor probs = model.decode_probs(tape, prefix, z);
  REQUIRE(probs.rows() == 3);
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 12; ++j) sum += probs.values()[i * 12 + j];
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }

  // causal: changing a later target token never changes earlier rows
  std::vector<int> changed = {Vocab::kBos, 8, 9};
  Tape t2;
  Tensor probs2 = model.decode_probs(t2, changed, z);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 12; ++j)
      CHECK(probs.values()[i * 12 + j] == probs2.values()[i * 12 + j]);

  // cross-attention is live: perturbing z changes the outputs
  Tensor z2(z.shape(), z.values());
  z2.values()[5] += 0.5;
  Tape t3;
  Tensor probs3 = model.decode_probs(t3, prefix, z2);
  CHECK(probs.values() != probs3.values());

  Tape t4;
  CHECK_THROWS(model.decode_probs(t4, {}, z));
}

TEST_CASE("transformer loss passes finite-difference checks") {
  LayerConfig c = tiny_config();
  c.max_positions = 8;
  TransformerModel model(c, 11, 31);
  Example ex = tiny_example();

  Tape tape;
  Tensor loss = model.loss(tape, ex);
  tape.backward(loss);

  const double eps = 1e-5;
  for (auto& [name, t] : model.params()) {
    REQUIRE(t.has_grad());
    for (int i = 0; i < t.size(); ++i) {
      double saved = t.values()[i];
      t.values()[i] = saved + eps;
      Tape tp;
      double up = model.loss(tp, ex).item();
      t.values()[i] = saved - eps;
      Tape tm;
      double down = model.loss(tm, ex).item();
      t.values()[i] = saved;
      double cd = (up - down) / (2 * eps);
      double err = std::abs(t.grad()[i] - cd) / (std::abs(cd) + 1e-6);
      CHECK_MESSAGE(err < 1e-4, name << "[" << i << "]");
    }
  }
}

TEST_CASE("load_encoder_init copies only matching encoder parameters") {
  LayerConfig c = tiny_config();
  TransformerModel a(c, 12, 1);
  TransformerModel b(c, 12, 2);
  std::vector<double> dec_before = b.params().at("decoder.out_w").values();
  b.load_encoder_init(a.params());
  CHECK(b.params().at("encoder.embed.token").values() ==
        a.params().at("encoder.embed.token").values());
  CHECK(b.params().at("decoder.out_w").values() == dec_before);

  TransformerModel wrong(LayerConfig{8, 2, 6, 1, 1, 16}, 12, 3);
  CHECK_THROWS(b.load_encoder_init(wrong.params()));
  CHECK_THROWS(b.load_encoder_init(ParamMap{}));
}

TEST_CASE("decode session maps extended ids to [UNK]") {
  TransformerModel model(tiny_config(), 12, 41);
  Example ex = tiny_example();
  ex.oov_words = {"zzz"};
  auto session = model.decode_session(ex);
  CHECK(session->vocab_size() == 12);
  auto a = session->next_log_probs({Vocab::kBos, 12});  // extended id
  auto b = session->next_log_probs({Vocab::kBos, Vocab::kUnk});
  CHECK(a == b);
}
