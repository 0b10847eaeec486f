#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "vt/rnn.hpp"

using namespace vt;
using testutil::random_tensor;

namespace {

AttentionParams random_attention(int hidden, int attn, Rng& rng) {
  return {random_tensor({hidden, attn}, rng, 0.5, false),
          random_tensor({hidden, attn}, rng, 0.5, false),
          random_tensor({attn}, rng, 0.5, false),
          random_tensor({attn, 1}, rng, 0.5, false)};
}

Example no_oov_example(std::vector<int> src, std::vector<int> tgt) {
  Example ex;
  ex.src_ids = src;
  ex.src_ext_ids = src;
  ex.tgt_ids = tgt;
  ex.tgt_ext_ids = tgt;
  return ex;
}

// plain-double replica of the fused cell (gate order i, f, g, o)
void lstm_oracle(const std::vector<double>& x, std::vector<double>& h,
                 std::vector<double>& c, const Tensor& w, const Tensor& b) {
  int in = static_cast<int>(x.size()), hid = static_cast<int>(h.size());
  std::vector<double> xh(x);
  xh.insert(xh.end(), h.begin(), h.end());
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> hn(hid), cn(hid);
  for (int j = 0; j < hid; ++j) {
    auto gate = [&](int g) {
      double acc = b.values()[g * hid + j];
      for (int k = 0; k < in + hid; ++k)
        acc += w.values()[(g * hid + j) * (in + hid) + k] * xh[k];
      return acc;
    };
    double gi = sig(gate(0)), gf = sig(gate(1)), gg = std::tanh(gate(2)),
           go = sig(gate(3));
    cn[j] = gf * c[j] + gi * gg;
    hn[j] = go * std::tanh(cn[j]);
  }
  h = hn;
  c = cn;
}

}  // namespace

TEST_CASE("attend fixtures") {
  Rng rng(5);
  SUBCASE("identical states with zero W_h give uniform attention") {
    Tape tape;
    Tensor enc({3, 2}, {0.4, -0.2, 0.4, -0.2, 0.4, -0.2});
    AttentionParams p = random_attention(2, 3, rng);
    for (auto& v : p.w_h.values()) v = 0.0;  // scores identical across positions
    Tensor s = random_tensor({2}, rng, 1.0, false);
    auto res = attend(tape, enc, s, p);
    for (double a : res.attn.values()) CHECK(a == doctest::Approx(1.0 / 3));
  }
  SUBCASE("single source position gets all the mass") {
    Tape tape;
    Tensor enc = random_tensor({1, 4}, rng, 1.0, false);
    auto res = attend(tape, enc, random_tensor({4}, rng, 1.0, false),
                      random_attention(4, 3, rng));
    CHECK(res.attn.values()[0] == 1.0);
    for (int j = 0; j < 4; ++j)
      CHECK(res.context.values()[j] == doctest::Approx(enc.values()[j]));
  }
  SUBCASE("context equals the independently computed weighted sum") {
    Tape tape;
    Tensor enc = random_tensor({3, 4}, rng, 1.0, false);
    auto res = attend(tape, enc, random_tensor({4}, rng, 1.0, false),
                      random_attention(4, 5, rng));
    for (int j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (int i = 0; i < 3; ++i)
        expect += res.attn.values()[i] * enc.values()[i * 4 + j];
      CHECK(std::abs(res.context.values()[j] - expect) < 1e-10);
    }
  }
  SUBCASE("empty source is rejected") {
    Tape tape;
    Tensor enc({4}, {0, 0, 0, 0});
    CHECK_THROWS(attend(tape, enc, enc, random_attention(4, 2, rng)));
  }
}

TEST_CASE("generation_prob fixtures") {
  Rng rng(6);
  Tape tape;
  PointerParams zero{Tensor::zeros({3, 1}), Tensor::zeros({3, 1}),
                     Tensor::zeros({2, 1}), Tensor::zeros({1})};
  Tensor ctx = random_tensor({3}, rng, 1.0, false);
  Tensor st = random_tensor({3}, rng, 1.0, false);
  Tensor x = random_tensor({2}, rng, 1.0, false);
  CHECK(generation_prob(tape, ctx, st, x, zero).values()[0] == 0.5);

  PointerParams big = zero;
  big.b_ptr = Tensor({1}, {50.0});
  CHECK(generation_prob(tape, ctx, st, x, big).values()[0] ==
        doctest::Approx(1.0).epsilon(1e-12));

  PointerParams p{random_tensor({3, 1}, rng, 1.0, false),
                  random_tensor({3, 1}, rng, 1.0, false),
                  random_tensor({2, 1}, rng, 1.0, false),
                  random_tensor({1}, rng, 1.0, false)};
  double z = p.b_ptr.values()[0];
  for (int j = 0; j < 3; ++j) z += p.w_hstar.values()[j] * ctx.values()[j];
  for (int j = 0; j < 3; ++j) z += p.w_s.values()[j] * st.values()[j];
  for (int j = 0; j < 2; ++j) z += p.w_x.values()[j] * x.values()[j];
  CHECK(std::abs(generation_prob(tape, ctx, st, x, p).values()[0] -
                 1.0 / (1.0 + std::exp(-z))) < 1e-12);
}

TEST_CASE("final_distribution fixtures") {
  Tape tape;
  Tensor p_vocab({4}, {0.1, 0.2, 0.3, 0.4});
  SUBCASE("p_gen = 1 pads the vocab distribution with zeros") {
    Tensor out = final_distribution(tape, p_vocab, Tensor({1}, {1.0}),
                                    Tensor({1}, {1.0}), {4}, 6);
    CHECK(out.values() == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.0, 0.0});
  }
  SUBCASE("p_gen = 0 aggregates duplicate source positions") {
    // src "a b a" with attention [0.5, 0.2, 0.3]
    Tensor attn({3}, {0.5, 0.2, 0.3});
    Tensor out = final_distribution(tape, p_vocab, attn, Tensor({1}, {0.0}),
                                    {0, 1, 0}, 4);
    CHECK(out.values()[0] == doctest::Approx(0.8));
    CHECK(out.values()[1] == doctest::Approx(0.2));
  }
  SUBCASE("OOV source token receives only copy mass") {
    Tensor attn({2}, {0.4, 0.6});
    Tensor out = final_distribution(tape, p_vocab, attn, Tensor({1}, {0.5}),
                                    {4, 0}, 5);
    CHECK(out.values()[4] == doctest::Approx(0.2));  // 0.5 * 0.4
  }
  SUBCASE("source id outside the extended range is rejected") {
    CHECK_THROWS(final_distribution(tape, p_vocab, Tensor({1}, {1.0}),
                                    Tensor({1}, {0.5}), {7}, 5));
  }
}

TEST_CASE("final distribution is a distribution for random parameterizations") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    Tape tape;
    int base = 3 + rng.uniform_int(5);
    int src_len = 1 + rng.uniform_int(4);
    int n_oov = rng.uniform_int(3);
    Tensor p_vocab = tape.softmax(random_tensor({base}, rng, 3.0, false));
    Tensor attn = tape.softmax(random_tensor({src_len}, rng, 3.0, false));
    Tensor p_gen = tape.sigmoid(random_tensor({1}, rng, 3.0, false));
    std::vector<int> src(src_len);
    for (auto& id : src) id = rng.uniform_int(base + n_oov);
    Tensor out = final_distribution(tape, p_vocab, attn, p_gen, src, base + n_oov);
    double sum = 0.0;
    for (double v : out.values()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("coverage_loss fixtures") {
  Tape tape;
  CHECK(coverage_loss(tape, Tensor({2}, {0.6, 0.4}), Tensor::zeros({2})).item() ==
        0.0);
  CHECK(coverage_loss(tape, Tensor({2}, {0.5, 0.5}), Tensor({2}, {0.5, 0.5}))
            .item() == 1.0);
  CHECK(coverage_loss(tape, Tensor({2}, {0.9, 0.1}), Tensor({2}, {0.2, 1.7}))
            .item() == doctest::Approx(0.3));
  CHECK_THROWS(coverage_loss(tape, Tensor({2}, {1, 0}), Tensor({3}, {0, 0, 0})));
}

TEST_CASE("p_gen pinned to 1 collapses the pointer model onto seq2seq") {
  const int vocab = 12;
  RnnConfig pc;
  pc.family = RnnFamily::kPtrNet;
  pc.embed = 6;
  pc.hidden = 5;
  pc.attn = 4;
  RnnModel ptr(pc, vocab, 42);

  ParamMap renamed;
  for (const auto& [name, t] : ptr.params()) {
    if (name.find(".ptr_") != std::string::npos) continue;
    renamed.emplace("seq2seq." + name.substr(std::string("ptrnet.").size()), t);
  }
  RnnConfig sc = pc;
  sc.family = RnnFamily::kSeq2Seq;
  RnnModel s2s(sc, vocab, std::move(renamed));

  Example ex = no_oov_example({7, 9, 8}, {10, 7});
  Tape t1, t2;
  double a = ptr.loss_impl(t1, ex, 1.0).item();
  double b = s2s.loss(t2, ex).item();
  CHECK(a == b);  // bit-for-bit
}

TEST_CASE("coverage term with zero weight leaves the loss unchanged") {
  RnnConfig cc;
  cc.family = RnnFamily::kPtrNetCoverage;
  cc.embed = 4;
  cc.hidden = 4;
  cc.attn = 4;
  cc.coverage_weight = 0.0;
  cc.coverage_enabled = true;
  RnnModel on(cc, 10, 3);
  Example ex = no_oov_example({7, 8}, {9});
  Tape t1;
  double with_term = on.loss(t1, ex).item();
  on.set_coverage_enabled(false);
  Tape t2;
  double without = on.loss(t2, ex).item();
  CHECK(with_term == without);
}

TEST_CASE("seq2seq loss matches an independent forward recomputation") {
  RnnConfig cfg;
  cfg.embed = 3;
  cfg.hidden = 2;
  cfg.attn = 2;
  const int vocab = 9;
  RnnModel model(cfg, vocab, 17);
  Example ex = no_oov_example({7}, {8});
  Tape tape;
  double loss = model.loss(tape, ex).item();

  const auto& p = model.params();
  auto P = [&](const std::string& n) { return p.at("seq2seq." + n); };
  auto embed_row = [&](int id) {
    std::vector<double> x(3);
    for (int j = 0; j < 3; ++j) x[j] = P("embed").values()[id * 3 + j];
    return x;
  };
  // encoder over the single source token
  std::vector<double> s(2, 0.0), c(2, 0.0);
  lstm_oracle(embed_row(7), s, c, P("enc_lstm_w"), P("enc_lstm_b"));
  std::vector<double> enc_h = s;

  double total = 0.0;
  int inputs[2] = {Vocab::kBos, 8};
  int golds[2] = {8, Vocab::kEos};
  for (int t = 0; t < 2; ++t) {
    lstm_oracle(embed_row(inputs[t]), s, c, P("dec_lstm_w"), P("dec_lstm_b"));
    // src_len 1: attention is [1], context is the encoder state
    std::vector<double> feats(s);
    feats.insert(feats.end(), enc_h.begin(), enc_h.end());
    std::vector<double> logits(vocab);
    for (int v = 0; v < vocab; ++v) {
      logits[v] = P("out_b").values()[v];
      for (int j = 0; j < 4; ++j)
        logits[v] += feats[j] * P("out_w").values()[j * vocab + v];
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += -(logits[golds[t]] - mx - std::log(z));
  }
  CHECK(std::abs(loss - total / 2.0) < 1e-10);
}

TEST_CASE("full losses pass finite-difference checks on a tiny example") {
  for (auto family :
       {RnnFamily::kSeq2Seq, RnnFamily::kPtrNet, RnnFamily::kPtrNetCoverage}) {
    RnnConfig cfg;
    cfg.family = family;
    cfg.embed = 3;
    cfg.hidden = 3;
    cfg.attn = 2;
    cfg.coverage_enabled = family == RnnFamily::kPtrNetCoverage;
    RnnModel model(cfg, 9, 11);
    Example ex = no_oov_example({7, 8}, {8});

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
      t.zero_grad();
    }
  }
}

TEST_CASE("decode session scores agree with teacher forcing") {
  RnnConfig cfg;
  cfg.family = RnnFamily::kPtrNet;
  cfg.embed = 4;
  cfg.hidden = 4;
  cfg.attn = 4;
  RnnModel model(cfg, 10, 23);
  Example ex = no_oov_example({7, 9}, {8, 7});
  ex.oov_words = {"zzz"};  // one extended id
  ex.src_ext_ids = {7, 10};

  auto session = model.decode_session(ex);
  CHECK(session->vocab_size() == 11);
  auto lp = session->next_log_probs({Vocab::kBos});
  REQUIRE(lp.size() == 11);
  double sum = 0.0;
  for (double v : lp) sum += std::exp(v);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  // extending the prefix reuses cached states deterministically
  auto lp2 = session->next_log_probs({Vocab::kBos, 8});
  auto session2 = model.decode_session(ex);
  auto lp2b = session2->next_log_probs({Vocab::kBos, 8});
  CHECK(lp2 == lp2b);
}
