// vtitle: voice-title pipeline driver (data synthesis through evaluation).
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "vt/beam.hpp"
#include "vt/check.hpp"
#include "vt/corpus.hpp"
#include "vt/metrics.hpp"
#include "vt/pretrain.hpp"
#include "vt/rnn.hpp"
#include "vt/trainer.hpp"
#include "vt/transformer.hpp"

namespace {

using namespace vt;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  VT_CHECK(is.good(), "cannot open ", path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::vector<Example> make_examples(const std::vector<TitlePair>& pairs,
                                   const Vocab& vocab) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back(make_example(augment_with_metadata(p), p.voice_title, vocab));
  return out;
}

// flat key=value sidecar describing the checkpointed model's shape
using ConfigMap = std::map<std::string, std::string>;

void write_config(const std::string& path, const ConfigMap& kv) {
  std::string contents;
  for (const auto& [k, v] : kv) contents += k + "=" + v + "\n";
  atomic_write(path, contents);
}

ConfigMap read_config(const std::string& path) {
  ConfigMap kv;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    VT_CHECK(eq != std::string::npos, "bad config line in ", path, ": ", line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int config_int(const ConfigMap& kv, const std::string& key) {
  auto it = kv.find(key);
  VT_CHECK(it != kv.end(), "config missing key ", key);
  return std::stoi(it->second);
}

bool is_rnn_family(const std::string& family) {
  return family == "seq2seq" || family == "ptrnet" || family == "ptrnet_cov";
}

bool is_transformer_family(const std::string& family) {
  return family == "transformer" || family == "bertsum" || family == "ebertsum";
}

std::unique_ptr<SummarizationModel> model_from_checkpoint(
    const std::string& checkpoint_path, const Vocab& vocab) {
  ConfigMap kv = read_config(checkpoint_path + ".config");
  ParamMap params = load_checkpoint(checkpoint_path);
  auto it = kv.find("family");
  VT_CHECK(it != kv.end(), "config missing key family");
  const std::string& family = it->second;
  VT_CHECK(config_int(kv, "vocab_size") == vocab.size(), "checkpoint vocab size ",
           kv.at("vocab_size"), " does not match vocabulary of size ",
           vocab.size());
  if (is_rnn_family(family)) {
    RnnConfig rc;
    rc.family = rnn_family_from_string(family);
    rc.embed = config_int(kv, "embed");
    rc.hidden = config_int(kv, "hidden");
    rc.attn = config_int(kv, "attn");
    rc.coverage_enabled = family == "ptrnet_cov";
    return std::make_unique<RnnModel>(rc, vocab.size(), std::move(params));
  }
  VT_CHECK(is_transformer_family(family), "unknown model family ", family);
  LayerConfig lc;
  lc.hidden = config_int(kv, "hidden");
  lc.heads = config_int(kv, "heads");
  lc.ffn = config_int(kv, "ffn");
  lc.enc_layers = config_int(kv, "enc_layers");
  lc.dec_layers = config_int(kv, "dec_layers");
  lc.max_positions = config_int(kv, "max_positions");
  return std::make_unique<TransformerModel>(lc, vocab.size(), std::move(params));
}

int cmd_synth_data(int n, std::uint64_t seed, const std::string& out_dir) {
  SyntheticData data = generate_synthetic(n, seed);
  SplitResult sp = split(data.pairs, seed);
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  save_pairs(data.pairs, (dir / "pairs.tsv").string());
  save_pairs(sp.train, (dir / "train.tsv").string());
  save_pairs(sp.val, (dir / "val.tsv").string());
  save_pairs(sp.test, (dir / "test.tsv").string());
  atomic_write((dir / "descriptions.txt").string(), join_lines(data.descriptions));
  std::cout << "wrote " << data.pairs.size() << " pairs (" << sp.train.size()
            << " train / " << sp.val.size() << " val / " << sp.test.size()
            << " test) and " << data.descriptions.size() << " descriptions to "
            << out_dir << "\n";
  return 0;
}

int cmd_build_vocab(const std::string& pairs_path,
                    const std::string& descriptions_path, int max_size,
                    int min_freq, const std::string& out_path) {
  std::vector<std::string> corpus;
  for (const auto& p : load_pairs(pairs_path)) {
    corpus.push_back(augment_with_metadata(p));
    corpus.push_back(p.voice_title);
  }
  if (!descriptions_path.empty())
    for (auto& line : read_lines(descriptions_path)) corpus.push_back(line);
  Vocab vocab = build_vocab(corpus, max_size, min_freq);
  vocab.save(out_path);
  std::cout << "built vocabulary of " << vocab.size() << " tokens -> " << out_path
            << "\n";
  return 0;
}

int cmd_stats(const std::string& pairs_path) {
  auto pairs = load_pairs(pairs_path);
  CorpusStats s = compute_stats(pairs);
  std::cout << "n_pairs=" << pairs.size() << "\n"
            << "avg_web_len=" << s.avg_web_len << "\n"
            << "avg_voice_len=" << s.avg_voice_len << "\n"
            << "avg_unique_web=" << s.avg_unique_web << "\n"
            << "avg_unique_voice=" << s.avg_unique_voice << "\n"
            << "avg_novel_unigrams=" << s.avg_novel_unigrams << "\n";
  return 0;
}

struct LayerFlags {
  int hidden = 64, heads = 4, ffn = 128, enc_layers = 2, dec_layers = 2;
  int max_positions = 128;

  LayerConfig to_config() const {
    LayerConfig lc;
    lc.hidden = hidden;
    lc.heads = heads;
    lc.ffn = ffn;
    lc.enc_layers = enc_layers;
    lc.dec_layers = dec_layers;
    lc.max_positions = max_positions;
    return lc;
  }
};

void add_layer_flags(CLI::App* cmd, LayerFlags& f) {
  cmd->add_option("--hidden", f.hidden, "hidden size");
  cmd->add_option("--heads", f.heads, "attention heads");
  cmd->add_option("--ffn", f.ffn, "feed-forward inner size");
  cmd->add_option("--enc-layers", f.enc_layers, "encoder layers");
  cmd->add_option("--dec-layers", f.dec_layers, "decoder layers");
  cmd->add_option("--max-positions", f.max_positions, "position table size");
}

int cmd_pretrain(const std::string& descriptions_path, const std::string& vocab_path,
                 const LayerFlags& layers, const PretrainConfig& config,
                 const std::string& out_path, const std::string& report_path) {
  Vocab vocab = Vocab::load(vocab_path);
  auto descriptions = read_lines(descriptions_path);
  LayerConfig lc = layers.to_config();
  lc.dec_layers = 0;
  PretrainResult res = pretrain(descriptions, vocab, lc, config);
  save_checkpoint(res.checkpoint, out_path);
  ConfigMap kv = {{"family", "pretrain"},
                  {"vocab_size", std::to_string(vocab.size())},
                  {"hidden", std::to_string(lc.hidden)},
                  {"heads", std::to_string(lc.heads)},
                  {"ffn", std::to_string(lc.ffn)},
                  {"enc_layers", std::to_string(lc.enc_layers)},
                  {"dec_layers", "0"},
                  {"max_positions", std::to_string(lc.max_positions)}};
  write_config(out_path + ".config", kv);
  if (!report_path.empty()) atomic_write(report_path, res.report.to_csv());
  const auto& first = res.report.rows.front();
  const auto& last = res.report.rows.back();
  std::cout << "pretrained " << config.steps << " steps: mlm_acc "
            << first.mlm_accuracy << " -> " << last.mlm_accuracy << ", nsp_acc "
            << first.nsp_accuracy << " -> " << last.nsp_accuracy << " -> "
            << out_path << "\n";
  return 0;
}

struct TrainFlags {
  std::string family = "seq2seq";
  std::string train_path, val_path, vocab_path, out_path, log_path, pretrained;
  TrainConfig config;
  LayerFlags layers;
  int embed = 128, attn = 256;  // recurrent sizes (paper baselines)
  std::int64_t phase1_steps = -1;  // ptrnet_cov: coverage-off steps
  bool lr_e_set = false, lr_d_set = false, warmup_e_set = false;
};

int cmd_train(TrainFlags& f) {
  // family defaults for flags the user did not override
  if (f.family == "ebertsum") {
    if (!f.lr_e_set) f.config.lr_e = 2e-4;
    if (!f.lr_d_set) f.config.lr_d = 0.1;
    if (!f.warmup_e_set) f.config.warmup_e = 2000;
  }
  f.config.family = f.family;

  Vocab vocab = Vocab::load(f.vocab_path);
  auto train_set = make_examples(load_pairs(f.train_path), vocab);
  auto val_set = make_examples(load_pairs(f.val_path), vocab);

  ConfigMap kv = {{"family", f.family}, {"vocab_size", std::to_string(vocab.size())}};
  TrainResult result;
  if (is_rnn_family(f.family)) {
    RnnConfig rc;
    rc.family = rnn_family_from_string(f.family);
    rc.embed = f.embed;
    rc.hidden = f.layers.hidden;
    rc.attn = f.attn;
    RnnModel model(rc, vocab.size(), f.config.seed);
    if (f.family == "ptrnet_cov") {
      // two-phase: converge without coverage, then fine-tune with it
      std::int64_t phase1 =
          f.phase1_steps >= 0 ? f.phase1_steps : f.config.total_steps / 2;
      VT_CHECK(phase1 < f.config.total_steps,
               "ptrnet_cov: phase-1 steps must leave room for phase 2");
      TrainConfig c1 = f.config;
      std::string log;
      if (phase1 > 0) {
        c1.total_steps = phase1;
        model.set_coverage_enabled(false);
        log = train(model, train_set, val_set, c1).log_csv;
      }
      model.set_coverage_enabled(true);
      TrainConfig c2 = f.config;
      c2.total_steps = f.config.total_steps - phase1;
      result = train(model, train_set, val_set, c2);
      if (!log.empty())
        result.log_csv = log + result.log_csv.substr(result.log_csv.find('\n') + 1);
    } else {
      result = train(model, train_set, val_set, f.config);
    }
    kv["embed"] = std::to_string(rc.embed);
    kv["hidden"] = std::to_string(rc.hidden);
    kv["attn"] = std::to_string(rc.attn);
  } else {
    VT_CHECK(is_transformer_family(f.family), "unknown model family ", f.family);
    LayerConfig lc = f.layers.to_config();
    TransformerModel model(lc, vocab.size(), f.config.seed);
    if (f.family == "ebertsum") {
      VT_CHECK(!f.pretrained.empty(),
               "ebertsum requires --pretrained; run the pretrain subcommand first");
      model.load_encoder_init(load_checkpoint(f.pretrained));
    }
    result = train(model, train_set, val_set, f.config);
    kv["hidden"] = std::to_string(lc.hidden);
    kv["heads"] = std::to_string(lc.heads);
    kv["ffn"] = std::to_string(lc.ffn);
    kv["enc_layers"] = std::to_string(lc.enc_layers);
    kv["dec_layers"] = std::to_string(lc.dec_layers);
    kv["max_positions"] = std::to_string(lc.max_positions);
  }

  save_checkpoint(result.best_checkpoint, f.out_path);
  write_config(f.out_path + ".config", kv);
  if (!f.log_path.empty()) atomic_write(f.log_path, result.log_csv);
  std::cout << "trained " << f.family << " for " << f.config.total_steps
            << " steps, best val loss " << result.best_val_loss << " at step "
            << result.best_step << " -> " << f.out_path << "\n";
  return 0;
}

int cmd_decode(const std::string& checkpoint_path, const std::string& vocab_path,
               const std::string& in_path, const std::string& out_path,
               const BeamConfig& beam) {
  Vocab vocab = Vocab::load(vocab_path);
  auto model = model_from_checkpoint(checkpoint_path, vocab);
  auto pairs = load_pairs(in_path);
  std::vector<std::string> lines;
  lines.reserve(pairs.size());
  for (const auto& p : pairs) {
    Example ex = make_example(augment_with_metadata(p), p.voice_title, vocab);
    auto session = model->decode_session(ex);
    BeamResult res = beam_search(*session, beam);
    if (res.blocked_fallback)
      std::cerr << "note: admitted a repeated trigram for input: " << p.web_title
                << "\n";
    lines.push_back(decode_extended(res.ids, ex, vocab));
  }
  atomic_write(out_path, join_lines(lines));
  std::cout << "decoded " << lines.size() << " titles -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& ref_path,
                 const std::string& csv_path) {
  EvalReport report = evaluate_corpus_files(pred_path, ref_path);
  std::cout << report.to_keyvalue();
  if (!csv_path.empty()) atomic_write(csv_path, report.to_csv_row());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"web-title to voice-title toolkit"};
  app.require_subcommand(1);

  // synth-data
  int synth_n = 500;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "data";
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
  synth->add_option("--n", synth_n, "number of title pairs");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // build-vocab
  std::string bv_pairs, bv_desc, bv_out;
  int bv_max = 2000, bv_min_freq = 1;
  auto* bv = app.add_subcommand("build-vocab", "derive a subword vocabulary");
  bv->add_option("--pairs", bv_pairs, "training pairs TSV")->required();
  bv->add_option("--descriptions", bv_desc, "description corpus, one per line");
  bv->add_option("--max-size", bv_max, "vocabulary budget incl. specials");
  bv->add_option("--min-freq", bv_min_freq, "minimum word frequency");
  bv->add_option("--out", bv_out, "vocabulary output path")->required();

  // stats
  std::string stats_pairs;
  auto* st = app.add_subcommand("stats", "corpus statistics");
  st->add_option("--pairs", stats_pairs, "pairs TSV")->required();

  // pretrain
  std::string pt_desc, pt_vocab, pt_out, pt_report;
  LayerFlags pt_layers;
  PretrainConfig pt_config;
  pt_config.steps = 200000;  // production default; pass --steps for desk scale
  auto* pt = app.add_subcommand("pretrain", "masked-token + next-sentence pretraining");
  pt->add_option("--descriptions", pt_desc, "description corpus")->required();
  pt->add_option("--vocab", pt_vocab, "vocabulary path")->required();
  pt->add_option("--out", pt_out, "checkpoint output path")->required();
  pt->add_option("--report", pt_report, "accuracy trajectory CSV");
  pt->add_option("--steps", pt_config.steps, "optimizer steps");
  pt->add_option("--lr", pt_config.lr, "flat Adam learning rate");
  pt->add_option("--batch", pt_config.batch_size, "batch size");
  pt->add_option("--eval-every", pt_config.eval_every, "held-out eval cadence");
  pt->add_option("--seed", pt_config.seed, "random seed");
  add_layer_flags(pt, pt_layers);

  // train
  TrainFlags tf;
  tf.config.batch_size = 256;     // production defaults; desk runs override
  tf.config.total_steps = 35000;
  tf.config.checkpoint_every = 2000;
  auto* tr = app.add_subcommand("train", "fine-tune a summarization model");
  tr->add_option("--model", tf.family,
                 "seq2seq|ptrnet|ptrnet_cov|transformer|bertsum|ebertsum")
      ->required();
  tr->add_option("--train", tf.train_path, "training pairs TSV")->required();
  tr->add_option("--val", tf.val_path, "validation pairs TSV")->required();
  tr->add_option("--vocab", tf.vocab_path, "vocabulary path")->required();
  tr->add_option("--out", tf.out_path, "checkpoint output path")->required();
  tr->add_option("--log", tf.log_path, "training log CSV");
  tr->add_option("--pretrained", tf.pretrained, "pretrain checkpoint (ebertsum)");
  auto* lr_e_opt = tr->add_option("--lr-e", tf.config.lr_e, "encoder peak lr");
  auto* lr_d_opt = tr->add_option("--lr-d", tf.config.lr_d, "decoder peak lr");
  auto* we_opt = tr->add_option("--warmup-e", tf.config.warmup_e, "encoder warmup");
  tr->add_option("--warmup-d", tf.config.warmup_d, "decoder warmup");
  tr->add_option("--flat-lr", tf.config.flat_lr, "recurrent-family Adam lr");
  tr->add_option("--batch", tf.config.batch_size, "batch size");
  tr->add_option("--steps", tf.config.total_steps, "total optimizer steps");
  tr->add_option("--checkpoint-every", tf.config.checkpoint_every,
                 "validation/checkpoint cadence");
  tr->add_option("--seed", tf.config.seed, "random seed");
  tr->add_option("--clip-norm", tf.config.clip_norm, "gradient clip norm");
  tr->add_flag("!--no-clip", tf.config.clip_gradients, "disable gradient clipping");
  tr->add_option("--phase1-steps", tf.phase1_steps,
                 "ptrnet_cov coverage-off steps (default: half)");
  tr->add_option("--embed", tf.embed, "recurrent embedding size");
  tr->add_option("--attn", tf.attn, "recurrent attention size");
  add_layer_flags(tr, tf.layers);

  // decode
  std::string dc_ckpt, dc_vocab, dc_in, dc_out;
  BeamConfig beam;
  auto* dc = app.add_subcommand("decode", "beam-search decode a test set");
  dc->add_option("--checkpoint", dc_ckpt, "model checkpoint")->required();
  dc->add_option("--vocab", dc_vocab, "vocabulary path")->required();
  dc->add_option("--in", dc_in, "input pairs TSV")->required();
  dc->add_option("--out", dc_out, "predictions output, one per line")->required();
  dc->add_option("--beam", beam.beam, "beam size");
  dc->add_option("--alpha", beam.alpha, "length-penalty exponent");
  dc->add_option("--min-len", beam.min_len, "minimum output tokens");
  dc->add_option("--max-len", beam.max_len, "maximum output tokens");

  // evaluate
  std::string ev_pred, ev_ref, ev_csv;
  auto* ev = app.add_subcommand("evaluate", "score predictions against references");
  ev->add_option("--pred", ev_pred, "predictions file")->required();
  ev->add_option("--ref", ev_ref, "references file")->required();
  ev->add_option("--csv", ev_csv, "also write a one-row CSV summary");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth_data(synth_n, synth_seed, synth_out);
    if (bv->parsed())
      return cmd_build_vocab(bv_pairs, bv_desc, bv_max, bv_min_freq, bv_out);
    if (st->parsed()) return cmd_stats(stats_pairs);
    if (pt->parsed())
      return cmd_pretrain(pt_desc, pt_vocab, pt_layers, pt_config, pt_out, pt_report);
    if (tr->parsed()) {
      tf.lr_e_set = lr_e_opt->count() > 0;
      tf.lr_d_set = lr_d_opt->count() > 0;
      tf.warmup_e_set = we_opt->count() > 0;
      return cmd_train(tf);
    }
    if (dc->parsed()) return cmd_decode(dc_ckpt, dc_vocab, dc_in, dc_out, beam);
    if (ev->parsed()) return cmd_evaluate(ev_pred, ev_ref, ev_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
