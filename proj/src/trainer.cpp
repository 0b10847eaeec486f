#include "vt/trainer.hpp"

#include <cmath>
#include <sstream>

#include "vt/adam.hpp"
#include "vt/check.hpp"
#include "vt/rng.hpp"
#include "vt/schedule.hpp"

namespace vt {

bool uses_warmup_schedules(const std::string& family) {
  return family == "transformer" || family == "bertsum" || family == "ebertsum";
}

ParamMap clone_params(const ParamMap& params) {
  ParamMap out;
  for (const auto& [name, t] : params)
    out.emplace(name, Tensor(t.shape(), t.values(), t.requires_grad()));
  return out;
}

namespace {
double validation_loss(SummarizationModel& model,
                       const std::vector<Example>& val_set) {
  double total = 0.0;
  for (const auto& ex : val_set) {
    Tape tape;
    total += model.loss(tape, ex).item();
  }
  return total / static_cast<double>(val_set.size());
}
}  // namespace

TrainResult train(SummarizationModel& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& config) {
  VT_CHECK(!train_set.empty() && !val_set.empty(), "train: empty split");
  VT_CHECK(config.total_steps >= 1, "train: total_steps must be >= 1");
  VT_CHECK(config.checkpoint_every >= 1, "train: checkpoint_every must be >= 1");
  VT_CHECK(config.warmup_e >= 1 && config.warmup_d >= 1,
           "train: warmups must be >= 1");
  VT_CHECK(config.batch_size >= 1, "train: batch_size must be >= 1");

  const bool scheduled = uses_warmup_schedules(config.family);
  Rng rng(config.seed);
  Adam adam;
  TrainResult result;
  bool have_best = false;
  std::ostringstream log;
  log << "step,lr_e,lr_d,train_loss,val_loss\n";

  double window_loss = 0.0;
  std::int64_t window_steps = 0;
  for (std::int64_t step = 1; step <= config.total_steps; ++step) {
    zero_grads(model.params());
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& ex = train_set[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(train_set.size())))];
      Tape tape;
      Tensor scaled = tape.scale(model.loss(tape, ex), 1.0 / config.batch_size);
      tape.backward(scaled);
      batch_loss += scaled.item();
    }
    VT_CHECK(std::isfinite(batch_loss), "train: non-finite loss at step ", step);
    if (!scheduled && config.clip_gradients)
      clip_grad_norm(model.params(), config.clip_norm);

    double cur_lr_e, cur_lr_d;
    if (scheduled) {
      cur_lr_e = lr_at(step, config.lr_e, config.warmup_e);
      cur_lr_d = lr_at(step, config.lr_d, config.warmup_d);
      adam.step(model.params(), [&](const std::string& name) {
        return model.is_encoder_param(name) ? cur_lr_e : cur_lr_d;
      });
    } else {
      cur_lr_e = cur_lr_d = config.flat_lr;
      adam.step(model.params(), config.flat_lr);
    }
    window_loss += batch_loss;
    ++window_steps;

    if (step % config.checkpoint_every == 0 || step == config.total_steps) {
      double val = validation_loss(model, val_set);
      VT_CHECK(std::isfinite(val), "train: non-finite validation loss at step ",
               step);
      double train_loss = window_loss / static_cast<double>(window_steps);
      log << step << "," << cur_lr_e << "," << cur_lr_d << "," << train_loss << ","
          << val << "\n";
      if (!have_best || val < result.best_val_loss) {
        result.best_checkpoint = clone_params(model.params());
        result.best_val_loss = val;
        result.best_step = step;
        have_best = true;
      }
      result.final_train_loss = train_loss;
      window_loss = 0.0;
      window_steps = 0;
    }
  }
  result.log_csv = log.str();
  return result;
}

}  // namespace vt
