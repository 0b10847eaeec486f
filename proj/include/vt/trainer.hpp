#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vt/model.hpp"

namespace vt {

struct TrainConfig {
  std::string family = "seq2seq";  // seq2seq|ptrnet|ptrnet_cov|transformer|bertsum|ebertsum
  double lr_e = 2e-3;              // encoder peak rate (warmup schedule)
  double lr_d = 0.2;               // decoder peak rate
  std::int64_t warmup_e = 20000;
  std::int64_t warmup_d = 10000;
  double flat_lr = 1e-3;  // recurrent families train at a flat rate
  int batch_size = 16;
  std::int64_t total_steps = 2000;
  std::int64_t checkpoint_every = 2000;
  std::uint64_t seed = 0;
  bool clip_gradients = true;  // applied to recurrent families only
  double clip_norm = 2.0;
};

struct TrainResult {
  ParamMap best_checkpoint;  // lowest validation loss among saved checkpoints
  double best_val_loss = 0.0;
  std::int64_t best_step = 0;
  double final_train_loss = 0.0;
  std::string log_csv;  // step,lr_e,lr_d,train_loss,val_loss
};

// whether the family uses the dual warmup schedules (vs flat Adam)
bool uses_warmup_schedules(const std::string& family);

// deep copy: checkpoints must not alias live optimizer state
ParamMap clone_params(const ParamMap& params);

TrainResult train(SummarizationModel& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& config);

}  // namespace vt
