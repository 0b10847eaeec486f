#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vt/checkpoint.hpp"
#include "vt/tensor.hpp"

namespace vt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a named parameter map. One state per run;
// moments are created lazily, shaped like their parameters.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  std::int64_t step_count() const { return step_; }

  // Applies one update from the grads currently stored on the parameters.
  // lr_for maps a parameter name to its learning rate (per-group schedules).
  void step(ParamMap& params,
            const std::function<double(const std::string&)>& lr_for);
  void step(ParamMap& params, double lr);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// Scales grads in place so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(ParamMap& params, double max_norm);

void zero_grads(ParamMap& params);

}  // namespace vt
