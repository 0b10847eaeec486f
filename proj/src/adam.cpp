#include "vt/adam.hpp"

#include <cmath>

#include "vt/check.hpp"

namespace vt {

void Adam::step(ParamMap& params,
                const std::function<double(const std::string&)>& lr_for) {
  ++step_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params) {
    p.ensure_grad();
    const auto& g = p.grad();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);
    double lr = lr_for(name);
    auto& w = p.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      VT_CHECK(std::isfinite(g[i]), "adam: non-finite gradient in parameter ", name);
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::step(ParamMap& params, double lr) {
  step(params, [lr](const std::string&) { return lr; });
}

double clip_grad_norm(ParamMap& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.grad()) g *= scale;
    }
  }
  return norm;
}

void zero_grads(ParamMap& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

}  // namespace vt
