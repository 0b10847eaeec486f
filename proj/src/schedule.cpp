#include "vt/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "vt/check.hpp"

namespace vt {

double lr_at(std::int64_t step, double lr_base, std::int64_t warmup) {
  VT_CHECK(step >= 1, "lr_at: step must be >= 1, got ", step);
  VT_CHECK(warmup >= 1, "lr_at: warmup must be >= 1, got ", warmup);
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup);
  return lr_base * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

}  // namespace vt
