#pragma once

#include <cstdint>

namespace vt {

// lr_base * min(step^-0.5, step * warmup^-1.5); linear ramp up to the
// warmup knee, inverse square root decay after it.
double lr_at(std::int64_t step, double lr_base, std::int64_t warmup);

}  // namespace vt
