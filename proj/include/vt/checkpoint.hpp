#pragma once

#include <map>
#include <string>

#include "vt/tensor.hpp"

namespace vt {

// Ordered name -> tensor map; map ordering makes checkpoint bytes and
// optimizer iteration deterministic.
using ParamMap = std::map<std::string, Tensor>;

// Binary container: format-version integer, entry count, then per entry
// (utf-8 name, shape, little-endian 64-bit reals).
void save_checkpoint(const ParamMap& params, const std::string& path);
ParamMap load_checkpoint(const std::string& path);

// Writes to a temp file in the same directory, then renames.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace vt
