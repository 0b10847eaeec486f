#pragma once

#include <sstream>
#include <stdexcept>

namespace vt::detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& os, const T& t, const Rest&... rest) {
  os << t;
  append_all(os, rest...);
}
template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  std::ostringstream os;
  append_all(os, args...);
  throw std::runtime_error(os.str());
}
}  // namespace vt::detail

#define VT_CHECK(cond, ...)                  \
  do {                                       \
    if (!(cond)) vt::detail::fail(__VA_ARGS__); \
  } while (0)
