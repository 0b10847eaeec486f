#include "vt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vt/check.hpp"

namespace vt {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  VT_CHECK(is.good(), "checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const ParamMap& params, const std::string& path) {
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    VT_CHECK(os.good(), "checkpoint: cannot open ", tmp.string(), " for writing");
    write_u32(os, kFormatVersion);
    write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
      write_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
      for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
      os.write(reinterpret_cast<const char*>(t.values().data()),
               static_cast<std::streamsize>(t.values().size() * sizeof(double)));
    }
    VT_CHECK(os.good(), "checkpoint: write failed for ", tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

ParamMap load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  VT_CHECK(is.good(), "checkpoint: cannot open ", path);
  std::uint32_t version = read_u32(is);
  VT_CHECK(version == kFormatVersion, "checkpoint: unsupported format version ", version);
  std::uint32_t count = read_u32(is);
  ParamMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t rank = read_u32(is);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<int>(read_u32(is));
      n *= static_cast<std::size_t>(d);
    }
    std::vector<double> values(n);
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    VT_CHECK(is.good(), "checkpoint: truncated tensor data for ", name);
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

void atomic_write(const std::string& path, const std::string& contents) {
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    VT_CHECK(os.good(), "cannot open ", tmp.string(), " for writing");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    VT_CHECK(os.good(), "write failed for ", tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace vt
