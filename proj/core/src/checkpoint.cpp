#include "veil/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace veil {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'T', 'F'};
constexpr uint32_t kFormatVersion = 1;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error("checkpoint: " + path + ": " + why);
}

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

uint32_t read_u32(std::istream& is, const std::string& path, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) fail(path, "truncated at " + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& is, const std::string& path, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) fail(path, "truncated at " + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is, const std::string& path, const std::string& what) {
  uint64_t bits = read_u64(is, path, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(path, "cannot open for writing");

  os.write(kMagic, 4);
  write_u32(os, kFormatVersion);
  write_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, static_cast<uint64_t>(t.rank()));
    for (int64_t d : t.shape) write_u64(os, static_cast<uint64_t>(d));
  }
  for (const auto& [name, t] : tensors) {
    for (double v : t.data) write_f64(os, v);
  }
  os.flush();
  if (!os) fail(path, "write failed");
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open for reading");

  char magic[4];
  if (!is.read(magic, 4)) fail(path, "truncated at magic");
  if (std::memcmp(magic, kMagic, 4) != 0) fail(path, "bad magic (expected MSTF)");
  uint32_t version = read_u32(is, path, "version");
  if (version != kFormatVersion) {
    fail(path, "unsupported format version " + std::to_string(version) + " (expected " +
                   std::to_string(kFormatVersion) + ")");
  }

  uint64_t count = read_u64(is, path, "tensor count");
  if (count == 0 || count > 65536) fail(path, "implausible tensor count " + std::to_string(count));

  NamedTensors out;
  out.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t name_len = read_u64(is, path, "name length");
    if (name_len == 0 || name_len > 4096) {
      fail(path, "implausible name length " + std::to_string(name_len));
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name_len))) {
      fail(path, "truncated in tensor name");
    }
    uint64_t rank = read_u64(is, path, "rank of " + name);
    if (rank > 8) fail(path, "implausible rank " + std::to_string(rank) + " for " + name);
    Shape shape;
    for (uint64_t d = 0; d < rank; ++d) {
      uint64_t dim = read_u64(is, path, "dims of " + name);
      if (dim == 0 || dim > (1ull << 32)) {
        fail(path, "implausible dimension " + std::to_string(dim) + " for " + name);
      }
      shape.push_back(static_cast<int64_t>(dim));
    }
    out.emplace_back(std::move(name), Tensor::zeros(shape));
  }
  for (auto& [name, t] : out) {
    for (int64_t j = 0; j < t.numel(); ++j) t[j] = read_f64(is, path, "payload of " + name);
  }
  char extra;
  if (is.read(&extra, 1)) fail(path, "trailing bytes after payloads");
  return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  ck.schedule.validate();
  NamedTensors all;
  for (const auto& [name, t] : ck.params.param_table()) all.emplace_back(name, *t);
  all.emplace_back("beta",
                   Tensor({static_cast<int64_t>(ck.schedule.beta.size())}, ck.schedule.beta));
  all.emplace_back("alpha_bar", Tensor({static_cast<int64_t>(ck.schedule.alpha_bar.size())},
                                       ck.schedule.alpha_bar));
  save_tensors(path, all);
}

Checkpoint load_checkpoint(const std::string& path) {
  NamedTensors all = load_tensors(path);

  auto expected = ModelParams::architecture_table();
  if (all.size() != expected.size() + 2) {
    fail(path, "expected " + std::to_string(expected.size() + 2) + " tensors, found " +
                   std::to_string(all.size()));
  }
  Checkpoint ck;
  auto table = ck.params.param_table();
  for (size_t i = 0; i < expected.size(); ++i) {
    if (all[i].first != expected[i].first) {
      fail(path, "tensor " + std::to_string(i) + " is '" + all[i].first + "', expected '" +
                     expected[i].first + "'");
    }
    if (all[i].second.shape != expected[i].second) {
      fail(path, "tensor '" + all[i].first + "' has shape " + shape_str(all[i].second.shape) +
                     ", expected " + shape_str(expected[i].second));
    }
    *table[i].second = std::move(all[i].second);
  }

  auto& beta = all[expected.size()];
  auto& abar = all[expected.size() + 1];
  if (beta.first != "beta" || abar.first != "alpha_bar") {
    fail(path, "schedule tensors missing (expected trailing 'beta' and 'alpha_bar')");
  }
  if (beta.second.rank() != 1 || abar.second.rank() != 1 ||
      beta.second.dim(0) != abar.second.dim(0)) {
    fail(path, "schedule tensors must be rank-1 with equal length");
  }
  ck.schedule.T = beta.second.dim(0);
  ck.schedule.beta = std::move(beta.second.data);
  ck.schedule.alpha_bar = std::move(abar.second.data);

  if (!ck.params.all_finite()) fail(path, "non-finite weight values");
  try {
    ck.schedule.validate();
  } catch (const std::exception& e) {
    fail(path, std::string("invalid schedule: ") + e.what());
  }
  return ck;
}

}  // namespace veil
