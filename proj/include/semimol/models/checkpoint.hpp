#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "semimol/errors.hpp"
#include "semimol/nd/rng.hpp"
#include "semimol/nd/tensor.hpp"

namespace semimol::models {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr uint32_t kCheckpointMagic = 0x4b434d53;  // "SMCK"
inline constexpr uint32_t kCheckpointVersion = 1;

// Binary layout: magic u32, version u32, spec-hash u64, value count u64,
// then the raw little-endian doubles of every parameter in declaration order.
inline void save_checkpoint(const std::string& path, const std::string& arch_descriptor,
                            const std::vector<const nd::Tensor*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  const uint64_t spec_hash = nd::detail::fnv1a64(arch_descriptor);
  uint64_t count = 0;
  for (const auto* p : params) count += static_cast<uint64_t>(p->numel());
  out.write(reinterpret_cast<const char*>(&kCheckpointMagic), 4);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
  out.write(reinterpret_cast<const char*>(&spec_hash), 8);
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto* p : params) {
    out.write(reinterpret_cast<const char*>(p->data.data()),
              static_cast<std::streamsize>(p->data.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

inline void load_checkpoint(const std::string& path, const std::string& arch_descriptor,
                            const std::vector<nd::Tensor*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  uint32_t magic = 0, version = 0;
  uint64_t spec_hash = 0, count = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&spec_hash), 8);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || magic != kCheckpointMagic) throw IoError("not a checkpoint file: " + path);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  if (spec_hash != nd::detail::fnv1a64(arch_descriptor)) {
    throw IoError("checkpoint architecture hash mismatch for " + path);
  }
  uint64_t expect = 0;
  for (const auto* p : params) expect += static_cast<uint64_t>(p->numel());
  if (count != expect) {
    throw IoError("checkpoint parameter count mismatch: file has " +
                  std::to_string(count) + ", model needs " + std::to_string(expect));
  }
  for (auto* p : params) {
    in.read(reinterpret_cast<char*>(p->data.data()),
            static_cast<std::streamsize>(p->data.size() * sizeof(double)));
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
}

}  // namespace semimol::models
