#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparselab/network.hpp"

namespace sparselab {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Network state plus optional optimizer velocity (flat layout order).
struct Checkpoint {
  MaskedNetwork net;
  std::vector<double> velocity;  // empty when not stored
};

/// Binary layout: magic "SPLB", u32 version, u32 spec length + spec text,
/// u64 step, per weighted layer (u32 layer index, u64 weight count, f64 weights,
/// f64 bias, bit-packed mask), u64 velocity count + f64 velocity, u32 crc32 of
/// everything before it. All integers and reals little-endian.
std::string encode_checkpoint(const MaskedNetwork& net, const std::vector<double>& velocity = {});
Checkpoint decode_checkpoint(const std::string& bytes);

void save_state(const MaskedNetwork& net, const std::filesystem::path& path,
                const std::vector<double>& velocity = {});
/// Loads a checkpoint; when `expected` is given the stored architecture must
/// match it. Throws CheckpointError on any mismatch or corruption.
Checkpoint load_state(const std::filesystem::path& path, const NetworkSpec* expected = nullptr);

/// Text form of a NetworkSpec stored in checkpoints and manifests.
std::string describe_spec(const NetworkSpec& spec);
NetworkSpec parse_spec_description(const std::string& text);

}  // namespace sparselab
