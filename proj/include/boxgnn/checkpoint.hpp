#pragma once

// Versioned JSON checkpoints. Tensors are stored as base64 of little-endian
// IEEE-754 doubles, so values round-trip bit-exactly.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boxgnn/params.hpp"
#include "json.hpp"

namespace boxgnn {

inline constexpr std::string_view kCheckpointFormat = "boxgnn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;  // "priors", "fitness" or "joint"
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  ParameterSet params;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws DataError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view text);

/// Deterministic text: equal checkpoints give identical bytes.
std::string checkpoint_to_string(const Checkpoint& c);
/// Throws DataError on a wrong format tag, version or malformed content.
Checkpoint checkpoint_from_string(std::string_view text);

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& p);

}  // namespace boxgnn
