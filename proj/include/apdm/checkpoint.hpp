#pragma once

#include <filesystem>

#include <json.hpp>

#include "apdm/denoiser.hpp"
#include "apdm/schedule.hpp"

namespace apdm {

// Binary checkpoint layout, little endian:
//   bytes 0..3   magic "APDM"
//   bytes 4..7   format version, unsigned 32-bit (currently 1)
//   bytes 8..15  parameter count, unsigned 64-bit
//   then count IEEE-754 64-bit floats.
// A JSON sidecar at <path>.json carries the arch descriptor, schedule
// parameters, seed and stage tag.
inline constexpr char kCheckpointMagic[4] = {'A', 'P', 'D', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_params(const std::filesystem::path& path, const ParamVector& params);
ParamVector load_params(const std::filesystem::path& path);

struct LoadedCheckpoint {
  ConditionalDenoiser model;
  NoiseSchedule schedule;
  std::uint64_t seed = 0;
  std::string stage;
};

void save_checkpoint(const std::filesystem::path& path,
                     const ConditionalDenoiser& model,
                     const NoiseSchedule& sched, std::uint64_t seed,
                     const std::string& stage);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json arch_to_json(const Arch& arch);
Arch arch_from_json(const nlohmann::json& j);

}  // namespace apdm
