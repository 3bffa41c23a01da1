#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "apdm/concepts.hpp"
#include "apdm/l2p.hpp"

namespace apdm {

struct PretrainConfig {
  std::size_t steps = 20000;
  double lr = 2e-3;
  std::size_t batch = 128;
};

struct PersonalizeConfig {
  std::size_t steps = 2000;
  // Full-size diffusion personalization recipes run Adam at ~5e-6; plain
  // gradient descent on this problem scale wants ~1e-3.
  double lr = 1e-3;
};

struct NaiveConfig {
  std::size_t steps = 800;
  double lr = 1e-3;
  double lambda = 1.0;
  std::size_t score_every = 100;
};

struct MetricConfig {
  std::size_t n_gen = 512;  // bandwidths always come from the median heuristic
};

struct ExperimentConfig {
  WorldSpec world = default_world();
  std::string subject = "subject_a";
  std::string other_subject = "subject_b";
  std::size_t n_subject = 6;
  std::size_t n_prior = 64;
  std::size_t n_reference = 2000;

  int T = 50;
  double beta_start = 1e-3;
  double beta_end = 0.2;

  Arch arch;

  Vec emb_per{0.0, 1.0, 0.0, 0.0};
  Vec emb_pr{1.0, 0.0, 0.0, 0.0};
  Vec emb_other{0.0, 0.0, 1.0, 0.0};

  PretrainConfig pretrain;
  PersonalizeConfig personalize;
  L2PConfig l2p;
  NaiveConfig naive;
  MetricConfig metrics;
  double diag_eta = 1e-3;

  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";

  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Unknown keys and type mismatches raise ConfigError naming the field;
// missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

// FNV-1a over the canonical (sorted-key) JSON dump.
std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace apdm
