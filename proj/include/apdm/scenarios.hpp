#pragma once

#include "apdm/config.hpp"
#include "apdm/evaluation.hpp"
#include "apdm/l2p.hpp"

namespace apdm {

// Toy-scale verdict thresholds for the scenario matrix.
inline constexpr double kProtectionRatio = 0.5;    // attacked vs baseline similarity
inline constexpr double kPreservationRatio = 1.5;  // protected vs pretrained MMD
inline constexpr double kOtherSubjectRatio = 0.8;  // other-subject success floor
inline constexpr double kCollapseRatio = 2.0;      // naive-run MMD blowup floor

// Everything downstream stages share: the schedule, the world draws, the
// pretrained model and the concept dataset. Deterministic in (config, seed);
// every stage consumes its own derived stream.
struct Pipeline {
  ExperimentConfig cfg;
  NoiseSchedule sched;
  ConditioningEmbedding c_per;
  ConditioningEmbedding c_pr;
  std::vector<Sample> subject;
  std::vector<Sample> reference;
  ConditionalDenoiser pretrained;
  ConceptDataset dataset;
  ExperimentTrace pretrain_trace;
};

// Pretrains the denoiser on prior draws (conditioning alternates between the
// class and identifier embeddings so the identifier starts out class-like),
// then assembles the concept dataset from the frozen result.
Pipeline build_pipeline(const ExperimentConfig& cfg);

// Pretraining only; exposed for the CLI stage.
ConditionalDenoiser pretrain_model(const ExperimentConfig& cfg,
                                   const NoiseSchedule& sched,
                                   const ConditioningEmbedding& c_per,
                                   const ConditioningEmbedding& c_pr,
                                   ExperimentTrace& trace);

struct ProtectionResult {
  ConditionalDenoiser model;
  ExperimentTrace trace;
  ExperimentTrace diag_trace;  // per-step gradient diagnostics (naive mode)
};

// mode: none | naive | dpo_only | l2p. "dpo_only" descends the protection
// loss directly with the same outer budget as l2p but no look-ahead path.
// The hook mirrors l2p_protect's periodic checkpoint callback.
ProtectionResult protect_model(const Pipeline& p, const std::string& mode,
                               const CheckpointHook& hook = {});

MetricReport score_stage(const Pipeline& p, const ConditionalDenoiser& model,
                         const ConceptDataset& ds, const std::string& eval_tag);

struct ProtectAttackReport {
  std::string mode;
  std::string config_hash;
  MetricReport pretrained_scores;
  MetricReport baseline_attacked_scores;  // attacker on the pretrained model
  MetricReport protected_scores;
  MetricReport attacked_scores;
  bool verdict_protected = false;
  bool verdict_preserved = false;
  ExperimentTrace protect_trace;
  ExperimentTrace diag_trace;
  ExperimentTrace baseline_attack_trace;
  ExperimentTrace attack_trace;
  ConditionalDenoiser protected_model;
  ConditionalDenoiser attacked_model;
  std::vector<std::string> checkpoints;

  nlohmann::json to_json() const;
};

// Pretrain -> protect per mode -> attacker personalizes with clean subject
// data -> score the safeguarded and re-personalized models.
ProtectAttackReport run_protect_attack(const Pipeline& p, const std::string& mode);
ProtectAttackReport run_protect_attack(const ExperimentConfig& cfg,
                                       const std::string& mode);

struct CollapseCell {
  double lambda = 1.0;
  ExperimentTrace trace;       // step, L_adv, L_per_simple, L_ppl
  ExperimentTrace diag_trace;  // one row per step
  ExperimentTrace mmd_trace;   // step, prior_mmd
  double initial_mmd = 0.0;
  double final_mmd = 0.0;
  ConditionalDenoiser final_model;
};

struct CollapseReport {
  std::string config_hash;
  MetricReport pretrained_scores;
  std::vector<CollapseCell> cells;
  nlohmann::json to_json() const;
};

// Descends the naive adversarial objective for `steps` steps at each lambda,
// scoring distribution quality every cfg.naive.score_every steps.
CollapseReport run_naive_collapse(const Pipeline& p,
                                  const std::vector<double>& lambdas,
                                  std::size_t steps);
CollapseReport run_naive_collapse(const ExperimentConfig& cfg,
                                  const std::vector<double>& lambdas,
                                  std::size_t steps);

struct RobustnessVariant {
  std::string kind;  // unseen | transform | identifier_mismatch | other_subject
  std::size_t unseen_k = 0;
  std::string transform;  // flip | noise
};

// Names: unseen_<k>, transform_flip, transform_noise, identifier_mismatch,
// other_subject.
RobustnessVariant parse_variant(const std::string& name);
std::string variant_name(const RobustnessVariant& v);

struct RobustnessReport {
  std::string variant;
  std::string config_hash;
  MetricReport pretrained_scores;
  MetricReport baseline_attacked_scores;
  MetricReport protected_scores;
  MetricReport attacked_scores;
  double similarity_ratio = 0.0;  // attacked / baseline
  bool verdict = false;  // protection holds; for other_subject, success holds
  ConditionalDenoiser protected_model;
  ConditionalDenoiser attacked_model;
  std::vector<std::string> checkpoints;
  nlohmann::json to_json() const;
};

// Protect with l2p, then attack under the variant: extra unseen subject
// samples, transformed attack data, a fresh attack identifier, or
// personalization of a different subject (which must keep working).
RobustnessReport run_robustness(const Pipeline& p, const RobustnessVariant& v);
RobustnessReport run_robustness(const ExperimentConfig& cfg,
                                const RobustnessVariant& v);

}  // namespace apdm
