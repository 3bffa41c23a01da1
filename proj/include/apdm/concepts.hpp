#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apdm/common.hpp"
#include "apdm/denoiser.hpp"
#include "apdm/losses.hpp"

namespace apdm {

struct PriorComponent {
  Sample mean;
  double stddev = 1.0;
  double weight = 1.0;
};

struct SubjectComponent {
  std::string name;
  Sample mean;
  double stddev = 0.05;
};

// Synthetic world: a broad mixture standing in for the class distribution
// plus tight named components standing in for individual subjects.
struct WorldSpec {
  int d = 2;
  std::vector<PriorComponent> prior_mixture;
  std::vector<SubjectComponent> subjects;

  void validate() const;
  const SubjectComponent& subject(std::string_view name) const;
  Sample prior_mean() const;
};

// Four class modes on a ring, two subjects at tight off-mode locations.
WorldSpec default_world();

Sample draw_prior(const WorldSpec& world, Rng& rng);

struct WorldSamples {
  std::vector<Sample> subject;
  std::vector<Sample> prior_reference;
};

WorldSamples gen_world(const WorldSpec& world, std::string_view subject_name,
                       std::size_t n_subject, std::size_t n_reference,
                       Rng& rng);

// Subject negatives paired one-to-one with generated positives, plus the
// generated prior set used by the preservation loss. The pairing permutation
// is fixed at construction and never reshuffled.
struct ConceptDataset {
  std::vector<Sample> negatives;   // subject samples
  std::vector<Sample> positives;   // generated under c_pr
  std::vector<Sample> priors;      // generated under c_pr
  std::vector<std::size_t> pairing;  // negatives[i] <-> positives[pairing[i]]
  ConditioningEmbedding c_per;
  ConditioningEmbedding c_pr;

  void validate() const;
};

// positives = n_subject samples and priors = n_prior samples from the
// pretrained model under c_pr; pairing is a seeded permutation.
ConceptDataset build_concept_dataset(const ConditionalDenoiser& pretrained,
                                     const NoiseSchedule& sched,
                                     const std::vector<Sample>& subject,
                                     const ConditioningEmbedding& c_per,
                                     const ConditioningEmbedding& c_pr,
                                     std::size_t n_prior, Rng& rng);

nlohmann::json world_to_json(const WorldSpec& world);
WorldSpec world_from_json(const nlohmann::json& j);

nlohmann::json dataset_to_json(const ConceptDataset& ds);
ConceptDataset dataset_from_json(const nlohmann::json& j);

}  // namespace apdm
