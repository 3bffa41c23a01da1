#pragma once

#include <json.hpp>

#include "apdm/concepts.hpp"
#include "apdm/losses.hpp"

namespace apdm {

// Median pairwise Euclidean distance (lower median, all i < j pairs).
// Falls back to 1.0 when fewer than two points or every distance is zero.
double median_bandwidth(const std::vector<Sample>& pooled);

// Mean over `generated` of exp(-|x - nn(x)|^2 / bandwidth^2) where nn is the
// nearest subject sample. 1 when every generated point sits on a subject
// point; decays to 0 with distance.
double subject_similarity(const std::vector<Sample>& generated,
                          const std::vector<Sample>& subject, double bandwidth);

// Biased (V-statistic) squared MMD with RBF kernel
// k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2)):
//   mean k(a, a') + mean k(b, b') - 2 mean k(a, b).
// Exactly zero on identical sets and exactly symmetric in its arguments.
double mmd2(const std::vector<Sample>& a, const std::vector<Sample>& b,
            double bandwidth);

struct MetricReport {
  double subject_similarity = 0.0;
  double prior_mmd = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double similarity_bandwidth = 0.0;
  double mmd_bandwidth = 0.0;
};

nlohmann::json metric_report_to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

// Generates n_gen samples under the identifier embedding and scores them
// against the subject set, then n_gen under the class embedding scored as
// squared MMD against the reference set. Bandwidths come from the median
// heuristic on each pooled comparison set and are reported.
MetricReport score_pipeline(const ConditionalDenoiser& model,
                            const NoiseSchedule& sched, const ConceptDataset& ds,
                            const std::vector<Sample>& world_reference,
                            std::size_t n_gen, std::uint64_t seed);

}  // namespace apdm
