#include "apdm/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace apdm {

using nlohmann::json;

double median_bandwidth(const std::vector<Sample>& pooled) {
  std::vector<double> dists;
  dists.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j)
      dists.push_back(std::sqrt(squared_distance(pooled[i], pooled[j])));
  if (dists.empty()) return 1.0;
  const std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  const double med = dists[mid];
  return med > 0.0 ? med : 1.0;
}

double subject_similarity(const std::vector<Sample>& generated,
                          const std::vector<Sample>& subject,
                          double bandwidth) {
  if (!(bandwidth > 0.0))
    throw ConfigError("subject_similarity: bandwidth must be > 0");
  if (generated.empty() || subject.empty())
    throw UsageError("subject_similarity: empty sample set");
  const double bw2 = bandwidth * bandwidth;
  double total = 0.0;
  for (const Sample& x : generated) {
    double best = squared_distance(x, subject.front());
    for (std::size_t j = 1; j < subject.size(); ++j)
      best = std::min(best, squared_distance(x, subject[j]));
    total += std::exp(-best / bw2);
  }
  return total / static_cast<double>(generated.size());
}

namespace {

double kernel_sum_within(const std::vector<Sample>& s, double inv_2bw2) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      total += std::exp(-squared_distance(s[i], s[j]) * inv_2bw2);
  return total;
}

// Deterministic ordering of the two sets so the cross sum is accumulated in
// one canonical order regardless of argument order; this makes the estimator
// exactly symmetric in floating point.
bool precedes(const std::vector<Sample>& a, const std::vector<Sample>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return a[i].size() < b[i].size();
    for (std::size_t k = 0; k < a[i].size(); ++k)
      if (a[i][k] != b[i][k]) return a[i][k] < b[i][k];
  }
  return true;  // equal contents: either order gives identical sums
}

}  // namespace

double mmd2(const std::vector<Sample>& a, const std::vector<Sample>& b,
            double bandwidth) {
  if (!(bandwidth > 0.0)) throw ConfigError("mmd2: bandwidth must be > 0");
  if (a.empty() || b.empty()) throw UsageError("mmd2: empty sample set");
  const double inv_2bw2 = 1.0 / (2.0 * bandwidth * bandwidth);

  const std::vector<Sample>& first = precedes(a, b) ? a : b;
  const std::vector<Sample>& second = precedes(a, b) ? b : a;

  double cross = 0.0;
  for (const Sample& x : first)
    for (const Sample& y : second)
      cross += std::exp(-squared_distance(x, y) * inv_2bw2);

  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  const double term_aa = kernel_sum_within(a, inv_2bw2) / (n * n);
  const double term_bb = kernel_sum_within(b, inv_2bw2) / (m * m);
  const double term_ab = cross / (n * m);
  // The V-statistic is a squared RKHS norm; clamp the sub-ulp negatives
  // rounding can produce.
  return std::max(0.0, term_aa + term_bb - 2.0 * term_ab);
}

json metric_report_to_json(const MetricReport& r) {
  return {{"subject_similarity", r.subject_similarity},
          {"prior_mmd", r.prior_mmd},
          {"n_samples", r.n_samples},
          {"seed", r.seed},
          {"similarity_bandwidth", r.similarity_bandwidth},
          {"mmd_bandwidth", r.mmd_bandwidth}};
}

MetricReport metric_report_from_json(const json& j) {
  MetricReport r;
  r.subject_similarity = j.at("subject_similarity").get<double>();
  r.prior_mmd = j.at("prior_mmd").get<double>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.similarity_bandwidth = j.at("similarity_bandwidth").get<double>();
  r.mmd_bandwidth = j.at("mmd_bandwidth").get<double>();
  return r;
}

MetricReport score_pipeline(const ConditionalDenoiser& model,
                            const NoiseSchedule& sched, const ConceptDataset& ds,
                            const std::vector<Sample>& world_reference,
                            std::size_t n_gen, std::uint64_t seed) {
  if (n_gen < 1) throw UsageError("score_pipeline: n_gen must be >= 1");
  Rng rng(seed);
  MetricReport rep;
  rep.n_samples = n_gen;
  rep.seed = seed;

  const std::vector<Sample> gen_per = sample(model, sched, ds.c_per, n_gen, rng);
  std::vector<Sample> pooled = gen_per;
  pooled.insert(pooled.end(), ds.negatives.begin(), ds.negatives.end());
  rep.similarity_bandwidth = median_bandwidth(pooled);
  rep.subject_similarity =
      subject_similarity(gen_per, ds.negatives, rep.similarity_bandwidth);

  const std::vector<Sample> gen_pr = sample(model, sched, ds.c_pr, n_gen, rng);
  pooled = gen_pr;
  pooled.insert(pooled.end(), world_reference.begin(), world_reference.end());
  rep.mmd_bandwidth = median_bandwidth(pooled);
  rep.prior_mmd = mmd2(gen_pr, world_reference, rep.mmd_bandwidth);
  return rep;
}

}  // namespace apdm
