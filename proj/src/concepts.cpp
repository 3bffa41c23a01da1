#include "apdm/concepts.hpp"

#include <cmath>

namespace apdm {

using nlohmann::json;

void WorldSpec::validate() const {
  if (d < 1) throw ConfigError("world: d must be >= 1");
  if (prior_mixture.empty()) throw ConfigError("world: empty prior mixture");
  double wsum = 0.0;
  double min_prior_std = 1e300;
  for (const auto& comp : prior_mixture) {
    if (static_cast<int>(comp.mean.size()) != d)
      throw ConfigError("world: prior component mean dimension mismatch");
    if (!(comp.stddev > 0.0))
      throw ConfigError("world: prior component stddev must be > 0");
    if (!(comp.weight > 0.0))
      throw ConfigError("world: prior component weight must be > 0");
    wsum += comp.weight;
    min_prior_std = std::min(min_prior_std, comp.stddev);
  }
  if (std::fabs(wsum - 1.0) > 1e-9)
    throw ConfigError("world: prior mixture weights must sum to 1");
  for (const auto& s : subjects) {
    if (static_cast<int>(s.mean.size()) != d)
      throw ConfigError("world: subject mean dimension mismatch");
    if (!(s.stddev > 0.0))
      throw ConfigError("world: subject stddev must be > 0");
    if (!(s.stddev < min_prior_std))
      throw ConfigError("world: subject stddev must be below every prior stddev");
  }
}

const SubjectComponent& WorldSpec::subject(std::string_view name) const {
  for (const auto& s : subjects)
    if (s.name == name) return s;
  throw ConfigError("world: unknown subject '" + std::string(name) + "'");
}

Sample WorldSpec::prior_mean() const {
  Sample m(static_cast<std::size_t>(d), 0.0);
  for (const auto& comp : prior_mixture)
    for (int i = 0; i < d; ++i) m[i] += comp.weight * comp.mean[i];
  return m;
}

WorldSpec default_world() {
  WorldSpec w;
  w.d = 2;
  w.prior_mixture = {
      {{1.2, 0.0}, 0.35, 0.25},
      {{0.0, 1.2}, 0.35, 0.25},
      {{-1.2, 0.0}, 0.35, 0.25},
      {{0.0, -1.2}, 0.35, 0.25},
  };
  w.subjects = {
      {"subject_a", {1.2, 1.2}, 0.05},
      {"subject_b", {-1.2, 1.2}, 0.05},
  };
  return w;
}

Sample draw_prior(const WorldSpec& world, Rng& rng) {
  // Component by cumulative weight, then coordinates in order.
  const double u = rng.uniform();
  double acc = 0.0;
  const PriorComponent* chosen = &world.prior_mixture.back();
  for (const auto& comp : world.prior_mixture) {
    acc += comp.weight;
    if (u < acc) {
      chosen = &comp;
      break;
    }
  }
  Sample x(static_cast<std::size_t>(world.d));
  for (int i = 0; i < world.d; ++i)
    x[i] = chosen->mean[i] + chosen->stddev * rng.normal();
  return x;
}

WorldSamples gen_world(const WorldSpec& world, std::string_view subject_name,
                       std::size_t n_subject, std::size_t n_reference,
                       Rng& rng) {
  world.validate();
  if (n_subject < 1) throw UsageError("gen_world: n_subject must be >= 1");
  const SubjectComponent& subj = world.subject(subject_name);

  WorldSamples out;
  out.subject.reserve(n_subject);
  for (std::size_t k = 0; k < n_subject; ++k) {
    Sample x(static_cast<std::size_t>(world.d));
    for (int i = 0; i < world.d; ++i)
      x[i] = subj.mean[i] + subj.stddev * rng.normal();
    out.subject.push_back(std::move(x));
  }
  out.prior_reference.reserve(n_reference);
  for (std::size_t k = 0; k < n_reference; ++k)
    out.prior_reference.push_back(draw_prior(world, rng));
  return out;
}

void ConceptDataset::validate() const {
  if (positives.size() != negatives.size())
    throw UsageError("dataset: |positives| must equal |negatives|");
  if (pairing.size() != negatives.size())
    throw UsageError("dataset: pairing length mismatch");
  std::vector<bool> seen(pairing.size(), false);
  for (std::size_t idx : pairing) {
    if (idx >= pairing.size() || seen[idx])
      throw UsageError("dataset: pairing is not a bijection");
    seen[idx] = true;
  }
  if (c_per.tag != "identifier")
    throw UsageError("dataset: c_per must carry the identifier tag");
  if (c_pr.tag != "prior")
    throw UsageError("dataset: c_pr must carry the prior tag");
}

ConceptDataset build_concept_dataset(const ConditionalDenoiser& pretrained,
                                     const NoiseSchedule& sched,
                                     const std::vector<Sample>& subject,
                                     const ConditioningEmbedding& c_per,
                                     const ConditioningEmbedding& c_pr,
                                     std::size_t n_prior, Rng& rng) {
  if (subject.empty())
    throw UsageError("build_concept_dataset: empty subject set");
  ConceptDataset ds;
  ds.negatives = subject;
  ds.positives = sample(pretrained, sched, c_pr, subject.size(), rng);
  ds.priors = sample(pretrained, sched, c_pr, n_prior, rng);
  ds.c_per = c_per;
  ds.c_pr = c_pr;
  // Fisher-Yates on the identity permutation.
  ds.pairing.resize(subject.size());
  for (std::size_t i = 0; i < ds.pairing.size(); ++i) ds.pairing[i] = i;
  for (std::size_t i = ds.pairing.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(ds.pairing[i - 1], ds.pairing[j]);
  }
  ds.validate();
  return ds;
}

json world_to_json(const WorldSpec& world) {
  json comps = json::array();
  for (const auto& c : world.prior_mixture)
    comps.push_back({{"mean", c.mean}, {"stddev", c.stddev}, {"weight", c.weight}});
  json subs = json::array();
  for (const auto& s : world.subjects)
    subs.push_back({{"name", s.name}, {"mean", s.mean}, {"stddev", s.stddev}});
  return {{"d", world.d}, {"prior_mixture", comps}, {"subjects", subs}};
}

WorldSpec world_from_json(const json& j) {
  WorldSpec w;
  w.d = j.at("d").get<int>();
  for (const auto& c : j.at("prior_mixture")) {
    PriorComponent pc;
    pc.mean = c.at("mean").get<Sample>();
    pc.stddev = c.at("stddev").get<double>();
    pc.weight = c.at("weight").get<double>();
    w.prior_mixture.push_back(std::move(pc));
  }
  for (const auto& s : j.at("subjects")) {
    SubjectComponent sc;
    sc.name = s.at("name").get<std::string>();
    sc.mean = s.at("mean").get<Sample>();
    sc.stddev = s.at("stddev").get<double>();
    w.subjects.push_back(std::move(sc));
  }
  return w;
}

namespace {

json embedding_to_json(const ConditioningEmbedding& e) {
  return {{"vector", e.vector}, {"tag", e.tag}};
}

ConditioningEmbedding embedding_from_json(const json& j) {
  return {j.at("vector").get<Vec>(), j.at("tag").get<std::string>()};
}

}  // namespace

json dataset_to_json(const ConceptDataset& ds) {
  return {{"negatives", ds.negatives},
          {"positives", ds.positives},
          {"priors", ds.priors},
          {"pairing", ds.pairing},
          {"c_per", embedding_to_json(ds.c_per)},
          {"c_pr", embedding_to_json(ds.c_pr)}};
}

ConceptDataset dataset_from_json(const json& j) {
  ConceptDataset ds;
  ds.negatives = j.at("negatives").get<std::vector<Sample>>();
  ds.positives = j.at("positives").get<std::vector<Sample>>();
  ds.priors = j.at("priors").get<std::vector<Sample>>();
  ds.pairing = j.at("pairing").get<std::vector<std::size_t>>();
  ds.c_per = embedding_from_json(j.at("c_per"));
  ds.c_pr = embedding_from_json(j.at("c_pr"));
  ds.validate();
  return ds;
}

}  // namespace apdm
