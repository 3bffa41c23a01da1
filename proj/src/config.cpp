#include "apdm/config.hpp"

#include <fstream>
#include <set>

namespace apdm {

using nlohmann::json;

void ExperimentConfig::validate() const {
  world.validate();
  world.subject(subject);
  if (!other_subject.empty()) world.subject(other_subject);
  if (n_subject < 1) throw ConfigError("config: n_subject must be >= 1");
  if (n_prior < 1) throw ConfigError("config: n_prior must be >= 1");
  if (n_reference < 2) throw ConfigError("config: n_reference must be >= 2");
  if (T < 1) throw ConfigError("config: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("config: beta range must satisfy 0 < beta_start <= beta_end < 1");
  arch.validate();
  if (arch.sample_dim != world.d)
    throw ConfigError("config: arch.sample_dim must equal world.d");
  const std::size_t cd = static_cast<std::size_t>(arch.cond_dim);
  if (emb_per.size() != cd || emb_pr.size() != cd || emb_other.size() != cd)
    throw ConfigError("config: embedding dimension must equal arch.cond_dim");
  if (emb_per == emb_pr || emb_per == emb_other || emb_pr == emb_other)
    throw ConfigError("config: embeddings must be pairwise distinct");
  if (!(pretrain.lr > 0.0)) throw ConfigError("config: pretrain.lr must be > 0");
  if (pretrain.batch < 1) throw ConfigError("config: pretrain.batch must be >= 1");
  if (!(personalize.lr > 0.0))
    throw ConfigError("config: personalize.lr must be > 0");
  l2p.validate();
  if (!(naive.lr > 0.0)) throw ConfigError("config: naive.lr must be > 0");
  if (!(naive.lambda > 0.0)) throw ConfigError("config: naive.lambda must be > 0");
  if (naive.score_every < 1)
    throw ConfigError("config: naive.score_every must be >= 1");
  if (metrics.n_gen < 1) throw ConfigError("config: metrics.n_gen must be >= 1");
  if (!(diag_eta > 0.0)) throw ConfigError("config: diag_eta must be > 0");
  if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
}

json config_to_json(const ExperimentConfig& cfg) {
  return {
      {"world", world_to_json(cfg.world)},
      {"subject", cfg.subject},
      {"other_subject", cfg.other_subject},
      {"n_subject", cfg.n_subject},
      {"n_prior", cfg.n_prior},
      {"n_reference", cfg.n_reference},
      {"schedule",
       {{"T", cfg.T}, {"beta_start", cfg.beta_start}, {"beta_end", cfg.beta_end}}},
      {"arch",
       {{"sample_dim", cfg.arch.sample_dim},
        {"cond_dim", cfg.arch.cond_dim},
        {"hidden", cfg.arch.hidden}}},
      {"embeddings",
       {{"per", cfg.emb_per}, {"pr", cfg.emb_pr}, {"other", cfg.emb_other}}},
      {"pretrain",
       {{"steps", cfg.pretrain.steps},
        {"lr", cfg.pretrain.lr},
        {"batch", cfg.pretrain.batch}}},
      {"personalize",
       {{"steps", cfg.personalize.steps}, {"lr", cfg.personalize.lr}}},
      {"l2p",
       {{"n_per", cfg.l2p.n_per},
        {"n_protect", cfg.l2p.n_protect},
        {"gamma_per", cfg.l2p.gamma_per},
        {"gamma_protect", cfg.l2p.gamma_protect},
        {"beta", cfg.l2p.beta},
        {"checkpoint_every", cfg.l2p.checkpoint_every}}},
      {"naive",
       {{"steps", cfg.naive.steps},
        {"lr", cfg.naive.lr},
        {"lambda", cfg.naive.lambda},
        {"score_every", cfg.naive.score_every}}},
      {"metrics", {{"n_gen", cfg.metrics.n_gen}}},
      {"diag_eta", cfg.diag_eta},
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
  };
}

namespace {

// Reads j[key] into out when present; rethrows json errors as ConfigError
// naming the full field path.
template <typename T>
void read_field(const json& j, const std::string& path, const char* key,
                T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for field '" + path + key +
                      "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& known) {
  for (const auto& [key, _] : j.items())
    if (!known.contains(key))
      throw ConfigError("config: unknown field '" + path + key + "'");
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(j, "",
                 {"world", "subject", "other_subject", "n_subject", "n_prior",
                  "n_reference", "schedule", "arch", "embeddings", "pretrain",
                  "personalize", "l2p", "naive", "metrics", "diag_eta", "seed",
                  "out_dir"});
  ExperimentConfig cfg;
  if (j.contains("world")) {
    try {
      cfg.world = world_from_json(j.at("world"));
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for field 'world': " +
                        std::string(e.what()));
    }
  }
  read_field(j, "", "subject", cfg.subject);
  read_field(j, "", "other_subject", cfg.other_subject);
  read_field(j, "", "n_subject", cfg.n_subject);
  read_field(j, "", "n_prior", cfg.n_prior);
  read_field(j, "", "n_reference", cfg.n_reference);
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    reject_unknown(s, "schedule.", {"T", "beta_start", "beta_end"});
    read_field(s, "schedule.", "T", cfg.T);
    read_field(s, "schedule.", "beta_start", cfg.beta_start);
    read_field(s, "schedule.", "beta_end", cfg.beta_end);
  }
  if (j.contains("arch")) {
    const json& a = j.at("arch");
    reject_unknown(a, "arch.", {"sample_dim", "cond_dim", "hidden"});
    read_field(a, "arch.", "sample_dim", cfg.arch.sample_dim);
    read_field(a, "arch.", "cond_dim", cfg.arch.cond_dim);
    read_field(a, "arch.", "hidden", cfg.arch.hidden);
  }
  if (j.contains("embeddings")) {
    const json& e = j.at("embeddings");
    reject_unknown(e, "embeddings.", {"per", "pr", "other"});
    read_field(e, "embeddings.", "per", cfg.emb_per);
    read_field(e, "embeddings.", "pr", cfg.emb_pr);
    read_field(e, "embeddings.", "other", cfg.emb_other);
  }
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    reject_unknown(p, "pretrain.", {"steps", "lr", "batch"});
    read_field(p, "pretrain.", "steps", cfg.pretrain.steps);
    read_field(p, "pretrain.", "lr", cfg.pretrain.lr);
    read_field(p, "pretrain.", "batch", cfg.pretrain.batch);
  }
  if (j.contains("personalize")) {
    const json& p = j.at("personalize");
    reject_unknown(p, "personalize.", {"steps", "lr"});
    read_field(p, "personalize.", "steps", cfg.personalize.steps);
    read_field(p, "personalize.", "lr", cfg.personalize.lr);
  }
  if (j.contains("l2p")) {
    const json& l = j.at("l2p");
    reject_unknown(l, "l2p.",
                   {"n_per", "n_protect", "gamma_per", "gamma_protect", "beta",
                    "checkpoint_every"});
    read_field(l, "l2p.", "n_per", cfg.l2p.n_per);
    read_field(l, "l2p.", "n_protect", cfg.l2p.n_protect);
    read_field(l, "l2p.", "gamma_per", cfg.l2p.gamma_per);
    read_field(l, "l2p.", "gamma_protect", cfg.l2p.gamma_protect);
    read_field(l, "l2p.", "beta", cfg.l2p.beta);
    read_field(l, "l2p.", "checkpoint_every", cfg.l2p.checkpoint_every);
  }
  if (j.contains("naive")) {
    const json& n = j.at("naive");
    reject_unknown(n, "naive.", {"steps", "lr", "lambda", "score_every"});
    read_field(n, "naive.", "steps", cfg.naive.steps);
    read_field(n, "naive.", "lr", cfg.naive.lr);
    read_field(n, "naive.", "lambda", cfg.naive.lambda);
    read_field(n, "naive.", "score_every", cfg.naive.score_every);
  }
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    reject_unknown(m, "metrics.", {"n_gen"});
    read_field(m, "metrics.", "n_gen", cfg.metrics.n_gen);
  }
  read_field(j, "", "diag_eta", cfg.diag_eta);
  read_field(j, "", "seed", cfg.seed);
  read_field(j, "", "out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: invalid JSON in '" + path.string() +
                      "': " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot open '" + path.string() + "'");
  out << config_to_json(cfg).dump(2) << "\n";
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(config_to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace apdm
