#include "apdm/scenarios.hpp"

#include <cmath>

#include "apdm/personalization.hpp"

namespace apdm {

using nlohmann::json;

ConditionalDenoiser pretrain_model(const ExperimentConfig& cfg,
                                   const NoiseSchedule& sched,
                                   const ConditioningEmbedding& c_per,
                                   const ConditioningEmbedding& c_pr,
                                   ExperimentTrace& trace) {
  Rng rng(derive_seed(cfg.seed, "pretrain"));
  ConditionalDenoiser model = init_denoiser(cfg.arch, rng);
  trace.stage = "pretrain";
  trace.set_columns({"step", "loss"});

  std::vector<Sample> batch_pr, batch_per;
  for (std::size_t step = 0; step < cfg.pretrain.steps; ++step) {
    batch_pr.clear();
    batch_per.clear();
    for (std::size_t i = 0; i < cfg.pretrain.batch; ++i) {
      Sample x = draw_prior(cfg.world, rng);
      // Alternate conditioning so the identifier initially behaves like the
      // class embedding.
      if (i % 2 == 0)
        batch_pr.push_back(std::move(x));
      else
        batch_per.push_back(std::move(x));
    }
    double value = 0.0;
    Vec grad(model.params.size(), 0.0);
    const double n_total = static_cast<double>(batch_pr.size() + batch_per.size());
    const LossReport rep_pr = simple_loss(model, sched, batch_pr, c_pr, rng);
    value += rep_pr.value * static_cast<double>(batch_pr.size());
    axpy(static_cast<double>(batch_pr.size()) / n_total, rep_pr.grad, grad);
    if (!batch_per.empty()) {
      const LossReport rep_per = simple_loss(model, sched, batch_per, c_per, rng);
      value += rep_per.value * static_cast<double>(batch_per.size());
      axpy(static_cast<double>(batch_per.size()) / n_total, rep_per.grad, grad);
    }
    value /= n_total;
    if (!std::isfinite(value))
      throw NumericError("pretrain: non-finite loss at step " +
                         std::to_string(step));
    trace.add_row({static_cast<double>(step), value});
    axpy(-cfg.pretrain.lr, grad, model.params);
  }
  return model;
}

Pipeline build_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  Pipeline p;
  p.cfg = cfg;
  p.sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  p.c_per = identifier_embedding(cfg.emb_per);
  p.c_pr = prior_embedding(cfg.emb_pr);

  Rng world_rng(derive_seed(cfg.seed, "world"));
  WorldSamples ws = gen_world(cfg.world, cfg.subject, cfg.n_subject,
                              cfg.n_reference, world_rng);
  p.subject = std::move(ws.subject);
  p.reference = std::move(ws.prior_reference);

  p.pretrained = pretrain_model(cfg, p.sched, p.c_per, p.c_pr, p.pretrain_trace);

  Rng dataset_rng(derive_seed(cfg.seed, "dataset"));
  p.dataset = build_concept_dataset(p.pretrained, p.sched, p.subject, p.c_per,
                                    p.c_pr, cfg.n_prior, dataset_rng);
  return p;
}

ProtectionResult protect_model(const Pipeline& p, const std::string& mode,
                               const CheckpointHook& hook) {
  ProtectionResult result;
  result.trace.stage = "protect_" + mode;
  Rng rng(derive_seed(p.cfg.seed, "protect"));

  if (mode == "none") {
    result.model = p.pretrained;
  } else if (mode == "naive") {
    result.model = p.pretrained;
    result.trace.set_columns({"step", "L_adv", "L_per_simple", "L_ppl"});
    result.diag_trace.stage = "diagnostics_naive";
    result.diag_trace.set_columns({"step", "norm_per", "norm_ppl", "cosine",
                                   "inner", "taylor_per", "taylor_ppl"});
    const double lambda = p.cfg.naive.lambda;
    for (std::size_t step = 0; step < p.cfg.naive.steps; ++step) {
      // Components evaluated separately (same stream order as adv_loss) so
      // the diagnostics reuse the exact training gradients.
      const LossReport per = per_simple_loss(result.model, p.sched, p.dataset, rng);
      const LossReport ppl = ppl_loss(result.model, p.sched, p.dataset, rng);
      const double value = -per.value + lambda * ppl.value;
      if (!std::isfinite(value))
        throw NumericError("naive protect: non-finite loss at step " +
                           std::to_string(step));
      const GradientDiagnostics d =
          diagnostics_from_gradients(per.grad, ppl.grad, p.cfg.diag_eta);
      result.trace.add_row(
          {static_cast<double>(step), value, per.value, ppl.value});
      result.diag_trace.add_row({static_cast<double>(step), d.norm_per,
                                 d.norm_ppl, d.cosine, d.inner, d.taylor_per,
                                 d.taylor_ppl});
      Vec grad(per.grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] = -per.grad[i] + lambda * ppl.grad[i];
      if (!all_finite(grad))
        throw NumericError("naive protect: non-finite gradient at step " +
                           std::to_string(step));
      axpy(-p.cfg.naive.lr, grad, result.model.params);
    }
  } else if (mode == "dpo_only") {
    result.model = p.pretrained;
    result.trace.set_columns({"step", "L_protect", "L_dpo", "L_ppl"});
    for (std::size_t step = 0; step < p.cfg.l2p.n_protect; ++step) {
      const ProtectReport rep = protect_loss(result.model, p.pretrained,
                                             p.sched, p.dataset,
                                             p.cfg.l2p.beta, rng);
      if (!std::isfinite(rep.value) || !all_finite(rep.grad))
        throw NumericError("dpo protect: non-finite loss at step " +
                           std::to_string(step));
      result.trace.add_row({static_cast<double>(step), rep.value, rep.dpo_value,
                            rep.ppl_value});
      axpy(-p.cfg.l2p.gamma_protect, rep.grad, result.model.params);
    }
  } else if (mode == "l2p") {
    L2PResult l2p = l2p_protect(p.pretrained, p.pretrained, p.sched, p.dataset,
                                p.cfg.l2p, rng, hook);
    result.model = std::move(l2p.model);
    result.trace = std::move(l2p.trace);
  } else {
    throw UsageError("protect: unknown mode '" + mode + "'");
  }
  return result;
}

MetricReport score_stage(const Pipeline& p, const ConditionalDenoiser& model,
                         const ConceptDataset& ds, const std::string& eval_tag) {
  return score_pipeline(model, p.sched, ds, p.reference, p.cfg.metrics.n_gen,
                        derive_seed(p.cfg.seed, "eval_" + eval_tag));
}

namespace {

TrainResult run_attack(const Pipeline& p, const ConditionalDenoiser& target,
                       const ConceptDataset& attack_ds) {
  Rng rng(derive_seed(p.cfg.seed, "attack"));
  return personalize(target, p.sched, attack_ds, p.cfg.personalize.steps,
                     p.cfg.personalize.lr, rng);
}

json scores_json(const MetricReport& r) { return metric_report_to_json(r); }

}  // namespace

ProtectAttackReport run_protect_attack(const Pipeline& p,
                                       const std::string& mode) {
  ProtectAttackReport rep;
  rep.mode = mode;
  rep.config_hash = config_hash_hex(p.cfg);

  rep.pretrained_scores = score_stage(p, p.pretrained, p.dataset, "pretrained");

  TrainResult baseline = run_attack(p, p.pretrained, p.dataset);
  rep.baseline_attack_trace = std::move(baseline.trace);
  rep.baseline_attacked_scores =
      score_stage(p, baseline.model, p.dataset, "attacked");

  ProtectionResult prot = protect_model(p, mode);
  rep.protect_trace = std::move(prot.trace);
  rep.diag_trace = std::move(prot.diag_trace);
  rep.protected_scores = score_stage(p, prot.model, p.dataset, "protected");

  TrainResult attacked = run_attack(p, prot.model, p.dataset);
  rep.attack_trace = std::move(attacked.trace);
  rep.attacked_scores = score_stage(p, attacked.model, p.dataset, "attacked");
  rep.protected_model = std::move(prot.model);
  rep.attacked_model = std::move(attacked.model);

  rep.verdict_protected =
      rep.attacked_scores.subject_similarity <=
      kProtectionRatio * rep.baseline_attacked_scores.subject_similarity;
  rep.verdict_preserved = rep.protected_scores.prior_mmd <=
                          kPreservationRatio * rep.pretrained_scores.prior_mmd;
  return rep;
}

ProtectAttackReport run_protect_attack(const ExperimentConfig& cfg,
                                       const std::string& mode) {
  return run_protect_attack(build_pipeline(cfg), mode);
}

json ProtectAttackReport::to_json() const {
  return {{"scenario", "protect_attack"},
          {"mode", mode},
          {"config_hash", config_hash},
          {"pretrained", scores_json(pretrained_scores)},
          {"baseline_attacked", scores_json(baseline_attacked_scores)},
          {"protected", scores_json(protected_scores)},
          {"attacked", scores_json(attacked_scores)},
          {"verdict_protected", verdict_protected},
          {"verdict_preserved", verdict_preserved},
          {"checkpoints", checkpoints}};
}

CollapseReport run_naive_collapse(const Pipeline& p,
                                  const std::vector<double>& lambdas,
                                  std::size_t steps) {
  CollapseReport rep;
  rep.config_hash = config_hash_hex(p.cfg);
  rep.pretrained_scores = score_stage(p, p.pretrained, p.dataset, "pretrained");

  for (double lambda : lambdas) {
    CollapseCell cell;
    cell.lambda = lambda;
    cell.trace.stage = "collapse";
    cell.trace.set_columns({"step", "L_adv", "L_per_simple", "L_ppl"});
    cell.diag_trace.stage = "collapse_diagnostics";
    cell.diag_trace.set_columns({"step", "norm_per", "norm_ppl", "cosine",
                                 "inner", "taylor_per", "taylor_ppl"});
    cell.mmd_trace.stage = "collapse_mmd";
    cell.mmd_trace.set_columns({"step", "prior_mmd"});

    const std::string tag = "collapse:" + format_double(lambda);
    Rng rng(derive_seed(p.cfg.seed, tag));
    ConditionalDenoiser model = p.pretrained;

    // Step 0 is the untouched pretrained model.
    cell.mmd_trace.add_row({0.0, rep.pretrained_scores.prior_mmd});
    cell.initial_mmd = rep.pretrained_scores.prior_mmd;

    for (std::size_t step = 0; step < steps; ++step) {
      const LossReport per = per_simple_loss(model, p.sched, p.dataset, rng);
      const LossReport ppl = ppl_loss(model, p.sched, p.dataset, rng);
      const double value = -per.value + lambda * ppl.value;
      if (!std::isfinite(value))
        throw NumericError("collapse: non-finite loss at step " +
                           std::to_string(step));
      const GradientDiagnostics d =
          diagnostics_from_gradients(per.grad, ppl.grad, p.cfg.diag_eta);
      cell.trace.add_row({static_cast<double>(step), value, per.value, ppl.value});
      cell.diag_trace.add_row({static_cast<double>(step), d.norm_per, d.norm_ppl,
                               d.cosine, d.inner, d.taylor_per, d.taylor_ppl});
      Vec grad(per.grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] = -per.grad[i] + lambda * ppl.grad[i];
      axpy(-p.cfg.naive.lr, grad, model.params);

      if ((step + 1) % p.cfg.naive.score_every == 0 || step + 1 == steps) {
        const MetricReport score = score_pipeline(
            model, p.sched, p.dataset, p.reference, p.cfg.metrics.n_gen,
            derive_seed(p.cfg.seed, tag + ":eval:" + std::to_string(step + 1)));
        if (!std::isfinite(score.prior_mmd))
          throw NumericError("collapse: non-finite metric at step " +
                             std::to_string(step + 1));
        cell.mmd_trace.add_row({static_cast<double>(step + 1), score.prior_mmd});
      }
    }
    cell.final_mmd = cell.mmd_trace.rows.back()[1];
    cell.final_model = std::move(model);
    rep.cells.push_back(std::move(cell));
  }
  return rep;
}

CollapseReport run_naive_collapse(const ExperimentConfig& cfg,
                                  const std::vector<double>& lambdas,
                                  std::size_t steps) {
  return run_naive_collapse(build_pipeline(cfg), lambdas, steps);
}

json CollapseReport::to_json() const {
  json cells_json = json::array();
  for (const auto& cell : cells)
    cells_json.push_back({{"lambda", cell.lambda},
                          {"initial_mmd", cell.initial_mmd},
                          {"final_mmd", cell.final_mmd},
                          {"blowup", cell.final_mmd / cell.initial_mmd}});
  return {{"scenario", "naive_collapse"},
          {"config_hash", config_hash},
          {"pretrained", scores_json(pretrained_scores)},
          {"cells", cells_json}};
}

RobustnessVariant parse_variant(const std::string& name) {
  RobustnessVariant v;
  if (name.rfind("unseen_", 0) == 0) {
    v.kind = "unseen";
    v.unseen_k = static_cast<std::size_t>(std::stoul(name.substr(7)));
  } else if (name == "transform_flip") {
    v.kind = "transform";
    v.transform = "flip";
  } else if (name == "transform_noise") {
    v.kind = "transform";
    v.transform = "noise";
  } else if (name == "identifier_mismatch" || name == "other_subject") {
    v.kind = name;
  } else {
    throw UsageError("robustness: unknown variant '" + name + "'");
  }
  return v;
}

std::string variant_name(const RobustnessVariant& v) {
  if (v.kind == "unseen") return "unseen_" + std::to_string(v.unseen_k);
  if (v.kind == "transform") return "transform_" + v.transform;
  return v.kind;
}

RobustnessReport run_robustness(const Pipeline& p, const RobustnessVariant& v) {
  RobustnessReport rep;
  rep.variant = variant_name(v);
  rep.config_hash = config_hash_hex(p.cfg);
  rep.pretrained_scores = score_stage(p, p.pretrained, p.dataset, "pretrained");

  // Dataset the attacker uses, per variant.
  ConceptDataset attack_ds = p.dataset;
  if (v.kind == "unseen") {
    if (v.unseen_k > 0) {
      Rng unseen_rng(derive_seed(p.cfg.seed, "unseen"));
      const SubjectComponent& subj = p.cfg.world.subject(p.cfg.subject);
      for (std::size_t k = 0; k < v.unseen_k; ++k) {
        Sample x(static_cast<std::size_t>(p.cfg.world.d));
        for (int i = 0; i < p.cfg.world.d; ++i)
          x[i] = subj.mean[i] + subj.stddev * unseen_rng.normal();
        attack_ds.negatives.push_back(std::move(x));
      }
      // Fresh positives keep the pairing a bijection; the attacker never
      // reads them.
      Rng pos_rng(derive_seed(p.cfg.seed, "unseen_positives"));
      std::vector<Sample> extra =
          sample(p.pretrained, p.sched, p.c_pr, v.unseen_k, pos_rng);
      for (std::size_t k = 0; k < v.unseen_k; ++k) {
        attack_ds.pairing.push_back(attack_ds.positives.size());
        attack_ds.positives.push_back(std::move(extra[k]));
      }
      attack_ds.validate();
    }
  } else if (v.kind == "transform") {
    if (v.transform == "flip") {
      for (Sample& x : attack_ds.negatives) x[0] = -x[0];
    } else if (v.transform == "noise") {
      // Additive jitter, std 0.02.
      Rng jitter_rng(derive_seed(p.cfg.seed, "transform_noise"));
      for (Sample& x : attack_ds.negatives)
        for (double& c : x) c += 0.02 * jitter_rng.normal();
    } else {
      throw UsageError("robustness: unknown transform '" + v.transform + "'");
    }
  } else if (v.kind == "identifier_mismatch") {
    attack_ds.c_per = identifier_embedding(p.cfg.emb_other);
  } else if (v.kind == "other_subject") {
    Rng other_rng(derive_seed(p.cfg.seed, "other_world"));
    const SubjectComponent& subj = p.cfg.world.subject(p.cfg.other_subject);
    std::vector<Sample> other_samples;
    for (std::size_t k = 0; k < p.cfg.n_subject; ++k) {
      Sample x(static_cast<std::size_t>(p.cfg.world.d));
      for (int i = 0; i < p.cfg.world.d; ++i)
        x[i] = subj.mean[i] + subj.stddev * other_rng.normal();
      other_samples.push_back(std::move(x));
    }
    Rng other_ds_rng(derive_seed(p.cfg.seed, "other_dataset"));
    attack_ds = build_concept_dataset(p.pretrained, p.sched, other_samples,
                                      identifier_embedding(p.cfg.emb_other),
                                      p.c_pr, p.cfg.n_prior, other_ds_rng);
  } else {
    throw UsageError("robustness: unknown variant kind '" + v.kind + "'");
  }

  TrainResult baseline = run_attack(p, p.pretrained, attack_ds);
  rep.baseline_attacked_scores =
      score_stage(p, baseline.model, attack_ds, "attacked");

  ProtectionResult prot = protect_model(p, "l2p");
  rep.protected_scores = score_stage(p, prot.model, p.dataset, "protected");

  TrainResult attacked = run_attack(p, prot.model, attack_ds);
  rep.attacked_scores = score_stage(p, attacked.model, attack_ds, "attacked");
  rep.protected_model = std::move(prot.model);
  rep.attacked_model = std::move(attacked.model);

  rep.similarity_ratio = rep.attacked_scores.subject_similarity /
                         rep.baseline_attacked_scores.subject_similarity;
  if (v.kind == "other_subject")
    rep.verdict = rep.similarity_ratio >= kOtherSubjectRatio;
  else
    rep.verdict = rep.similarity_ratio <= kProtectionRatio;
  return rep;
}

RobustnessReport run_robustness(const ExperimentConfig& cfg,
                                const RobustnessVariant& v) {
  return run_robustness(build_pipeline(cfg), v);
}

json RobustnessReport::to_json() const {
  return {{"scenario", "robustness"},
          {"variant", variant},
          {"config_hash", config_hash},
          {"pretrained", scores_json(pretrained_scores)},
          {"baseline_attacked", scores_json(baseline_attacked_scores)},
          {"protected", scores_json(protected_scores)},
          {"attacked", scores_json(attacked_scores)},
          {"similarity_ratio", similarity_ratio},
          {"verdict", verdict},
          {"checkpoints", checkpoints}};
}

}  // namespace apdm
