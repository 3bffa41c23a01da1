#pragma once

#include "apdm/scenarios.hpp"

// Shared reduced-size experiment for the slower end-to-end unit tests. The
// pipeline (world draws, pretraining, dataset) is built once per test binary.
namespace testfx {

inline apdm::ExperimentConfig small_config() {
  apdm::ExperimentConfig cfg;
  cfg.seed = 2025;
  cfg.n_reference = 1200;
  cfg.pretrain.steps = 4000;
  cfg.pretrain.batch = 96;
  cfg.personalize.steps = 800;
  cfg.l2p.n_per = 4;
  cfg.l2p.n_protect = 40;
  cfg.naive.steps = 120;
  cfg.naive.score_every = 60;
  cfg.metrics.n_gen = 256;
  cfg.out_dir = "test_runs/fixture";
  return cfg;
}

inline const apdm::Pipeline& small_pipeline() {
  static const apdm::Pipeline p = apdm::build_pipeline(small_config());
  return p;
}

}  // namespace testfx
