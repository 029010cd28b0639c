#pragma once

#include <string>

#include "tide/corpus.hpp"
#include "tide/pattern_graph.hpp"
#include "tide/synth.hpp"
#include "tide/trainer.hpp"

namespace tide::testutil {

struct MicroFixture {
  SplitCorpus split;
  PatternGraph graph;
};

// Small corpus for gradient checks and smoke training: 5 users, 20 items,
// planted period plus one reliable pool so mining always finds patterns.
inline MicroFixture micro_fixture(std::uint64_t seed = 7) {
  SynthConfig cfg;
  cfg.n_users = 5;
  cfg.n_items = 20;
  cfg.baskets_per_user = 8;
  cfg.periodic_items = {{0, 3, 0}};
  cfg.habit_prob = 0.4;
  cfg.pools = {{{4, 5}, 0.8}};
  cfg.noise_items_per_basket = 1;
  cfg.seed = seed;
  const auto gen = generate(cfg);
  MicroFixture fx;
  fx.split = split_leave_one_out(gen.corpus);
  fx.graph = mine_patterns(fx.split.train, 2, MiningMetric::kCount);
  return fx;
}

inline TrainConfig micro_train_config(std::uint64_t seed = 7) {
  TrainConfig cfg;
  cfg.d = 8;
  cfg.batch_size = 100;
  cfg.learning_rate = 1e-2;
  cfg.l2_gamma = 1e-4;
  cfg.mu = 0.1;
  cfg.tau = 0.1;
  cfg.epochs = 5;
  cfg.seed = seed;
  cfg.min_support = 2;
  return cfg;
}

}  // namespace tide::testutil
