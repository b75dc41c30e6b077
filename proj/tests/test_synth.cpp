// Copyright 2026 The PALS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "pals/benchmarks.hpp"
#include "pals/cohort.hpp"
#include "pals/eval.hpp"
#include "pals/synth.hpp"

namespace pals {
namespace {

double rate(const std::vector<int>& v) {
  double s = 0.0;
  for (int x : v) s += x;
  return s / static_cast<double>(v.size());
}

TEST(Synth, CoinFlipInfectionRate) {
  SynthConfig cfg = experiment_base(Experiment::kExp1);
  cfg.p_y_given_exposure = cfg.p_y_given_susceptible = cfg.p_baseline = 0.5;
  cfg = with_seed(cfg, 11);
  const auto c = generate_cohort(cfg);
  EXPECT_EQ(c.network.node_count(), 500u);
  EXPECT_NEAR(rate(c.truth.y), 0.5, 0.05);
}

TEST(Synth, ZeroSpreaderWeightsGiveHalfSpreaders) {
  SynthConfig cfg = with_seed(experiment_base(Experiment::kExp1), 12);
  cfg.true_u.assign(cfg.feature_dim, 0.0);
  EXPECT_NEAR(rate(generate_cohort(cfg).truth.z_true), 0.5, 0.05);
}

TEST(Synth, AllSpreaderBlockExposesEveryone) {
  // Complete blocks of 5; a node spreads iff its single feature is set, so
  // some blocks end up all-spreader across 50 seeds.
  SynthConfig cfg;
  cfg.network = {{5, 5}, 1.0, 0.0, 0};
  cfg.feature_dim = 1;
  cfg.true_u = {50.0};
  cfg.spreader_determinism = SpreaderDeterminism::kThreshold;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto c = generate_cohort(with_seed(cfg, seed));
    for (std::size_t b = 0; b < 2; ++b) {
      bool all = true;
      for (std::size_t i = 5 * b; i < 5 * b + 5; ++i) all = all && c.truth.z_true[i] == 1;
      if (!all) continue;
      for (std::size_t i = 5 * b; i < 5 * b + 5; ++i) EXPECT_EQ(c.truth.eta_true[i], 1);
    }
  }
}

TEST(Synth, RegenerationIsBitIdentical) {
  const SynthConfig cfg = with_seed(experiment_base(Experiment::kExp2), 13);
  const auto a = generate_cohort(cfg);
  const auto b = generate_cohort(cfg);
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_EQ(a.network.features, b.network.features);
  EXPECT_EQ(a.network.neighbors, b.network.neighbors);
}

TEST(Synth, FullObservationMasksEveryone) {
  SynthConfig cfg = with_seed(experiment_base(Experiment::kExp3), 14);
  cfg.observed_spreader_fraction = 1.0;
  const auto c = generate_cohort(cfg);
  for (bool b : c.truth.z_observed_mask) EXPECT_TRUE(b);
}

TEST(Synth, ObservationMasksAreNested) {
  const auto c = generate_cohort(with_seed(experiment_base(Experiment::kExp3), 15));
  std::vector<bool> prev(500, false);
  for (int k = 0; k <= 10; ++k) {
    const auto m = observation_mask(c.truth.observation_rank, k / 10.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (prev[i]) {
        EXPECT_TRUE(m[i]);
      }
      count += m[i];
    }
    EXPECT_EQ(count, static_cast<std::size_t>(50 * k));
    prev = m;
  }
}

TEST(Synth, ZeroNeighborNodesAreUnexposed) {
  SynthConfig cfg;
  cfg.network = {{1, 1, 1}, 0.5, 0.0, 0};
  const auto c = generate_cohort(with_seed(cfg, 16));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(c.truth.theta_true[i], 0.0);
    EXPECT_EQ(c.truth.eta_true[i], 0);
  }
}

TEST(Synth, InfectionCombineRules) {
  SynthConfig cfg;
  cfg.p_y_given_exposure = 0.8;
  cfg.p_y_given_susceptible = 0.5;
  cfg.p_baseline = 0.1;
  cfg.combine = InfectionCombine::kMax;
  EXPECT_DOUBLE_EQ(infection_probability(cfg, 1, 1), 0.8);
  EXPECT_DOUBLE_EQ(infection_probability(cfg, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(infection_probability(cfg, 0, 0), 0.1);
  cfg.combine = InfectionCombine::kNoisyOr;
  EXPECT_NEAR(infection_probability(cfg, 1, 1), 1.0 - 0.2 * 0.5 * 0.9, 1e-15);
  cfg.combine = InfectionCombine::kExposureFirst;
  EXPECT_DOUBLE_EQ(infection_probability(cfg, 1, 0), 0.8);
  EXPECT_DOUBLE_EQ(infection_probability(cfg, 0, 1), 0.5);
}

TEST(Synth, ExperimentGridShapes) {
  const auto g1 = experiment_grid(Experiment::kExp1, 30, 1);
  EXPECT_EQ(g1.size(), 150u);
  for (const auto& c : g1) EXPECT_EQ(c.p_y_given_susceptible, 0.5);
  const auto g2 = experiment_grid(Experiment::kExp2, 1, 1);
  ASSERT_EQ(g2.size(), 5u);
  for (const auto& c : g2) EXPECT_EQ(c.susceptible_fraction, 0.5);
  const auto g3 = experiment_grid(Experiment::kExp3, 1, 1);
  ASSERT_EQ(g3.size(), 11u);
  for (int k = 0; k <= 10; ++k) EXPECT_NEAR(g3[k].observed_spreader_fraction, k / 10.0, 1e-15);
}

TEST(Synth, GridSeedsDistinctAcrossRunsMatchedAcrossValues) {
  const auto g = experiment_grid(Experiment::kExp1, 5, 3);
  std::set<std::uint64_t> seeds;
  for (int r = 0; r < 5; ++r) {
    seeds.insert(g[r].seed);
    for (int v = 1; v < 5; ++v) EXPECT_EQ(g[v * 5 + r].seed, g[r].seed);
  }
  EXPECT_EQ(seeds.size(), 5u);
}

TEST(Synth, DefaultSpreaderWeights) {
  const auto u = default_spreader_weights(20);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(u[k], 2.0);
  for (int k = 5; k < 10; ++k) EXPECT_EQ(u[k], -2.0);
  for (int k = 10; k < 20; ++k) EXPECT_EQ(u[k], 0.0);
}

TEST(Synth, InvalidConfigsRejected) {
  SynthConfig cfg;
  cfg.feature_dim = 0;
  cfg.true_u.clear();
  EXPECT_THROW(generate_cohort(cfg), ConfigError);
  cfg = {};
  cfg.p_baseline = 1.5;
  EXPECT_THROW(generate_cohort(cfg), ConfigError);
}

TEST(Synth, Exp1OutcomeIndependentOfFeatures) {
  // A logistic fit on x alone cannot rank outcomes that depend only on
  // exposure. Checked on matched train/test cohorts at p(y|E) = 0.9.
  double total = 0.0;
  const int runs = 5;
  for (int r = 0; r < runs; ++r) {
    SynthConfig cfg = with_seed(experiment_base(Experiment::kExp1), 100 + r);
    cfg.p_y_given_exposure = 0.9;
    auto train = generate_cohort(cfg);
    auto test = generate_cohort(test_config_for(cfg));
    train.network = append_constant_feature(train.network);
    test.network = append_constant_feature(test.network);
    const auto tr = label_cohort(train, false);
    const auto te = label_cohort(test, false);
    total += auc(ScoredSet{run_nonet(tr, te), te.main_outcomes()});
  }
  EXPECT_LE(total / runs, 0.55);
}

}  // namespace
}  // namespace pals
