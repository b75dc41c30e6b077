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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "pals/pals.hpp"
#include "test_util.hpp"

namespace pals {
namespace {

struct Pair {
  LabeledCohort train;
  LabeledCohort test;
};

Pair synth_pair(SynthConfig cfg) {
  auto train = generate_cohort(cfg);
  auto test = generate_cohort(test_config_for(cfg));
  train.network = append_constant_feature(train.network);
  test.network = append_constant_feature(test.network);
  return {label_cohort(train, false), label_cohort(test, false)};
}

SynthConfig exp1(double p_exposure, std::uint64_t seed) {
  SynthConfig cfg = with_seed(experiment_base(Experiment::kExp1), seed);
  cfg.p_y_given_exposure = p_exposure;
  return cfg;
}

double infection_auc(const Pair& p, const std::vector<double>& scores) {
  return auc(ScoredSet{scores, p.test.main_outcomes()});
}

// Isolated mains with binary features; y drawn from p(y | x_0).
LabeledCohort feature_driven(Rng& rng, std::size_t n, double p_if_set, double p_if_unset) {
  LabeledCohort c;
  c.network = make_empty_network(n);
  c.network.features = Matrix(n, 3);
  c.outcome.resize(n);
  c.spreader.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 2; ++k) c.network.features(i, k) = rng.bernoulli(0.5);
    c.network.features(i, 2) = 1.0;
    c.outcome[i] = rng.bernoulli(c.network.features(i, 0) == 1.0 ? p_if_set : p_if_unset);
  }
  return c;
}

TEST(NoNet, BlindToExposureOnlyOutcomes) {
  double total = 0.0;
  for (int r = 0; r < 5; ++r) {
    const auto p = synth_pair(exp1(0.9, 200 + r));
    total += infection_auc(p, run_nonet(p.train, p.test));
  }
  EXPECT_LE(total / 5.0, 0.55);
}

TEST(NoNet, RecoversFeatureDrivenOutcomes) {
  Rng rng(1);
  const auto train = feature_driven(rng, 1000, 0.95, 0.05);
  const auto test = feature_driven(rng, 1000, 0.95, 0.05);
  // Bayes AUC for a binary feature with these rates is 0.95.
  EXPECT_GE(auc(ScoredSet{run_nonet(train, test), test.main_outcomes()}), 0.9);
}

TEST(NoNet, SeparableOutcomesRankPerfectly) {
  Rng rng(2);
  const auto train = feature_driven(rng, 200, 1.0, 0.0);
  const auto test = feature_driven(rng, 200, 1.0, 0.0);
  EXPECT_EQ(auc(ScoredSet{run_nonet(train, test), test.main_outcomes()}), 1.0);
}

TEST(EtaOracle, BeatsNoNetWhenExposureMatters) {
  double gap = 0.0;
  for (int r = 0; r < 5; ++r) {
    const auto p = synth_pair(exp1(0.9, 300 + r));
    gap += infection_auc(p, run_eta_oracle(p.train, p.test)) -
           infection_auc(p, run_nonet(p.train, p.test));
  }
  EXPECT_GE(gap / 5.0, 0.2);
}

TEST(EtaOracle, UninformativeWhenExposureDoesNot) {
  double total = 0.0;
  for (int r = 0; r < 5; ++r) {
    const auto p = synth_pair(exp1(0.5, 400 + r));
    total += infection_auc(p, run_eta_oracle(p.train, p.test));
  }
  EXPECT_NEAR(total / 5.0, 0.5, 0.05);
}

TEST(EtaOracle, ConstantExposureReducesToNoNet) {
  auto p = synth_pair(exp1(0.9, 500));
  for (auto* c : {&p.train, &p.test}) std::fill(c->truth->eta_true.begin(), c->truth->eta_true.end(), 0);
  const auto a = run_eta_oracle(p.train, p.test);
  const auto b = run_nonet(p.train, p.test);
  ASSERT_EQ(a.size(), b.size());
  // A zero column keeps a zero weight.
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
}

TEST(ZOracle, StrongWeightsGiveHighAuc) {
  SynthConfig cfg = with_seed(experiment_base(Experiment::kExp1), 600);
  cfg.spreader_determinism = SpreaderDeterminism::kThreshold;
  const auto p = synth_pair(cfg);
  const auto s = run_z_oracle(p.train, p.test);
  EXPECT_GE(auc(ScoredSet{s, p.test.truth->z_true}), 0.9);

  cfg.spreader_determinism = SpreaderDeterminism::kStochastic;
  const auto q = synth_pair(cfg);
  EXPECT_LE(auc(ScoredSet{run_z_oracle(q.train, q.test), q.test.truth->z_true}),
            auc(ScoredSet{s, p.test.truth->z_true}));
}

TEST(ZOracle, ZeroWeightsGiveChance) {
  double total = 0.0;
  for (int r = 0; r < 5; ++r) {
    SynthConfig cfg = with_seed(experiment_base(Experiment::kExp1), 700 + r);
    cfg.true_u.assign(cfg.feature_dim, 0.0);
    const auto p = synth_pair(cfg);
    total += auc(ScoredSet{run_z_oracle(p.train, p.test), p.test.truth->z_true});
  }
  EXPECT_NEAR(total / 5.0, 0.5, 0.05);
}

TEST(EtaOracleK, NoKnowledgeEqualsNoNet) {
  const auto p = synth_pair(exp1(0.9, 800));
  const auto a = run_eta_oracle_k(p.train, p.test, 0.0);
  const auto b = run_nonet(p.train, p.test);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
}

TEST(EtaOracleK, FullKnowledgeUsesThresholdedSpreaderShare) {
  const auto p = synth_pair(exp1(0.9, 801));
  const auto& net = p.test.network;
  const auto& z = p.test.truth->z_true;
  const std::vector<double> zd(z.begin(), z.end());
  const auto got = threshold_exposure(net, zd);
  const auto mains = net.main_nodes();
  for (std::size_t m = 0; m < mains.size(); ++m) {
    const auto& nb = net.neighbors[mains[m]];
    int spreaders = 0;
    for (const Edge& e : nb) spreaders += z[e.node];
    const double want = !nb.empty() && 2 * spreaders >= static_cast<int>(nb.size()) ? 1.0 : 0.0;
    EXPECT_EQ(got[m], want);
  }
  EXPECT_GT(infection_auc(p, run_eta_oracle_k(p.train, p.test, 1.0)),
            infection_auc(p, run_eta_oracle_k(p.train, p.test, 0.0)));
}

TEST(EtaOracleK, RejectsBadFraction) {
  const auto p = synth_pair(exp1(0.9, 802));
  EXPECT_THROW(run_eta_oracle_k(p.train, p.test, 1.5), ConfigError);
}

TEST(Proxy, NeighborInfectionShare) {
  ContactNetwork net = make_empty_network(4);
  net.features = Matrix(4, 1);
  add_undirected_edge(net, 0, 1);
  add_undirected_edge(net, 0, 2);
  add_undirected_edge(net, 0, 3);
  const std::vector<Label> y{false, true, false, false};
  EXPECT_NEAR(exposure_proxy(ProxyKind::kNbrInf, net, y)[0], 1.0 / 3.0, 1e-15);
}

TEST(Proxy, NeighborInfectionRateLooksPastTheNeighbor) {
  // Chain a - b - c with only c infected.
  ContactNetwork net = make_empty_network(4);
  net.features = Matrix(4, 1);
  add_undirected_edge(net, 0, 1);
  add_undirected_edge(net, 1, 2);
  const std::vector<Label> y{false, false, true, false};
  const auto r = exposure_proxy(ProxyKind::kNbrInfRate, net, y);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[3], 0.0);  // isolated
  EXPECT_EQ(exposure_proxy(ProxyKind::kNbrInf, net, y)[3], 0.0);
}

TEST(Proxy, PermutationEquivariant) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = testing::random_network(rng, 15, 10, 2, 6);
    const auto y = testing::random_labels(rng, net);
    std::vector<std::size_t> perm(net.node_count());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    ContactNetwork pn = make_empty_network(net.node_count());
    pn.features = Matrix(net.node_count(), 2);
    std::vector<Label> py(net.node_count());
    for (std::size_t i = 0; i < net.node_count(); ++i) {
      pn.roles[perm[i]] = net.roles[i];
      py[perm[i]] = y[i];
      for (const Edge& e : net.neighbors[i]) pn.neighbors[perm[i]].push_back({perm[e.node], e.last_contact_day});
    }
    std::vector<double> preds(net.node_count());
    for (auto& v : preds) v = rng.uniform();
    std::vector<double> ppreds(net.node_count());
    for (std::size_t i = 0; i < preds.size(); ++i) ppreds[perm[i]] = preds[i];
    for (ProxyKind kind : {ProxyKind::kNbrInf, ProxyKind::kNbrInfRate, ProxyKind::kNbrProbInf}) {
      const auto a = exposure_proxy(kind, net, y, std::span<const double>(preds));
      const auto b = exposure_proxy(kind, pn, py, std::span<const double>(ppreds));
      std::map<std::size_t, double> by_new;
      const auto pm = pn.main_nodes();
      for (std::size_t m = 0; m < pm.size(); ++m) by_new[pm[m]] = b[m];
      const auto mains = net.main_nodes();
      for (std::size_t m = 0; m < mains.size(); ++m)
        EXPECT_NEAR(a[m], by_new.at(perm[mains[m]]), 1e-15);
    }
  }
}

TEST(Proxy, ProbInfRequiresPredictions) {
  const auto net = make_empty_network(2);
  const std::vector<Label> y(2, Label{false});
  EXPECT_THROW(exposure_proxy(ProxyKind::kNbrProbInf, net, y), ConfigError);
}

TEST(ExposurePlusSusceptibility, ZeroProxyReducesToNoNet) {
  // Every neighbor is auxiliary (unknown outcome), so NbrInf is zero.
  Rng rng(4);
  auto make = [&] {
    auto c = feature_driven(rng, 300, 0.8, 0.2);
    const std::size_t n = c.network.node_count();
    ContactNetwork net = make_empty_network(n + 50);
    net.features = Matrix(n + 50, 3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 3; ++k) net.features(i, k) = c.network.features(i, k);
    for (std::size_t i = n; i < n + 50; ++i) net.roles[i] = NodeRole::kAuxiliary;
    for (std::size_t i = 0; i < n; ++i) net.neighbors[i].push_back({n + rng.index(50), std::nullopt});
    c.network = net;
    c.outcome.resize(n + 50);
    c.spreader.resize(n + 50);
    return c;
  };
  const auto train = make();
  const auto test = make();
  const auto a = run_exposure_plus_susceptibility(train, test, ProxyKind::kNbrInf);
  const auto b = run_nonet(train, test);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
}

TEST(ExposureOnly, LeakedOutcomeRanksPerfectly) {
  // Mains paired up, both members of a pair share the outcome.
  Rng rng(5);
  auto make = [&] {
    LabeledCohort c;
    c.network = make_empty_network(200);
    c.network.features = Matrix(200, 1, 1.0);
    c.outcome.resize(200);
    c.spreader.resize(200);
    for (std::size_t i = 0; i < 200; i += 2) {
      add_undirected_edge(c.network, i, i + 1);
      c.outcome[i] = c.outcome[i + 1] = rng.bernoulli(0.5);
    }
    return c;
  };
  const auto train = make();
  const auto test = make();
  const auto s = run_exposure_only(train, test, ProxyKind::kNbrInf);
  EXPECT_EQ(auc(ScoredSet{s, test.main_outcomes()}), 1.0);
}

TEST(ExposureOnly, NeighborInfectionBeatsNoNetWhenExposureMatters) {
  double gap = 0.0;
  for (int r = 0; r < 3; ++r) {
    const auto p = synth_pair(exp1(0.9, 900 + r));
    gap += infection_auc(p, run_exposure_only(p.train, p.test, ProxyKind::kNbrInf)) -
           infection_auc(p, run_nonet(p.train, p.test));
  }
  EXPECT_GT(gap, 0.0);
}

TEST(Benchmark, SpecValidation) {
  BenchmarkSpec spec;
  spec.kind = BenchmarkKind::kEtaOracleK;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.oracle_fraction_k = 0.5;
  EXPECT_NO_THROW(spec.validate());
  spec.kind = BenchmarkKind::kExposurePlusSusceptibility;
  EXPECT_THROW(spec.validate(), ConfigError);
}

}  // namespace
}  // namespace pals
