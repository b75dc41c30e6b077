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

// Synthetic cohorts with ground-truth spreader and exposure states.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pals/errors.hpp"
#include "pals/graph.hpp"
#include "pals/numerics.hpp"
#include "pals/random.hpp"

namespace pals {

enum class SpreaderDeterminism { kStochastic, kThreshold };

enum class Experiment { kExp1 = 1, kExp2 = 2, kExp3 = 3 };

// How the exposure, susceptibility and baseline channels combine into an
// infection probability. kExposureFirst: exposed nodes are infected with
// p_y_given_exposure, unexposed susceptible ones with p_y_given_susceptible,
// everyone else with p_baseline. kMax: the largest active channel.
// kNoisyOr: independent channels, 1 - prod(1 - p_c).
enum class InfectionCombine { kExposureFirst, kMax, kNoisyOr };

// Default block layout of the generated networks: 50 communities of 10.
inline std::vector<std::size_t> default_blocks(std::size_t node_count = 500,
                                               std::size_t block_size = 10) {
  std::vector<std::size_t> blocks(node_count / block_size, block_size);
  if (node_count % block_size) blocks.push_back(node_count % block_size);
  return blocks;
}

// +magnitude on features 1-5, -magnitude on features 6-10, zero elsewhere.
inline std::vector<double> default_spreader_weights(std::size_t dim,
                                                    double magnitude = 2.0) {
  std::vector<double> u(dim, 0.0);
  for (std::size_t k = 0; k < dim && k < 10; ++k)
    u[k] = k < 5 ? magnitude : -magnitude;
  return u;
}

struct SynthConfig {
  SbmConfig network{default_blocks(), 0.5, 0.01, 0};
  std::size_t feature_dim = 20;
  std::vector<double> true_u = default_spreader_weights(20);
  SpreaderDeterminism spreader_determinism = SpreaderDeterminism::kStochastic;
  double p_y_given_exposure = 0.5;
  double p_y_given_susceptible = 0.5;
  double p_baseline = 0.0;
  double susceptible_fraction = 1.0;
  InfectionCombine combine = InfectionCombine::kMax;
  double observed_spreader_fraction = 0.0;
  // When non-empty, susceptibility is Bernoulli(sigmoid(w . x)) instead of a
  // hidden flag on a fixed fraction of nodes.
  std::vector<double> susceptibility_weights;
  std::uint64_t seed = 0;

  void validate() const {
    network.validate();
    if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
    if (true_u.size() != feature_dim)
      throw ConfigError("synth: true_u has length " +
                        std::to_string(true_u.size()) + ", expected " +
                        std::to_string(feature_dim));
    if (!susceptibility_weights.empty() &&
        susceptibility_weights.size() != feature_dim)
      throw ConfigError("synth: susceptibility_weights has wrong length");
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError(std::string("synth: ") + name + " must lie in [0,1]");
    };
    prob(p_y_given_exposure, "p_y_given_exposure");
    prob(p_y_given_susceptible, "p_y_given_susceptible");
    prob(p_baseline, "p_baseline");
    prob(susceptible_fraction, "susceptible_fraction");
    prob(observed_spreader_fraction, "observed_spreader_fraction");
  }
};

struct GroundTruth {
  std::vector<int> z_true;
  std::vector<int> eta_true;
  std::vector<double> theta_true;
  std::vector<int> y;
  std::vector<int> susceptible;
  std::vector<bool> z_observed_mask;
  // Rank of each node in the seeded observation order; the mask for any
  // fraction f is rank < round(f * n), so masks are nested in f.
  std::vector<std::size_t> observation_rank;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline double infection_probability(const SynthConfig& cfg, int eta,
                                    int susceptible) {
  const double pe = cfg.p_y_given_exposure * eta;
  const double ps = cfg.p_y_given_susceptible * susceptible;
  if (cfg.combine == InfectionCombine::kExposureFirst) {
    if (eta) return cfg.p_y_given_exposure;
    return susceptible ? cfg.p_y_given_susceptible : cfg.p_baseline;
  }
  if (cfg.combine == InfectionCombine::kMax)
    return std::max({pe, ps, cfg.p_baseline});
  return 1.0 - (1.0 - pe) * (1.0 - ps) * (1.0 - cfg.p_baseline);
}

// Seeded permutation of 0..n-1; the first k entries form a k-subset.
inline std::vector<std::size_t> seeded_permutation(std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

// Nodes whose observation rank is below round(fraction * n).
inline std::vector<bool> observation_mask(std::span<const std::size_t> rank,
                                          double fraction) {
  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(rank.size())));
  std::vector<bool> mask(rank.size());
  for (std::size_t i = 0; i < rank.size(); ++i) mask[i] = rank[i] < count;
  return mask;
}

struct Cohort {
  ContactNetwork network;
  GroundTruth truth;
};

// Draws a network, features, spreader and exposure states, and outcomes.
// Every random stream is derived from cfg.seed (network: cfg.network.seed),
// so regeneration is bit-identical.
inline Cohort generate_cohort(const SynthConfig& cfg) {
  cfg.validate();
  Cohort out;
  ContactNetwork& net = out.network;
  net = generate_sbm(cfg.network);
  const std::size_t n = net.node_count();
  const std::size_t d = cfg.feature_dim;

  Rng feature_rng(derive_seed(cfg.seed, 1));
  net.features = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      net.features(i, k) = feature_rng.bernoulli(0.5) ? 1.0 : 0.0;

  GroundTruth& gt = out.truth;
  Rng spreader_rng(derive_seed(cfg.seed, 2));
  gt.z_true.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double score = dot(cfg.true_u, net.features.row(i));
    // Always consume one draw so both modes share the stream layout.
    const double u = spreader_rng.uniform();
    gt.z_true[i] = cfg.spreader_determinism == SpreaderDeterminism::kStochastic
                       ? (u < sigmoid(score) ? 1 : 0)
                       : (score > 0.0 ? 1 : 0);
  }

  gt.theta_true.assign(n, 0.0);
  gt.eta_true.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = net.neighbors[i];
    if (nb.empty()) continue;
    double s = 0.0;
    for (const Edge& e : nb) s += gt.z_true[e.node];
    gt.theta_true[i] = s / static_cast<double>(nb.size());
    gt.eta_true[i] = gt.theta_true[i] >= 0.5 ? 1 : 0;
  }

  gt.susceptible.assign(n, 0);
  if (cfg.susceptibility_weights.empty()) {
    const auto order = seeded_permutation(n, derive_seed(cfg.seed, 3));
    const auto k = static_cast<std::size_t>(
        std::ceil(cfg.susceptible_fraction * static_cast<double>(n) - 1e-9));
    for (std::size_t r = 0; r < k && r < n; ++r) gt.susceptible[order[r]] = 1;
  } else {
    Rng sus_rng(derive_seed(cfg.seed, 3));
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(dot(cfg.susceptibility_weights, net.features.row(i)));
      gt.susceptible[i] = sus_rng.bernoulli(p) ? 1 : 0;
    }
  }

  Rng outcome_rng(derive_seed(cfg.seed, 4));
  gt.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = infection_probability(cfg, gt.eta_true[i], gt.susceptible[i]);
    gt.y[i] = outcome_rng.uniform() < p ? 1 : 0;
  }

  const auto order = seeded_permutation(n, derive_seed(cfg.seed, 5));
  gt.observation_rank.resize(n);
  for (std::size_t r = 0; r < n; ++r) gt.observation_rank[order[r]] = r;
  gt.z_observed_mask = observation_mask(gt.observation_rank,
                                        cfg.observed_spreader_fraction);
  return out;
}

// Copy of `cfg` with every seed replaced by one derived from `seed`.
inline SynthConfig with_seed(SynthConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.network.seed = derive_seed(seed, 0x5B3);
  return cfg;
}

// Configuration of the held-out cohort paired with a training config.
inline SynthConfig test_config_for(const SynthConfig& train) {
  return with_seed(train, derive_seed(train.seed, 0x7E57));
}

inline std::vector<double> grid_values(Experiment e) {
  if (e == Experiment::kExp3) {
    std::vector<double> v;
    for (int k = 0; k <= 10; ++k) v.push_back(k / 10.0);
    return v;
  }
  return {0.5, 0.6, 0.7, 0.8, 0.9};
}

// Base configuration of an experiment before the grid value is applied.
inline SynthConfig experiment_base(Experiment e) {
  SynthConfig cfg;
  switch (e) {
    case Experiment::kExp1:
      cfg.p_y_given_susceptible = 0.5;
      cfg.susceptible_fraction = 1.0;
      break;
    case Experiment::kExp2:
      cfg.p_y_given_exposure = 0.8;
      cfg.susceptible_fraction = 0.5;
      break;
    case Experiment::kExp3:
      cfg.p_y_given_exposure = 0.8;
      cfg.p_y_given_susceptible = 0.5;
      cfg.susceptible_fraction = 1.0;
      // Weaker signal: spreaders less concentrated on feature patterns.
      cfg.true_u = default_spreader_weights(cfg.feature_dim, 0.75);
      cfg.spreader_determinism = SpreaderDeterminism::kStochastic;
      break;
  }
  return cfg;
}

inline void apply_grid_value(Experiment e, double value, SynthConfig& cfg) {
  switch (e) {
    case Experiment::kExp1: cfg.p_y_given_exposure = value; break;
    case Experiment::kExp2: cfg.p_y_given_susceptible = value; break;
    case Experiment::kExp3: cfg.observed_spreader_fraction = value; break;
  }
}

// Grid-major list of configs: entry g * runs + r is grid value g, run r.
// Run r uses the same seed at every grid value, so curves compare matched
// cohorts; distinct runs get distinct derived seeds.
inline std::vector<SynthConfig> experiment_grid(Experiment e, int runs,
                                                std::uint64_t base_seed) {
  if (runs < 1) throw ConfigError("experiment_grid: runs must be >= 1");
  const SynthConfig base = experiment_base(e);
  std::vector<SynthConfig> out;
  for (double value : grid_values(e)) {
    for (int r = 0; r < runs; ++r) {
      SynthConfig cfg = with_seed(base, derive_seed(base_seed, static_cast<std::uint64_t>(e),
                                                    static_cast<std::uint64_t>(r)));
      apply_grid_value(e, value, cfg);
      out.push_back(std::move(cfg));
    }
  }
  return out;
}

}  // namespace pals
