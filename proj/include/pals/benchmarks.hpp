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

// Comparison models: network-free logistic regression, oracle-exposure and
// oracle-spreader regressions, and neighbor-infection exposure proxies.
//
// Every regression here is fitted on main nodes only, on the cohort's
// features as given (append a constant column for an intercept). Outputs
// are ordered by ascending main node index unless stated otherwise.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pals/cohort.hpp"
#include "pals/errors.hpp"
#include "pals/graph.hpp"
#include "pals/numerics.hpp"

namespace pals {

enum class ProxyKind { kNbrInf, kNbrInfRate, kNbrProbInf };

enum class BenchmarkKind {
  kNoNet,
  kEtaOracle,
  kZOracle,
  kEtaOracleK,
  kNbrInf,
  kNbrInfRate,
  kNbrProbInf,
  kExposurePlusSusceptibility,
};

inline OptimizerConfig default_benchmark_penalty() {
  return OptimizerConfig{500, 1e-6, 0.5, 1e-4, 0.0};
}

struct BenchmarkSpec {
  BenchmarkKind kind = BenchmarkKind::kNoNet;
  std::optional<double> oracle_fraction_k;     // kEtaOracleK only
  std::optional<ProxyKind> exposure_source;    // kExposurePlusSusceptibility
  OptimizerConfig penalty = default_benchmark_penalty();

  void validate() const {
    if (oracle_fraction_k.has_value() != (kind == BenchmarkKind::kEtaOracleK))
      throw ConfigError("benchmark: oracle_fraction_k is required exactly for "
                        "EtaOracleK");
    if (oracle_fraction_k && !(*oracle_fraction_k >= 0.0 && *oracle_fraction_k <= 1.0))
      throw ConfigError("benchmark: oracle_fraction_k must lie in [0,1]");
    if (kind == BenchmarkKind::kExposurePlusSusceptibility && !exposure_source)
      throw ConfigError("benchmark: exposure_source is required");
    penalty.validate();
  }
};

namespace detail {

// Rows of `rows` from the feature matrix, each extended by the given extra
// column values.
inline Matrix select_rows(const ContactNetwork& net,
                          std::span<const std::size_t> rows,
                          std::span<const std::vector<double>> extra = {}) {
  const std::size_t d = net.feature_dim();
  Matrix out(rows.size(), d + extra.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto x = net.features.row(rows[r]);
    for (std::size_t k = 0; k < d; ++k) out(r, k) = x[k];
    for (std::size_t c = 0; c < extra.size(); ++c) out(r, d + c) = extra[c][r];
  }
  return out;
}

inline std::vector<double> predict_rows(const Matrix& x,
                                        std::span<const double> v) {
  std::vector<double> p(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) p[r] = sigmoid(dot(v, x.row(r)));
  return p;
}

inline std::vector<double> main_targets(const LabeledCohort& c) {
  std::vector<double> t;
  for (std::size_t i : c.network.main_nodes()) {
    if (!c.outcome[i].has_value())
      throw ConfigError("benchmark: main node '" + c.network.ids[i] +
                        "' has no outcome");
    t.push_back(*c.outcome[i] ? 1.0 : 0.0);
  }
  return t;
}

inline const GroundTruth& require_truth(const LabeledCohort& c,
                                        const char* who) {
  if (!c.truth.has_value())
    throw ConfigError(std::string(who) + ": cohort has no ground truth");
  return *c.truth;
}

// Logistic regression of main outcomes on features plus extra columns;
// returns test-main predictions.
inline std::vector<double> fit_and_predict(
    const LabeledCohort& train, const LabeledCohort& test,
    std::span<const std::vector<double>> train_extra,
    std::span<const std::vector<double>> test_extra,
    const OptimizerConfig& cfg) {
  const auto train_rows = train.network.main_nodes();
  const auto test_rows = test.network.main_nodes();
  const Matrix x_train = select_rows(train.network, train_rows, train_extra);
  const auto v = fit_logistic(x_train, main_targets(train), cfg);
  return predict_rows(select_rows(test.network, test_rows, test_extra), v);
}

}  // namespace detail

// Logistic regression on characteristics only.
inline std::vector<double> run_nonet(const LabeledCohort& train,
                                     const LabeledCohort& test,
                                     const OptimizerConfig& cfg = default_benchmark_penalty()) {
  return detail::fit_and_predict(train, test, {}, {}, cfg);
}

// Exposure indicator computed from spreader states: 1 when the mean of
// `spreader` over the node's neighbors is at least 0.5, 0 without
// neighbors. Per main node.
inline std::vector<double> threshold_exposure(const ContactNetwork& net,
                                              std::span<const double> spreader) {
  std::vector<double> out;
  for (std::size_t i : net.main_nodes()) {
    const auto& nb = net.neighbors[i];
    if (nb.empty()) {
      out.push_back(0.0);
      continue;
    }
    double s = 0.0;
    for (const Edge& e : nb) s += spreader[e.node];
    out.push_back(s / static_cast<double>(nb.size()) >= 0.5 ? 1.0 : 0.0);
  }
  return out;
}

// Logistic regression on <x, eta_true>.
inline std::vector<double> run_eta_oracle(const LabeledCohort& train,
                                          const LabeledCohort& test,
                                          const OptimizerConfig& cfg = default_benchmark_penalty()) {
  auto eta_of = [](const LabeledCohort& c) {
    const auto& gt = detail::require_truth(c, "eta oracle");
    std::vector<double> v;
    for (std::size_t i : c.network.main_nodes()) v.push_back(gt.eta_true[i]);
    return v;
  };
  const std::vector<std::vector<double>> tr{eta_of(train)};
  const std::vector<std::vector<double>> te{eta_of(test)};
  return detail::fit_and_predict(train, test, tr, te, cfg);
}

// Logistic regression x -> z_true over all training nodes; returns spreader
// probabilities for every test node (node index order).
inline std::vector<double> run_z_oracle(const LabeledCohort& train,
                                        const LabeledCohort& test,
                                        const OptimizerConfig& cfg = default_benchmark_penalty()) {
  const auto& gt = detail::require_truth(train, "z oracle");
  std::vector<double> z(gt.z_true.begin(), gt.z_true.end());
  const auto v = fit_logistic(train.network.features, z, cfg);
  return detail::predict_rows(test.network.features, v);
}

// Like run_eta_oracle, but the exposure is recomputed from z_true on the
// k-fraction of nodes with the lowest observation rank; every other node is
// taken to be a non-spreader.
inline std::vector<double> run_eta_oracle_k(const LabeledCohort& train,
                                            const LabeledCohort& test, double k,
                                            const OptimizerConfig& cfg = default_benchmark_penalty()) {
  if (!(k >= 0.0 && k <= 1.0))
    throw ConfigError("eta oracle k: fraction must lie in [0,1]");
  auto exposure_of = [k](const LabeledCohort& c) {
    const auto& gt = detail::require_truth(c, "eta oracle k");
    const auto mask = observation_mask(gt.observation_rank, k);
    std::vector<double> known(gt.z_true.size(), 0.0);
    for (std::size_t i = 0; i < known.size(); ++i)
      if (mask[i]) known[i] = gt.z_true[i];
    return threshold_exposure(c.network, known);
  };
  const std::vector<std::vector<double>> tr{exposure_of(train)};
  const std::vector<std::vector<double>> te{exposure_of(test)};
  return detail::fit_and_predict(train, test, tr, te, cfg);
}

// Exposure proxies per main node; zero for a node without neighbors.
//   NbrInf:     mean outcome of the neighbors (unknown counts as 0).
//   NbrInfRate: mean over neighbors B of the infected share of B's other
//               contacts (excluding the focal node); B with no other
//               contact contributes 0. Contacts are undirected.
//   NbrProbInf: mean of contact_predictions over the neighbors.
inline std::vector<double> exposure_proxy(
    ProxyKind kind, const ContactNetwork& net, std::span<const Label> labels,
    std::optional<std::span<const double>> contact_predictions = std::nullopt) {
  if (kind == ProxyKind::kNbrProbInf && !contact_predictions)
    throw ConfigError("exposure_proxy: NbrProbInf requires contact predictions");
  auto infected = [&](std::size_t j) {
    return labels[j].value_or(false) ? 1.0 : 0.0;
  };
  std::vector<std::vector<std::size_t>> contacts;
  if (kind == ProxyKind::kNbrInfRate) contacts = undirected_contacts(net);

  std::vector<double> out;
  for (std::size_t i : net.main_nodes()) {
    const auto& nb = net.neighbors[i];
    if (nb.empty()) {
      out.push_back(0.0);
      continue;
    }
    double s = 0.0;
    for (const Edge& e : nb) {
      switch (kind) {
        case ProxyKind::kNbrInf:
          s += infected(e.node);
          break;
        case ProxyKind::kNbrInfRate: {
          double count = 0.0;
          double inf = 0.0;
          for (std::size_t c : contacts[e.node]) {
            if (c == i) continue;
            count += 1.0;
            inf += infected(c);
          }
          s += count > 0.0 ? inf / count : 0.0;
          break;
        }
        case ProxyKind::kNbrProbInf:
          s += (*contact_predictions)[e.node];
          break;
      }
    }
    out.push_back(s / static_cast<double>(nb.size()));
  }
  return out;
}

// Contact-view infection probabilities for every node of `target`, from a
// network-free model fitted on the training mains.
inline std::vector<double> contact_infection_predictions(
    const LabeledCohort& train, const LabeledCohort& target,
    const OptimizerConfig& cfg) {
  const auto rows = train.network.main_nodes();
  const auto v = fit_logistic(detail::select_rows(train.network, rows),
                              detail::main_targets(train), cfg);
  return detail::predict_rows(target.network.features, v);
}

inline std::vector<double> proxy_for(ProxyKind kind, const LabeledCohort& train,
                                     const LabeledCohort& target,
                                     const OptimizerConfig& cfg) {
  if (kind != ProxyKind::kNbrProbInf)
    return exposure_proxy(kind, target.network, target.outcome);
  const auto pred = contact_infection_predictions(train, target, cfg);
  return exposure_proxy(kind, target.network, target.outcome,
                        std::span<const double>(pred));
}

// Exposure-only benchmark: the proxy itself is the test score.
inline std::vector<double> run_exposure_only(const LabeledCohort& train,
                                             const LabeledCohort& test,
                                             ProxyKind kind,
                                             const OptimizerConfig& cfg = default_benchmark_penalty()) {
  return proxy_for(kind, train, test, cfg);
}

// Logistic regression on <x, proxy>, l1-penalized in the real-data setup.
inline std::vector<double> run_exposure_plus_susceptibility(
    const LabeledCohort& train, const LabeledCohort& test, ProxyKind kind,
    const OptimizerConfig& cfg = default_benchmark_penalty()) {
  const std::vector<std::vector<double>> tr{proxy_for(kind, train, train, cfg)};
  const std::vector<std::vector<double>> te{proxy_for(kind, train, test, cfg)};
  return detail::fit_and_predict(train, test, tr, te, cfg);
}

// Dispatch on a BenchmarkSpec. kZOracle returns per-node spreader scores;
// every other kind returns per-test-main infection scores.
inline std::vector<double> run_benchmark(const BenchmarkSpec& spec,
                                         const LabeledCohort& train,
                                         const LabeledCohort& test) {
  spec.validate();
  switch (spec.kind) {
    case BenchmarkKind::kNoNet: return run_nonet(train, test, spec.penalty);
    case BenchmarkKind::kEtaOracle: return run_eta_oracle(train, test, spec.penalty);
    case BenchmarkKind::kZOracle: return run_z_oracle(train, test, spec.penalty);
    case BenchmarkKind::kEtaOracleK:
      return run_eta_oracle_k(train, test, *spec.oracle_fraction_k, spec.penalty);
    case BenchmarkKind::kNbrInf:
      return run_exposure_only(train, test, ProxyKind::kNbrInf, spec.penalty);
    case BenchmarkKind::kNbrInfRate:
      return run_exposure_only(train, test, ProxyKind::kNbrInfRate, spec.penalty);
    case BenchmarkKind::kNbrProbInf:
      return run_exposure_only(train, test, ProxyKind::kNbrProbInf, spec.penalty);
    case BenchmarkKind::kExposurePlusSusceptibility:
      return run_exposure_plus_susceptibility(train, test, *spec.exposure_source,
                                              spec.penalty);
  }
  throw ConfigError("benchmark: unknown kind");
}

}  // namespace pals
