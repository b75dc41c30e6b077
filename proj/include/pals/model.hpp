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

// Latent-spreader activation model and its mean-field variational EM.
//
// Generative process for a main node i with neighbors n(i):
//   z_j      ~ Bernoulli(sigmoid(u . x_j))            spreader state
//   theta_i  ~ Beta(1 + sum z_j, 1 + sum (1 - z_j))   exposure probability
//   eta_i    ~ Bernoulli(theta_i)                     exposure state
//   y_i      ~ Bernoulli(sigmoid(w_sus . x_i + w_e * eta_i))
//
// The variational family is q = prod_j q(z_j | phi_ij) q(theta_i | gamma_i)
// q(eta_i | pi_i). phi is kept per (main, neighbor) edge, so a neighbor
// shared by two mains carries two independent factors.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pals/errors.hpp"
#include "pals/graph.hpp"
#include "pals/numerics.hpp"
#include "pals/random.hpp"

namespace pals {

// Observed binary value, or nullopt when unknown.
using Label = std::optional<bool>;

inline constexpr double kProbEpsilon = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

struct PalsWeights {
  std::vector<double> u;      // spreader weights
  std::vector<double> w_sus;  // susceptibility weights
  double w_e = 0.0;           // exposure weight

  static PalsWeights zeros(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0), 0.0};
  }

  std::size_t dim() const { return u.size(); }

  void validate(std::size_t feature_dim) const {
    if (u.size() != feature_dim || w_sus.size() != feature_dim)
      throw ConfigError("weights: dimension " + std::to_string(u.size()) +
                        " does not match feature dimension " +
                        std::to_string(feature_dim));
    bool finite = std::isfinite(w_e);
    for (double v : u) finite = finite && std::isfinite(v);
    for (double v : w_sus) finite = finite && std::isfinite(v);
    if (!finite) throw ConfigError("weights: non-finite entry");
  }

  friend bool operator==(const PalsWeights&, const PalsWeights&) = default;
};

// Variational parameters, laid out in CSR order over main nodes.
//
// Only the first component of each Bernoulli factor is stored; the second
// is its complement.
struct VariationalState {
  std::vector<std::size_t> main_nodes;  // node index per main ordinal
  std::vector<std::size_t> edge_begin;  // size mains + 1
  std::vector<std::size_t> edge_node;   // neighbor node per edge
  std::vector<double> phi;              // phi_{i,j,1} per edge
  std::vector<char> clamped;            // edge has an observed spreader
  std::vector<std::array<double, 2>> gamma;
  std::vector<double> pi;               // pi_{i,1} per main

  std::size_t main_count() const { return main_nodes.size(); }
  std::size_t edge_count() const { return edge_node.size(); }
  std::size_t degree(std::size_t m) const {
    return edge_begin[m + 1] - edge_begin[m];
  }

  std::array<double, 2> phi_pair(std::size_t e) const {
    return {phi[e], 1.0 - phi[e]};
  }
  std::array<double, 2> pi_pair(std::size_t m) const {
    return {pi[m], 1.0 - pi[m]};
  }

  // Edge index of (main ordinal m, neighbor node j), or npos.
  std::size_t find_edge(std::size_t m, std::size_t j) const {
    for (std::size_t e = edge_begin[m]; e < edge_begin[m + 1]; ++e)
      if (edge_node[e] == j) return e;
    return npos;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  friend bool operator==(const VariationalState&,
                         const VariationalState&) = default;
};

// How the spreader factor phi is updated.
enum class PhiRule {
  // Exact coordinate maximizer of the ELBO: the expectations
  // E[log(1 + #other spreaders)] and E[log(1 + #other non-spreaders)] are
  // taken over their Poisson-binomial law.
  kExact,
  // Expectations replaced by their first-order expansion at the mean, i.e.
  // the factors (1 + sum_{k != j} phi_k)^-1.
  kFirstOrder,
};

struct FitConfig {
  int max_em_rounds = 50;
  int e_step_sweeps_per_round = 10;
  double elbo_rel_tolerance = 1e-6;
  OptimizerConfig optimizer{500, 1e-6, 0.5, 1e-4, 0.0};
  std::uint64_t seed = 0;
  PhiRule phi_rule = PhiRule::kExact;
  // Exposure weight before the first M-step. Zero would leave the exposure
  // posterior exactly symmetric and the E-step without a signal.
  double initial_exposure_weight = 1.0;
  // Optional starting weights (overrides the default zero start).
  std::optional<PalsWeights> initial_weights;
  // Diagnostics: hold pi_1 fixed at this value / freeze phi.
  std::optional<double> fixed_exposure_probability;
  bool update_spreaders = true;

  void validate() const {
    if (max_em_rounds < 1 || e_step_sweeps_per_round < 1)
      throw ConfigError("fit: round and sweep counts must be >= 1");
    if (!(elbo_rel_tolerance > 0.0))
      throw ConfigError("fit: elbo_rel_tolerance must be > 0");
    optimizer.validate();
  }
};

struct FitResult {
  PalsWeights weights;
  VariationalState state;
  // ELBO minus the weight penalty after initialization and after every EM
  // round; this is the quantity the EM iterations ascend.
  std::vector<double> elbo_trace;
  bool converged = false;
};

struct PredictConfig {
  int max_sweeps = 200;
  double tolerance = 1e-9;  // max change of any pi_1 between sweeps
  std::uint64_t seed = 0;
  PhiRule phi_rule = PhiRule::kExact;
};

// ---------------------------------------------------------------------------
// Poisson-binomial distribution of a count of independent Bernoullis.

class PoissonBinomial {
 public:
  PoissonBinomial() : pmf_{1.0} {}

  template <typename Range>
  static PoissonBinomial of(const Range& probabilities) {
    PoissonBinomial pb;
    for (double p : probabilities) pb.add(p);
    return pb;
  }

  std::size_t trials() const { return pmf_.size() - 1; }
  const std::vector<double>& pmf() const { return pmf_; }

  void add(double p) {
    pmf_.push_back(0.0);
    for (std::size_t k = pmf_.size() - 1; k > 0; --k)
      pmf_[k] = pmf_[k] * (1.0 - p) + pmf_[k - 1] * p;
    pmf_[0] *= 1.0 - p;
  }

  // Removes a trial previously added with probability p. The recursion runs
  // in the direction whose amplification factor is at most one.
  void remove(double p) {
    const std::size_t n = pmf_.size() - 1;
    std::vector<double> q(n);
    if (p <= 0.5) {
      const double inv = 1.0 / (1.0 - p);
      q[0] = pmf_[0] * inv;
      for (std::size_t k = 1; k < n; ++k) q[k] = (pmf_[k] - p * q[k - 1]) * inv;
    } else {
      const double inv = 1.0 / p;
      q[n - 1] = pmf_[n] * inv;
      for (std::size_t k = n - 1; k > 0; --k)
        q[k - 1] = (pmf_[k] - (1.0 - p) * q[k]) * inv;
    }
    for (double& v : q) v = std::max(v, 0.0);
    pmf_ = std::move(q);
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) m += k * pmf_[k];
    return m;
  }

  // E[f(S)] for f given as a table indexed by the count.
  double expect(std::span<const double> table) const {
    double s = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) s += pmf_[k] * table[k];
    return s;
  }

 private:
  std::vector<double> pmf_;
};

namespace detail {

inline double bernoulli_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

inline double beta_entropy(double a, double b) {
  const double log_beta = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
  return log_beta - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) +
         (a + b - 2.0) * digamma(a + b);
}

// Normalized first component of (exp(a1), exp(a2)), clamped.
inline double normalize_log_pair(double a1, double a2) {
  return clamp_probability(sigmoid(a1 - a2));
}

// log(1 + k) for k = 0..n.
inline std::vector<double> log1p_table(std::size_t n) {
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = std::log1p(static_cast<double>(k));
  return t;
}

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw InferenceError(what);
}

// Expectations E[log(1 + S)] and E[log(1 + N)] over the other neighbors of
// a main node, where S counts spreaders and N = others - S.
inline std::array<double, 2> other_neighbor_terms(const PoissonBinomial& others,
                                                  std::span<const double> log1p) {
  const std::size_t n = others.trials();
  double e1 = 0.0;
  double e2 = 0.0;
  const auto& pmf = others.pmf();
  for (std::size_t k = 0; k <= n; ++k) {
    e1 += pmf[k] * log1p[k];
    e2 += pmf[k] * log1p[n - k];
  }
  return {e1, e2};
}

}  // namespace detail

// Spreader score u . x_j for every node.
inline std::vector<double> spreader_scores(const ContactNetwork& net,
                                           std::span<const double> u) {
  std::vector<double> s(net.node_count());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = dot(u, net.features.row(j));
  return s;
}

// Builds the CSR layout of `net` and initializes the variational factors:
// unobserved phi at 0.5 + U(-0.01, 0.01), observed spreaders clamped to
// exactly (1,0) or (0,1), pi = (0.5, 0.5), gamma from one gamma update.
inline VariationalState init_state(const ContactNetwork& net,
                                   std::span<const Label> observed,
                                   std::uint64_t seed) {
  if (!observed.empty() && observed.size() != net.node_count())
    throw ConfigError("init_state: observed labels size differs from node count");
  VariationalState st;
  st.main_nodes = net.main_nodes();
  if (st.main_nodes.empty())
    throw ConfigError("init_state: network has no main node");
  Rng rng(seed);
  st.edge_begin.push_back(0);
  for (std::size_t i : st.main_nodes) {
    for (const Edge& e : net.neighbors[i]) {
      st.edge_node.push_back(e.node);
      const Label obs = observed.empty() ? Label{} : observed[e.node];
      if (obs.has_value()) {
        st.phi.push_back(*obs ? 1.0 : 0.0);
        st.clamped.push_back(1);
      } else {
        st.phi.push_back(clamp_probability(0.5 + rng.uniform(-0.01, 0.01)));
        st.clamped.push_back(0);
      }
    }
    st.edge_begin.push_back(st.edge_node.size());
  }
  const std::size_t m_count = st.main_nodes.size();
  st.pi.assign(m_count, 0.5);
  st.gamma.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t e = st.edge_begin[m]; e < st.edge_begin[m + 1]; ++e) {
      s1 += st.phi[e];
      s2 += 1.0 - st.phi[e];
    }
    st.gamma[m] = {s1 + st.pi[m] + 1.0, s2 + (1.0 - st.pi[m]) + 1.0};
  }
  return st;
}

// gamma_{i,s} = sum_j phi_{i,j,s} + pi_{i,s} + 1.
inline std::array<double, 2> update_gamma(std::size_t m,
                                          const VariationalState& st) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t e = st.edge_begin[m]; e < st.edge_begin[m + 1]; ++e) {
    s1 += st.phi[e];
    s2 += 1.0 - st.phi[e];
  }
  return {s1 + st.pi[m] + 1.0, s2 + (1.0 - st.pi[m]) + 1.0};
}

namespace detail {

// Unnormalized log weights of phi_{i,j} given the prior score of j, the
// focal node's gamma and the other-neighbor expectations.
inline double phi_update_value(double score, const std::array<double, 2>& gamma,
                               const std::array<double, 2>& other_terms) {
  const double a1 = log_sigmoid(score) + digamma(gamma[0]) - other_terms[0];
  const double a2 = log_sigmoid(-score) + digamma(gamma[1]) - other_terms[1];
  return normalize_log_pair(a1, a2);
}

inline std::array<double, 2> first_order_terms(double others_phi1,
                                               double others_phi2) {
  return {std::log1p(others_phi1), std::log1p(others_phi2)};
}

// pi_1 from the focal node's gamma and, when labeled, the outcome
// log-likelihood under each exposure state.
inline double pi_update_value(const std::array<double, 2>& gamma,
                              double loglik_exposed, double loglik_unexposed) {
  return normalize_log_pair(loglik_exposed + digamma(gamma[0]),
                            loglik_unexposed + digamma(gamma[1]));
}

// log p(y | eta = 1) and log p(y | eta = 0).
inline std::array<double, 2> outcome_loglik(bool y, double susceptibility_score,
                                            double w_e) {
  const double a1 = susceptibility_score + w_e;
  const double a0 = susceptibility_score;
  return y ? std::array<double, 2>{log_sigmoid(a1), log_sigmoid(a0)}
           : std::array<double, 2>{log_sigmoid(-a1), log_sigmoid(-a0)};
}

}  // namespace detail

// Updated (phi_{i,j,1}, phi_{i,j,2}) for edge e of main ordinal m:
//   phi_1 ∝ sigmoid(u.x_j) exp(psi(gamma_i1)) exp(-E[log(1 + S_-j)])
//   phi_2 ∝ (1 - sigmoid(u.x_j)) exp(psi(gamma_i2)) exp(-E[log(1 + N_-j)])
// with S_-j / N_-j the spreader / non-spreader counts among the other
// neighbors of i. Under PhiRule::kFirstOrder the expectations become
// log(1 + sum_{k != j} phi_k,s).
inline std::array<double, 2> update_phi(const ContactNetwork& net,
                                        std::size_t m, std::size_t e,
                                        const PalsWeights& weights,
                                        const VariationalState& st,
                                        PhiRule rule = PhiRule::kExact) {
  const std::size_t j = st.edge_node[e];
  const double score = dot(weights.u, net.features.row(j));
  std::array<double, 2> terms;
  if (rule == PhiRule::kExact) {
    PoissonBinomial others;
    for (std::size_t k = st.edge_begin[m]; k < st.edge_begin[m + 1]; ++k)
      if (k != e) others.add(st.phi[k]);
    const auto table = detail::log1p_table(others.trials());
    terms = detail::other_neighbor_terms(others, table);
  } else {
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t k = st.edge_begin[m]; k < st.edge_begin[m + 1]; ++k) {
      if (k == e) continue;
      s1 += st.phi[k];
      s2 += 1.0 - st.phi[k];
    }
    terms = detail::first_order_terms(s1, s2);
  }
  const double p = detail::phi_update_value(score, st.gamma[m], terms);
  detail::require_finite(p, "update_phi: non-finite value at main '" +
                                net.ids[st.main_nodes[m]] + "', neighbor '" +
                                net.ids[j] + "'");
  return {p, 1.0 - p};
}

// Updated (pi_1, pi_2) for main ordinal m. With a label y the outcome
// likelihood under each exposure state enters; without one (prediction)
// pi_s ∝ exp(psi(gamma_s)).
inline std::array<double, 2> update_pi(const ContactNetwork& net, std::size_t m,
                                       Label y, const PalsWeights& weights,
                                       const VariationalState& st) {
  std::array<double, 2> ll{0.0, 0.0};
  if (y.has_value()) {
    const double s = dot(weights.w_sus, net.features.row(st.main_nodes[m]));
    ll = detail::outcome_loglik(*y, s, weights.w_e);
  }
  const double p = detail::pi_update_value(st.gamma[m], ll[0], ll[1]);
  detail::require_finite(p, "update_pi: non-finite value at main '" +
                                net.ids[st.main_nodes[m]] + "'");
  return {p, 1.0 - p};
}

// ---------------------------------------------------------------------------
// ELBO

// Contribution of main ordinal m. `spreader_score` holds u . x_j per node.
inline double node_elbo(const ContactNetwork& net, std::size_t m, Label y,
                        const PalsWeights& weights, const VariationalState& st,
                        std::span<const double> spreader_score) {
  const std::size_t begin = st.edge_begin[m];
  const std::size_t end = st.edge_begin[m + 1];
  const std::size_t n = end - begin;
  const auto& g = st.gamma[m];
  const double psi_sum = digamma(g[0] + g[1]);
  const double e_log_theta = digamma(g[0]) - psi_sum;
  const double e_log_1m_theta = digamma(g[1]) - psi_sum;

  double total = 0.0;
  PoissonBinomial spreaders;
  for (std::size_t e = begin; e < end; ++e) {
    const double p = st.phi[e];
    const double s = spreader_score[st.edge_node[e]];
    // E log p(z | u, X) and the entropy of q(z).
    if (p > 0.0) total += p * log_sigmoid(s);
    if (p < 1.0) total += (1.0 - p) * log_sigmoid(-s);
    total += detail::bernoulli_entropy(p);
    spreaders.add(p);
  }

  // E log p(theta | z): Beta(1 + S, 1 + n - S) density, with the
  // log-normalizer averaged over the law of S.
  std::vector<double> lg_s(n + 1);
  std::vector<double> lg_ns(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    lg_s[k] = log_gamma(1.0 + static_cast<double>(k));
    lg_ns[k] = log_gamma(1.0 + static_cast<double>(n - k));
  }
  const double mean_s = spreaders.mean();
  total += log_gamma(2.0 + static_cast<double>(n)) - spreaders.expect(lg_s) -
           spreaders.expect(lg_ns) + mean_s * e_log_theta +
           (static_cast<double>(n) - mean_s) * e_log_1m_theta;

  // E log p(eta | theta).
  const double pi1 = st.pi[m];
  total += pi1 * e_log_theta + (1.0 - pi1) * e_log_1m_theta;

  // E log p(y | x, eta, w).
  if (y.has_value()) {
    const double s = dot(weights.w_sus, net.features.row(st.main_nodes[m]));
    const auto ll = detail::outcome_loglik(y.value_or(false), s, weights.w_e);
    if (pi1 > 0.0) total += pi1 * ll[0];
    if (pi1 < 1.0) total += (1.0 - pi1) * ll[1];
  }

  total += detail::bernoulli_entropy(pi1) + detail::beta_entropy(g[0], g[1]);
  return total;
}

// Evidence lower bound summed over main nodes. Labels are per node; a main
// without a label contributes no outcome term.
inline double elbo(const ContactNetwork& net, std::span<const Label> labels,
                   const PalsWeights& weights, const VariationalState& st) {
  const auto scores = spreader_scores(net, weights.u);
  double total = 0.0;
  for (std::size_t m = 0; m < st.main_count(); ++m) {
    const Label y = labels.empty() ? Label{} : labels[st.main_nodes[m]];
    total += node_elbo(net, m, y, weights, st, scores);
  }
  return total;
}

// ---------------------------------------------------------------------------
// E-step

namespace detail {

struct SweepOptions {
  PhiRule rule = PhiRule::kExact;
  bool update_spreaders = true;
  std::optional<double> fixed_pi;
};

// One Gauss-Seidel sweep over main nodes in ascending order: every
// unclamped phi of the node (edges in order), then gamma, then pi.
// Returns the largest change of any pi_1.
inline double e_step_sweep(const ContactNetwork& net,
                           std::span<const Label> labels,
                           const PalsWeights& weights, VariationalState& st,
                           const SweepOptions& opt) {
  const auto scores = spreader_scores(net, weights.u);
  std::size_t max_degree = 0;
  for (std::size_t m = 0; m < st.main_count(); ++m)
    max_degree = std::max(max_degree, st.degree(m));
  const auto table = log1p_table(max_degree);

  double max_change = 0.0;
  for (std::size_t m = 0; m < st.main_count(); ++m) {
    const std::size_t begin = st.edge_begin[m];
    const std::size_t end = st.edge_begin[m + 1];
    const std::size_t node = st.main_nodes[m];

    if (opt.update_spreaders && end > begin) {
      const auto& g = st.gamma[m];
      const double psi1 = digamma(g[0]);
      const double psi2 = digamma(g[1]);
      if (opt.rule == PhiRule::kExact) {
        PoissonBinomial all;
        for (std::size_t e = begin; e < end; ++e) all.add(st.phi[e]);
        for (std::size_t e = begin; e < end; ++e) {
          if (st.clamped[e]) continue;
          all.remove(st.phi[e]);
          const auto terms = other_neighbor_terms(all, table);
          const double s = scores[st.edge_node[e]];
          const double p = normalize_log_pair(
              log_sigmoid(s) + psi1 - terms[0], log_sigmoid(-s) + psi2 - terms[1]);
          require_finite(p, "e-step: non-finite phi at main '" + net.ids[node] +
                                "', neighbor '" + net.ids[st.edge_node[e]] + "'");
          st.phi[e] = p;
          all.add(p);
        }
      } else {
        double s1 = 0.0;
        double s2 = 0.0;
        for (std::size_t e = begin; e < end; ++e) {
          s1 += st.phi[e];
          s2 += 1.0 - st.phi[e];
        }
        for (std::size_t e = begin; e < end; ++e) {
          if (st.clamped[e]) continue;
          const double old = st.phi[e];
          const auto terms = first_order_terms(s1 - old, s2 - (1.0 - old));
          const double s = scores[st.edge_node[e]];
          const double p = normalize_log_pair(
              log_sigmoid(s) + psi1 - terms[0], log_sigmoid(-s) + psi2 - terms[1]);
          require_finite(p, "e-step: non-finite phi at main '" + net.ids[node] +
                                "', neighbor '" + net.ids[st.edge_node[e]] + "'");
          st.phi[e] = p;
          s1 += p - old;
          s2 += old - p;
        }
      }
    }

    st.gamma[m] = update_gamma(m, st);

    if (opt.fixed_pi.has_value()) {
      st.pi[m] = *opt.fixed_pi;
    } else {
      const double old = st.pi[m];
      st.pi[m] = update_pi(net, m, labels.empty() ? Label{} : labels[node],
                           weights, st)[0];
      max_change = std::max(max_change, std::abs(st.pi[m] - old));
    }
    st.gamma[m] = update_gamma(m, st);
  }
  return max_change;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// M-step

// Expected complete-data log-likelihood of the spreader states,
//   L_u = sum_i sum_j phi_ij1 log sigmoid(u.x_j) + phi_ij2 log(1 - sigmoid(u.x_j)),
// and its gradient sum_i sum_j (phi_ij1 - sigmoid(u.x_j)) x_j.
inline double spreader_objective(const ContactNetwork& net,
                                 const VariationalState& st,
                                 std::span<const double> u,
                                 std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  for (std::size_t e = 0; e < st.edge_count(); ++e) {
    const auto x = net.features.row(st.edge_node[e]);
    const double s = dot(u, x);
    const double p = st.phi[e];
    total += p * log_sigmoid(s) + (1.0 - p) * log_sigmoid(-s);
    const double r = p - sigmoid(s);
    for (std::size_t k = 0; k < x.size(); ++k) grad[k] += r * x[k];
  }
  return total;
}

// Expected outcome log-likelihood over main nodes,
//   L_w = sum_i pi_i1 log p(y_i | eta=1) + pi_i2 log p(y_i | eta=0),
// for params = (w_sus..., w_e). Gradient: w_sus gets
// sum_i [pi1 (y - p1) + pi2 (y - p0)] x_i, w_e gets sum_i pi1 (y - p1).
inline double outcome_objective(const ContactNetwork& net,
                                std::span<const Label> labels,
                                const VariationalState& st,
                                std::span<const double> params,
                                std::span<double> grad) {
  const std::size_t d = net.feature_dim();
  const auto w_sus = params.first(d);
  const double w_e = params[d];
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  for (std::size_t m = 0; m < st.main_count(); ++m) {
    const std::size_t i = st.main_nodes[m];
    const Label y = labels[i];
    if (!y.has_value()) continue;
    const auto x = net.features.row(i);
    const double s = dot(w_sus, x);
    const double yv = *y ? 1.0 : 0.0;
    const double pi1 = st.pi[m];
    const auto ll = detail::outcome_loglik(*y, s, w_e);
    total += pi1 * ll[0] + (1.0 - pi1) * ll[1];
    const double r1 = pi1 * (yv - sigmoid(s + w_e));
    const double r0 = (1.0 - pi1) * (yv - sigmoid(s));
    for (std::size_t k = 0; k < d; ++k) grad[k] += (r1 + r0) * x[k];
    grad[d] += r1;
  }
  return total;
}

// Maximizes L_u minus the optimizer penalty. Each neighbor node j becomes one
// logistic row with soft target mean_i phi_ij1 and weight |{i : j in n(i)}|,
// which leaves the objective unchanged up to a constant.
inline std::vector<double> m_step_u(const ContactNetwork& net,
                                    const VariationalState& st,
                                    const OptimizerConfig& optimizer,
                                    std::span<const double> warm_start) {
  const std::size_t n = net.node_count();
  std::vector<double> target(n, 0.0);
  std::vector<double> count(n, 0.0);
  for (std::size_t e = 0; e < st.edge_count(); ++e) {
    target[st.edge_node[e]] += st.phi[e];
    count[st.edge_node[e]] += 1.0;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (count[j] > 0.0) target[j] = std::clamp(target[j] / count[j], 0.0, 1.0);
    total += count[j];
  }
  if (total == 0.0) {
    // No edges: L_u is identically zero, the penalty alone decides.
    return std::vector<double>(warm_start.size(), 0.0);
  }
  return fit_logistic(net.features, target, count, optimizer, warm_start);
}

// Maximizes L_w minus the optimizer penalty; returns (w_sus, w_e).
inline std::pair<std::vector<double>, double> m_step_w(
    const ContactNetwork& net, std::span<const Label> labels,
    const VariationalState& st, const OptimizerConfig& optimizer,
    std::span<const double> warm_start_w_sus, double warm_start_w_e) {
  const std::size_t d = net.feature_dim();
  for (std::size_t i : st.main_nodes)
    if (!labels[i].has_value())
      throw ConfigError("m_step_w: main node '" + net.ids[i] + "' has no label");
  std::vector<double> start(warm_start_w_sus.begin(), warm_start_w_sus.end());
  start.push_back(warm_start_w_e);
  Objective f = [&](std::span<const double> params, std::span<double> grad) {
    const double value = outcome_objective(net, labels, st, params, grad);
    for (double& g : grad) g = -g;
    return -value;
  };
  auto res = minimize(f, start, optimizer);
  const double w_e = res.point[d];
  res.point.resize(d);
  return {std::move(res.point), w_e};
}

inline double weight_penalty(const PalsWeights& w, const OptimizerConfig& cfg) {
  double sq = 0.0;
  double abs_sum = 0.0;
  auto acc = [&](double v) {
    sq += v * v;
    abs_sum += std::abs(v);
  };
  for (double v : w.u) acc(v);
  for (double v : w.w_sus) acc(v);
  acc(w.w_e);
  return 0.5 * cfg.l2_penalty * sq + cfg.l1_penalty * abs_sum;
}

// ---------------------------------------------------------------------------
// Fit and predict

// Variational EM. Each round runs e_step_sweeps_per_round E-step sweeps and
// then re-fits u and (w_sus, w_e). Stops when the relative change of the
// traced objective is at most elbo_rel_tolerance.
inline FitResult fit(const ContactNetwork& net, std::span<const Label> labels,
                     std::span<const Label> observed_spreaders,
                     const FitConfig& cfg) {
  cfg.validate();
  const std::size_t d = net.feature_dim();
  if (labels.size() != net.node_count())
    throw ConfigError("fit: labels size differs from node count");
  for (std::size_t i : net.main_nodes())
    if (!labels[i].has_value())
      throw ConfigError("fit: main node '" + net.ids[i] + "' has no label");

  FitResult out;
  if (cfg.initial_weights.has_value()) {
    cfg.initial_weights->validate(d);
    out.weights = *cfg.initial_weights;
  } else {
    out.weights = PalsWeights::zeros(d);
    out.weights.w_e = cfg.initial_exposure_weight;
  }
  out.state = init_state(net, observed_spreaders, cfg.seed);
  if (cfg.fixed_exposure_probability.has_value()) {
    const double p = *cfg.fixed_exposure_probability;
    for (std::size_t m = 0; m < out.state.main_count(); ++m) {
      out.state.pi[m] = p;
      out.state.gamma[m] = update_gamma(m, out.state);
    }
  }

  const detail::SweepOptions sweep{cfg.phi_rule, cfg.update_spreaders,
                                   cfg.fixed_exposure_probability};
  auto objective = [&] {
    return elbo(net, labels, out.weights, out.state) -
           weight_penalty(out.weights, cfg.optimizer);
  };
  out.elbo_trace.push_back(objective());

  for (int round = 0; round < cfg.max_em_rounds; ++round) {
    try {
      for (int s = 0; s < cfg.e_step_sweeps_per_round; ++s)
        detail::e_step_sweep(net, labels, out.weights, out.state, sweep);
      if (cfg.update_spreaders)
        out.weights.u = m_step_u(net, out.state, cfg.optimizer, out.weights.u);
      auto [w_sus, w_e] = m_step_w(net, labels, out.state, cfg.optimizer,
                                   out.weights.w_sus, out.weights.w_e);
      out.weights.w_sus = std::move(w_sus);
      out.weights.w_e = w_e;
    } catch (const OptimizationError& e) {
      throw OptimizationError("fit round " + std::to_string(round) + ": " + e.what(),
                              e.last_point());
    } catch (const InferenceError& e) {
      throw InferenceError("fit round " + std::to_string(round) + ": " + e.what());
    }
    const double prev = out.elbo_trace.back();
    const double cur = objective();
    out.elbo_trace.push_back(cur);
    if (std::abs(cur - prev) <= cfg.elbo_rel_tolerance * std::abs(prev)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

inline double predict_spreader(const PalsWeights& weights,
                               std::span<const double> x) {
  if (x.size() != weights.u.size())
    throw ConfigError("predict_spreader: dimension mismatch");
  return sigmoid(dot(weights.u, x));
}

struct InfectionPrediction {
  std::vector<double> probability;  // per main ordinal
  VariationalState state;
  int sweeps_used = 0;
  bool converged = false;
};

// Runs the outcome-free E-step to a fixed point and returns, per main node
// (ascending node index), pi_1 sigmoid(w_sus.x + w_e) + pi_2 sigmoid(w_sus.x).
inline InfectionPrediction predict_infection_state(
    const PalsWeights& weights, const ContactNetwork& net,
    std::span<const Label> observed_spreaders, const PredictConfig& cfg = {}) {
  weights.validate(net.feature_dim());
  InfectionPrediction out;
  out.state = init_state(net, observed_spreaders, cfg.seed);
  const detail::SweepOptions sweep{cfg.phi_rule, true, std::nullopt};
  for (int s = 0; s < cfg.max_sweeps; ++s) {
    ++out.sweeps_used;
    if (detail::e_step_sweep(net, {}, weights, out.state, sweep) <= cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.probability.resize(out.state.main_count());
  for (std::size_t m = 0; m < out.state.main_count(); ++m) {
    const double s = dot(weights.w_sus, net.features.row(out.state.main_nodes[m]));
    const double pi1 = out.state.pi[m];
    out.probability[m] = pi1 * sigmoid(s + weights.w_e) + (1.0 - pi1) * sigmoid(s);
  }
  return out;
}

inline std::vector<double> predict_infection(
    const PalsWeights& weights, const ContactNetwork& net,
    std::span<const Label> observed_spreaders, const PredictConfig& cfg = {}) {
  return predict_infection_state(weights, net, observed_spreaders, cfg).probability;
}

}  // namespace pals
