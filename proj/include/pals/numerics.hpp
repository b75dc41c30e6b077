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

// Special functions, a BFGS / orthant-wise minimizer and soft-label
// logistic regression.

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pals/errors.hpp"

namespace pals {

// ---------------------------------------------------------------------------
// Dense row-major matrix. Rows are feature vectors.

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const double> row(std::size_t r) const {
    assert(r < rows_);
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    assert(r < rows_);
    return {data_.data() + r * cols_, cols_};
  }

  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    assert(values.size() == cols_);
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------------------
// Special functions

// Logistic function. Never exponentiates a positive argument.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(sigmoid(t)) without cancellation.
inline double log_sigmoid(double t) {
  if (t >= 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

// log(1 + exp(t)).
inline double softplus(double t) { return -log_sigmoid(-t); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Digamma function for a > 0. Shifts the argument above 10 with
// psi(a) = psi(a + 1) - 1/a, then applies the asymptotic series.
inline double digamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError("digamma: argument must be finite and > 0, got " +
                      std::to_string(a));
  }
  double shift = 0.0;
  while (a < 10.0) {
    shift -= 1.0 / a;
    a += 1.0;
  }
  const double inv = 1.0 / a;
  const double inv2 = inv * inv;
  // Bernoulli-number series: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760.
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760))))));
  return shift + std::log(a) - 0.5 * inv - series;
}

// ln Gamma(a) for a > 0 via Stirling's series after shifting above 15.
// Implemented here rather than with std::lgamma, which writes the global
// signgam and is therefore not reentrant.
inline double log_gamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError("log_gamma: argument must be finite and > 0, got " +
                      std::to_string(a));
  }
  double log_shift = 0.0;
  if (a < 15.0) {
    double prod = 1.0;
    while (a < 15.0) {
      prod *= a;
      a += 1.0;
    }
    log_shift = std::log(prod);
  }
  const double inv = 1.0 / a;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12 -
             inv2 * (1.0 / 360 -
                     inv2 * (1.0 / 1260 -
                             inv2 * (1.0 / 1680 -
                                     inv2 * (1.0 / 1188 -
                                             inv2 * (691.0 / 360360))))));
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  return (a - 0.5) * std::log(a) - a + kHalfLog2Pi + series - log_shift;
}

// ---------------------------------------------------------------------------
// Minimizer

struct OptimizerConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // infinity norm
  double line_search_shrink = 0.5;
  double l2_penalty = 0.0;  // adds 0.5 * l2 * ||v||^2
  double l1_penalty = 0.0;  // adds l1 * ||v||_1

  void validate() const {
    if (max_iterations < 1)
      throw ConfigError("optimizer: max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0))
      throw ConfigError("optimizer: gradient_tolerance must be > 0");
    if (!(line_search_shrink > 0.0 && line_search_shrink < 1.0))
      throw ConfigError("optimizer: line_search_shrink must be in (0,1)");
    if (!(l2_penalty >= 0.0) || !(l1_penalty >= 0.0))
      throw ConfigError("optimizer: penalties must be non-negative");
  }
};

struct ObjectiveReport {
  double final_value = 0.0;
  double gradient_norm = 0.0;  // infinity norm of the (pseudo-)gradient
  int iterations_used = 0;
  bool converged = false;
};

// Smooth part of an objective. Returns f(x) and writes grad f(x) into the
// span, which has the size of x.
using Objective =
    std::function<double(std::span<const double>, std::span<double>)>;

struct MinimizeResult {
  std::vector<double> point;
  ObjectiveReport report;
};

namespace detail {

// Value, smooth gradient (including the l2 term) and l1-aware
// pseudo-gradient of the penalized objective at x.
struct Evaluation {
  double value = 0.0;          // f + l2 + l1 terms
  std::vector<double> grad;    // grad of f + l2 term
  std::vector<double> pseudo;  // pseudo-gradient with l1 subgradient
};

inline void check_finite(const Evaluation& e, std::span<const double> at,
                         const std::vector<double>& last_good) {
  bool ok = std::isfinite(e.value);
  for (double g : e.grad) ok = ok && std::isfinite(g);
  if (!ok) {
    std::string where;
    for (std::size_t k = 0; k < at.size() && k < 4; ++k)
      where += (k ? "," : "") + std::to_string(at[k]);
    throw OptimizationError(
        "minimize: non-finite objective or gradient at (" + where +
            (at.size() > 4 ? ",..." : "") + ")",
        last_good);
  }
}

inline Evaluation evaluate(const Objective& f, std::span<const double> x,
                           const OptimizerConfig& cfg) {
  const std::size_t n = x.size();
  Evaluation e;
  e.grad.assign(n, 0.0);
  e.value = f(x, e.grad);
  double sq = 0.0;
  double abs_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sq += x[k] * x[k];
    abs_sum += std::abs(x[k]);
    e.grad[k] += cfg.l2_penalty * x[k];
  }
  e.value += 0.5 * cfg.l2_penalty * sq + cfg.l1_penalty * abs_sum;
  e.pseudo = e.grad;
  if (cfg.l1_penalty > 0.0) {
    const double c = cfg.l1_penalty;
    for (std::size_t k = 0; k < n; ++k) {
      const double g = e.grad[k];
      if (x[k] > 0.0) {
        e.pseudo[k] = g + c;
      } else if (x[k] < 0.0) {
        e.pseudo[k] = g - c;
      } else if (g + c < 0.0) {
        e.pseudo[k] = g + c;
      } else if (g - c > 0.0) {
        e.pseudo[k] = g - c;
      } else {
        e.pseudo[k] = 0.0;
      }
    }
  }
  return e;
}

}  // namespace detail

// Minimizes f(x) + 0.5*l2*||x||^2 + l1*||x||_1 from `start`.
//
// Dense BFGS with backtracking Armijo line search. With l1 > 0 the search
// direction is built from the pseudo-gradient, sign-constrained, and each
// trial point is projected onto the current orthant (OWL-QN). The objective
// never increases across accepted steps. Throws OptimizationError if f or
// its gradient is non-finite at any evaluated point.
inline MinimizeResult minimize(const Objective& f,
                               std::span<const double> start,
                               const OptimizerConfig& cfg) {
  cfg.validate();
  const std::size_t n = start.size();
  std::vector<double> x(start.begin(), start.end());
  std::vector<double> last_good = x;

  detail::Evaluation cur = detail::evaluate(f, x, cfg);
  detail::check_finite(cur, x, last_good);

  // Inverse Hessian approximation, row-major.
  std::vector<double> h(n * n, 0.0);
  auto reset_h = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) h[k * n + k] = 1.0;
  };
  reset_h();
  bool h_is_identity = true;

  MinimizeResult out;
  std::vector<double> dir(n), trial(n), s(n), y(n), hy(n);
  const bool l1 = cfg.l1_penalty > 0.0;
  constexpr double kArmijo = 1e-4;

  int iter = 0;
  int stalled = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    if (max_abs(cur.pseudo) <= cfg.gradient_tolerance || stalled >= 3) break;

    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc -= h[r * n + c] * cur.pseudo[c];
      dir[r] = acc;
    }
    if (l1) {
      for (std::size_t k = 0; k < n; ++k)
        if (dir[k] * cur.pseudo[k] >= 0.0) dir[k] = 0.0;
    }
    double slope = dot(dir, cur.pseudo);
    if (!(slope < 0.0)) {
      // Not a descent direction: fall back to steepest descent.
      reset_h();
      h_is_identity = true;
      for (std::size_t k = 0; k < n; ++k) dir[k] = -cur.pseudo[k];
      slope = dot(dir, cur.pseudo);
    }

    // First step from the identity is scaled so that it moves at most one
    // unit along any coordinate.
    double step = 1.0;
    if (h_is_identity) step = std::min(1.0, 1.0 / std::max(max_abs(dir), 1e-300));

    detail::Evaluation next;
    bool accepted = false;
    while (step > 1e-20) {
      for (std::size_t k = 0; k < n; ++k) {
        trial[k] = x[k] + step * dir[k];
        if (l1) {
          const double orthant =
              x[k] != 0.0 ? x[k] : -cur.pseudo[k];
          if (trial[k] * orthant <= 0.0) trial[k] = 0.0;
        }
      }
      next = detail::evaluate(f, trial, cfg);
      detail::check_finite(next, trial, last_good);
      double decrease = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        decrease += cur.pseudo[k] * (trial[k] - x[k]);
      if (next.value <= cur.value + kArmijo * decrease) {
        accepted = true;
        break;
      }
      step *= cfg.line_search_shrink;
    }
    if (!accepted) {
      if (h_is_identity) break;  // no progress possible along -gradient
      reset_h();
      h_is_identity = true;
      continue;
    }

    // Stop once accepted steps no longer change f beyond rounding.
    const double drop = cur.value - next.value;
    stalled = drop <= 1e-15 * std::max(1.0, std::abs(cur.value)) ? stalled + 1 : 0;

    double sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = trial[k] - x[k];
      y[k] = next.grad[k] - cur.grad[k];
      sy += s[k] * y[k];
    }
    x = trial;
    last_good = x;
    cur = std::move(next);

    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (h_is_identity) {
        // Shanno-Phua scaling of the initial inverse Hessian.
        const double scale = sy / dot(y, y);
        for (std::size_t k = 0; k < n; ++k) h[k * n + k] = scale;
      }
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += h[r * n + c] * y[c];
        hy[r] = acc;
      }
      const double yhy = dot(y, hy);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          h[r * n + c] += -rho * (hy[r] * s[c] + s[r] * hy[c]) +
                          (rho * rho * yhy + rho) * s[r] * s[c];
        }
      }
      h_is_identity = false;
    }
  }

  out.report.final_value = cur.value;
  out.report.gradient_norm = max_abs(cur.pseudo);
  out.report.iterations_used = iter;
  out.report.converged = out.report.gradient_norm <= cfg.gradient_tolerance;
  out.point = std::move(x);
  return out;
}

// ---------------------------------------------------------------------------
// Soft-label logistic regression

// sum_r w_r * [softplus(s_r) - t_r * s_r] with s_r = v . x_r, which equals
// the weighted cross entropy against soft targets t_r in [0,1].
inline double logistic_loss(const Matrix& x, std::span<const double> targets,
                            std::span<const double> row_weights,
                            std::span<const double> v, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double w = row_weights[r];
    if (w == 0.0) continue;
    const auto row = x.row(r);
    const double s = dot(v, row);
    loss += w * (softplus(s) - targets[r] * s);
    const double resid = w * (sigmoid(s) - targets[r]);
    for (std::size_t k = 0; k < row.size(); ++k) grad[k] += resid * row[k];
  }
  return loss;
}

// Weights minimizing the penalized soft-label cross entropy. No intercept is
// added; append a constant column to `x` if one is wanted.
inline std::vector<double> fit_logistic(const Matrix& x,
                                        std::span<const double> targets,
                                        std::span<const double> row_weights,
                                        const OptimizerConfig& cfg,
                                        std::span<const double> warm_start = {},
                                        ObjectiveReport* report = nullptr) {
  if (targets.size() != x.rows() || row_weights.size() != x.rows()) {
    throw ConfigError("fit_logistic: targets/row_weights size mismatch");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!(targets[r] >= 0.0 && targets[r] <= 1.0))
      throw ConfigError("fit_logistic: target outside [0,1] at row " +
                        std::to_string(r));
    if (!(row_weights[r] >= 0.0))
      throw ConfigError("fit_logistic: negative row weight at row " +
                        std::to_string(r));
    total += row_weights[r];
  }
  if (!(total > 0.0))
    throw DegenerateInputError("fit_logistic: all row weights are zero");

  std::vector<double> start(x.cols(), 0.0);
  if (!warm_start.empty()) {
    if (warm_start.size() != x.cols())
      throw ConfigError("fit_logistic: warm start has wrong dimension");
    start.assign(warm_start.begin(), warm_start.end());
  }
  Objective f = [&](std::span<const double> v, std::span<double> g) {
    return logistic_loss(x, targets, row_weights, v, g);
  };
  MinimizeResult res = minimize(f, start, cfg);
  if (report) *report = res.report;
  return std::move(res.point);
}

// Hard-label convenience overload with unit row weights.
inline std::vector<double> fit_logistic(const Matrix& x,
                                        std::span<const double> targets,
                                        const OptimizerConfig& cfg) {
  std::vector<double> ones(x.rows(), 1.0);
  return fit_logistic(x, targets, ones, cfg);
}

}  // namespace pals
