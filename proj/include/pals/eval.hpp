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

// Ranking metrics and bootstrap summaries.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pals/errors.hpp"
#include "pals/random.hpp"

namespace pals {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 0 or 1

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }

  void validate(const char* metric) const {
    if (scores.size() != labels.size())
      throw MetricError(std::string(metric) + ": scores and labels differ in length");
    const std::size_t pos = positives();
    if (pos == 0 || pos == labels.size())
      throw MetricError(std::string(metric) +
                        ": both classes must be present");
  }
};

struct MetricSummary {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_runs = 0;
};

// Mann-Whitney AUC, (wins + 0.5 ties) / (positives * negatives), from
// mid-rank sums in O(n log n).
inline double auc(const ScoredSet& set) {
  set.validate("auc");
  const std::size_t n = set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] < set.scores[b];
  });
  // Ranks are kept doubled (2 * mid-rank) so everything stays integral.
  double rank_sum2 = 0.0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k + 1;
    while (end < n && set.scores[order[end]] == set.scores[order[k]]) ++end;
    const double mid_rank2 = static_cast<double>(k + 1 + end);
    for (std::size_t t = k; t < end; ++t)
      if (set.labels[order[t]] == 1) rank_sum2 += mid_rank2;
    k = end;
  }
  const double pos = static_cast<double>(set.positives());
  const double neg = static_cast<double>(n) - pos;
  const double u2 = rank_sum2 - pos * (pos + 1.0);
  return u2 / (2.0 * pos * neg);
}

// True-positive rate at the most permissive score threshold (predict
// positive when score >= t) whose false-positive rate does not exceed
// target_fpr. No interpolation between operating points.
inline double tpr_at_fpr(const ScoredSet& set, double target_fpr) {
  set.validate("tpr_at_fpr");
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    throw MetricError("tpr_at_fpr: target_fpr must lie in (0,1)");
  const std::size_t n = set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] > set.scores[b];
  });
  const double pos = static_cast<double>(set.positives());
  const double neg = static_cast<double>(n) - pos;
  double tp = 0.0;
  double fp = 0.0;
  double best = 0.0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k;
    while (end < n && set.scores[order[end]] == set.scores[order[k]]) {
      (set.labels[order[end]] == 1 ? tp : fp) += 1.0;
      ++end;
    }
    if (fp / neg > target_fpr) break;
    best = tp / pos;
    k = end;
  }
  return best;
}

namespace detail {

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Percentile of sorted values with linear interpolation.
inline double percentile(std::span<const double> sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline MetricSummary percentile_summary(double point, std::vector<double> draws,
                                        double confidence, std::size_t n) {
  std::sort(draws.begin(), draws.end());
  const double alpha = 0.5 * (1.0 - confidence);
  MetricSummary out;
  out.mean = point;
  out.ci_low = std::min(point, percentile(draws, alpha));
  out.ci_high = std::max(point, percentile(draws, 1.0 - alpha));
  out.n_runs = n;
  return out;
}

}  // namespace detail

// Percentile bootstrap of the mean of `values`. The interval is widened to
// contain the point estimate if the percentiles miss it.
inline MetricSummary bootstrap_ci(std::span<const double> values,
                                  double confidence = 0.95,
                                  std::size_t resamples = 1000,
                                  std::uint64_t seed = 0) {
  if (values.empty()) throw MetricError("bootstrap_ci: no values");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw MetricError("bootstrap_ci: confidence must lie in (0,1)");
  const double point = detail::mean_of(values);
  if (values.size() == 1 || resamples == 0)
    return {point, point, point, values.size()};
  Rng rng(seed);
  std::vector<double> draws(resamples);
  for (double& d : draws) {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
      s += values[rng.index(values.size())];
    d = s / static_cast<double>(values.size());
  }
  return detail::percentile_summary(point, std::move(draws), confidence,
                                    values.size());
}

// Percentile bootstrap of a set-level metric over resampled rows (e.g. the
// test patients). Resamples that miss a class are redrawn.
inline MetricSummary bootstrap_ci(
    const ScoredSet& set, const std::function<double(const ScoredSet&)>& metric,
    double confidence = 0.95, std::size_t resamples = 1000,
    std::uint64_t seed = 0) {
  set.validate("bootstrap_ci");
  const double point = metric(set);
  Rng rng(seed);
  std::vector<double> draws;
  draws.reserve(resamples);
  ScoredSet sample;
  sample.scores.resize(set.size());
  sample.labels.resize(set.size());
  while (draws.size() < resamples) {
    for (std::size_t k = 0; k < set.size(); ++k) {
      const auto r = rng.index(set.size());
      sample.scores[k] = set.scores[r];
      sample.labels[k] = set.labels[r];
    }
    const std::size_t pos = sample.positives();
    if (pos == 0 || pos == sample.size()) continue;
    draws.push_back(metric(sample));
  }
  return detail::percentile_summary(point, std::move(draws), confidence, 1);
}

// Mean over runs with a bootstrap interval over runs.
inline MetricSummary aggregate_runs(std::span<const double> per_run,
                                    double confidence = 0.95,
                                    std::size_t resamples = 1000,
                                    std::uint64_t seed = 0) {
  if (per_run.empty()) throw MetricError("aggregate_runs: no runs");
  return bootstrap_ci(per_run, confidence, resamples, seed);
}

// Summary of per-seed differences a[r] - b[r]; pairing is by position.
inline MetricSummary aggregate_paired_difference(std::span<const double> a,
                                                 std::span<const double> b,
                                                 double confidence = 0.95,
                                                 std::size_t resamples = 1000,
                                                 std::uint64_t seed = 0) {
  if (a.size() != b.size())
    throw MetricError("aggregate_paired_difference: run counts differ");
  std::vector<double> diff(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) diff[r] = a[r] - b[r];
  return aggregate_runs(diff, confidence, resamples, seed);
}

}  // namespace pals
