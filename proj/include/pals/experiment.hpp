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

// Synthetic experiment grids: simulate -> fit -> benchmarks -> metrics.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pals/benchmarks.hpp"
#include "pals/cohort.hpp"
#include "pals/eval.hpp"
#include "pals/model.hpp"
#include "pals/synth.hpp"

namespace pals {

struct ExperimentOptions {
  Experiment which = Experiment::kExp1;
  int runs = 30;
  std::uint64_t base_seed = 0;
  int jobs = 1;
  FitConfig fit;
  PredictConfig predict;
  OptimizerConfig benchmark_penalty = default_benchmark_penalty();
  // Applied to every generated config after the grid value is set.
  std::function<void(SynthConfig&)> customize;
  double confidence = 0.95;
  std::size_t bootstrap_resamples = 1000;
};

// One metric value of one model on one run.
struct RunRecord {
  double grid_value = 0.0;
  int run = 0;
  std::string model;
  std::string metric;
  double value = 0.0;
};

struct GridFailure {
  double grid_value = 0.0;
  int run = 0;
  std::string message;
};

struct MetricRow {
  double grid_value = 0.0;
  std::string model;
  std::string metric;
  MetricSummary summary;
};

struct ExperimentResult {
  Experiment which = Experiment::kExp1;
  std::vector<RunRecord> runs;
  std::vector<MetricRow> metrics;
  std::vector<GridFailure> failures;

  // Per-run values of (grid value, model), ordered by run index.
  std::vector<double> values(double grid_value, const std::string& model) const {
    std::vector<std::pair<int, double>> v;
    for (const auto& r : runs)
      if (r.grid_value == grid_value && r.model == model)
        v.emplace_back(r.run, r.value);
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (const auto& [run, value] : v) out.push_back(value);
    return out;
  }

  double mean(double grid_value, const std::string& model) const {
    for (const auto& m : metrics)
      if (m.grid_value == grid_value && m.model == model) return m.summary.mean;
    throw MetricError("experiment: no metric for model '" + model + "'");
  }
};

// Series emitted by each experiment, in output order.
inline std::vector<std::string> experiment_models(Experiment e) {
  if (e == Experiment::kExp3)
    return {"y-PALS-T", "z-PALS-T", "y-PALS-TT", "eta_O(k)", "NoNet"};
  return {"y-PALS", "z-PALS", "NoNet", "eta_O", "z_O"};
}

namespace detail {

inline double infection_auc(const LabeledCohort& test,
                            std::vector<double> scores) {
  return auc(ScoredSet{std::move(scores), test.main_outcomes()});
}

inline double spreader_auc(const LabeledCohort& test,
                           std::vector<double> scores) {
  return auc(ScoredSet{std::move(scores), test.truth->z_true});
}

// Ranked by u . x rather than sigmoid(u . x): same order, but large
// weights would otherwise saturate to ties at 0 and 1.
inline std::vector<double> spreader_scores_of(const PalsWeights& w,
                                              const ContactNetwork& net) {
  return spreader_scores(net, w.u);
}

// Runs every model of one grid point and returns (model, AUC) pairs.
inline std::vector<std::pair<std::string, double>> run_grid_point(
    Experiment which, double grid_value, const SynthConfig& cfg,
    const ExperimentOptions& opt) {
  Cohort train = generate_cohort(cfg);
  Cohort test = generate_cohort(test_config_for(cfg));
  train.network = append_constant_feature(train.network);
  test.network = append_constant_feature(test.network);

  std::vector<std::pair<std::string, double>> out;
  if (which != Experiment::kExp3) {
    const LabeledCohort tr = label_cohort(train, false);
    const LabeledCohort te = label_cohort(test, false);
    const FitResult fitted = fit(tr.network, tr.outcome, tr.spreader, opt.fit);
    out.emplace_back("y-PALS", infection_auc(te, predict_infection(
                                                     fitted.weights, te.network,
                                                     te.spreader, opt.predict)));
    out.emplace_back("z-PALS",
                     spreader_auc(te, spreader_scores_of(fitted.weights, te.network)));
    out.emplace_back("NoNet", infection_auc(te, run_nonet(tr, te, opt.benchmark_penalty)));
    out.emplace_back("eta_O",
                     infection_auc(te, run_eta_oracle(tr, te, opt.benchmark_penalty)));
    out.emplace_back("z_O", spreader_auc(te, run_z_oracle(tr, te, opt.benchmark_penalty)));
    return out;
  }

  const LabeledCohort tr = label_cohort(train, true);
  const LabeledCohort te_hidden = label_cohort(test, false);
  const LabeledCohort te_known = label_cohort(test, true);
  const FitResult fitted = fit(tr.network, tr.outcome, tr.spreader, opt.fit);
  out.emplace_back("y-PALS-T",
                   infection_auc(te_hidden,
                                 predict_infection(fitted.weights, te_hidden.network,
                                                   te_hidden.spreader, opt.predict)));
  out.emplace_back("z-PALS-T", spreader_auc(te_hidden, spreader_scores_of(
                                                           fitted.weights,
                                                           te_hidden.network)));
  out.emplace_back("y-PALS-TT",
                   infection_auc(te_known,
                                 predict_infection(fitted.weights, te_known.network,
                                                   te_known.spreader, opt.predict)));
  out.emplace_back("eta_O(k)", infection_auc(te_hidden, run_eta_oracle_k(
                                                            tr, te_hidden, grid_value,
                                                            opt.benchmark_penalty)));
  out.emplace_back("NoNet",
                   infection_auc(te_hidden, run_nonet(tr, te_hidden, opt.benchmark_penalty)));
  return out;
}

}  // namespace detail

// Executes the full grid. Grid points run on `jobs` worker threads; results
// are assembled in grid order, so output does not depend on scheduling.
// A failing grid point is recorded in `failures` and the rest continue.
inline ExperimentResult run_experiment(const ExperimentOptions& opt) {
  if (opt.runs < 1) throw ConfigError("experiment: runs must be >= 1");
  const auto configs = experiment_grid(opt.which, opt.runs, opt.base_seed);
  const auto grid = grid_values(opt.which);
  const std::size_t total = configs.size();

  struct Slot {
    std::vector<std::pair<std::string, double>> values;
    std::string error;
  };
  std::vector<Slot> slots(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      const double g = grid[idx / static_cast<std::size_t>(opt.runs)];
      SynthConfig cfg = configs[idx];
      try {
        if (opt.customize) opt.customize(cfg);
        slots[idx].values = detail::run_grid_point(opt.which, g, cfg, opt);
      } catch (const std::exception& e) {
        slots[idx].error = e.what();
      }
    }
  };
  const int jobs = std::max(1, opt.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  result.which = opt.which;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const double g = grid[idx / static_cast<std::size_t>(opt.runs)];
    const int run = static_cast<int>(idx % static_cast<std::size_t>(opt.runs));
    if (!slots[idx].error.empty()) {
      result.failures.push_back({g, run, slots[idx].error});
      continue;
    }
    for (const auto& [model, value] : slots[idx].values)
      result.runs.push_back({g, run, model, "auc", value});
  }

  const auto models = experiment_models(opt.which);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const auto v = result.values(grid[gi], models[mi]);
      if (v.empty()) continue;
      MetricRow row;
      row.grid_value = grid[gi];
      row.model = models[mi];
      row.metric = "auc";
      row.summary = aggregate_runs(v, opt.confidence, opt.bootstrap_resamples,
                                   derive_seed(opt.base_seed, gi, mi));
      result.metrics.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace pals
