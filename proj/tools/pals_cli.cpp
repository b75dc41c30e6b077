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

// pals: simulate, fit, predict, evaluate, run experiment grids, report weights.
//
// Exit codes: 0 ok, 1 partial failure (experiment grid points failed),
// 2 input error, 3 I/O error.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "pals/pals.hpp"

namespace fs = std::filesystem;

namespace {

using pals::KeyValueConfig;

constexpr int kExitPartial = 1;
constexpr int kExitInput = 2;
constexpr int kExitIo = 3;

// Options shared by every command that reads a run configuration.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value run configuration file");
    cmd->add_option("--set", overrides, "override a configuration key (key=value)");
    cmd->add_option("--seed", seed, "seed; overrides PALS_SEED and the config file");
  }

  // File keys, then --set, then PALS_SEED, then --seed.
  KeyValueConfig resolve() const {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
    for (const auto& o : overrides) cfg.set_override(o);
    pals::apply_seed_overrides(cfg, std::getenv("PALS_SEED"), seed);
    return cfg;
  }
};

pals::RunManifest manifest_for(const std::string& command, const KeyValueConfig& cfg) {
  pals::RunManifest m;
  m.command = command;
  m.config_digest = pals::config_digest(cfg);
  m.seed = pals::resolved_seed(cfg);
  return m;
}

void write_output(const fs::path& path, const std::string& content,
                  pals::RunManifest& manifest) {
  pals::write_file_atomic(path, content);
  manifest.output_paths.push_back(path.string());
}

std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

// ---------------------------------------------------------------------------

struct SimulateArgs {
  CommonOptions common;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& a) {
  const KeyValueConfig cfg = a.common.resolve();
  const pals::SynthConfig train_cfg = pals::resolve_synth(cfg);
  const pals::Cohort train = pals::generate_cohort(train_cfg);
  const pals::Cohort test = pals::generate_cohort(pals::test_config_for(train_cfg));

  pals::RunManifest m = manifest_for("simulate", cfg);
  const fs::path root(a.out_dir);
  for (const auto& [name, cohort] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
    const fs::path dir = root / name;
    write_output(dir / "nodes.csv", pals::nodes_csv(cohort->network), m);
    write_output(dir / "edges.csv", pals::edges_csv(cohort->network), m);
    write_output(dir / "truth.csv", pals::ground_truth_csv(cohort->network, cohort->truth), m);
  }
  m.extra["node_count"] = train.network.node_count();
  m.extra["feature_dim"] = train.network.feature_dim();
  pals::write_file_atomic(root / "manifest.json", m.to_json());
  return 0;
}

// ---------------------------------------------------------------------------

struct CohortArgs {
  std::string nodes;
  std::string edges;
  std::string truth;

  void attach(CLI::App* cmd, bool truth_required) {
    cmd->add_option("--nodes", nodes, "nodes CSV (id,role,f1..fd)")->required();
    cmd->add_option("--edges", edges, "edges CSV (src,dst[,last_contact_day])")->required();
    auto* t = cmd->add_option("--truth", truth, "ground truth CSV (id,y,z_true,eta_true,z_observed)");
    if (truth_required) t->required();
  }
};

struct FitArgs {
  CommonOptions common;
  CohortArgs cohort;
  std::string out;
  std::string trace;
  std::string state;
  bool observed_spreaders = false;
};

int cmd_fit(const FitArgs& a) {
  const KeyValueConfig cfg = a.common.resolve();
  const pals::FitConfig fit_cfg = pals::resolve_fit(cfg);
  const bool intercept = pals::resolve_intercept(cfg);
  pals::LabeledCohort c = pals::read_labeled_cohort(a.cohort.nodes, a.cohort.edges,
                                                    a.cohort.truth, a.observed_spreaders);
  if (intercept) c.network = pals::append_constant_feature(c.network);

  const pals::FitResult r = pals::fit(c.network, c.outcome, c.spreader, fit_cfg);
  pals::RunManifest m = manifest_for("fit", cfg);
  write_output(a.out, pals::weights_json(r.weights, intercept), m);
  write_output(a.trace.empty() ? a.out + ".elbo.csv" : a.trace,
               pals::elbo_trace_csv(r.elbo_trace), m);
  if (!a.state.empty()) write_output(a.state, pals::state_json(c.network, r.state), m);
  m.extra["converged"] = r.converged;
  m.extra["em_rounds"] = r.elbo_trace.empty() ? 0 : r.elbo_trace.size() - 1;
  m.extra["observed_spreaders"] = a.observed_spreaders;
  pals::write_file_atomic(manifest_path_for(a.out), m.to_json());
  if (!r.converged)
    std::cerr << "pals fit: warning: EM did not converge (see manifest)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  CommonOptions common;
  CohortArgs cohort;
  std::string weights;
  std::string target = "infection";
  std::string out;
  bool observed_spreaders = false;
};

int cmd_predict(const PredictArgs& a) {
  const KeyValueConfig cfg = a.common.resolve();
  const pals::PredictConfig pred_cfg = pals::resolve_predict(cfg);
  const pals::StoredWeights w = pals::read_weights(a.weights);

  pals::LabeledCohort c;
  if (!a.cohort.truth.empty()) {
    c = pals::read_labeled_cohort(a.cohort.nodes, a.cohort.edges, a.cohort.truth,
                                  a.observed_spreaders);
  } else {
    if (a.observed_spreaders)
      throw pals::ConfigError("predict: --observed-spreaders needs --truth");
    c.network = pals::read_network(a.cohort.nodes, a.cohort.edges);
    c.spreader.assign(c.network.node_count(), std::nullopt);
  }
  if (c.network.feature_dim() != w.feature_dim)
    throw pals::ConfigError("predict: weights have feature_dim " +
                            std::to_string(w.feature_dim) + " but the cohort has " +
                            std::to_string(c.network.feature_dim()));
  if (w.intercept) c.network = pals::append_constant_feature(c.network);

  std::vector<std::string> ids;
  std::vector<double> scores;
  pals::RunManifest m = manifest_for("predict", cfg);
  if (a.target == "spreader") {
    ids = c.network.ids;
    for (std::size_t j = 0; j < c.network.node_count(); ++j)
      scores.push_back(pals::predict_spreader(w.weights, c.network.features.row(j)));
  } else {
    const auto p = pals::predict_infection_state(w.weights, c.network, c.spreader, pred_cfg);
    for (std::size_t i : c.network.main_nodes()) ids.push_back(c.network.ids[i]);
    scores = p.probability;
    m.extra["converged"] = p.converged;
    m.extra["sweeps"] = p.sweeps_used;
  }
  m.extra["target"] = a.target;
  write_output(a.out, pals::scores_csv(ids, scores), m);
  pals::write_file_atomic(manifest_path_for(a.out), m.to_json());
  return 0;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  CommonOptions common;
  int which = 1;
  std::optional<int> runs;
  int jobs = 1;
  std::string out_dir;
};

int cmd_experiment(const ExperimentArgs& a) {
  KeyValueConfig cfg = a.common.resolve();
  cfg.set("experiment", std::to_string(a.which), "--which");
  if (a.runs) cfg.set("runs", std::to_string(*a.runs), "--runs");
  pals::ExperimentOptions opt = pals::resolve_experiment(cfg);
  opt.jobs = a.jobs;
  // Cohort-level keys apply on top of every grid point.
  const bool custom_synth = std::any_of(
      cfg.entries().begin(), cfg.entries().end(), [](const auto& kv) {
        static const std::set<std::string> non_synth = {
            "seed", "experiment", "runs", "jobs", "resamples", "confidence", "target_fpr",
            "max_em_rounds", "e_step_sweeps_per_round", "elbo_rel_tolerance",
            "l2_penalty", "l1_penalty", "max_iterations", "gradient_tolerance",
            "line_search_shrink", "phi_rule", "initial_exposure_weight", "intercept",
            "max_sweeps", "predict_tolerance", "grid_value"};
        return !non_synth.count(kv.first);
      });
  if (custom_synth) {
    opt.customize = [cfg, which = opt.which](pals::SynthConfig& s) {
      // Re-resolve with this grid point's value and seed.
      KeyValueConfig local = cfg;
      double g = 0.0;
      switch (which) {
        case pals::Experiment::kExp1: g = s.p_y_given_exposure; break;
        case pals::Experiment::kExp2: g = s.p_y_given_susceptible; break;
        case pals::Experiment::kExp3: g = s.observed_spreader_fraction; break;
      }
      local.set("grid_value", pals::format_double(g), "grid");
      const std::uint64_t seed = s.seed;
      s = pals::with_seed(pals::resolve_synth(local), seed);
    };
  }

  const pals::ExperimentResult r = pals::run_experiment(opt);
  pals::RunManifest m = manifest_for("experiment", cfg);
  const fs::path root(a.out_dir);
  const int e = static_cast<int>(opt.which);
  write_output(root / "metrics.csv", pals::metrics_csv(e, r.metrics), m);
  write_output(root / "curves.csv",
               pals::curves_csv(e, pals::experiment_models(opt.which), r.metrics), m);
  write_output(root / "runs.csv", pals::runs_csv(e, r.runs), m);
  if (!r.failures.empty()) {
    std::string f = "grid_value,run,message\n";
    for (const auto& x : r.failures) {
      std::string msg = x.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      f += pals::format_fixed(x.grid_value, 2) + "," + std::to_string(x.run) + "," + msg + "\n";
    }
    write_output(root / "failures.csv", f, m);
  }
  m.extra["experiment"] = e;
  m.extra["runs"] = opt.runs;
  m.extra["failed_grid_points"] = r.failures.size();
  pals::write_file_atomic(root / "manifest.json", m.to_json());
  if (!r.failures.empty()) {
    std::cerr << "pals experiment: " << r.failures.size()
              << " grid point(s) failed; see failures.csv\n";
    return kExitPartial;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string weights;
  std::string names;
  std::optional<std::size_t> top;
  std::string out;
};

std::vector<std::string> read_names(const std::string& path) {
  std::vector<std::string> names;
  std::istringstream in(pals::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    line = pals::detail::trim(line);
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

int cmd_report_weights(const ReportArgs& a) {
  const pals::StoredWeights w = pals::read_weights(a.weights);
  std::vector<std::string> names = read_names(a.names);
  if (names.size() != w.feature_dim)
    throw pals::ConfigError("report-weights: " + std::to_string(names.size()) +
                            " names for feature_dim " + std::to_string(w.feature_dim));
  if (w.intercept) names.push_back("intercept");

  std::string out = "vector,rank,name,weight\n";
  auto emit = [&](const char* vec, std::vector<std::pair<std::string, double>> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    const std::size_t n = entries.size();
    for (std::size_t k = 0; k < n; ++k) {
      const bool keep = !a.top || k < *a.top || k + *a.top >= n;
      if (keep)
        out += std::string(vec) + "," + std::to_string(k + 1) + "," + entries[k].first + "," +
               pals::format_double(entries[k].second) + "\n";
    }
  };
  std::vector<std::pair<std::string, double>> u, ws;
  for (std::size_t k = 0; k < names.size(); ++k) {
    u.emplace_back(names[k], w.weights.u[k]);
    ws.emplace_back(names[k], w.weights.w_sus[k]);
  }
  ws.emplace_back("exposure", w.weights.w_e);
  emit("u", std::move(u));
  emit("w", std::move(ws));
  if (a.out.empty()) {
    std::cout << out;
  } else {
    pals::write_file_atomic(a.out, out);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  CommonOptions common;
  std::string scores;
  std::string truth;
  std::string target = "infection";
  double fpr = 0.1;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const KeyValueConfig cfg = a.common.resolve();
  const pals::CsvTable st = pals::read_csv(a.scores);
  const auto scores = pals::scores_from_table(st);
  const pals::CsvTable tt = pals::read_csv(a.truth);
  pals::require_header_prefix(tt, {"id", "y", "z_true", "eta_true", "z_observed"});
  const std::size_t label_col = a.target == "spreader" ? 2 : 1;
  std::unordered_map<std::string, int> label;
  for (std::size_t r = 0; r < tt.rows.size(); ++r)
    label[tt.rows[r][0]] = tt.binary(r, label_col);

  pals::ScoredSet set;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    auto it = label.find(scores[r].first);
    if (it == label.end()) st.fail(r, 0, "id '" + scores[r].first + "' not in truth file");
    set.scores.push_back(scores[r].second);
    set.labels.push_back(it->second);
  }
  const double confidence = cfg.real("confidence").value_or(0.95);
  const auto resamples = static_cast<std::size_t>(cfg.count("resamples", 0).value_or(1000));
  const std::uint64_t seed = pals::resolved_seed(cfg);
  const double fpr = cfg.real("target_fpr").value_or(a.fpr);

  const auto auc = pals::bootstrap_ci(
      set, [](const pals::ScoredSet& s) { return pals::auc(s); }, confidence, resamples,
      pals::derive_seed(seed, 1));
  const auto tpr = pals::bootstrap_ci(
      set, [fpr](const pals::ScoredSet& s) { return pals::tpr_at_fpr(s, fpr); }, confidence,
      resamples, pals::derive_seed(seed, 2));
  std::string out = "metric,value,ci_low,ci_high,n\n";
  auto row = [&](const std::string& name, const pals::MetricSummary& s) {
    out += name + "," + pals::format_fixed(s.mean) + "," + pals::format_fixed(s.ci_low) + "," +
           pals::format_fixed(s.ci_high) + "," + std::to_string(set.size()) + "\n";
  };
  row("auc", auc);
  row("tpr_at_fpr_" + pals::format_double(fpr), tpr);
  if (a.out.empty()) {
    std::cout << out;
  } else {
    pals::write_file_atomic(a.out, out);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string contacts;
  std::string cutoffs;
  std::string channel = "room";
  std::string out_dir;
};

int cmd_ingest(const IngestArgs& a) {
  const auto events = pals::contacts_from_table(pals::read_csv(a.contacts));
  const auto cutoffs = pals::cutoffs_from_table(pals::read_csv(a.cutoffs));
  const auto channel = pals::parse_channel(a.channel);
  if (!channel) throw pals::ConfigError("ingest-contacts: unknown channel '" + a.channel + "'");
  const pals::ContactNetwork net = pals::build_network_from_contacts(events, *channel, cutoffs);
  const fs::path root(a.out_dir);
  pals::write_file_atomic(root / "nodes.csv", pals::nodes_csv(net));
  pals::write_file_atomic(root / "edges.csv", pals::edges_csv(net));
  return 0;
}

// Maps library errors onto the exit-code contract.
template <typename F>
int guarded(const char* command, F&& body) {
  try {
    return body();
  } catch (const pals::IoError& e) {
    std::cerr << "pals " << command << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const pals::OptimizationError& e) {
    std::cerr << "pals " << command << ": " << e.what() << "\n";
    return kExitPartial;
  } catch (const pals::InferenceError& e) {
    std::cerr << "pals " << command << ": " << e.what() << "\n";
    return kExitPartial;
  } catch (const pals::Error& e) {
    std::cerr << "pals " << command << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "pals " << command << ": " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PALS: infection risk with latent spreaders on contact networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pals::kToolVersion);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a train/test pair of synthetic cohorts");
  sim.common.attach(c_sim);
  c_sim->add_option("--out", sim.out_dir, "output directory")->required();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "fit PALS weights by variational EM");
  fit.common.attach(c_fit);
  fit.cohort.attach(c_fit, true);
  c_fit->add_option("--out", fit.out, "weights JSON path")->required();
  c_fit->add_option("--trace", fit.trace, "ELBO trace CSV (default: <out>.elbo.csv)");
  c_fit->add_option("--state", fit.state, "variational state JSON");
  c_fit->add_flag("--observed-spreaders", fit.observed_spreaders,
                  "use z_true of rows flagged z_observed");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "score nodes with fitted weights");
  pred.common.attach(c_pred);
  pred.cohort.attach(c_pred, false);
  c_pred->add_option("--weights", pred.weights, "weights JSON")->required();
  c_pred->add_option("--target", pred.target, "infection or spreader")
      ->check(CLI::IsMember({"infection", "spreader"}));
  c_pred->add_option("--out", pred.out, "scores CSV (id,score)")->required();
  c_pred->add_flag("--observed-spreaders", pred.observed_spreaders,
                   "condition on z_true of rows flagged z_observed");

  ExperimentArgs ex;
  auto* c_ex = app.add_subcommand("experiment", "run a synthetic experiment grid");
  ex.common.attach(c_ex);
  c_ex->add_option("--which", ex.which, "experiment 1, 2 or 3")
      ->required()
      ->check(CLI::Range(1, 3));
  c_ex->add_option("--runs", ex.runs, "runs per grid value (default 30)")
      ->check(CLI::PositiveNumber);
  c_ex->add_option("--jobs", ex.jobs, "worker threads")->check(CLI::PositiveNumber);
  c_ex->add_option("--out", ex.out_dir, "output directory")->required();

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report-weights", "rank learned weights by signed value");
  c_rep->add_option("--weights", rep.weights, "weights JSON")->required();
  c_rep->add_option("--names", rep.names, "feature names, one per line")->required();
  c_rep->add_option("--top", rep.top, "keep the k largest and k smallest of each vector");
  c_rep->add_option("--out", rep.out, "output CSV (default stdout)");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "AUC and TPR at a fixed FPR with bootstrap CIs");
  ev.common.attach(c_ev);
  c_ev->add_option("--scores", ev.scores, "scores CSV (id,score)")->required();
  c_ev->add_option("--truth", ev.truth, "ground truth CSV")->required();
  c_ev->add_option("--target", ev.target, "infection or spreader")
      ->check(CLI::IsMember({"infection", "spreader"}));
  c_ev->add_option("--fpr", ev.fpr, "false positive rate for TPR (default 0.1)");
  c_ev->add_option("--out", ev.out, "output CSV (default stdout)");

  IngestArgs ing;
  auto* c_ing = app.add_subcommand("ingest-contacts", "build a network from a contact log");
  c_ing->add_option("--contacts", ing.contacts, "contacts CSV")->required();
  c_ing->add_option("--cutoffs", ing.cutoffs, "cutoffs CSV (main_id,cutoff_day)")->required();
  c_ing->add_option("--channel", ing.channel, "room or nurse")
      ->check(CLI::IsMember({"room", "nurse"}));
  c_ing->add_option("--out", ing.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (c_sim->parsed()) return guarded("simulate", [&] { return cmd_simulate(sim); });
  if (c_fit->parsed()) return guarded("fit", [&] { return cmd_fit(fit); });
  if (c_pred->parsed()) return guarded("predict", [&] { return cmd_predict(pred); });
  if (c_ex->parsed()) return guarded("experiment", [&] { return cmd_experiment(ex); });
  if (c_rep->parsed()) return guarded("report-weights", [&] { return cmd_report_weights(rep); });
  if (c_ev->parsed()) return guarded("eval", [&] { return cmd_eval(ev); });
  if (c_ing->parsed()) return guarded("ingest-contacts", [&] { return cmd_ingest(ing); });
  return kExitInput;
}
