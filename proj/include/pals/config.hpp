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

// Flat key-value run configuration, its typed resolution, and run manifests.
//
//   # comment
//   experiment = 1
//   p_within = 0.5

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pals/errors.hpp"
#include "pals/experiment.hpp"
#include "pals/io.hpp"
#include "pals/model.hpp"
#include "pals/synth.hpp"

namespace pals {

inline constexpr const char* kToolVersion = "1.0.0";

// Every key the configuration accepts.
inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      // run
      "seed", "experiment", "grid_value", "runs", "jobs", "resamples", "confidence",
      "target_fpr",
      // synthetic cohorts
      "node_count", "block_size", "p_within", "p_between", "feature_dim",
      "spreader_magnitude", "spreader_determinism", "p_y_given_exposure",
      "p_y_given_susceptible", "p_baseline", "susceptible_fraction",
      "observed_spreader_fraction", "combine",
      // fitting
      "max_em_rounds", "e_step_sweeps_per_round", "elbo_rel_tolerance", "l2_penalty",
      "l1_penalty", "max_iterations", "gradient_tolerance", "line_search_shrink",
      "phi_rule", "initial_exposure_weight", "intercept",
      // prediction
      "max_sweeps", "predict_tolerance"};
  return keys;
}

class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file:line" or "flag"
  };

  static KeyValueConfig parse(const std::string& text, const std::string& source) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string where = source + ":" + std::to_string(line_no);
      const auto hash = line.find('#');
      const std::string body = detail::trim(line.substr(0, hash));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ConfigError(where + ": expected 'key = value'");
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) throw ConfigError(where + ": empty key");
      if (!config_keys().count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
      if (value.empty()) throw ConfigError(where + ": key '" + key + "' has no value");
      if (cfg.entries_.count(key))
        throw ConfigError(where + ": key '" + key + "' set twice");
      cfg.entries_[key] = {value, where};
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    return parse(read_file(path), path.string());
  }

  // Override from the command line ("key=value").
  void set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set '" + assignment + "': expected key=value");
    set(detail::trim(std::string_view(assignment).substr(0, eq)),
        detail::trim(std::string_view(assignment).substr(eq + 1)), "--set");
  }

  void set(const std::string& key, const std::string& value, const std::string& origin) {
    if (!config_keys().count(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(origin + ": key '" + key + "' has no value");
    entries_[key] = {value, origin};
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<double> real(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    double v = 0.0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError(e->origin + ": key '" + key + "': expected a number, got '" + s + "'");
    return v;
  }

  std::optional<std::int64_t> integer(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    std::int64_t v = 0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError(e->origin + ": key '" + key + "': expected an integer, got '" + s +
                        "'");
    return v;
  }

  std::optional<std::int64_t> count(const std::string& key, std::int64_t min) const {
    auto v = integer(key);
    if (v && *v < min)
      throw ConfigError(find(key)->origin + ": key '" + key + "' must be >= " +
                        std::to_string(min));
    return v;
  }

  std::optional<std::uint64_t> unsigned64(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    std::uint64_t v = 0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError(e->origin + ": key '" + key + "': expected a non-negative integer, got '" +
                        s + "'");
    return v;
  }

  std::optional<bool> boolean(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    throw ConfigError(e->origin + ": key '" + key + "': expected true or false");
  }

  // Value restricted to `choices`.
  std::optional<std::string> choice(const std::string& key,
                                    const std::vector<std::string>& choices) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    for (const auto& c : choices)
      if (c == e->value) return c;
    std::string all;
    for (const auto& c : choices) all += (all.empty() ? "" : "|") + c;
    throw ConfigError(e->origin + ": key '" + key + "' must be one of " + all);
  }

  // Sorted "key=value" lines; the basis of the digest.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, e] : entries_) out += k + "=" + e.value + "\n";
    return out;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::map<std::string, Entry> entries_;
};

// FNV-1a 64 of the canonical form, as 16 hex digits. Independent of key order
// in the file.
inline std::string config_digest(const KeyValueConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Seed precedence: config file < PALS_SEED environment variable < --seed flag.
inline void apply_seed_overrides(KeyValueConfig& cfg, const char* env_seed,
                                 std::optional<std::uint64_t> flag_seed) {
  if (env_seed && *env_seed) cfg.set("seed", env_seed, "PALS_SEED");
  if (flag_seed) cfg.set("seed", std::to_string(*flag_seed), "--seed");
  cfg.unsigned64("seed");  // validates
}

inline std::uint64_t resolved_seed(const KeyValueConfig& cfg) {
  return cfg.unsigned64("seed").value_or(0);
}

inline Experiment resolved_experiment(const KeyValueConfig& cfg) {
  const auto e = cfg.choice("experiment", {"1", "2", "3"}).value_or("1");
  return static_cast<Experiment>(e[0] - '0');
}

// Synthetic cohort configuration: the experiment's base config, then the
// optional grid value, then explicit keys.
inline SynthConfig resolve_synth(const KeyValueConfig& cfg) {
  const Experiment e = resolved_experiment(cfg);
  SynthConfig s = experiment_base(e);
  if (auto g = cfg.real("grid_value")) apply_grid_value(e, *g, s);

  const auto node_count = cfg.count("node_count", 2).value_or(
      static_cast<std::int64_t>(s.network.node_count()));
  const auto block_size = cfg.count("block_size", 1).value_or(10);
  if (cfg.has("node_count") || cfg.has("block_size"))
    s.network.nodes_per_block = default_blocks(static_cast<std::size_t>(node_count),
                                               static_cast<std::size_t>(block_size));
  if (auto v = cfg.real("p_within")) s.network.p_within = *v;
  if (auto v = cfg.real("p_between")) s.network.p_between = *v;

  if (auto v = cfg.count("feature_dim", 0)) s.feature_dim = static_cast<std::size_t>(*v);
  double magnitude = e == Experiment::kExp3 ? 0.75 : 2.0;
  if (auto v = cfg.real("spreader_magnitude")) magnitude = *v;
  s.true_u = default_spreader_weights(s.feature_dim, magnitude);
  if (auto v = cfg.choice("spreader_determinism", {"stochastic", "threshold"}))
    s.spreader_determinism = *v == "threshold" ? SpreaderDeterminism::kThreshold
                                               : SpreaderDeterminism::kStochastic;
  if (auto v = cfg.real("p_y_given_exposure")) s.p_y_given_exposure = *v;
  if (auto v = cfg.real("p_y_given_susceptible")) s.p_y_given_susceptible = *v;
  if (auto v = cfg.real("p_baseline")) s.p_baseline = *v;
  if (auto v = cfg.real("susceptible_fraction")) s.susceptible_fraction = *v;
  if (auto v = cfg.real("observed_spreader_fraction")) s.observed_spreader_fraction = *v;
  if (auto v = cfg.choice("combine", {"max", "noisy_or", "exposure_first"})) {
    s.combine = *v == "max"        ? InfectionCombine::kMax
                : *v == "noisy_or" ? InfectionCombine::kNoisyOr
                                   : InfectionCombine::kExposureFirst;
  }
  s = with_seed(s, resolved_seed(cfg));
  s.validate();
  return s;
}

inline OptimizerConfig resolve_optimizer(const KeyValueConfig& cfg, OptimizerConfig o) {
  if (auto v = cfg.count("max_iterations", 1)) o.max_iterations = static_cast<int>(*v);
  if (auto v = cfg.real("gradient_tolerance")) o.gradient_tolerance = *v;
  if (auto v = cfg.real("line_search_shrink")) o.line_search_shrink = *v;
  if (auto v = cfg.real("l2_penalty")) o.l2_penalty = *v;
  if (auto v = cfg.real("l1_penalty")) o.l1_penalty = *v;
  o.validate();
  return o;
}

inline PhiRule resolve_phi_rule(const KeyValueConfig& cfg) {
  return cfg.choice("phi_rule", {"exact", "first_order"}).value_or("exact") == "exact"
             ? PhiRule::kExact
             : PhiRule::kFirstOrder;
}

inline FitConfig resolve_fit(const KeyValueConfig& cfg) {
  FitConfig f;
  if (auto v = cfg.count("max_em_rounds", 1)) f.max_em_rounds = static_cast<int>(*v);
  if (auto v = cfg.count("e_step_sweeps_per_round", 1))
    f.e_step_sweeps_per_round = static_cast<int>(*v);
  if (auto v = cfg.real("elbo_rel_tolerance")) f.elbo_rel_tolerance = *v;
  if (auto v = cfg.real("initial_exposure_weight")) f.initial_exposure_weight = *v;
  f.optimizer = resolve_optimizer(cfg, f.optimizer);
  f.phi_rule = resolve_phi_rule(cfg);
  f.seed = resolved_seed(cfg);
  f.validate();
  return f;
}

inline PredictConfig resolve_predict(const KeyValueConfig& cfg) {
  PredictConfig p;
  if (auto v = cfg.count("max_sweeps", 1)) p.max_sweeps = static_cast<int>(*v);
  if (auto v = cfg.real("predict_tolerance")) {
    if (!(*v > 0.0)) throw ConfigError("predict_tolerance must be > 0");
    p.tolerance = *v;
  }
  p.phi_rule = resolve_phi_rule(cfg);
  p.seed = resolved_seed(cfg);
  return p;
}

inline bool resolve_intercept(const KeyValueConfig& cfg) {
  return cfg.boolean("intercept").value_or(true);
}

inline ExperimentOptions resolve_experiment(const KeyValueConfig& cfg) {
  ExperimentOptions o;
  o.which = resolved_experiment(cfg);
  o.runs = static_cast<int>(cfg.count("runs", 1).value_or(30));
  o.jobs = static_cast<int>(cfg.count("jobs", 1).value_or(1));
  o.base_seed = resolved_seed(cfg);
  o.fit = resolve_fit(cfg);
  o.predict = resolve_predict(cfg);
  o.benchmark_penalty = resolve_optimizer(cfg, default_benchmark_penalty());
  o.bootstrap_resamples = static_cast<std::size_t>(cfg.count("resamples", 0).value_or(1000));
  o.confidence = cfg.real("confidence").value_or(0.95);
  if (!(o.confidence > 0.0 && o.confidence < 1.0))
    throw ConfigError("confidence must lie in (0,1)");
  return o;
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<std::string> output_paths;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["output_paths"] = output_paths;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j.dump(2) + "\n";
  }
};

}  // namespace pals
