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

#include <filesystem>
#include <string>
#include <vector>

#include "pals/pals.hpp"
#include "test_util.hpp"

namespace pals {
namespace {

namespace fs = std::filesystem;

// Runs `f`, expecting exception E whose message contains `needle`.
template <typename E, typename F>
void expect_error_containing(F&& f, const std::string& needle) {
  try {
    f();
    ADD_FAILURE() << "no exception, expected one mentioning '" << needle << "'";
  } catch (const E& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::path(PALS_TEST_TMP) / "io" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(1);
  for (int k = 0; k < 5000; ++k) {
    const double v = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-300.0, 300.0));
    const std::string s = format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_fixed(0.5, 2), "0.50");
}

TEST(Csv, ParsesTrimsAndSkipsBlankLines) {
  const auto t = parse_csv("a, b ,c\r\n\n1,2,3\n 4 ,5,6\n", "x.csv");
  ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][0], "4");
  EXPECT_EQ(t.line_of_row[1], 4u);
  EXPECT_EQ(t.real(1, 2), 6.0);
}

TEST(Csv, ErrorsCarryLineAndColumn) {
  expect_error_containing<FormatError>([] { parse_csv("a,b\n1,2\n3\n", "f.csv"); },
                                       "f.csv: line 3");
  const auto t = parse_csv("a,b\n1,zz\n", "g.csv");
  expect_error_containing<FormatError>([&] { t.real(0, 1); }, "line 2, column 'b'");
  expect_error_containing<FormatError>([&] { t.integer(0, 1); }, "expected an integer");
  const auto u = parse_csv("a\n2\n", "h.csv");
  expect_error_containing<FormatError>([&] { u.binary(0, 0); }, "expected 0 or 1");
  expect_error_containing<FormatError>([] { parse_csv("\n\n", "e.csv"); }, "empty file");
  expect_error_containing<FormatError>([&] { t.column("nope"); }, "missing column 'nope'");
}

TEST(Network, RoundTripThroughCsv) {
  Rng rng(2);
  auto net = testing::random_network(rng, 25, 10, 4, 6);
  for (std::size_t i = 0; i < net.node_count(); ++i)
    for (std::size_t k = 0; k < 4; ++k) net.features(i, k) = rng.uniform(-3.0, 3.0);
  for (auto& list : net.neighbors)
    for (auto& e : list)
      if (rng.bernoulli(0.5)) e.last_contact_day = static_cast<std::int64_t>(rng.index(40));
  const auto back = network_from_tables(parse_csv(nodes_csv(net), "n"), parse_csv(edges_csv(net), "e"));
  EXPECT_EQ(back.ids, net.ids);
  EXPECT_EQ(back.roles, net.roles);
  EXPECT_EQ(back.features, net.features);
  EXPECT_EQ(back.neighbors, net.neighbors);
}

TEST(Network, RejectsMalformedTables) {
  const auto edges = parse_csv("src,dst,last_contact_day\n", "e.csv");
  expect_error_containing<FormatError>(
      [&] { network_from_tables(parse_csv("id,role,f1\na,boss,1\n", "n.csv"), edges); },
      "n.csv: line 2, column 'role'");
  expect_error_containing<FormatError>(
      [&] { network_from_tables(parse_csv("id,role,f1\na,main,1\na,main,2\n", "n.csv"), edges); },
      "duplicate id 'a'");
  expect_error_containing<FormatError>(
      [&] { network_from_tables(parse_csv("id,role,f2\na,main,1\n", "n.csv"), edges); },
      "must be 'f1'");
  const auto nodes = parse_csv("id,role,f1\na,main,1\nb,main,0\n", "n.csv");
  expect_error_containing<FormatError>(
      [&] { network_from_tables(nodes, parse_csv("src,dst\na,q\n", "e.csv")); },
      "e.csv: line 2, column 'dst'");
  // Main-main edges must be listed both ways.
  expect_error_containing<FormatError>(
      [&] { network_from_tables(nodes, parse_csv("src,dst\na,b\n", "e.csv")); }, "e.csv");
}

TEST(GroundTruth, RoundTrip) {
  const auto c = generate_cohort(with_seed(experiment_base(Experiment::kExp3), 3));
  const auto l = labels_from_table(parse_csv(ground_truth_csv(c.network, c.truth), "t"), c.network);
  EXPECT_EQ(l.y, c.truth.y);
  EXPECT_EQ(l.z_true, c.truth.z_true);
  EXPECT_EQ(l.eta_true, c.truth.eta_true);
  EXPECT_EQ(l.z_observed, c.truth.z_observed_mask);
}

TEST(GroundTruth, MissingMainRowRejected) {
  const auto net = network_from_tables(parse_csv("id,role,f1\na,main,1\nb,main,0\n", "n"),
                                       parse_csv("src,dst\n", "e"));
  expect_error_containing<FormatError>(
      [&] {
        labels_from_table(parse_csv("id,y,z_true,eta_true,z_observed\na,1,0,0,0\n", "t.csv"), net);
      },
      "main node 'b' has no row");
}

TEST(LabeledCohort, ReadFromFilesHonorsObservedFlag) {
  const auto dir = scratch_dir("cohort");
  SynthConfig cfg = with_seed(experiment_base(Experiment::kExp3), 4);
  cfg.observed_spreader_fraction = 0.3;
  const auto c = generate_cohort(cfg);
  write_file_atomic(dir / "nodes.csv", nodes_csv(c.network));
  write_file_atomic(dir / "edges.csv", edges_csv(c.network));
  write_file_atomic(dir / "truth.csv", ground_truth_csv(c.network, c.truth));
  const auto with = read_labeled_cohort(dir / "nodes.csv", dir / "edges.csv", dir / "truth.csv", true);
  const auto without = read_labeled_cohort(dir / "nodes.csv", dir / "edges.csv", dir / "truth.csv", false);
  std::size_t observed = 0;
  for (std::size_t i = 0; i < c.network.node_count(); ++i) {
    EXPECT_FALSE(without.spreader[i].has_value());
    EXPECT_EQ(with.spreader[i].has_value(), static_cast<bool>(c.truth.z_observed_mask[i]));
    if (with.spreader[i]) {
      ++observed;
      EXPECT_EQ(*with.spreader[i], c.truth.z_true[i] == 1);
    }
    EXPECT_EQ(*with.outcome[i], c.truth.y[i] == 1);
  }
  EXPECT_EQ(observed, 150u);
}

TEST(Weights, JsonRoundTrip) {
  Rng rng(5);
  const auto w = testing::random_weights(rng, 6, 3.0);
  for (bool intercept : {false, true}) {
    const auto s = parse_weights_json(weights_json(w, intercept), "w.json");
    EXPECT_EQ(s.weights, w);
    EXPECT_EQ(s.intercept, intercept);
    EXPECT_EQ(s.feature_dim, intercept ? 5u : 6u);
  }
}

TEST(Weights, MalformedJsonRejected) {
  expect_error_containing<FormatError>([] { parse_weights_json("{", "w.json"); }, "invalid JSON");
  expect_error_containing<FormatError>(
      [] { parse_weights_json(R"({"format_version":1,"u":[1],"w_sus":[1],"w_e":0})", "w.json"); },
      "missing key 'feature_dim'");
  expect_error_containing<FormatError>(
      [] {
        parse_weights_json(
            R"({"format_version":1,"u":[1,2],"w_sus":[1],"w_e":0,"feature_dim":2})", "w.json");
      },
      "length differs");
  expect_error_containing<FormatError>(
      [] {
        parse_weights_json(
            R"({"format_version":1,"u":"x","w_sus":[1],"w_e":0,"feature_dim":1})", "w.json");
      },
      "wrong value type");
}

TEST(Scores, RoundTrip) {
  const std::vector<std::string> ids{"a", "b", "c"};
  const std::vector<double> v{0.1, 1.0 / 3.0, 0.999999999};
  const auto back = scores_from_table(parse_csv(scores_csv(ids, v), "s"));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back[k].first, ids[k]);
    EXPECT_EQ(back[k].second, v[k]);
  }
}

TEST(Metrics, RoundTripAtPrintedPrecision) {
  std::vector<MetricRow> rows{{0.5, "y-PALS", "auc", {0.71234567, 0.7, 0.73, 30}},
                              {0.9, "NoNet", "auc", {0.5, 0.48, 0.52, 30}}};
  const auto back = metrics_from_table(parse_csv(metrics_csv(1, rows), "m"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].model, "y-PALS");
  EXPECT_NEAR(back[0].summary.mean, 0.712346, 1e-12);
  EXPECT_EQ(back[1].summary.n_runs, 30u);
  EXPECT_EQ(back[1].grid_value, 0.9);
}

TEST(Contacts, TablesParse) {
  const auto ev = contacts_from_table(
      parse_csv("main_id,neighbor_id,day,channel\nA,B,3,room\nA,C,4,nurse\n", "c"));
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].channel, Channel::kNurse);
  expect_error_containing<FormatError>(
      [] { contacts_from_table(parse_csv("main_id,neighbor_id,day,channel\nA,B,3,fax\n", "c.csv")); },
      "c.csv: line 2, column 'channel'");
  expect_error_containing<FormatError>(
      [] { cutoffs_from_table(parse_csv("main_id,cutoff_day\nA,1\nA,2\n", "k.csv")); },
      "duplicate id 'A'");
}

TEST(Files, AtomicWriteAndMissingFile) {
  const auto dir = scratch_dir("files");
  write_file_atomic(dir / "sub" / "x.txt", "hello");
  EXPECT_EQ(read_file(dir / "sub" / "x.txt"), "hello");
  EXPECT_FALSE(fs::exists(dir / "sub" / "x.txt.tmp"));
  EXPECT_THROW(read_file(dir / "absent.txt"), IoError);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ParsesCommentsAndWhitespace) {
  const auto c = KeyValueConfig::parse("# top\n seed = 7 # trailing\n\nruns=3\n", "c.cfg");
  EXPECT_EQ(c.unsigned64("seed"), 7u);
  EXPECT_EQ(c.integer("runs"), 3);
  EXPECT_FALSE(c.has("jobs"));
}

TEST(Config, ErrorsAreLineAnchored) {
  expect_error_containing<ConfigError>([] { KeyValueConfig::parse("seed=1\nruns\n", "c.cfg"); },
                                       "c.cfg:2: expected 'key = value'");
  expect_error_containing<ConfigError>([] { KeyValueConfig::parse("\n\nbogus=1\n", "c.cfg"); },
                                       "c.cfg:3: unknown key 'bogus'");
  expect_error_containing<ConfigError>([] { KeyValueConfig::parse("runs=\n", "c.cfg"); },
                                       "c.cfg:1: key 'runs' has no value");
  expect_error_containing<ConfigError>([] { KeyValueConfig::parse("runs=1\nruns=2\n", "c.cfg"); },
                                       "c.cfg:2: key 'runs' set twice");
  const auto c = KeyValueConfig::parse("runs=1\nl2_penalty=abc\n", "c.cfg");
  expect_error_containing<ConfigError>([&] { c.real("l2_penalty"); }, "c.cfg:2");
}

TEST(Config, DigestIgnoresOrderAndComments) {
  const auto a = KeyValueConfig::parse("seed=1\nruns=5\n", "a");
  const auto b = KeyValueConfig::parse("# x\nruns = 5\nseed= 1\n", "b");
  const auto c = KeyValueConfig::parse("seed=1\nruns=6\n", "c");
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_NE(config_digest(a), config_digest(c));
  EXPECT_EQ(config_digest(a).size(), 16u);
}

TEST(Config, SeedPrecedence) {
  auto c = KeyValueConfig::parse("seed=1\n", "c");
  apply_seed_overrides(c, nullptr, std::nullopt);
  EXPECT_EQ(resolved_seed(c), 1u);
  apply_seed_overrides(c, "2", std::nullopt);
  EXPECT_EQ(resolved_seed(c), 2u);
  apply_seed_overrides(c, "2", 3u);
  EXPECT_EQ(resolved_seed(c), 3u);
  auto d = KeyValueConfig::parse("", "d");
  EXPECT_THROW(apply_seed_overrides(d, "-4", std::nullopt), ConfigError);
}

TEST(Config, OverridesReplaceFileValues) {
  auto c = KeyValueConfig::parse("runs=2\n", "c");
  c.set_override("runs=9");
  EXPECT_EQ(c.integer("runs"), 9);
  EXPECT_THROW(c.set_override("runs"), ConfigError);
  EXPECT_THROW(c.set_override("nope=1"), ConfigError);
}

TEST(Config, ResolveSynthAppliesKeys) {
  auto c = KeyValueConfig::parse(
      "experiment=2\ngrid_value=0.7\nnode_count=40\nblock_size=8\nfeature_dim=6\n"
      "combine=noisy_or\nspreader_determinism=threshold\nseed=12\n",
      "c");
  const auto s = resolve_synth(c);
  EXPECT_EQ(s.network.node_count(), 40u);
  EXPECT_EQ(s.feature_dim, 6u);
  EXPECT_EQ(s.true_u.size(), 6u);
  EXPECT_EQ(s.combine, InfectionCombine::kNoisyOr);
  EXPECT_EQ(s.spreader_determinism, SpreaderDeterminism::kThreshold);
  EXPECT_EQ(s.seed, 12u);
  // Experiment 2 sweeps p(y | E).
  SynthConfig ref = experiment_base(Experiment::kExp2);
  apply_grid_value(Experiment::kExp2, 0.7, ref);
  EXPECT_EQ(s.p_y_given_exposure, ref.p_y_given_exposure);
  EXPECT_EQ(s.susceptible_fraction, ref.susceptible_fraction);
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(resolve_synth(KeyValueConfig::parse("feature_dim=0\n", "c")), ConfigError);
  EXPECT_THROW(resolve_synth(KeyValueConfig::parse("combine=sum\n", "c")), ConfigError);
  EXPECT_THROW(resolve_synth(KeyValueConfig::parse("experiment=4\n", "c")), ConfigError);
  EXPECT_THROW(resolve_fit(KeyValueConfig::parse("max_em_rounds=0\n", "c")), ConfigError);
  EXPECT_THROW(resolve_fit(KeyValueConfig::parse("l2_penalty=-1\n", "c")), ConfigError);
  EXPECT_THROW(resolve_fit(KeyValueConfig::parse("phi_rule=magic\n", "c")), ConfigError);
  EXPECT_THROW(resolve_experiment(KeyValueConfig::parse("confidence=1.5\n", "c")), ConfigError);
  EXPECT_THROW(resolve_intercept(KeyValueConfig::parse("intercept=maybe\n", "c")), ConfigError);
}

TEST(Config, ResolveFitAndExperimentDefaults) {
  const auto c = KeyValueConfig::parse("max_em_rounds=7\nphi_rule=first_order\nruns=4\n", "c");
  const auto f = resolve_fit(c);
  EXPECT_EQ(f.max_em_rounds, 7);
  EXPECT_EQ(f.phi_rule, PhiRule::kFirstOrder);
  const auto e = resolve_experiment(c);
  EXPECT_EQ(e.runs, 4);
  EXPECT_EQ(e.which, Experiment::kExp1);
  EXPECT_EQ(e.bootstrap_resamples, 1000u);
  EXPECT_TRUE(resolve_intercept(c));
}

TEST(Manifest, SerializesCoreFields) {
  RunManifest m;
  m.command = "fit";
  m.config_digest = "0123456789abcdef";
  m.seed = 5;
  m.output_paths = {"w.json"};
  m.extra["converged"] = true;
  const auto j = nlohmann::json::parse(m.to_json());
  EXPECT_EQ(j.at("command"), "fit");
  EXPECT_EQ(j.at("seed"), 5);
  EXPECT_EQ(j.at("tool_version"), kToolVersion);
  EXPECT_EQ(j.at("output_paths")[0], "w.json");
  EXPECT_EQ(j.at("converged"), true);
}

}  // namespace
}  // namespace pals
