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

#pragma once

#include <optional>
#include <vector>

#include "pals/graph.hpp"
#include "pals/model.hpp"
#include "pals/synth.hpp"

namespace pals {

// A network with per-node outcomes and observed spreader labels. Ground
// truth is present only for synthetic cohorts.
struct LabeledCohort {
  ContactNetwork network;
  std::vector<Label> outcome;   // unknown for auxiliary nodes
  std::vector<Label> spreader;  // observed spreader labels
  std::optional<GroundTruth> truth;

  std::vector<int> main_outcomes() const {
    std::vector<int> y;
    for (std::size_t i : network.main_nodes())
      y.push_back(outcome[i].value_or(false) ? 1 : 0);
    return y;
  }
};

// Outcomes of all (main) nodes; spreader labels from z_true on the
// observation mask, or none when `use_observed` is false.
inline LabeledCohort label_cohort(const Cohort& c, bool use_observed) {
  LabeledCohort out;
  out.network = c.network;
  const std::size_t n = c.network.node_count();
  out.outcome.resize(n);
  out.spreader.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (c.network.is_main(i)) out.outcome[i] = c.truth.y[i] == 1;
    if (use_observed && c.truth.z_observed_mask[i])
      out.spreader[i] = c.truth.z_true[i] == 1;
  }
  out.truth = c.truth;
  return out;
}

}  // namespace pals
