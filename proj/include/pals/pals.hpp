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

// Umbrella header.

#pragma once

#include "pals/benchmarks.hpp"
#include "pals/cohort.hpp"
#include "pals/config.hpp"
#include "pals/errors.hpp"
#include "pals/eval.hpp"
#include "pals/experiment.hpp"
#include "pals/graph.hpp"
#include "pals/io.hpp"
#include "pals/model.hpp"
#include "pals/numerics.hpp"
#include "pals/random.hpp"
#include "pals/synth.hpp"
