// Copyright 2026 The ratelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header.

#pragma once

#include "ratelab/agents.hpp"
#include "ratelab/baselines.hpp"
#include "ratelab/checkpoint.hpp"
#include "ratelab/common.hpp"
#include "ratelab/config.hpp"
#include "ratelab/core_types.hpp"
#include "ratelab/csv.hpp"
#include "ratelab/env_sim.hpp"
#include "ratelab/environment.hpp"
#include "ratelab/evaluation.hpp"
#include "ratelab/hybrid.hpp"
#include "ratelab/metrics.hpp"
#include "ratelab/neural.hpp"
#include "ratelab/reward.hpp"
#include "ratelab/training.hpp"
