// Copyright 2026 The GoalWeaver Authors.
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

// Umbrella header: the whole library.

#pragma once

#include "goalweaver/config.hpp"
#include "goalweaver/container.hpp"
#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/eval.hpp"
#include "goalweaver/gat.hpp"
#include "goalweaver/generation.hpp"
#include "goalweaver/jenks.hpp"
#include "goalweaver/kg.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/pipeline.hpp"
#include "goalweaver/policy.hpp"
#include "goalweaver/remote.hpp"
#include "goalweaver/reward.hpp"
#include "goalweaver/rng.hpp"
#include "goalweaver/rsft.hpp"
#include "goalweaver/synthetic.hpp"
#include "goalweaver/text.hpp"
