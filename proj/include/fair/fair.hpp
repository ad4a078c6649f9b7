// Copyright 2026 The FAIR-Pruner Authors
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

#include "fair/baselines.hpp"
#include "fair/common.hpp"
#include "fair/convergence.hpp"
#include "fair/diagnostics.hpp"
#include "fair/dumpio.hpp"
#include "fair/mininet.hpp"
#include "fair/pipeline.hpp"
#include "fair/planner.hpp"
#include "fair/stats.hpp"
#include "fair/surgery.hpp"
