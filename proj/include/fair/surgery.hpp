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

#include <algorithm>
#include <cstdint>
#include <vector>

#include "json.hpp"

#include "fair/common.hpp"
#include "fair/mininet.hpp"
#include "fair/planner.hpp"

namespace fair::surgery {

inline std::size_t count_params(const mininet::MiniNet& net) {
  return planner::parameter_count(net.shape());
}

/// Dense multiply-adds per forward pass, counted as 2 FLOPs each.
inline std::size_t count_flops(const mininet::MiniNet& net) {
  return planner::flop_count(net.shape());
}

struct SurgeryReport {
  std::vector<std::size_t> removed;  // per hidden layer
  std::size_t params_before = 0, params_after = 0;
  std::size_t flops_before = 0, flops_after = 0;
  double pruning_rate = 0.0;
};

inline nlohmann::json to_json(const SurgeryReport& r) {
  return {{"removed", r.removed},         {"params_before", r.params_before},
          {"params_after", r.params_after}, {"flops_before", r.flops_before},
          {"flops_after", r.flops_after},   {"pruning_rate", r.pruning_rate}};
}

struct SurgeryResult {
  mininet::MiniNet net;
  SurgeryReport report;
};

/// Structured removal: for every hidden layer in the plan, drop the listed
/// weight rows and bias entries and the matching fan-in columns of the next
/// layer. Indices in the plan refer to the original model. Surviving values
/// are copied, never recomputed.
inline SurgeryResult apply(const mininet::MiniNet& net, const planner::PruningPlan& plan) {
  mininet::check_net(net);
  planner::check_against(plan, net.shape());

  const std::size_t L = net.layers.size();
  std::vector<std::vector<bool>> drop(L);  // per layer output unit
  for (std::size_t l = 0; l < L; ++l) drop[l].assign(net.layers[l].units, false);
  for (const auto& lp : plan.layers)
    for (auto j : lp.remove) drop[lp.layer_id][j] = true;

  SurgeryResult out;
  out.net.seed = net.seed;
  out.net.epochs_trained = net.epochs_trained;
  out.report.removed.assign(net.hidden_layers(), 0);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& src = net.layers[l];
    const std::vector<bool>* in_drop = l == 0 ? nullptr : &drop[l - 1];
    mininet::Layer dst;
    for (std::size_t c = 0; c < src.fan_in; ++c)
      if (!in_drop || !(*in_drop)[c]) ++dst.fan_in;
    for (std::size_t j = 0; j < src.units; ++j) {
      if (drop[l][j]) {
        ++out.report.removed[l];
        continue;
      }
      ++dst.units;
      dst.bias.push_back(src.bias[j]);
      for (std::size_t c = 0; c < src.fan_in; ++c)
        if (!in_drop || !(*in_drop)[c]) dst.weights.push_back(src.weights[j * src.fan_in + c]);
    }
    require(dst.units > 0, ErrorKind::contract_mismatch,
            "surgery would empty layer " + std::to_string(l));
    out.net.layers.push_back(std::move(dst));
  }

  auto& r = out.report;
  r.params_before = count_params(net);
  r.params_after = count_params(out.net);
  r.flops_before = count_flops(net);
  r.flops_after = count_flops(out.net);
  r.pruning_rate = static_cast<double>(r.params_before - r.params_after) /
                   static_cast<double>(r.params_before);
  return out;
}

}  // namespace fair::surgery
