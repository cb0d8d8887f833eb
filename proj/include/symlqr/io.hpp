/*
 Copyright 2026 The symlqr Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// JSON serialization for problems, trajectories, gradients and layer weights.
// Matrices are row-major nested arrays; doubles print with round-trip
// precision. Every parse failure raises LqrError(InvalidArgument).

#pragma once

#include "symlqr/gradients.hpp"
#include "symlqr/problem.hpp"
#include "symlqr/ttc_layer.hpp"

#include <string>
#include <string_view>

namespace symlqr::io {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// {"n","m","T","h0","steps":[{"A":{"dense"|"diag"},"B","Q","R":{"dense"|"diag"|"diag_inverse"},"r"}]}
LqrProblem parse_problem(std::string_view text);
std::string problem_json(const LqrProblem& p);

/// {"h":[[...]...],"u":[[...]...],"lambda":[[...]...],"cost":f}
std::string trajectory_json(const LqrTrajectory& traj);
LqrTrajectory parse_trajectory(std::string_view text);

/// Either a bare array or {"grad":[...]}.
Vector parse_vector(std::string_view text);

/// {"A":[...],"B":[...],"Q":[...],"R":[...],"h0":[...]}, one matrix per step.
std::string gradients_json(const LqrGradients& g);

/// Manifest {"format","config",tensors:{name:{"shape","dtype":"f64le","data":base64}}}.
std::string weights_json(const TtcLayerWeights& w);
TtcLayerWeights parse_weights(std::string_view text);

}  // namespace symlqr::io
