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

// Gradients of ℓ(u_1) through the LQR solution.
//
// The forward pass keeps LU(Y1), the Y3 block captured at t = 1, and λ0. The
// backward pass seeds the dual problem (zero initial state, affine cost ∇ℓ
// on ũ_1) straight from those factors and regenerates primal and dual
// trajectories side by side, so no second reverse sweep is needed.

#pragma once

#include "symlqr/gradients.hpp"
#include "symlqr/symplectic.hpp"

#include <Eigen/LU>

namespace symlqr {

struct ForwardCache {
    Eigen::PartialPivLU<Matrix> lu;  // factors of Y1
    Matrix Y3cache;
    Vector lambda0;
    Vector h0;
    std::uint64_t fingerprint = 0;
    Precision precision = Precision::Float64;
};

struct ForwardResult {
    Vector u1;
    ForwardCache cache;
};

ForwardResult ttc_forward(const StepSource& p, const SweepOptions& opt = {});

/// Same (A, B, Q, R); h̃0 = 0; r̃_1 = loss_grad, r̃_t = 0 for t > 1.
LqrProblem build_dual(const StepSource& p, const Vector& loss_grad);

/// Throws StaleCache when `p` is not the problem the cache was built from.
LqrGradients ttc_backward(const StepSource& p, const ForwardCache& cache, const Vector& loss_grad);

/// Reference path: solves primal and dual independently, then combines.
LqrGradients backward_uncached(const StepSource& p, const Vector& loss_grad,
                               const SweepOptions& opt = {});

namespace debug {
/// Flips the sign of gB in ttc_backward. Negative control for gradcheck.
void set_corrupt_backward(bool on);
}  // namespace debug

}  // namespace symlqr
