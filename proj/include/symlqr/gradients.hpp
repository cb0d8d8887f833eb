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

#pragma once

#include "symlqr/problem.hpp"

#include <vector>

namespace symlqr {

/// Gradients of a scalar loss ℓ(u_1) with respect to every problem tensor.
/// Index [t-1] holds step t. gQ and gR are symmetric.
struct LqrGradients {
    std::vector<Matrix> gA;
    std::vector<Matrix> gB;
    std::vector<Matrix> gQ;
    std::vector<Matrix> gR;
    Vector g_h0;

    static LqrGradients zeros(Index n, Index m, Index T);
    Index horizon() const { return static_cast<Index>(gA.size()); }

    LqrGradients& operator+=(const LqrGradients& o);
    LqrGradients& operator*=(double s);
};

/// Per-tensor relative difference, norm-wise over all steps of the tensor.
struct GradientDiff {
    double A = 0, B = 0, Q = 0, R = 0, h0 = 0;
    double max() const;
};

GradientDiff compare(const LqrGradients& a, const LqrGradients& b);

/// True when every entry satisfies |a − b| ≤ max(rel·max(|a|,|b|), abs).
bool within(const LqrGradients& a, const LqrGradients& b, double rel, double abs);

/// Outer-product assembly from the primal and dual trajectories.
///   gA_t = λ_t h̃_{t-1}ᵀ + λ̃_t h_{t-1}ᵀ      gB_t = λ_t ũ_tᵀ + λ̃_t u_tᵀ
///   gQ_t = ½(h_t h̃_tᵀ + h̃_t h_tᵀ)         gR_t = ½(u_t ũ_tᵀ + ũ_t u_tᵀ)
///   g_h0 = λ̃_0
LqrGradients combine(const LqrTrajectory& primal, const LqrTrajectory& dual);

// Chain rules onto structured parameterizations.

/// diag(gA_t) for A_t = diag(a).
Vector diag_a_grad(const Matrix& gA);
/// Gradient with respect to ρ = diag(R⁻¹): gρ_j = −gR_jj / ρ_j².
Vector inverse_r_grad(const Matrix& gR, const Vector& rho);
/// Gradient with respect to diag(R).
Vector diag_r_grad(const Matrix& gR);

}  // namespace symlqr
