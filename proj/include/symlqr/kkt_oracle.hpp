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

// Verification oracles: the dense saddle-point KKT system and central finite
// differences. Desk scale only.

#pragma once

#include "symlqr/gradients.hpp"

#include <functional>

namespace symlqr {

inline constexpr Index kKktMaxPrimal = 5000;

/// Flat offsets into x = (h_0..h_T, u_1..u_T) and ξ = (λ_0..λ_T).
struct KktLayout {
    Index n = 0, m = 0, T = 0;

    Index state(Index t) const { return t * n; }
    Index action(Index t) const { return (T + 1) * n + (t - 1) * m; }
    Index costate(Index t) const { return t * n; }
    Index primal_dim() const { return (T + 1) * n + T * m; }
    Index dual_dim() const { return (T + 1) * n; }
};

/// Stationarity C·x + c + Fᵀξ = 0, feasibility F·x = b.
struct DenseKktSystem {
    KktLayout layout;
    Matrix C;
    Matrix F;
    Vector b;
    Vector c;  // affine costs r_t in the action slots

    /// [[C, Fᵀ], [F, 0]]
    Matrix saddle() const;
};

DenseKktSystem assemble(const StepSource& p);

LqrTrajectory oracle_solve(const StepSource& p);

/// Primal and dual saddle systems share one factorization.
LqrGradients oracle_gradients(const StepSource& p, const Vector& loss_grad);

/// Max residual of the KKT equations for a trajectory, relative to the
/// magnitude of the terms involved.
double kkt_residual(const StepSource& p, const LqrTrajectory& traj);

using LossFn = std::function<double(const Vector& u1)>;

/// Central differences on every entry of A_t, B_t, Q_t, R_t and h0 with step
/// rel_step·(1 + |θ|), re-solving with Riccati. Q and R move along the
/// symmetric direction (E_ij + E_ji)/2. Diagonal forms are densified first.
LqrGradients fd_gradients(const StepSource& p, const LossFn& loss, double rel_step = 1e-5);

/// Linear probe ℓ(u) = loss_gradᵀu.
LqrGradients fd_gradients(const StepSource& p, const Vector& loss_grad, double rel_step = 1e-5);

}  // namespace symlqr
