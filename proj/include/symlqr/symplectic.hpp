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

// Symplectic-iteration solver.
//
// The reverse sweep accumulates [Y1 Y2] = [I Q_T]·Σ_T···Σ_1 one row block at a
// time, never forming Σ_t. The update streams three factors:
//
//   Y3  = Y2·B_t·R_t⁻¹
//   Y1' = (Y1 + Y3·B_tᵀ)·A_t⁻ᵀ
//   Y2' = Y2·A_t + Y1'·Q_{t-1}          (Q_0 = 0)
//
// and the affine accumulator picks up y3 += −Y3·r_t before each update.
// λ0 = Y1⁻¹(Y2·h0 + y3) then seeds the forward sweep.

#pragma once

#include "symlqr/problem.hpp"

#include <Eigen/LU>

namespace symlqr {

enum class Precision { Float64, Float32 };

struct SweepOptions {
    bool normalize = true;   // row-wise D scaling after every step
    Index row_blocks = 1;    // independent row blocks of [Y1 Y2]
    Index threads = 1;       // workers sharing the row blocks
    Precision precision = Precision::Float64;
};

struct SymplecticAccumulator {
    Matrix Y1;
    Matrix Y2;
    Vector y3;
    Matrix Y3cache;    // Y2·B_1·R_1⁻¹ captured before the t = 1 update
    Vector log_scale;  // Σ log D_ii applied to each row
    bool normalized = true;
    Precision precision = Precision::Float64;
};

/// Throws NonFiniteAccumulator when a step produces inf/nan (expected with
/// normalization off on growing problems) and SingularA on singular A_t.
SymplecticAccumulator reverse_sweep(const StepSource& p, const SweepOptions& opt = {});

struct FirstAction {
    Vector u1;
    Vector lambda0;
    Eigen::PartialPivLU<Matrix> lu;  // factors of Y1, kept for the backward pass
};

/// One pivoted factorization of Y1 (always in 64-bit).
FirstAction first_action(const SymplecticAccumulator& acc, const StepSource& p, const Vector& h0);

/// Rolls (h, λ, u) forward from λ0.
LqrTrajectory forward_sweep(const StepSource& p, const Vector& h0, const Vector& lambda0);

/// reverse_sweep → first_action → forward_sweep.
LqrTrajectory symplectic_solve(const StepSource& p, const SweepOptions& opt = {});

enum class StepMatrix { Sigma, S };

/// Explicit 2n×2n Σ_t or S_t, for tests.
Matrix materialize_step(const StepSource& p, Index t, StepMatrix which);

/// [[0, I], [−I, 0]]
Matrix symplectic_form(Index n);

}  // namespace symlqr
