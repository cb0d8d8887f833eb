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

// Backward Riccati recursion with affine terms. Clarity first; this is the
// baseline the symplectic path is measured against.

#pragma once

#include "symlqr/problem.hpp"

#include <vector>

namespace symlqr {

/// Cost-to-go V_t(h) = ½hᵀP_t h + p_tᵀh for h = h_t, and the feedback law
/// u_t = K_t h_{t-1} + k_t. All vectors are indexed [t-1] for t = 1..T.
struct ValueBackup {
    std::vector<Matrix> P;
    std::vector<Vector> p;
    std::vector<Matrix> K;
    std::vector<Vector> k;

    Index horizon() const { return static_cast<Index>(P.size()); }
};

/// One dense factorization of R_t + B_tᵀP_tB_t per step.
ValueBackup riccati_backup(const StepSource& p);

LqrTrajectory riccati_solve(const StepSource& p);

/// Same as riccati_solve but reuses a backup computed earlier.
LqrTrajectory riccati_rollout(const StepSource& p, const ValueBackup& backup);

/// ½hᵀP_t h + p_tᵀh, 1 ≤ t ≤ T.
double value_at(const ValueBackup& backup, Index t, const Vector& h);

}  // namespace symlqr
