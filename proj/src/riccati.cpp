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


#include "symlqr/riccati.hpp"

#include "step_ops.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace symlqr {

namespace {

// Solves M·X = rhs for the m×m matrix M = R + BᵀPB, with one counted
// factorization: Cholesky first, pivoted LU if that fails.
class GainSolver {
public:
    GainSolver(const Matrix& M, Index t) {
        ++thread_counters().factorizations;
        llt_.compute(M);
        if (llt_.info() == Eigen::Success) return;
        use_lu_ = true;
        lu_.compute(M);
        const double rc = lu_.rcond();
        if (!std::isfinite(rc) || rc < detail::kRcondFloor)
            throw LqrError(ErrorCode::FactorizationFailure, "R + BᵀPB is numerically singular", t);
    }

    template <typename Rhs>
    Matrix solve(const Rhs& rhs) const {
        return use_lu_ ? Matrix(lu_.solve(rhs)) : Matrix(llt_.solve(rhs));
    }

private:
    bool use_lu_ = false;
    Eigen::LLT<Matrix> llt_;
    Eigen::PartialPivLU<Matrix> lu_;
};

Matrix r_plus(const StepParams& s, const Matrix& BtPB) {
    Matrix M = BtPB;
    switch (s.r_form) {
        case RForm::Dense: M += s.R; break;
        case RForm::Diagonal: M.diagonal() += s.r_diag; break;
        case RForm::DiagonalInverse: M.diagonal() += s.r_diag.cwiseInverse(); break;
    }
    return M;
}

}  // namespace

ValueBackup riccati_backup(const StepSource& src) {
    const Index T = src.horizon();
    const auto TT = static_cast<std::size_t>(T);
    ValueBackup vb;
    vb.P.resize(TT);
    vb.p.resize(TT);
    vb.K.resize(TT);
    vb.k.resize(TT);

    detail::StepWindow win(src);
    const StepParams* cur = &win.fetch(T);
    Matrix P = cur->Q;
    Vector pv = Vector::Zero(src.state_dim());

    for (Index t = T; t >= 1; --t) {
        const StepParams& s = *cur;
        const auto i = static_cast<std::size_t>(t - 1);
        vb.P[i] = P;
        vb.p[i] = pv;

        const Matrix A = s.A_dense();
        const Matrix PB = P * s.B;
        const Matrix BtPA = PB.transpose() * A;
        GainSolver solver(r_plus(s, s.B.transpose() * PB), t);
        Vector rhs = s.B.transpose() * pv;
        if (s.affine) rhs += *s.affine;
        vb.K[i] = -solver.solve(BtPA);
        vb.k[i] = -solver.solve(rhs);
        ++thread_counters().riccati_steps;

        if (t == 1) break;
        const StepParams& prev = win.fetch(t - 1);
        Matrix Pn = prev.Q + A.transpose() * P * A + BtPA.transpose() * vb.K[i];
        P = 0.5 * (Pn + Pn.transpose());
        pv = A.transpose() * pv + A.transpose() * (PB * vb.k[i]);
        cur = &prev;
    }
    return vb;
}

LqrTrajectory riccati_rollout(const StepSource& src, const ValueBackup& vb) {
    const Index T = src.horizon();
    if (vb.horizon() != T) throw LqrError(ErrorCode::DimensionMismatch, "backup horizon differs");
    LqrTrajectory traj;
    traj.h.reserve(static_cast<std::size_t>(T + 1));
    traj.u.reserve(static_cast<std::size_t>(T));
    traj.h.push_back(src.initial_state());

    StepParams scratch;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = src.step(t, scratch);
        const auto i = static_cast<std::size_t>(t - 1);
        traj.u.push_back(vb.K[i] * traj.h.back() + vb.k[i]);
        traj.h.push_back(detail::apply_A(s, traj.h.back()) + s.B * traj.u.back());
    }

    // Co-states λ_t = P_t h_t + p_t, which solves the adjoint recursion
    // λ_t = Q_t h_t + A_{t+1}ᵀλ_{t+1} without running it backward through
    // possibly expanding A_tᵀ.
    traj.lambda.resize(static_cast<std::size_t>(T + 1));
    for (Index t = 1; t <= T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        traj.lambda[ti] = vb.P[ti - 1] * traj.h[ti] + vb.p[ti - 1];
    }
    traj.lambda[0] = detail::apply_AT(src.step(1, scratch), traj.lambda[1]);
    traj.cost = evaluate_cost(src, traj.h, traj.u);
    return traj;
}

LqrTrajectory riccati_solve(const StepSource& p) { return riccati_rollout(p, riccati_backup(p)); }

double value_at(const ValueBackup& vb, Index t, const Vector& h) {
    if (t < 1 || t > vb.horizon()) throw LqrError(ErrorCode::IndexOutOfRange, "value_at step", t);
    const auto i = static_cast<std::size_t>(t - 1);
    if (h.size() != vb.P[i].rows()) throw LqrError(ErrorCode::DimensionMismatch, "value_at state size", t);
    return 0.5 * h.dot(vb.P[i] * h) + vb.p[i].dot(h);
}

}  // namespace symlqr
