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

#include "symlqr/kkt_oracle.hpp"

#include "symlqr/riccati.hpp"

#include <lapacke.h>

#include <vector>

namespace symlqr {

Matrix DenseKktSystem::saddle() const {
    const Index nx = layout.primal_dim(), nl = layout.dual_dim();
    Matrix K = Matrix::Zero(nx + nl, nx + nl);
    K.topLeftCorner(nx, nx) = C;
    K.topRightCorner(nx, nl) = F.transpose();
    K.bottomLeftCorner(nl, nx) = F;
    return K;
}

DenseKktSystem assemble(const StepSource& p) {
    KktLayout L{p.state_dim(), p.control_dim(), p.horizon()};
    if (L.primal_dim() > kKktMaxPrimal)
        throw LqrError(ErrorCode::TooLarge, "KKT primal dimension " + std::to_string(L.primal_dim()) +
                                                " exceeds " + std::to_string(kKktMaxPrimal));
    const Index n = L.n, m = L.m, T = L.T;
    DenseKktSystem sys;
    sys.layout = L;
    sys.C = Matrix::Zero(L.primal_dim(), L.primal_dim());
    sys.F = Matrix::Zero(L.dual_dim(), L.primal_dim());
    sys.b = Vector::Zero(L.dual_dim());
    sys.c = Vector::Zero(L.primal_dim());

    sys.F.block(0, L.state(0), n, n) = -Matrix::Identity(n, n);
    sys.b.head(n) = -p.initial_state();
    StepParams scratch;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = p.step(t, scratch);
        sys.C.block(L.state(t), L.state(t), n, n) = 0.5 * (s.Q + s.Q.transpose());
        const Matrix R = s.R_dense();
        sys.C.block(L.action(t), L.action(t), m, m) = 0.5 * (R + R.transpose());
        if (s.affine) sys.c.segment(L.action(t), m) = *s.affine;
        const Index row = L.costate(t);
        sys.F.block(row, L.state(t - 1), n, n) = s.A_dense();
        sys.F.block(row, L.state(t), n, n) = -Matrix::Identity(n, n);
        sys.F.block(row, L.action(t), n, m) = s.B;
    }
    return sys;
}

namespace {

// Solves the symmetric indefinite saddle system in place (Bunch-Kaufman).
Matrix solve_saddle(const DenseKktSystem& sys, Matrix rhs) {
    Matrix K = sys.saddle();
    const auto N = static_cast<lapack_int>(K.rows());
    std::vector<lapack_int> ipiv(static_cast<std::size_t>(N));
    const lapack_int info = LAPACKE_dsysv(LAPACK_COL_MAJOR, 'L', N, static_cast<lapack_int>(rhs.cols()),
                                          K.data(), N, ipiv.data(), rhs.data(), N);
    if (info > 0) throw LqrError(ErrorCode::SingularKkt, "zero pivot in symmetric indefinite factorization");
    if (info < 0) throw LqrError(ErrorCode::SingularKkt, "dsysv argument error " + std::to_string(info));
    if (!rhs.allFinite()) throw LqrError(ErrorCode::SingularKkt, "non-finite KKT solution");
    return rhs;
}

LqrTrajectory unpack(const KktLayout& L, const Vector& sol) {
    LqrTrajectory traj;
    const Index nx = L.primal_dim();
    for (Index t = 0; t <= L.T; ++t) traj.h.push_back(sol.segment(L.state(t), L.n));
    for (Index t = 1; t <= L.T; ++t) traj.u.push_back(sol.segment(L.action(t), L.m));
    for (Index t = 0; t <= L.T; ++t) traj.lambda.push_back(sol.segment(nx + L.costate(t), L.n));
    return traj;
}

Vector primal_rhs(const DenseKktSystem& sys) {
    Vector rhs(sys.layout.primal_dim() + sys.layout.dual_dim());
    rhs << -sys.c, sys.b;
    return rhs;
}

}  // namespace

LqrTrajectory oracle_solve(const StepSource& p) {
    const DenseKktSystem sys = assemble(p);
    LqrTrajectory traj = unpack(sys.layout, solve_saddle(sys, primal_rhs(sys)).col(0));
    traj.cost = evaluate_cost(p, traj.h, traj.u);
    return traj;
}

LqrGradients oracle_gradients(const StepSource& p, const Vector& loss_grad) {
    if (loss_grad.size() != p.control_dim())
        throw LqrError(ErrorCode::DimensionMismatch, "loss gradient length differs from control dim");
    const DenseKktSystem sys = assemble(p);
    const KktLayout& L = sys.layout;
    Matrix rhs = Matrix::Zero(L.primal_dim() + L.dual_dim(), 2);
    rhs.col(0) = primal_rhs(sys);
    rhs.col(1).segment(L.action(1), L.m) = -loss_grad;
    const Matrix sol = solve_saddle(sys, std::move(rhs));
    return combine(unpack(L, sol.col(0)), unpack(L, sol.col(1)));
}

double kkt_residual(const StepSource& p, const LqrTrajectory& traj) {
    const Index T = p.horizon();
    if (traj.horizon() != T || static_cast<Index>(traj.lambda.size()) != T + 1)
        throw LqrError(ErrorCode::DimensionMismatch, "trajectory length differs from horizon");
    double worst = 0.0;
    auto note = [&](const Vector& r, double scale) {
        worst = std::max(worst, r.cwiseAbs().maxCoeff() / std::max(scale, 1e-300));
    };
    auto mag = [](const Vector& v) { return v.cwiseAbs().maxCoeff(); };

    const auto tt = [](Index t) { return static_cast<std::size_t>(t); };
    // feasibility
    note(traj.h[0] - p.initial_state(), std::max(mag(p.initial_state()), 1.0));
    StepParams scratch, scratch_next;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = p.step(t, scratch);
        const Vector Ah = s.A_dense() * traj.h[tt(t - 1)];
        const Vector Bu = s.B * traj.u[tt(t - 1)];
        note(traj.h[tt(t)] - Ah - Bu, std::max({mag(Ah), mag(Bu), mag(traj.h[tt(t)]), 1e-300}));

        // u_t stationarity: R u + r + Bᵀλ_t = 0
        const Vector Ru = s.R_dense() * traj.u[tt(t - 1)];
        const Vector Bl = s.B.transpose() * traj.lambda[tt(t)];
        const Vector r = s.affine_or_zero();
        note(Ru + r + Bl, std::max({mag(Ru), mag(Bl), mag(r), 1e-300}));

        // h_t stationarity: λ_t = Q_t h_t + A_{t+1}ᵀλ_{t+1} (no second term at T)
        const Vector Qh = s.Q * traj.h[tt(t)];
        Vector rhs = Qh;
        double scale = mag(Qh);
        if (t < T) {
            const StepParams& sn = p.step(t + 1, scratch_next);
            const Vector Al = sn.A_dense().transpose() * traj.lambda[tt(t + 1)];
            rhs += Al;
            scale = std::max(scale, mag(Al));
        }
        note(traj.lambda[tt(t)] - rhs, std::max({scale, mag(traj.lambda[tt(t)]), 1e-300}));
    }
    // λ_0 = A_1ᵀλ_1
    const Vector A1l = p.step(1, scratch).A_dense().transpose() * traj.lambda[1];
    note(traj.lambda[0] - A1l, std::max({mag(A1l), mag(traj.lambda[0]), 1e-300}));
    return worst;
}

namespace {

LqrProblem densify(const StepSource& p) {
    LqrProblem d = materialize(p);
    for (auto& s : d.steps) {
        if (s.a_form == AForm::Diagonal) {
            s.A = s.A_dense();
            s.a_form = AForm::Dense;
            s.a_diag.resize(0);
        }
        if (s.r_form != RForm::Dense) {
            s.R = s.R_dense();
            s.r_form = RForm::Dense;
            s.r_diag.resize(0);
        }
    }
    return d;
}

double eval_loss(const LqrProblem& p, const LossFn& loss) {
    const ValidatedProblem vp = ValidatedProblem::unchecked(p);
    return loss(riccati_solve(vp).u.front());
}

template <typename Perturb>
double central(LqrProblem& p, double theta, double rel_step, const LossFn& loss, Perturb&& set) {
    const double h = rel_step * (1.0 + std::abs(theta));
    set(theta + h);
    const double fp = eval_loss(p, loss);
    set(theta - h);
    const double fm = eval_loss(p, loss);
    set(theta);
    return (fp - fm) / (2.0 * h);
}

void fd_matrix(LqrProblem& p, Matrix& M, Matrix& G, bool symmetric, double rel_step, const LossFn& loss) {
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) {
            if (symmetric && i < j) continue;
            if (symmetric && i != j) {
                // θ moves M_ij and M_ji together by half a step each
                const double base_ij = M(i, j), base_ji = M(j, i);
                const double h = rel_step * (1.0 + std::abs(base_ij));
                M(i, j) = base_ij + 0.5 * h;
                M(j, i) = base_ji + 0.5 * h;
                const double fp = eval_loss(p, loss);
                M(i, j) = base_ij - 0.5 * h;
                M(j, i) = base_ji - 0.5 * h;
                const double fm = eval_loss(p, loss);
                M(i, j) = base_ij;
                M(j, i) = base_ji;
                G(i, j) = G(j, i) = (fp - fm) / (2.0 * h);
            } else {
                G(i, j) = central(p, M(i, j), rel_step, loss, [&](double v) { M(i, j) = v; });
            }
        }
}

}  // namespace

LqrGradients fd_gradients(const StepSource& src, const LossFn& loss, double rel_step) {
    LqrProblem p = densify(src);
    const Index n = p.n, m = p.m, T = p.horizon();
    LqrGradients g = LqrGradients::zeros(n, m, T);
    for (Index t = 1; t <= T; ++t) {
        StepParams& s = p.step(t);
        const auto i = static_cast<std::size_t>(t - 1);
        fd_matrix(p, s.A, g.gA[i], false, rel_step, loss);
        fd_matrix(p, s.B, g.gB[i], false, rel_step, loss);
        fd_matrix(p, s.Q, g.gQ[i], true, rel_step, loss);
        fd_matrix(p, s.R, g.gR[i], true, rel_step, loss);
    }
    for (Index k = 0; k < n; ++k)
        g.g_h0(k) = central(p, p.h0(k), rel_step, loss, [&](double v) { p.h0(k) = v; });
    return g;
}

LqrGradients fd_gradients(const StepSource& p, const Vector& loss_grad, double rel_step) {
    if (loss_grad.size() != p.control_dim())
        throw LqrError(ErrorCode::DimensionMismatch, "loss gradient length differs from control dim");
    return fd_gradients(p, [g = loss_grad](const Vector& u) { return g.dot(u); }, rel_step);
}

}  // namespace symlqr
