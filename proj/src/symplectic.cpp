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

#include "symlqr/symplectic.hpp"

#include "step_ops.hpp"

#include <barrier>
#include <cmath>
#include <thread>
#include <vector>

namespace symlqr {

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Step operators in accumulator precision. Built once per t and shared by
// every row block.
template <typename S>
struct PreparedStep {
    bool diag_a = false;
    Mat<S> A, AinvT;   // dense A
    Vec<S> a, ainv;    // diagonal A
    Mat<S> B;
    Mat<S> BRinv;      // B·R⁻¹
    Vec<S> BRinv_r;    // B·R⁻¹·r, empty without affine term
    Mat<S> Qprev;      // Q_{t-1}; empty at t = 1
};

template <typename S>
PreparedStep<S> prepare(const StepParams& s, const StepParams* prev, Index t) {
    PreparedStep<S> ps;
    detail::InvTransposeA ainvt(s, t);
    detail::InvR rinv(s, t);
    ps.diag_a = ainvt.diagonal();
    if (ps.diag_a) {
        ps.a = s.a_diag.cast<S>();
        ps.ainv = ainvt.diag_inverse().cast<S>();
    } else {
        ps.A = s.A.cast<S>();
        ps.AinvT = ainvt.dense().cast<S>();
    }
    ps.B = s.B.cast<S>();
    const Matrix BRinv = rinv.right_apply(s.B);
    ps.BRinv = BRinv.cast<S>();
    if (s.affine) ps.BRinv_r = (BRinv * *s.affine).cast<S>();
    if (prev) ps.Qprev = prev->Q.cast<S>();
    return ps;
}

template <typename S>
struct Block {
    Mat<S> Y1, Y2, Y3cache;
    Vec<S> y3;
    Vector log_scale;
};

template <typename S>
void normalize_rows(Block<S>& b, Index t) {
    for (Index i = 0; i < b.Y1.rows(); ++i) {
        const S d = std::max(b.Y1.row(i).template lpNorm<1>(), b.Y2.row(i).template lpNorm<1>());
        if (!std::isfinite(static_cast<double>(d)) || d == S(0))
            throw LqrError(ErrorCode::NonFiniteAccumulator, "row scale is zero or non-finite", t);
        const S inv = S(1) / d;
        b.Y1.row(i) *= inv;
        b.Y2.row(i) *= inv;
        b.y3(i) *= inv;
        if (b.Y3cache.size()) b.Y3cache.row(i) *= inv;
        b.log_scale(i) += std::log(static_cast<double>(d));
    }
}

template <typename S>
void apply_step(Block<S>& b, const PreparedStep<S>& ps, Index t, bool normalize) {
    const Mat<S> Y3 = b.Y2 * ps.BRinv;
    if (ps.BRinv_r.size()) b.y3.noalias() -= b.Y2 * ps.BRinv_r;
    if (t == 1) b.Y3cache = Y3;

    Mat<S> Y1n = b.Y1;
    Y1n.noalias() += Y3 * ps.B.transpose();
    if (ps.diag_a) {
        Y1n = Y1n * ps.ainv.asDiagonal();
        b.Y2 = b.Y2 * ps.a.asDiagonal();
    } else {
        Y1n = (Y1n * ps.AinvT).eval();
        b.Y2 = (b.Y2 * ps.A).eval();
    }
    if (ps.Qprev.size()) b.Y2.noalias() += Y1n * ps.Qprev;
    b.Y1 = std::move(Y1n);

    if (normalize) {
        normalize_rows(b, t);
    } else if (!b.Y1.allFinite() || !b.Y2.allFinite() || !b.y3.allFinite()) {
        throw LqrError(ErrorCode::NonFiniteAccumulator, "accumulator overflowed", t);
    }
}

template <typename S>
SymplecticAccumulator sweep(const StepSource& src, const SweepOptions& opt) {
    const Index n = src.state_dim();
    const Index T = src.horizon();
    const Index nblocks = std::clamp<Index>(opt.row_blocks, 1, n);
    const Index nthreads = std::clamp<Index>(opt.threads, 1, nblocks);

    detail::StepWindow win(src);
    const StepParams* cur = &win.fetch(T);

    std::vector<Block<S>> blocks(static_cast<std::size_t>(nblocks));
    std::vector<Index> offset(static_cast<std::size_t>(nblocks) + 1, 0);
    for (Index k = 0; k < nblocks; ++k) {
        const Index lo = k * n / nblocks, hi = (k + 1) * n / nblocks;
        offset[static_cast<std::size_t>(k)] = lo;
        offset[static_cast<std::size_t>(k) + 1] = hi;
        auto& b = blocks[static_cast<std::size_t>(k)];
        b.Y1 = Mat<S>::Identity(n, n).middleRows(lo, hi - lo);
        b.Y2 = cur->Q.cast<S>().middleRows(lo, hi - lo);
        b.y3 = Vec<S>::Zero(hi - lo);
        b.log_scale = Vector::Zero(hi - lo);
    }

    ++thread_counters().reverse_sweeps;
    PreparedStep<S> ps;
    Index t = T;
    auto prepare_next = [&] {
        const StepParams* prev = t > 1 ? &win.fetch(t - 1) : nullptr;
        ps = prepare<S>(*cur, prev, t);
        ++thread_counters().reverse_steps;
        cur = prev;
    };

    if (nthreads == 1) {
        for (; t >= 1; --t) {
            prepare_next();
            for (auto& b : blocks) apply_step(b, ps, t, opt.normalize);
        }
    } else {
        // Thread 0 prepares each step; all workers then update their own
        // blocks. Errors are parked and rethrown after the join.
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
        bool stop = false;
        std::barrier sync(static_cast<std::ptrdiff_t>(nthreads));
        auto worker = [&](Index w) {
            for (;;) {
                // Only thread 0 writes t, ps and stop, and only between the
                // post-update barrier and the next pre-update barrier.
                if (w == 0) {
                    for (auto& e : errors)
                        if (e) stop = true;
                    if (t < 1) stop = true;
                    if (!stop) {
                        try {
                            prepare_next();
                        } catch (...) {
                            errors[0] = std::current_exception();
                            stop = true;
                        }
                    }
                }
                sync.arrive_and_wait();
                if (stop) return;
                try {
                    for (Index k = w; k < nblocks; k += nthreads)
                        apply_step(blocks[static_cast<std::size_t>(k)], ps, t, opt.normalize);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
                sync.arrive_and_wait();
                if (w == 0) --t;
            }
        };
        std::vector<std::thread> pool;
        for (Index w = 1; w < nthreads; ++w) pool.emplace_back(worker, w);
        worker(0);
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    SymplecticAccumulator acc;
    acc.normalized = opt.normalize;
    acc.precision = opt.precision;
    acc.Y1.resize(n, n);
    acc.Y2.resize(n, n);
    acc.y3.resize(n);
    acc.Y3cache.resize(n, src.control_dim());
    acc.log_scale.resize(n);
    for (Index k = 0; k < nblocks; ++k) {
        const auto& b = blocks[static_cast<std::size_t>(k)];
        const Index lo = offset[static_cast<std::size_t>(k)];
        const Index rows = b.Y1.rows();
        acc.Y1.middleRows(lo, rows) = b.Y1.template cast<double>();
        acc.Y2.middleRows(lo, rows) = b.Y2.template cast<double>();
        acc.y3.segment(lo, rows) = b.y3.template cast<double>();
        acc.Y3cache.middleRows(lo, rows) = b.Y3cache.template cast<double>();
        acc.log_scale.segment(lo, rows) = b.log_scale;
    }
    return acc;
}

}  // namespace

SymplecticAccumulator reverse_sweep(const StepSource& p, const SweepOptions& opt) {
    if (opt.precision == Precision::Float32) return sweep<float>(p, opt);
    return sweep<double>(p, opt);
}

FirstAction first_action(const SymplecticAccumulator& acc, const StepSource& p, const Vector& h0) {
    const Index n = p.state_dim();
    if (acc.Y1.rows() != n || h0.size() != n)
        throw LqrError(ErrorCode::DimensionMismatch, "accumulator or h0 size differs from problem");
    FirstAction fa;
    fa.lu.compute(acc.Y1);
    ++thread_counters().factorizations;
    const double rc = fa.lu.rcond();
    if (!std::isfinite(rc) || rc < detail::kRcondFloor)
        throw LqrError(ErrorCode::SingularY1, "Y1 is numerically singular (rcond " + std::to_string(rc) + ")");
    fa.lambda0 = fa.lu.solve(acc.Y2 * h0 + acc.y3);

    StepParams scratch;
    const StepParams& s1 = p.step(1, scratch);
    detail::InvTransposeA ainvt(s1, 1);
    detail::InvR rinv(s1, 1);
    Vector rhs = s1.B.transpose() * ainvt.apply(fa.lambda0);
    if (s1.affine) rhs += *s1.affine;
    fa.u1 = -rinv.apply(rhs);
    return fa;
}

LqrTrajectory forward_sweep(const StepSource& p, const Vector& h0, const Vector& lambda0) {
    const Index T = p.horizon();
    if (h0.size() != p.state_dim() || lambda0.size() != p.state_dim())
        throw LqrError(ErrorCode::DimensionMismatch, "h0 or λ0 size differs from problem");
    LqrTrajectory traj;
    traj.h.reserve(static_cast<std::size_t>(T + 1));
    traj.u.reserve(static_cast<std::size_t>(T));
    traj.lambda.reserve(static_cast<std::size_t>(T + 1));
    traj.h.push_back(h0);
    traj.lambda.push_back(lambda0);

    detail::StepWindow win(p);
    const StepParams* prev = nullptr;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = win.fetch(t);
        detail::InvTransposeA ainvt(s, t);
        detail::InvR rinv(s, t);
        Vector rhs = traj.lambda.back();
        if (prev) rhs -= prev->Q * traj.h.back();
        traj.lambda.push_back(ainvt.apply(rhs));
        Vector v = s.B.transpose() * traj.lambda.back();
        if (s.affine) v += *s.affine;
        traj.u.push_back(-rinv.apply(v));
        traj.h.push_back(detail::apply_A(s, traj.h.back()) + s.B * traj.u.back());
        ++thread_counters().forward_steps;
        prev = &s;
    }
    traj.cost = evaluate_cost(p, traj.h, traj.u);
    return traj;
}

LqrTrajectory symplectic_solve(const StepSource& p, const SweepOptions& opt) {
    const auto acc = reverse_sweep(p, opt);
    const auto fa = first_action(acc, p, p.initial_state());
    return forward_sweep(p, p.initial_state(), fa.lambda0);
}

Matrix symplectic_form(Index n) {
    Matrix J = Matrix::Zero(2 * n, 2 * n);
    J.topRightCorner(n, n).setIdentity();
    J.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
    return J;
}

Matrix materialize_step(const StepSource& p, Index t, StepMatrix which) {
    if (t < 1 || t > p.horizon()) throw LqrError(ErrorCode::IndexOutOfRange, "materialize_step", t);
    const Index n = p.state_dim();
    StepParams scratch, scratch_prev;
    const StepParams& s = p.step(t, scratch);
    const Matrix Qp = t > 1 ? Matrix(p.step(t - 1, scratch_prev).Q) : Matrix::Zero(n, n);
    const Matrix A = s.A_dense();
    const Matrix AinvT = A.transpose().partialPivLu().inverse();
    const Matrix G = s.B * s.R_inverse_dense() * s.B.transpose();

    Matrix M(2 * n, 2 * n);
    if (which == StepMatrix::Sigma) {
        M.topLeftCorner(n, n) = AinvT;
        M.topRightCorner(n, n) = AinvT * Qp;
        M.bottomLeftCorner(n, n) = G * AinvT;
        M.bottomRightCorner(n, n) = A + G * AinvT * Qp;
    } else {
        M.topLeftCorner(n, n) = A + G * AinvT * Qp;
        M.topRightCorner(n, n) = -G * AinvT;
        M.bottomLeftCorner(n, n) = -AinvT * Qp;
        M.bottomRightCorner(n, n) = AinvT;
    }
    return M;
}

}  // namespace symlqr
