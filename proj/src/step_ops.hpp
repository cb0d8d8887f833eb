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

// Per-step operators used by the solvers. Diagonal forms never factor;
// dense forms factor once per operator and bump the thread counter.

#pragma once

#include "symlqr/problem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>

namespace symlqr::detail {

inline constexpr double kInvRel = 1e-10;
inline constexpr double kRcondFloor = 1e-14;

inline Vector apply_A(const StepParams& s, const Vector& x) {
    if (s.a_form == AForm::Diagonal) return s.a_diag.cwiseProduct(x);
    return s.A * x;
}

inline Vector apply_AT(const StepParams& s, const Vector& x) {
    if (s.a_form == AForm::Diagonal) return s.a_diag.cwiseProduct(x);
    return s.A.transpose() * x;
}

inline Vector apply_R(const StepParams& s, const Vector& u) {
    switch (s.r_form) {
        case RForm::Dense: return s.R * u;
        case RForm::Diagonal: return s.r_diag.cwiseProduct(u);
        case RForm::DiagonalInverse: return u.cwiseQuotient(s.r_diag);
    }
    return u;
}

// (A_t^⊤)^{-1}.
class InvTransposeA {
public:
    InvTransposeA(const StepParams& s, Index t) : diag_(s.a_form == AForm::Diagonal) {
        if (diag_) {
            const double amax = s.a_diag.cwiseAbs().maxCoeff();
            const double amin = s.a_diag.cwiseAbs().minCoeff();
            if (!(amin > 0.0) || amin < kInvRel * amax)
                throw LqrError(ErrorCode::SingularA, "diagonal entry below inverse floor", t);
            inv_ = s.a_diag.cwiseInverse();
        } else {
            lu_.compute(s.A);
            ++thread_counters().factorizations;
            const double rc = lu_.rcond();
            if (!std::isfinite(rc) || rc < kRcondFloor)
                throw LqrError(ErrorCode::SingularA, "A is numerically singular", t);
        }
    }

    Vector apply(const Vector& x) const {
        if (diag_) return inv_.cwiseProduct(x);
        return lu_.transpose().solve(x);
    }

    Matrix dense() const {
        if (diag_) return inv_.asDiagonal();
        return lu_.inverse().transpose();
    }

    bool diagonal() const { return diag_; }
    const Vector& diag_inverse() const { return inv_; }

private:
    bool diag_;
    Vector inv_;
    Eigen::PartialPivLU<Matrix> lu_;
};

// R_t^{-1}.
class InvR {
public:
    InvR(const StepParams& s, Index t) : form_(s.r_form) {
        switch (form_) {
            case RForm::Dense:
                llt_.compute(s.R);
                ++thread_counters().factorizations;
                if (llt_.info() != Eigen::Success)
                    throw LqrError(ErrorCode::FactorizationFailure, "R is not positive definite", t);
                break;
            case RForm::Diagonal: inv_ = s.r_diag.cwiseInverse(); break;
            case RForm::DiagonalInverse: inv_ = s.r_diag; break;
        }
    }

    Vector apply(const Vector& v) const {
        if (form_ == RForm::Dense) return llt_.solve(v);
        return inv_.cwiseProduct(v);
    }

    // X·R^{-1}
    Matrix right_apply(const Matrix& X) const {
        if (form_ == RForm::Dense) return llt_.solve(X.transpose()).transpose();
        return X * inv_.asDiagonal();
    }

private:
    RForm form_;
    Vector inv_;
    Eigen::LLT<Matrix> llt_;
};

// Alternates two scratch buffers so a lazy source can hand out step t while
// step t±1 is still referenced.
class StepWindow {
public:
    explicit StepWindow(const StepSource& src) : src_(src) {}
    const StepParams& fetch(Index t) {
        flip_ = !flip_;
        return src_.step(t, flip_ ? a_ : b_);
    }

private:
    const StepSource& src_;
    StepParams a_, b_;
    bool flip_ = false;
};

}  // namespace symlqr::detail
