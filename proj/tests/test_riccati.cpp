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

#include "fixtures.hpp"
#include "symlqr/riccati.hpp"

#include <gtest/gtest.h>

using namespace symlqr;
using symlqr::testing::random_validated;
using symlqr::testing::scalar_validated;

TEST(RiccatiBackup, ScalarGains) {
    const auto vp = scalar_validated();
    const auto vb = riccati_backup(vp);
    EXPECT_NEAR(vb.P[1](0, 0), 1.0, 1e-15);
    EXPECT_NEAR(vb.P[0](0, 0), 1.5, 1e-15);
    EXPECT_NEAR(vb.K[0](0, 0), -0.6, 1e-15);
    EXPECT_NEAR(vb.K[1](0, 0), -0.5, 1e-15);
    EXPECT_EQ(vb.p[1](0), 0.0);
}

TEST(RiccatiBackup, TerminalBoundary) {
    const auto vp = random_validated(2, 4, 3, 6);
    const auto vb = riccati_backup(vp);
    EXPECT_EQ(vb.P.back(), vp.problem().steps.back().Q);
    EXPECT_TRUE(vb.p.back().isZero(0.0));
    for (const auto& P : vb.P) EXPECT_EQ(P, P.transpose());
}

TEST(RiccatiBackup, NoControlLimit) {
    ConditioningSpec spec;
    spec.affine = true;
    LqrProblem p = random_problem(3, 3, 2, 4, spec);
    for (auto& s : p.steps) s.B.setZero();
    const auto vp = validate_problem(p);
    const auto vb = riccati_backup(vp);
    for (Index t = 1; t <= 4; ++t) {
        const auto& s = vp.problem().step(t);
        EXPECT_TRUE(vb.K[t - 1].isZero(0.0));
        EXPECT_TRUE(vb.k[t - 1].isApprox(-s.R.llt().solve(*s.affine), 1e-12));
        if (t < 4) {
            const auto& sn = vp.problem().step(t + 1);
            const Matrix expect = s.Q + sn.A.transpose() * vb.P[t] * sn.A;
            EXPECT_TRUE(vb.P[t - 1].isApprox(expect, 1e-12));
        }
    }
}

TEST(RiccatiBackup, ZeroCostFixedPoint) {
    LqrProblem p = random_problem(4, 3, 3, 5);
    for (auto& s : p.steps) s.Q.setZero();
    const auto vb = riccati_backup(validate_problem(p));
    for (Index i = 0; i < 5; ++i) {
        EXPECT_TRUE(vb.P[i].isZero(0.0));
        EXPECT_TRUE(vb.K[i].isZero(0.0));
    }
}

TEST(RiccatiBackup, OneFactorizationPerStep) {
    for (Index T : {1, 7, 64}) {
        const auto vp = random_validated(5, 4, 4, T);
        CounterScope scope;
        riccati_solve(vp);
        EXPECT_EQ(scope.delta().factorizations, static_cast<std::uint64_t>(T));
    }
}

TEST(RiccatiSolve, Scalar) {
    const auto tr = riccati_solve(scalar_validated());
    const double h[] = {1, 0.4, 0.2}, u[] = {-0.6, -0.2}, l[] = {0.6, 0.6, 0.2};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(tr.h[i](0), h[i], 1e-12);
        EXPECT_NEAR(tr.lambda[i](0), l[i], 1e-12);
    }
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(tr.u[i](0), u[i], 1e-12);
    EXPECT_NEAR(tr.cost, 0.3, 1e-12);
}

TEST(RiccatiSolve, ZeroInitialState) {
    LqrProblem p = random_problem(6, 3, 2, 5);
    p.h0.setZero();
    const auto tr = riccati_solve(validate_problem(p));
    for (const auto& u : tr.u) EXPECT_TRUE(u.isZero(0.0));
    EXPECT_EQ(tr.cost, 0.0);
}

TEST(RiccatiSolve, OneStepClosedForm) {
    LqrProblem p;
    p.n = p.m = 3;
    p.h0 = Vector::Unit(3, 0);
    StepParams s;
    s.A = s.B = s.Q = s.R = Matrix::Identity(3, 3);
    p.steps = {s};
    const auto tr = riccati_solve(validate_problem(p));
    EXPECT_TRUE(tr.u[0].isApprox(-0.5 * Vector::Unit(3, 0), 1e-15));
    EXPECT_NEAR(tr.cost, 0.25, 1e-15);
}

TEST(RiccatiSolve, CostateBoundaries) {
    ConditioningSpec spec;
    spec.affine = true;
    const auto vp = random_validated(8, 5, 3, 9, spec);
    const auto tr = riccati_solve(vp);
    const auto& p = vp.problem();
    EXPECT_LE(rel_diff(tr.lambda.back(), p.steps.back().Q * tr.h.back()), 1e-12);
    EXPECT_LE(rel_diff(tr.lambda[0], p.step(1).A.transpose() * tr.lambda[1]), 1e-12);
    EXPECT_LE(dynamics_residual(vp, tr), 1e-12);
    // λ_t = P_t h_t + p_t
    const auto vb = riccati_backup(vp);
    for (Index t = 1; t <= 9; ++t)
        EXPECT_LE(rel_diff(tr.lambda[t], vb.P[t - 1] * tr.h[t] + vb.p[t - 1]), 1e-10);
}

TEST(RiccatiSolve, BellmanOneStepArgmin) {
    const auto vp = random_validated(9, 4, 3, 12);
    const auto vb = riccati_backup(vp);
    const auto tr = riccati_rollout(vp, vb);
    for (Index t : {1, 5, 12}) {
        // argmin_u ½uᵀRu + V_t(A h + B u), re-derived from scratch
        const auto& s = vp.problem().step(t);
        const Matrix& P = vb.P[t - 1];
        const Matrix H = s.R + s.B.transpose() * P * s.B;
        const Vector g = s.B.transpose() * (P * s.A * tr.h[t - 1] + vb.p[t - 1]);
        const Vector u = -H.ldlt().solve(g);
        EXPECT_LE(rel_diff(u, tr.u[t - 1]), 1e-10);
    }
}

TEST(RiccatiSolve, LinearInitialState) {
    LqrProblem p = random_problem(10, 4, 2, 8);
    const auto u1 = riccati_solve(validate_problem(p)).u[0];
    p.h0 *= -2.5;
    const auto u2 = riccati_solve(validate_problem(p)).u[0];
    EXPECT_LE(rel_diff(u2, Vector(-2.5 * u1)), 1e-12);
}

TEST(RiccatiSolve, StructuredFormsMatchDense) {
    ConditioningSpec spec;
    spec.a_form = AForm::Diagonal;
    spec.r_form = RForm::DiagonalInverse;
    spec.affine = true;
    const auto vp = random_validated(12, 5, 5, 10, spec);
    LqrProblem d = vp.problem();
    for (auto& s : d.steps) {
        s.A = s.A_dense();
        s.a_form = AForm::Dense;
        s.R = s.R_dense();
        s.r_form = RForm::Dense;
    }
    const auto a = riccati_solve(vp), b = riccati_solve(validate_problem(d));
    EXPECT_LE(rel_diff(a.u[0], b.u[0]), 1e-13);
    EXPECT_LE(rel_diff(a.cost, b.cost), 1e-13);
}

TEST(ValueAt, Scalar) {
    const auto vb = riccati_backup(scalar_validated());
    EXPECT_NEAR(value_at(vb, 1, Vector::Ones(1)), 0.75, 1e-15);
    EXPECT_EQ(value_at(vb, 2, Vector::Zero(1)), 0.0);
    EXPECT_THROW(value_at(vb, 0, Vector::Ones(1)), LqrError);
    EXPECT_THROW(value_at(vb, 3, Vector::Ones(1)), LqrError);
}

TEST(ValueAt, TerminalIsHalfQuadratic) {
    const auto vp = random_validated(13, 4, 2, 5);
    const auto vb = riccati_backup(vp);
    const Vector h = Vector::LinSpaced(4, -1, 2);
    EXPECT_EQ(value_at(vb, 5, h), 0.5 * h.dot(vp.problem().step(5).Q * h));
}

TEST(ValueAt, CostMatchesValuePlusFirstStage) {
    // total cost = min_u1 [½u1ᵀR1u1 + V_1(A1h0 + B1u1)] with r = 0
    const auto vp = random_validated(14, 3, 3, 6);
    const auto vb = riccati_backup(vp);
    const auto tr = riccati_rollout(vp, vb);
    const auto& s = vp.problem().step(1);
    const double stage = 0.5 * tr.u[0].dot(s.R * tr.u[0]);
    EXPECT_LE(rel_diff(tr.cost, stage + value_at(vb, 1, tr.h[1])), 1e-12);
}
