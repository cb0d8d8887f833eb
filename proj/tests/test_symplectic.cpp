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
#include "symlqr/symplectic.hpp"

#include <gtest/gtest.h>

using namespace symlqr;
using symlqr::testing::random_validated;
using symlqr::testing::scalar_validated;

namespace {

SweepOptions raw() {
    SweepOptions o;
    o.normalize = false;
    return o;
}

double traj_diff(const LqrTrajectory& a, const LqrTrajectory& b) { return compare(a, b).max(); }

}  // namespace

TEST(MaterializeStep, ScalarSigma) {
    const auto vp = scalar_validated();
    Matrix S1(2, 2), S2(2, 2);
    S1 << 1, 0, 1, 1;
    S2 << 1, 1, 1, 2;
    EXPECT_TRUE(materialize_step(vp, 1, StepMatrix::Sigma).isApprox(S1, 1e-15));
    EXPECT_TRUE(materialize_step(vp, 2, StepMatrix::Sigma).isApprox(S2, 1e-15));
    EXPECT_THROW(materialize_step(vp, 3, StepMatrix::S), LqrError);
}

TEST(MaterializeStep, SymplecticAndInverseTranspose) {
    const Index n = 4;
    const Matrix J = symplectic_form(n);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto vp = random_validated(seed, n, 3, 5);
        for (Index t = 1; t <= 5; ++t, ++checked) {
            const Matrix Sig = materialize_step(vp, t, StepMatrix::Sigma);
            const Matrix S = materialize_step(vp, t, StepMatrix::S);
            EXPECT_LE((Sig.transpose() * J * Sig - J).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_LE((S.transpose() * J * S - J).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_LE((Sig - S.inverse().transpose()).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_NEAR(Sig.determinant(), 1.0, 1e-8);
        }
    }
    EXPECT_EQ(checked, 50);
}

TEST(ReverseSweep, ScalarUnnormalized) {
    const auto acc = reverse_sweep(scalar_validated(), raw());
    EXPECT_NEAR(acc.Y1(0, 0), 5.0, 1e-14);
    EXPECT_NEAR(acc.Y2(0, 0), 3.0, 1e-14);
    EXPECT_EQ(acc.y3(0), 0.0);
    EXPECT_NEAR(acc.Y3cache(0, 0), 3.0, 1e-14);
}

TEST(ReverseSweep, ProductMatchesMaterialized) {
    ConditioningSpec spec;
    spec.affine = true;
    const auto vp = random_validated(21, 3, 2, 6, spec);
    const Index n = 3;
    Matrix Y(n, 2 * n);
    Y << Matrix::Identity(n, n), vp.problem().steps.back().Q;
    for (Index t = 6; t >= 1; --t) Y = Y * materialize_step(vp, t, StepMatrix::Sigma);
    const auto acc = reverse_sweep(vp, raw());
    EXPECT_LE(rel_diff(acc.Y1, Y.leftCols(n)), 1e-12);
    EXPECT_LE(rel_diff(acc.Y2, Y.rightCols(n)), 1e-12);
}

TEST(ReverseSweep, RowsNormalized) {
    const auto vp = random_validated(22, 6, 6, 20);
    const auto acc = reverse_sweep(vp);
    for (Index i = 0; i < 6; ++i)
        EXPECT_NEAR(std::max(acc.Y1.row(i).lpNorm<1>(), acc.Y2.row(i).lpNorm<1>()), 1.0, 1e-14);
}

TEST(ReverseSweep, ZeroTerminalCostOneStep) {
    ConditioningSpec spec;
    spec.affine = true;
    LqrProblem p = random_problem(23, 3, 2, 1, spec);
    p.steps[0].Q.setZero();
    const auto vp = validate_problem(p);
    const auto fa = first_action(reverse_sweep(vp), vp, vp.initial_state());
    EXPECT_TRUE(fa.lambda0.isZero(1e-15));
    EXPECT_LE(rel_diff(fa.u1, Vector(-p.steps[0].R.llt().solve(*p.steps[0].affine))), 1e-14);
}

TEST(ReverseSweep, OverflowWithoutNormalization) {
    ConditioningSpec spec;
    spec.family = ProblemFamily::Unstable;
    const auto vp = random_validated(24, 4, 4, 2048, spec);
    try {
        reverse_sweep(vp, raw());
        FAIL() << "expected overflow";
    } catch (const LqrError& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteAccumulator);
        ASSERT_TRUE(e.step().has_value());
    }
    const auto fa = first_action(reverse_sweep(vp), vp, vp.initial_state());
    const auto ref = riccati_solve(vp);
    EXPECT_LE(rel_diff(fa.lambda0, ref.lambda[0]), 1e-4);
}

TEST(ReverseSweep, NormalizationNeutral) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ConditioningSpec spec;
        spec.affine = seed % 2 == 1;
        const auto vp = random_validated(seed, 5, 4, 32, spec);
        const auto a = first_action(reverse_sweep(vp), vp, vp.initial_state());
        const auto b = first_action(reverse_sweep(vp, raw()), vp, vp.initial_state());
        EXPECT_LE(rel_diff(a.lambda0, b.lambda0), 1e-8);
    }
}

TEST(ReverseSweep, BlockRowsIndependent) {
    ConditioningSpec spec;
    spec.affine = true;
    const auto vp = random_validated(25, 8, 8, 40, spec);
    const auto mono = first_action(reverse_sweep(vp), vp, vp.initial_state());
    for (Index blocks : {2, 3, 8}) {
        for (Index threads : {1, 2}) {
            SweepOptions o;
            o.row_blocks = blocks;
            o.threads = threads;
            CounterScope scope;
            const auto fa = first_action(reverse_sweep(vp, o), vp, vp.initial_state());
            EXPECT_LE(rel_diff(fa.lambda0, mono.lambda0), 1e-10);
            EXPECT_EQ(scope.delta().reverse_steps, 40u);
        }
    }
}

TEST(ReverseSweep, ThreadedErrorPropagates) {
    ConditioningSpec spec;
    spec.family = ProblemFamily::Unstable;
    const auto vp = random_validated(26, 4, 4, 2048, spec);
    SweepOptions o = raw();
    o.row_blocks = 4;
    o.threads = 2;
    EXPECT_THROW(reverse_sweep(vp, o), LqrError);
}

TEST(FirstAction, Scalar) {
    const auto vp = scalar_validated();
    const auto fa = first_action(reverse_sweep(vp), vp, vp.initial_state());
    EXPECT_NEAR(fa.lambda0(0), 0.6, 1e-15);
    EXPECT_NEAR(fa.u1(0), -0.6, 1e-15);
}

TEST(FirstAction, HomogeneousAndCostFree) {
    LqrProblem p = random_problem(27, 4, 3, 6);
    p.h0.setZero();
    auto vp = validate_problem(p);
    auto fa = first_action(reverse_sweep(vp), vp, vp.initial_state());
    EXPECT_TRUE(fa.lambda0.isZero(0.0));
    EXPECT_TRUE(fa.u1.isZero(0.0));

    p = random_problem(27, 4, 3, 6);
    for (auto& s : p.steps) s.Q.setZero();
    vp = validate_problem(p);
    const auto acc = reverse_sweep(vp);
    EXPECT_TRUE(acc.Y2.isZero(0.0));
    fa = first_action(acc, vp, vp.initial_state());
    EXPECT_TRUE(fa.lambda0.isZero(0.0));
    EXPECT_TRUE(fa.u1.isZero(0.0));
}

TEST(FirstAction, SingularY1Reported) {
    SymplecticAccumulator acc;
    acc.Y1 = Matrix::Zero(2, 2);
    acc.Y2 = Matrix::Identity(2, 2);
    acc.y3 = Vector::Zero(2);
    const auto vp = random_validated(1, 2, 2, 2);
    try {
        first_action(acc, vp, vp.initial_state());
        FAIL();
    } catch (const LqrError& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularY1);
    }
}

TEST(ForwardSweep, Scalar) {
    const auto vp = scalar_validated();
    const auto tr = forward_sweep(vp, vp.initial_state(), Vector::Constant(1, 0.6));
    const double h[] = {1, 0.4, 0.2}, u[] = {-0.6, -0.2}, l[] = {0.6, 0.6, 0.2};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(tr.h[i](0), h[i], 1e-15);
        EXPECT_NEAR(tr.lambda[i](0), l[i], 1e-15);
    }
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(tr.u[i](0), u[i], 1e-15);
}

TEST(ForwardSweep, ZeroSeedZeroTrajectory) {
    LqrProblem p = random_problem(28, 3, 3, 4);
    p.h0.setZero();
    const auto vp = validate_problem(p);
    const auto tr = forward_sweep(vp, vp.initial_state(), Vector::Zero(3));
    for (const auto& h : tr.h) EXPECT_TRUE(h.isZero(0.0));
}

TEST(ForwardSweep, OneStepTerminalIdentity) {
    const auto vp = random_validated(29, 4, 2, 1);
    const auto tr = symplectic_solve(vp);
    EXPECT_LE(rel_diff(tr.lambda[1], vp.problem().step(1).Q * tr.h[1]), 1e-12);
}

TEST(Solve, ScalarMatchesRiccati) {
    const auto vp = scalar_validated();
    EXPECT_LE(traj_diff(symplectic_solve(vp), riccati_solve(vp)), 1e-12);
}

TEST(Solve, RandomDenseMatchesRiccati) {
    const auto vp = random_validated(3, 8, 8, 32);
    EXPECT_LE(traj_diff(symplectic_solve(vp), riccati_solve(vp)), 1e-8);
}

TEST(Solve, AffineMatchesRiccati) {
    ConditioningSpec spec;
    spec.affine = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto vp = random_validated(seed, 6, 3, 16, spec);
        EXPECT_LE(traj_diff(symplectic_solve(vp), riccati_solve(vp)), 1e-8);
    }
}

TEST(Solve, DiagonalStructuredFactorsOnce) {
    ConditioningSpec spec;
    spec.a_form = AForm::Diagonal;
    for (auto rf : {RForm::Diagonal, RForm::DiagonalInverse}) {
        spec.r_form = rf;
        const auto vp = random_validated(30, 16, 16, 64, spec);
        CounterScope scope;
        const auto tr = symplectic_solve(vp);
        EXPECT_EQ(scope.delta().factorizations, 1u);
        EXPECT_EQ(scope.delta().reverse_steps, 64u);
        EXPECT_EQ(scope.delta().forward_steps, 64u);
        EXPECT_LE(traj_diff(tr, riccati_solve(vp)), 1e-8);
    }
}

TEST(Solve, Float32Sweep) {
    const auto vp = random_validated(31, 6, 6, 16);
    SweepOptions o;
    o.precision = Precision::Float32;
    const auto a = symplectic_solve(vp, o);
    const auto b = riccati_solve(vp);
    EXPECT_LE(rel_diff(a.u[0], b.u[0]), 1e-3);
}
