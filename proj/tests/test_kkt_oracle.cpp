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
#include "symlqr/kkt_oracle.hpp"
#include "symlqr/riccati.hpp"

#include <gtest/gtest.h>

using namespace symlqr;
using symlqr::testing::random_validated;
using symlqr::testing::scalar_validated;

TEST(Assemble, ScalarLayout) {
    const auto sys = assemble(scalar_validated());
    EXPECT_EQ(sys.layout.primal_dim() + sys.layout.dual_dim(), 8);
    Eigen::RowVectorXd first(5);
    first << -1, 0, 0, 0, 0;
    EXPECT_EQ(Eigen::RowVectorXd(sys.F.row(0)), first);
    EXPECT_EQ(sys.saddle(), sys.saddle().transpose());
}

TEST(Assemble, SmallestInstance) {
    LqrProblem p;
    p.n = p.m = 1;
    p.h0 = Vector::Constant(1, 2.0);
    p.steps = {symlqr::testing::scalar_step(3, 5, 7, 11)};
    const auto sys = assemble(validate_problem(p));
    Matrix C(3, 3), F(2, 3);
    C << 0, 0, 0, 0, 7, 0, 0, 0, 11;
    F << -1, 0, 0, 3, -1, 5;
    EXPECT_EQ(sys.C, C);
    EXPECT_EQ(sys.F, F);
    EXPECT_EQ(sys.b, Eigen::Vector2d(-2, 0));
}

TEST(Assemble, OnlyBDependsOnInitialState) {
    LqrProblem p = random_problem(1, 3, 2, 3);
    const auto a = assemble(validate_problem(p));
    p.h0 *= 7;
    const auto b = assemble(validate_problem(p));
    EXPECT_EQ(a.C, b.C);
    EXPECT_EQ(a.F, b.F);
    EXPECT_NE(a.b, b.b);
}

TEST(Assemble, SizeGuard) {
    const auto vp = random_validated(1, 40, 40, 64);
    try {
        assemble(vp);
        FAIL();
    } catch (const LqrError& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooLarge);
    }
}

TEST(OracleSolve, Scalar) {
    const auto tr = oracle_solve(scalar_validated());
    const double h[] = {1, 0.4, 0.2}, u[] = {-0.6, -0.2}, l[] = {0.6, 0.6, 0.2};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(tr.h[i](0), h[i], 1e-12);
        EXPECT_NEAR(tr.lambda[i](0), l[i], 1e-12);
    }
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(tr.u[i](0), u[i], 1e-12);
    EXPECT_NEAR(tr.cost, 0.3, 1e-12);
}

TEST(OracleSolve, Homogeneous) {
    LqrProblem p = random_problem(2, 3, 3, 4);
    p.h0.setZero();
    const auto tr = oracle_solve(validate_problem(p));
    for (const auto& h : tr.h) EXPECT_TRUE(h.isZero(1e-300));
}

TEST(OracleSolve, MatchesRiccatiOnHundredProblems) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ConditioningSpec spec;
        spec.affine = seed % 2 == 0;
        spec.a_form = seed % 3 == 0 ? AForm::Diagonal : AForm::Dense;
        const Index n = 1 + static_cast<Index>(seed % 5), m = 1 + static_cast<Index>(seed % 3);
        const auto vp = random_validated(seed, n, m, 1 + static_cast<Index>(seed % 9), spec);
        const auto a = oracle_solve(vp), b = riccati_solve(vp);
        worst = std::max(worst, rel_diff(a.cost, b.cost));
        for (std::size_t i = 0; i < a.u.size(); ++i) worst = std::max(worst, rel_diff(a.u[i], b.u[i]));
        for (std::size_t i = 0; i < a.lambda.size(); ++i)
            worst = std::max(worst, rel_diff(a.lambda[i], b.lambda[i]));
        EXPECT_LE(kkt_residual(vp, a), 1e-9);
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(OracleGradients, ScalarHandValues) {
    const auto g = oracle_gradients(scalar_validated(), Vector::Ones(1));
    EXPECT_NEAR(g.g_h0(0), -0.6, 1e-12);
    EXPECT_NEAR(g.gA[0](0, 0), -0.6, 1e-12);
    EXPECT_NEAR(g.gB[0](0, 0), 0.12, 1e-12);
    EXPECT_NEAR(g.gR[0](0, 0), 0.24, 1e-12);
    EXPECT_NEAR(g.gQ[0](0, 0), -0.16, 1e-12);
    EXPECT_NEAR(g.gQ[1](0, 0), -0.04, 1e-12);
    EXPECT_NEAR(g.gR[1](0, 0), -0.04, 1e-12);
}

TEST(OracleGradients, ZeroLossGradAndSymmetry) {
    const auto vp = random_validated(3, 4, 3, 5);
    const auto z = oracle_gradients(vp, Vector::Zero(3));
    for (Index i = 0; i < 5; ++i) {
        EXPECT_TRUE(z.gA[i].isZero(0.0));
        EXPECT_TRUE(z.gR[i].isZero(0.0));
    }
    const auto g = oracle_gradients(vp, Vector::LinSpaced(3, -1, 1));
    for (Index i = 0; i < 5; ++i) {
        EXPECT_EQ(g.gQ[i], g.gQ[i].transpose());
        EXPECT_EQ(g.gR[i], g.gR[i].transpose());
    }
}

TEST(FdGradients, ScalarMatchesOracle) {
    const auto vp = scalar_validated();
    const auto fd = fd_gradients(vp, Vector::Ones(1));
    const auto an = oracle_gradients(vp, Vector::Ones(1));
    EXPECT_TRUE(within(fd, an, 0.0, 1e-6));
    EXPECT_NEAR(fd.g_h0(0), -0.6, 1e-8);
}

TEST(FdGradients, ConstantLossIsZero) {
    const auto vp = random_validated(4, 2, 2, 3);
    const auto fd = fd_gradients(vp, [](const Vector&) { return 4.2; });
    EXPECT_TRUE(within(fd, LqrGradients::zeros(2, 2, 3), 0.0, 0.0));
}

TEST(FdGradients, OracleAgreementSmall) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        ConditioningSpec spec;
        spec.affine = seed % 2 == 1;
        spec.r_form = seed % 3 == 0 ? RForm::DiagonalInverse : RForm::Dense;
        const Index n = 1 + static_cast<Index>(seed % 4);
        const auto vp = random_validated(seed, n, n, 1 + static_cast<Index>(seed % 6), spec);
        const Vector g = Vector::LinSpaced(n, 0.5, -1.0);
        EXPECT_TRUE(within(fd_gradients(vp, g), oracle_gradients(vp, g), 1e-4, 1e-7)) << "seed " << seed;
    }
}
