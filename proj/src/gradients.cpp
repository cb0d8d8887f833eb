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

#include "symlqr/gradients.hpp"

#include <cmath>

namespace symlqr {

LqrGradients LqrGradients::zeros(Index n, Index m, Index T) {
    LqrGradients g;
    const auto TT = static_cast<std::size_t>(T);
    g.gA.assign(TT, Matrix::Zero(n, n));
    g.gB.assign(TT, Matrix::Zero(n, m));
    g.gQ.assign(TT, Matrix::Zero(n, n));
    g.gR.assign(TT, Matrix::Zero(m, m));
    g.g_h0 = Vector::Zero(n);
    return g;
}

LqrGradients& LqrGradients::operator+=(const LqrGradients& o) {
    if (o.horizon() != horizon()) throw LqrError(ErrorCode::DimensionMismatch, "gradient horizons differ");
    for (std::size_t i = 0; i < gA.size(); ++i) {
        gA[i] += o.gA[i];
        gB[i] += o.gB[i];
        gQ[i] += o.gQ[i];
        gR[i] += o.gR[i];
    }
    g_h0 += o.g_h0;
    return *this;
}

LqrGradients& LqrGradients::operator*=(double s) {
    for (std::size_t i = 0; i < gA.size(); ++i) {
        gA[i] *= s;
        gB[i] *= s;
        gQ[i] *= s;
        gR[i] *= s;
    }
    g_h0 *= s;
    return *this;
}

double GradientDiff::max() const { return std::max({A, B, Q, R, h0}); }

namespace {

// Norm-wise over the whole tensor family: largest entry difference across all
// steps over the largest entry magnitude.
double worst(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    if (a.size() != b.size()) throw LqrError(ErrorCode::DimensionMismatch, "gradient horizons differ");
    double d = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() == 0) continue;
        d = std::max(d, (a[i] - b[i]).cwiseAbs().maxCoeff());
        scale = std::max({scale, a[i].cwiseAbs().maxCoeff(), b[i].cwiseAbs().maxCoeff()});
    }
    if (d == 0.0) return 0.0;
    return scale > 0.0 ? d / scale : d;
}

bool close(const Matrix& a, const Matrix& b, double rel, double abs) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) {
            const double x = a(i, j), y = b(i, j);
            const double tol = std::max(rel * std::max(std::abs(x), std::abs(y)), abs);
            if (!(std::abs(x - y) <= tol)) return false;
        }
    return true;
}

bool close(const std::vector<Matrix>& a, const std::vector<Matrix>& b, double rel, double abs) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!close(a[i], b[i], rel, abs)) return false;
    return true;
}

}  // namespace

GradientDiff compare(const LqrGradients& a, const LqrGradients& b) {
    GradientDiff d;
    d.A = worst(a.gA, b.gA);
    d.B = worst(a.gB, b.gB);
    d.Q = worst(a.gQ, b.gQ);
    d.R = worst(a.gR, b.gR);
    d.h0 = rel_diff(a.g_h0, b.g_h0);
    return d;
}

bool within(const LqrGradients& a, const LqrGradients& b, double rel, double abs) {
    return close(a.gA, b.gA, rel, abs) && close(a.gB, b.gB, rel, abs) && close(a.gQ, b.gQ, rel, abs) &&
           close(a.gR, b.gR, rel, abs) && close(Matrix(a.g_h0), Matrix(b.g_h0), rel, abs);
}

LqrGradients combine(const LqrTrajectory& x, const LqrTrajectory& d) {
    const Index T = x.horizon();
    if (d.horizon() != T) throw LqrError(ErrorCode::DimensionMismatch, "primal and dual horizons differ");
    LqrGradients g;
    const auto TT = static_cast<std::size_t>(T);
    g.gA.resize(TT);
    g.gB.resize(TT);
    g.gQ.resize(TT);
    g.gR.resize(TT);
    for (std::size_t i = 0; i < TT; ++i) {
        // step t = i + 1
        g.gA[i] = x.lambda[i + 1] * d.h[i].transpose() + d.lambda[i + 1] * x.h[i].transpose();
        g.gB[i] = x.lambda[i + 1] * d.u[i].transpose() + d.lambda[i + 1] * x.u[i].transpose();
        const Matrix hq = x.h[i + 1] * d.h[i + 1].transpose();
        g.gQ[i] = 0.5 * (hq + hq.transpose());
        const Matrix ur = x.u[i] * d.u[i].transpose();
        g.gR[i] = 0.5 * (ur + ur.transpose());
    }
    g.g_h0 = d.lambda[0];
    return g;
}

Vector diag_a_grad(const Matrix& gA) { return gA.diagonal(); }

Vector inverse_r_grad(const Matrix& gR, const Vector& rho) {
    return -gR.diagonal().cwiseQuotient(rho.cwiseAbs2());
}

Vector diag_r_grad(const Matrix& gR) { return gR.diagonal(); }

}  // namespace symlqr
