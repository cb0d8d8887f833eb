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

#include "symlqr/problem.hpp"

#include <Eigen/SVD>
#include <boost/container_hash/hash.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace symlqr {

// ---------------------------------------------------------------- StepParams

Matrix StepParams::A_dense() const {
    if (a_form == AForm::Diagonal) return a_diag.asDiagonal();
    return A;
}

Matrix StepParams::R_dense() const {
    switch (r_form) {
        case RForm::Dense: return R;
        case RForm::Diagonal: return r_diag.asDiagonal();
        case RForm::DiagonalInverse: return r_diag.cwiseInverse().asDiagonal();
    }
    return R;
}

Matrix StepParams::R_inverse_dense() const {
    switch (r_form) {
        case RForm::Dense: return R.llt().solve(Matrix::Identity(R.rows(), R.cols()));
        case RForm::Diagonal: return r_diag.cwiseInverse().asDiagonal();
        case RForm::DiagonalInverse: return r_diag.asDiagonal();
    }
    return {};
}

Vector StepParams::affine_or_zero() const {
    if (affine) return *affine;
    return Vector::Zero(control_dim());
}

// ------------------------------------------------------------------ checking

InvalidProblem::InvalidProblem(std::vector<Violation> violations)
    : LqrError(violations.empty() ? ErrorCode::InvalidArgument : violations.front().code,
               [&] {
                   std::ostringstream os;
                   os << violations.size() << " violation(s)";
                   for (const auto& v : violations) {
                       os << "; " << to_string(v.code);
                       if (v.step) os << "(" << *v.step << ", " << v.which << ")";
                       if (!v.message.empty()) os << " " << v.message;
                   }
                   return os.str();
               }(),
               violations.empty() ? std::nullopt : violations.front().step),
      violations_(std::move(violations)) {}

namespace {

double inf_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    return M.cwiseAbs().rowwise().sum().maxCoeff();
}

double asymmetry(const Matrix& M) {
    const double scale = inf_norm(M);
    const double d = inf_norm(M - M.transpose());
    if (d == 0.0) return 0.0;
    return scale > 0.0 ? d / scale : std::numeric_limits<double>::infinity();
}

double min_sym_eigenvalue(const Matrix& M) {
    const Matrix S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

struct Checker {
    const Tolerances& tol;
    std::vector<Violation> out;

    void add(ErrorCode c, std::optional<Index> t, std::string which, std::string msg = {}) {
        out.push_back({c, t, std::move(which), std::move(msg)});
    }

    bool dims(Index t, const std::string& which, Index rows, Index cols, Index er, Index ec) {
        if (rows == er && cols == ec) return true;
        std::ostringstream os;
        os << "expected " << er << "x" << ec << ", got " << rows << "x" << cols;
        add(ErrorCode::DimensionMismatch, t, which, os.str());
        return false;
    }

    void check_step(const LqrProblem& p, Index t, const StepParams& s, const StepParams& first) {
        const Index n = p.n, m = p.m;
        bool ok = true;
        if (s.a_form != first.a_form) {
            add(ErrorCode::DimensionMismatch, t, "A", "structure differs from step 1");
            ok = false;
        }
        if (s.r_form != first.r_form) {
            add(ErrorCode::DimensionMismatch, t, "R", "structure differs from step 1");
            ok = false;
        }
        if (s.a_form == AForm::Dense)
            ok &= dims(t, "A", s.A.rows(), s.A.cols(), n, n);
        else
            ok &= dims(t, "A", s.a_diag.size(), 1, n, 1);
        ok &= dims(t, "B", s.B.rows(), s.B.cols(), n, m);
        ok &= dims(t, "Q", s.Q.rows(), s.Q.cols(), n, n);
        if (s.r_form == RForm::Dense)
            ok &= dims(t, "R", s.R.rows(), s.R.cols(), m, m);
        else
            ok &= dims(t, "R", s.r_diag.size(), 1, m, 1);
        if (s.affine) ok &= dims(t, "r", s.affine->size(), 1, m, 1);
        if (!ok) return;

        auto finite = [&](const auto& M, const char* which) {
            if (M.allFinite()) return true;
            add(ErrorCode::NonFinite, t, which);
            return false;
        };
        const bool a_ok = s.a_form == AForm::Dense ? finite(s.A, "A") : finite(s.a_diag, "A");
        finite(s.B, "B");
        const bool q_ok = finite(s.Q, "Q");
        const bool r_ok = s.r_form == RForm::Dense ? finite(s.R, "R") : finite(s.r_diag, "R");
        if (s.affine) finite(*s.affine, "r");

        if (q_ok) {
            if (asymmetry(s.Q) > tol.symmetry_error_rel) add(ErrorCode::NotSymmetric, t, "Q");
            const double floor = -tol.psd_rel * inf_norm(s.Q);
            const double lmin = min_sym_eigenvalue(s.Q);
            if (lmin < floor) {
                std::ostringstream os;
                os << "min eigenvalue " << lmin;
                add(ErrorCode::NotPsd, t, "Q", os.str());
            }
        }
        if (r_ok) check_r(t, s);
        if (a_ok) check_a(t, s);
    }

    void check_r(Index t, const StepParams& s) {
        double lmin = 0.0, scale = 0.0;
        switch (s.r_form) {
            case RForm::Dense:
                if (asymmetry(s.R) > tol.symmetry_error_rel) add(ErrorCode::NotSymmetric, t, "R");
                lmin = min_sym_eigenvalue(s.R);
                scale = inf_norm(s.R);
                break;
            case RForm::Diagonal:
                lmin = s.r_diag.minCoeff();
                scale = s.r_diag.cwiseAbs().maxCoeff();
                break;
            case RForm::DiagonalInverse:
                // R = diag(1/ρ); every ρ must be strictly positive.
                if (s.r_diag.minCoeff() <= 0.0) {
                    add(ErrorCode::NotPd, t, "R", "non-positive inverse diagonal");
                    return;
                }
                lmin = 1.0 / s.r_diag.maxCoeff();
                scale = 1.0 / s.r_diag.minCoeff();
                break;
        }
        const double floor = std::max(tol.pd_rel * scale, tol.pd_abs_floor);
        if (!(lmin >= floor)) {
            std::ostringstream os;
            os << "min eigenvalue " << lmin;
            add(ErrorCode::NotPd, t, "R", os.str());
        }
    }

    void check_a(Index t, const StepParams& s) {
        double smin = 0.0, smax = 0.0;
        if (s.a_form == AForm::Diagonal) {
            smin = s.a_diag.cwiseAbs().minCoeff();
            smax = s.a_diag.cwiseAbs().maxCoeff();
        } else {
            Eigen::JacobiSVD<Matrix> svd(s.A);
            const auto& sv = svd.singularValues();
            smax = sv(0);
            smin = sv(sv.size() - 1);
        }
        if (!(smin > 0.0) || smin < tol.inv_rel * smax) {
            std::ostringstream os;
            os << "min singular value " << smin;
            add(ErrorCode::SingularA, t, "A", os.str());
        }
    }
};

void symmetrize(Matrix& M) { M = 0.5 * (M + M.transpose()).eval(); }

}  // namespace

std::vector<Violation> check_problem(const LqrProblem& p, const Tolerances& tol) {
    Checker c{tol, {}};
    if (p.n <= 0 || p.m <= 0) {
        c.add(ErrorCode::DimensionMismatch, std::nullopt, "dims", "n and m must be positive");
        return c.out;
    }
    if (p.steps.empty()) {
        c.add(ErrorCode::DimensionMismatch, std::nullopt, "T", "horizon must be positive");
        return c.out;
    }
    if (p.h0.size() != p.n)
        c.add(ErrorCode::DimensionMismatch, std::nullopt, "h0", "length differs from n");
    else if (!p.h0.allFinite())
        c.add(ErrorCode::NonFinite, std::nullopt, "h0");
    for (Index t = 1; t <= p.horizon(); ++t) c.check_step(p, t, p.step(t), p.step(1));
    return c.out;
}

ValidatedProblem::ValidatedProblem(std::shared_ptr<const LqrProblem> p, std::vector<std::string> warnings)
    : problem_(std::move(p)), warnings_(std::move(warnings)) {
    has_affine_ = std::any_of(problem_->steps.begin(), problem_->steps.end(),
                              [](const StepParams& s) { return s.affine.has_value(); });
    fingerprint_ = symlqr::fingerprint(*problem_);
}

ValidatedProblem ValidatedProblem::unchecked(LqrProblem problem) {
    return ValidatedProblem(std::make_shared<const LqrProblem>(std::move(problem)), {});
}

AForm ValidatedProblem::a_form() const {
    return problem_->steps.empty() ? AForm::Dense : problem_->steps.front().a_form;
}

RForm ValidatedProblem::r_form() const {
    return problem_->steps.empty() ? RForm::Dense : problem_->steps.front().r_form;
}

const StepParams& ValidatedProblem::step(Index t, StepParams&) const {
    if (t < 1 || t > horizon())
        throw LqrError(ErrorCode::IndexOutOfRange, "step index", t);
    return problem_->step(t);
}

ValidatedProblem validate_problem(LqrProblem p, const Tolerances& tol) {
    auto violations = check_problem(p, tol);
    if (!violations.empty()) throw InvalidProblem(std::move(violations));

    std::vector<std::string> warnings;
    for (Index t = 1; t <= p.horizon(); ++t) {
        StepParams& s = p.step(t);
        if (asymmetry(s.Q) > tol.symmetry_warn_rel)
            warnings.push_back("Q_" + std::to_string(t) + " symmetrized (asymmetry above warning level)");
        symmetrize(s.Q);
        if (s.r_form == RForm::Dense) {
            if (asymmetry(s.R) > tol.symmetry_warn_rel)
                warnings.push_back("R_" + std::to_string(t) + " symmetrized (asymmetry above warning level)");
            symmetrize(s.R);
        }
    }
    return ValidatedProblem(std::make_shared<const LqrProblem>(std::move(p)), std::move(warnings));
}

LqrProblem materialize(const StepSource& src) {
    LqrProblem p;
    p.n = src.state_dim();
    p.m = src.control_dim();
    p.h0 = src.initial_state();
    p.steps.reserve(static_cast<std::size_t>(src.horizon()));
    StepParams scratch;
    for (Index t = 1; t <= src.horizon(); ++t) p.steps.push_back(src.step(t, scratch));
    return p;
}

namespace {

template <typename Derived>
void hash_dense(std::size_t& seed, const Eigen::DenseBase<Derived>& M) {
    boost::hash_combine(seed, M.rows());
    boost::hash_combine(seed, M.cols());
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) boost::hash_combine(seed, M(i, j));
}

}  // namespace

std::uint64_t fingerprint(const LqrProblem& p) {
    std::size_t seed = 0;
    boost::hash_combine(seed, p.n);
    boost::hash_combine(seed, p.m);
    hash_dense(seed, p.h0);
    for (const auto& s : p.steps) {
        boost::hash_combine(seed, static_cast<int>(s.a_form));
        boost::hash_combine(seed, static_cast<int>(s.r_form));
        if (s.a_form == AForm::Dense) hash_dense(seed, s.A); else hash_dense(seed, s.a_diag);
        hash_dense(seed, s.B);
        hash_dense(seed, s.Q);
        if (s.r_form == RForm::Dense) hash_dense(seed, s.R); else hash_dense(seed, s.r_diag);
        boost::hash_combine(seed, s.affine.has_value());
        if (s.affine) hash_dense(seed, *s.affine);
    }
    return static_cast<std::uint64_t>(seed);
}

// ------------------------------------------------------------ cost / rollout

namespace {

Vector apply_A(const StepParams& s, const Vector& x) {
    if (s.a_form == AForm::Diagonal) return s.a_diag.cwiseProduct(x);
    return s.A * x;
}

Vector apply_R(const StepParams& s, const Vector& u) {
    switch (s.r_form) {
        case RForm::Dense: return s.R * u;
        case RForm::Diagonal: return s.r_diag.cwiseProduct(u);
        case RForm::DiagonalInverse: return u.cwiseQuotient(s.r_diag);
    }
    return u;
}

}  // namespace

double evaluate_cost(const StepSource& p, const std::vector<Vector>& states,
                     const std::vector<Vector>& actions) {
    const Index T = p.horizon();
    if (static_cast<Index>(states.size()) != T + 1 || static_cast<Index>(actions.size()) != T)
        throw LqrError(ErrorCode::DimensionMismatch, "trajectory length differs from horizon");
    StepParams scratch;
    double cost = 0.0;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = p.step(t, scratch);
        const Vector& h = states[static_cast<std::size_t>(t)];
        const Vector& u = actions[static_cast<std::size_t>(t - 1)];
        if (h.size() != p.state_dim() || u.size() != p.control_dim())
            throw LqrError(ErrorCode::DimensionMismatch, "trajectory vector size", t);
        cost += 0.5 * (h.dot(s.Q * h) + u.dot(apply_R(s, u)));
        if (s.affine) cost += s.affine->dot(u);
    }
    return cost;
}

std::vector<Vector> rollout(const StepSource& p, const std::vector<Vector>& actions) {
    const Index T = p.horizon();
    if (static_cast<Index>(actions.size()) != T)
        throw LqrError(ErrorCode::DimensionMismatch, "action count differs from horizon");
    std::vector<Vector> h;
    h.reserve(static_cast<std::size_t>(T + 1));
    h.push_back(p.initial_state());
    StepParams scratch;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = p.step(t, scratch);
        const Vector& u = actions[static_cast<std::size_t>(t - 1)];
        if (u.size() != p.control_dim())
            throw LqrError(ErrorCode::DimensionMismatch, "action size", t);
        h.push_back(apply_A(s, h.back()) + s.B * u);
    }
    return h;
}

double dynamics_residual(const StepSource& p, const LqrTrajectory& traj) {
    const Index T = p.horizon();
    if (traj.horizon() != T || static_cast<Index>(traj.h.size()) != T + 1)
        throw LqrError(ErrorCode::DimensionMismatch, "trajectory length differs from horizon");
    double worst = (traj.h[0] - p.initial_state()).cwiseAbs().maxCoeff();
    StepParams scratch;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = p.step(t, scratch);
        const auto tt = static_cast<std::size_t>(t);
        const Vector r = traj.h[tt] - apply_A(s, traj.h[tt - 1]) - s.B * traj.u[tt - 1];
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    return worst;
}

double TrajectoryDiff::max() const { return std::max({h, u, lambda, cost}); }

double sequence_rel_diff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double d = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return std::numeric_limits<double>::infinity();
        if (a[i].size() == 0) continue;
        d = std::max(d, (a[i] - b[i]).cwiseAbs().maxCoeff());
        scale = std::max({scale, a[i].cwiseAbs().maxCoeff(), b[i].cwiseAbs().maxCoeff()});
    }
    if (d == 0.0) return 0.0;
    return scale > 0.0 ? d / scale : d;
}

TrajectoryDiff compare(const LqrTrajectory& a, const LqrTrajectory& b) {
    TrajectoryDiff d;
    d.h = sequence_rel_diff(a.h, b.h);
    d.u = sequence_rel_diff(a.u, b.u);
    d.lambda = sequence_rel_diff(a.lambda, b.lambda);
    d.cost = rel_diff(a.cost, b.cost);
    return d;
}

// ------------------------------------------------------------------ generator

namespace {

using Engine = boost::random::mt19937_64;

Engine keyed_engine(std::uint64_t seed, std::uint64_t t, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32),
                      static_cast<std::uint32_t>(salt)};
    return Engine(seq);
}

Matrix gaussian(Engine& eng, Index rows, Index cols) {
    boost::random::normal_distribution<double> nd(0.0, 1.0);
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) M(i, j) = nd(eng);
    return M;
}

Vector uniform(Engine& eng, Index size, double lo, double hi) {
    boost::random::uniform_real_distribution<double> ud(lo, hi);
    Vector v(size);
    for (Index i = 0; i < size; ++i) v(i) = ud(eng);
    return v;
}

Matrix random_orthogonal(Engine& eng, Index n) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(eng, n, n));
    Matrix Qm = qr.householderQ();
    const Matrix Rm = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < n; ++j)
        if (Rm(j, j) < 0) Qm.col(j) *= -1.0;
    return Qm;
}


void set_r(StepParams& s, RForm form, const Vector& diag_of_r) {
    s.r_form = form;
    switch (form) {
        case RForm::Dense: s.R = diag_of_r.asDiagonal(); break;
        case RForm::Diagonal: s.r_diag = diag_of_r; break;
        case RForm::DiagonalInverse: s.r_diag = diag_of_r.cwiseInverse(); break;
    }
}

StepParams stable_step(Engine& eng, Index n, Index m, const ConditioningSpec& spec) {
    StepParams s;
    const double radius = std::clamp(spec.a_radius, 1e-3, 1e3);
    const double spread = std::clamp(spec.a_spread, 0.0, 0.9);
    s.a_form = spec.a_form;
    if (spec.a_form == AForm::Diagonal) {
        s.a_diag = uniform(eng, n, (1.0 - spread) * radius, radius);
    } else {
        // U·diag(σ)·Vᵀ with σ in [(1 − spread)·radius, radius]; the spectral
        // radius is bounded by σ_max.
        const Matrix U = random_orthogonal(eng, n);
        const Matrix V = random_orthogonal(eng, n);
        s.A = U * uniform(eng, n, (1.0 - spread) * radius, radius).asDiagonal() * V.transpose();
    }
    s.B = std::max(spec.b_scale, 0.0) * gaussian(eng, n, m) / std::sqrt(double(m));
    const Matrix M = gaussian(eng, n, n);
    s.Q = std::max(spec.q_scale, 0.0) * (M * M.transpose()) / double(n);
    const double floor = std::max(spec.r_floor, 1e-6);
    if (spec.r_form == RForm::Dense) {
        const Matrix L = gaussian(eng, m, m);
        s.r_form = RForm::Dense;
        s.R = floor * Matrix::Identity(m, m) + 0.5 * (L * L.transpose()) / double(m);
    } else {
        set_r(s, spec.r_form, uniform(eng, m, floor, floor + 1.0));
    }
    return s;
}

StepParams unstable_step(Engine& eng, Index n, Index m, const ConditioningSpec& spec) {
    StepParams s;
    const double lo = std::max(spec.growth_min, 1.0 + 1e-6);
    const double hi = std::max(spec.growth_max, lo);
    const double a = uniform(eng, 1, lo, hi)(0);
    s.a_form = spec.a_form;
    if (spec.a_form == AForm::Diagonal)
        s.a_diag = Vector::Constant(n, a);
    else
        s.A = a * random_orthogonal(eng, n);
    s.B = std::max(spec.b_scale, 1e-6) * random_orthogonal(eng, n).leftCols(m);
    s.Q = std::max(spec.q_scale, 0.0) * uniform(eng, 1, 0.5, 1.0)(0) * Matrix::Identity(n, n);
    const double floor = std::max(spec.r_floor, 1e-6);
    set_r(s, spec.r_form, Vector::Constant(m, uniform(eng, 1, floor, floor + 1.0)(0)));
    return s;
}

}  // namespace

LqrProblem random_problem(std::uint64_t seed, Index n, Index m, Index T, const ConditioningSpec& spec) {
    n = std::max<Index>(n, 1);
    m = std::max<Index>(m, 1);
    T = std::max<Index>(T, 1);
    LqrProblem p;
    p.n = n;
    p.m = m;
    {
        Engine eng = keyed_engine(seed, 0, 0x68);
        p.h0 = spec.h0_scale * gaussian(eng, n, 1);
    }
    p.steps.reserve(static_cast<std::size_t>(T));
    for (Index t = 1; t <= T; ++t) {
        Engine eng = keyed_engine(seed, static_cast<std::uint64_t>(t), 0x73);
        StepParams s = spec.family == ProblemFamily::Unstable ? unstable_step(eng, n, m, spec)
                                                              : stable_step(eng, n, m, spec);
        if (spec.affine) s.affine = gaussian(eng, m, 1);
        p.steps.push_back(std::move(s));
    }
    return p;
}

}  // namespace symlqr
