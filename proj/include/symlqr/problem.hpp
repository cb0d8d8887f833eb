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

// Finite-horizon LQR problem model.
//
//   min  Σ_{t=1..T} ½(h_tᵀQ_t h_t + u_tᵀR_t u_t) + r_tᵀu_t
//   s.t. h_t = A_t h_{t-1} + B_t u_t,   h_0 = h_init
//
// Q_T doubles as the terminal cost. Q_0 is never stored; every solver treats
// it as the zero matrix. Steps are indexed t = 1..T throughout the API.

#pragma once

#include "symlqr/core.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace symlqr {

enum class AForm { Dense, Diagonal };
enum class RForm { Dense, Diagonal, DiagonalInverse };

/// Parameters of one horizon step. Which storage is live depends on the form
/// tags: `A` for dense A, `a_diag` for diagonal A; `R` for dense R, `r_diag`
/// holding diag(R) or diag(R⁻¹) for the two diagonal forms.
struct StepParams {
    AForm a_form = AForm::Dense;
    Matrix A;
    Vector a_diag;
    Matrix B;
    Matrix Q;
    RForm r_form = RForm::Dense;
    Matrix R;
    Vector r_diag;
    std::optional<Vector> affine;  // r_t

    Index state_dim() const { return B.rows(); }
    Index control_dim() const { return B.cols(); }

    Matrix A_dense() const;
    Matrix R_dense() const;
    /// R⁻¹ as a dense matrix. Diagonal forms are exact reciprocals; the dense
    /// form goes through a Cholesky solve and is meant for tests and oracles.
    Matrix R_inverse_dense() const;
    Vector affine_or_zero() const;
};

struct LqrProblem {
    Index n = 0;  // state dim
    Index m = 0;  // control dim
    Vector h0;
    std::vector<StepParams> steps;  // steps[t-1] holds step t

    Index horizon() const { return static_cast<Index>(steps.size()); }
    const StepParams& step(Index t) const { return steps.at(static_cast<std::size_t>(t - 1)); }
    StepParams& step(Index t) { return steps.at(static_cast<std::size_t>(t - 1)); }
};

/// Read-only access to a validated problem. Stored problems hand out
/// references to their own steps; lazily generated problems fill `scratch`.
class StepSource {
public:
    virtual ~StepSource() = default;

    virtual Index state_dim() const = 0;
    virtual Index control_dim() const = 0;
    virtual Index horizon() const = 0;
    virtual const Vector& initial_state() const = 0;
    virtual AForm a_form() const = 0;
    virtual RForm r_form() const = 0;
    virtual bool has_affine() const = 0;
    virtual const StepParams& step(Index t, StepParams& scratch) const = 0;
    /// Content hash; changes whenever any parameter or h0 changes.
    virtual std::uint64_t fingerprint() const = 0;
};

struct Tolerances {
    double psd_rel = 1e-10;        // Q: λ_min ≥ −psd_rel·‖Q‖∞
    double pd_rel = 1e-12;         // R: λ_min ≥ max(pd_rel·‖R‖∞, pd_abs_floor)
    double pd_abs_floor = 1e-30;
    double inv_rel = 1e-10;        // A: σ_min ≥ inv_rel·σ_max and σ_min > 0
    double dynamics = 1e-8;        // τ_dyn
    double symmetry_warn_rel = 1e-8;
    double symmetry_error_rel = 1e-6;
};

struct Violation {
    ErrorCode code;
    std::optional<Index> step;
    std::string which;  // "Q", "R", "A", ...
    std::string message;
};

class InvalidProblem : public LqrError {
public:
    explicit InvalidProblem(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

class ValidatedProblem final : public StepSource {
public:
    /// Wraps a problem without running any checks. For internal re-solves of
    /// problems derived from an already validated one (finite differences,
    /// dual problems).
    static ValidatedProblem unchecked(LqrProblem problem);

    const LqrProblem& problem() const { return *problem_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    Index state_dim() const override { return problem_->n; }
    Index control_dim() const override { return problem_->m; }
    Index horizon() const override { return problem_->horizon(); }
    const Vector& initial_state() const override { return problem_->h0; }
    AForm a_form() const override;
    RForm r_form() const override;
    bool has_affine() const override { return has_affine_; }
    const StepParams& step(Index t, StepParams& scratch) const override;
    std::uint64_t fingerprint() const override { return fingerprint_; }

private:
    friend ValidatedProblem validate_problem(LqrProblem, const Tolerances&);
    ValidatedProblem(std::shared_ptr<const LqrProblem> p, std::vector<std::string> warnings);

    std::shared_ptr<const LqrProblem> problem_;
    std::vector<std::string> warnings_;
    bool has_affine_ = false;
    std::uint64_t fingerprint_ = 0;
};

/// Every violated invariant, in step order. Empty means valid.
std::vector<Violation> check_problem(const LqrProblem& p, const Tolerances& tol = {});

/// Symmetrizes Q and dense R, then checks all invariants. Throws
/// InvalidProblem listing every violation.
ValidatedProblem validate_problem(LqrProblem p, const Tolerances& tol = {});

/// Copies every step of a source into an owned problem.
LqrProblem materialize(const StepSource& src);

std::uint64_t fingerprint(const LqrProblem& p);

struct LqrTrajectory {
    std::vector<Vector> h;       // h_0..h_T
    std::vector<Vector> u;       // u[t-1] = u_t, t = 1..T
    std::vector<Vector> lambda;  // λ_0..λ_T
    double cost = 0.0;

    Index horizon() const { return static_cast<Index>(u.size()); }
    const Vector& action(Index t) const { return u.at(static_cast<std::size_t>(t - 1)); }
};

/// Norm-wise relative differences over whole sequences: for h, the largest
/// entry difference across all h_t over the largest entry magnitude.
struct TrajectoryDiff {
    double h = 0, u = 0, lambda = 0, cost = 0;
    double max() const;
};

TrajectoryDiff compare(const LqrTrajectory& a, const LqrTrajectory& b);

/// Same metric on bare sequences.
double sequence_rel_diff(const std::vector<Vector>& a, const std::vector<Vector>& b);

/// Σ_t ½(h_tᵀQ_t h_t + u_tᵀR_t u_t) + r_tᵀu_t. Does not check dynamics.
double evaluate_cost(const StepSource& p, const std::vector<Vector>& states,
                     const std::vector<Vector>& actions);

/// h_0 = p.h0, h_t = A_t h_{t-1} + B_t u_t.
std::vector<Vector> rollout(const StepSource& p, const std::vector<Vector>& actions);

/// max_t ‖h_t − A_t h_{t-1} − B_t u_t‖∞ (with h_0 against p.h0).
double dynamics_residual(const StepSource& p, const LqrTrajectory& traj);

enum class ProblemFamily {
    Stable,    // singular values of A in [(1 − a_spread)·a_radius, a_radius]
    Unstable,  // A_t = a_t·O_t with a_t ∈ [growth_min, growth_max], O_t orthogonal
};

/// Knobs for random_problem. Out-of-range values are clamped.
struct ConditioningSpec {
    ProblemFamily family = ProblemFamily::Stable;
    AForm a_form = AForm::Dense;
    RForm r_form = RForm::Dense;
    bool affine = false;
    double a_radius = 1.0;      // stable: spectral radius ≤ a_radius
    double a_spread = 0.3;      // stable: relative width of the singular value band
    double growth_min = 1.5;    // unstable family per-step growth range
    double growth_max = 2.0;
    double q_scale = 0.1;
    double b_scale = 0.3;
    double r_floor = 0.5;
    double h0_scale = 1.0;
};

/// Deterministic in (seed, n, m, T, spec). Each step draws from its own
/// engine keyed by (seed, t), so step t does not depend on T.
LqrProblem random_problem(std::uint64_t seed, Index n, Index m, Index T,
                          const ConditioningSpec& spec = {});

}  // namespace symlqr
