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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace symlqr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
    DimensionMismatch,
    NotSymmetric,
    NotPsd,
    NotPd,
    SingularA,
    NonFinite,
    FactorizationFailure,
    NonFiniteAccumulator,
    SingularY1,
    SingularKkt,
    TooLarge,
    StaleCache,
    IndexOutOfRange,
    SingularContextA,
    SamplerStuck,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Base error for every failure raised by the library. `step` carries the
/// 1-based horizon index when the failure is tied to one step.
class LqrError : public std::runtime_error {
public:
    LqrError(ErrorCode code, std::string message, std::optional<Index> step = std::nullopt);

    ErrorCode code() const noexcept { return code_; }
    std::optional<Index> step() const noexcept { return step_; }

private:
    ErrorCode code_;
    std::optional<Index> step_;
};

// Per-thread work counters. Solvers bump these; benchmarks and tests read
// deltas around a call. Worker pools sum the per-worker deltas.
struct Counters {
    std::uint64_t factorizations = 0;   // dense n×n (or m×m) factorizations
    std::uint64_t riccati_steps = 0;    // backward Riccati updates
    std::uint64_t reverse_sweeps = 0;   // reverse symplectic sweeps started
    std::uint64_t reverse_steps = 0;    // Σ_t applications (once per t, not per row block)
    std::uint64_t forward_steps = 0;    // forward symplectic steps (fused steps count once)

    Counters operator-(const Counters& o) const;
    Counters& operator+=(const Counters& o);
};

Counters& thread_counters();

/// ‖a − b‖∞ / max(‖a‖∞, ‖b‖∞), zero when both vanish.
template <typename DA, typename DB>
double rel_diff(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
    if (a.size() == 0 && b.size() == 0) return 0.0;
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    const double d = (a - b).cwiseAbs().maxCoeff();
    if (d == 0.0) return 0.0;
    return scale > 0.0 ? d / scale : d;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    const double d = std::abs(a - b);
    if (d == 0.0) return 0.0;
    return scale > 0.0 ? d / scale : d;
}

class CounterScope {
public:
    CounterScope() : start_(thread_counters()) {}
    Counters delta() const { return thread_counters() - start_; }

private:
    Counters start_;
};

}  // namespace symlqr
