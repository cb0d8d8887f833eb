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

#include "symlqr/problem.hpp"

namespace symlqr::testing {

inline StepParams scalar_step(double a, double b, double q, double r) {
    StepParams s;
    s.A = Matrix::Constant(1, 1, a);
    s.B = Matrix::Constant(1, 1, b);
    s.Q = Matrix::Constant(1, 1, q);
    s.R = Matrix::Constant(1, 1, r);
    return s;
}

// A = B = Q = R = 1, T = 2, h0 = 1.
inline LqrProblem scalar_problem() {
    LqrProblem p;
    p.n = p.m = 1;
    p.h0 = Vector::Ones(1);
    p.steps = {scalar_step(1, 1, 1, 1), scalar_step(1, 1, 1, 1)};
    return p;
}

inline ValidatedProblem scalar_validated() { return validate_problem(scalar_problem()); }

inline ValidatedProblem random_validated(std::uint64_t seed, Index n, Index m, Index T,
                                         const ConditioningSpec& spec = {}) {
    return validate_problem(random_problem(seed, n, m, T, spec));
}

}  // namespace symlqr::testing
