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

#include "symlqr/core.hpp"

namespace symlqr {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotPsd: return "NotPsd";
        case ErrorCode::NotPd: return "NotPd";
        case ErrorCode::SingularA: return "SingularA";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::FactorizationFailure: return "FactorizationFailure";
        case ErrorCode::NonFiniteAccumulator: return "NonFiniteAccumulator";
        case ErrorCode::SingularY1: return "SingularY1";
        case ErrorCode::SingularKkt: return "SingularKkt";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::StaleCache: return "StaleCache";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::SingularContextA: return "SingularContextA";
        case ErrorCode::SamplerStuck: return "SamplerStuck";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message, std::optional<Index> step) {
    std::string out(to_string(code));
    if (step) out += "(" + std::to_string(*step) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
}

}  // namespace

LqrError::LqrError(ErrorCode code, std::string message, std::optional<Index> step)
    : std::runtime_error(decorate(code, message, step)), code_(code), step_(step) {}

Counters Counters::operator-(const Counters& o) const {
    Counters d;
    d.factorizations = factorizations - o.factorizations;
    d.riccati_steps = riccati_steps - o.riccati_steps;
    d.reverse_sweeps = reverse_sweeps - o.reverse_sweeps;
    d.reverse_steps = reverse_steps - o.reverse_steps;
    d.forward_steps = forward_steps - o.forward_steps;
    return d;
}

Counters& Counters::operator+=(const Counters& o) {
    factorizations += o.factorizations;
    riccati_steps += o.riccati_steps;
    reverse_sweeps += o.reverse_sweeps;
    reverse_steps += o.reverse_steps;
    forward_steps += o.forward_steps;
    return *this;
}

Counters& thread_counters() {
    thread_local Counters counters;
    return counters;
}

}  // namespace symlqr
