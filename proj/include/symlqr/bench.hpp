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

// Batched wall-clock benchmark. Problems are generated and validated before
// the clock starts; each repeat solves the whole batch once.

#pragma once

#include "symlqr/symplectic.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace symlqr {

enum class Backend { Riccati, Symplectic, Kkt };
enum class BenchPass {
    Forward,          // u_1 only: Riccati backup + feedback, or reverse sweep + Y1 solve
    Full,             // complete (h, u, λ) trajectory
    ForwardBackward,  // u_1 plus gradients for a unit loss gradient
};

Backend parse_backend(const std::string& name);
std::string to_string(Backend b);
BenchPass parse_pass(const std::string& name);
std::string to_string(BenchPass p);

struct BenchConfig {
    Backend backend = Backend::Symplectic;
    BenchPass pass = BenchPass::Forward;
    Index batch = 16;
    Index dim = 16;  // n = m
    Index horizon = 64;
    Index repeat = 5;
    bool diagonal = true;  // diagonal A and diag(R⁻¹); dense otherwise
    Precision precision = Precision::Float64;
    Index threads = 1;
    std::uint64_t seed = 0;
    std::uint64_t memory_budget = std::uint64_t(4) << 30;  // bytes; larger configs report zero throughput
};

struct BenchRow {
    BenchConfig config;
    double median_s = 0, p20_s = 0, p80_s = 0;
    double throughput_flops = 0;   // B·T·n³ / median
    std::uint64_t factorizations = 0;  // per solve
    std::uint64_t sweep_steps = 0;     // per solve, all step counters summed
    std::uint64_t peak_bytes = 0;      // estimate from tensor sizes, not measured
    bool out_of_memory = false;
};

/// Linear interpolation between order statistics, q ∈ [0, 1].
double percentile(std::vector<double> samples, double q);

/// Throws InvalidArgument for unsupported combinations (e.g. 32-bit Riccati).
/// Out-of-budget configurations return a row with zero throughput.
BenchRow run_bench(const BenchConfig& cfg);

/// Bytes the batch and solver state need, by tensor sizes.
std::uint64_t estimate_bytes(const BenchConfig& cfg);

std::string csv_header();
std::string csv_row(const BenchRow& r);
std::string json_rows(const std::vector<BenchRow>& rows);

/// SYMLQR_THREADS when set and positive, else 1.
Index default_threads();

}  // namespace symlqr
