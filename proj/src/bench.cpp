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

#include "symlqr/bench.hpp"

#include "json.hpp"
#include "symlqr/autodiff.hpp"
#include "symlqr/kkt_oracle.hpp"
#include "symlqr/riccati.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace symlqr {

namespace {

std::uint64_t steps_of(const Counters& c) { return c.riccati_steps + c.reverse_steps + c.forward_steps; }

void solve_one(const BenchConfig& cfg, const ValidatedProblem& p, const Vector& g) {
    SweepOptions opt;
    opt.precision = cfg.precision;
    switch (cfg.backend) {
        case Backend::Riccati:
            switch (cfg.pass) {
                case BenchPass::Forward: {
                    const ValueBackup vb = riccati_backup(p);
                    const Vector u1 = vb.K[0] * p.initial_state() + vb.k[0];
                    (void)u1;
                    break;
                }
                case BenchPass::Full: riccati_solve(p); break;
                case BenchPass::ForwardBackward: {
                    const auto primal = riccati_solve(p);
                    const auto dual = riccati_solve(ValidatedProblem::unchecked(build_dual(p, g)));
                    combine(primal, dual);
                    break;
                }
            }
            break;
        case Backend::Symplectic:
            switch (cfg.pass) {
                case BenchPass::Forward: ttc_forward(p, opt); break;
                case BenchPass::Full: symplectic_solve(p, opt); break;
                case BenchPass::ForwardBackward: {
                    const auto fr = ttc_forward(p, opt);
                    ttc_backward(p, fr.cache, g);
                    break;
                }
            }
            break;
        case Backend::Kkt:
            if (cfg.pass == BenchPass::ForwardBackward)
                oracle_gradients(p, g);
            else
                oracle_solve(p);
            break;
    }
}

}  // namespace

Backend parse_backend(const std::string& name) {
    if (name == "riccati") return Backend::Riccati;
    if (name == "symplectic") return Backend::Symplectic;
    if (name == "kkt") return Backend::Kkt;
    throw LqrError(ErrorCode::InvalidArgument, "unknown backend " + name);
}

std::string to_string(Backend b) {
    switch (b) {
        case Backend::Riccati: return "riccati";
        case Backend::Symplectic: return "symplectic";
        case Backend::Kkt: return "kkt";
    }
    return "?";
}

BenchPass parse_pass(const std::string& name) {
    if (name == "forward") return BenchPass::Forward;
    if (name == "full") return BenchPass::Full;
    if (name == "forward-backward") return BenchPass::ForwardBackward;
    throw LqrError(ErrorCode::InvalidArgument, "unknown pass " + name);
}

std::string to_string(BenchPass p) {
    switch (p) {
        case BenchPass::Forward: return "forward";
        case BenchPass::Full: return "full";
        case BenchPass::ForwardBackward: return "forward-backward";
    }
    return "?";
}

double percentile(std::vector<double> s, double q) {
    if (s.empty()) throw LqrError(ErrorCode::InvalidArgument, "percentile of an empty sample");
    std::sort(s.begin(), s.end());
    const double pos = std::clamp(q, 0.0, 1.0) * double(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - double(lo)) * (s[hi] - s[lo]);
}

std::uint64_t estimate_bytes(const BenchConfig& cfg) {
    const std::uint64_t n = std::uint64_t(cfg.dim), T = std::uint64_t(cfg.horizon), B = std::uint64_t(cfg.batch);
    const std::uint64_t w = 8;
    // per step: B and Q dense, A and R dense or diagonal
    const std::uint64_t step = (2 * n * n + (cfg.diagonal ? 2 * n : 2 * n * n)) * w;
    const std::uint64_t problems = B * (T * step + n * w);
    std::uint64_t solver = 0;
    const std::uint64_t workers = std::uint64_t(std::max<Index>(cfg.threads, 1));
    switch (cfg.backend) {
        case Backend::Riccati: solver = T * (2 * n * n + 2 * n) * w; break;  // P, K, p, k kept for every step
        case Backend::Symplectic: solver = 6 * n * n * w; break;              // Y1, Y2, Y3, scratch
        case Backend::Kkt: {
            const std::uint64_t dim = (T + 1) * n + T * n + (T + 1) * n;
            solver = dim * dim * w;
            break;
        }
    }
    if (cfg.pass != BenchPass::Forward) solver += 3 * (T + 1) * n * w * 2;  // primal and dual trajectories
    return problems + workers * solver;
}

Index default_threads() {
    if (const char* env = std::getenv("SYMLQR_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<Index>(v);
    }
    return 1;
}

BenchRow run_bench(const BenchConfig& cfg) {
    if (cfg.batch < 1 || cfg.dim < 1 || cfg.horizon < 1 || cfg.repeat < 1 || cfg.threads < 1)
        throw LqrError(ErrorCode::InvalidArgument, "batch, dim, horizon, repeat and threads must be positive");
    if (cfg.precision == Precision::Float32 && cfg.backend != Backend::Symplectic)
        throw LqrError(ErrorCode::InvalidArgument, "32-bit precision is only available for the symplectic backend");

    BenchRow row;
    row.config = cfg;
    row.peak_bytes = estimate_bytes(cfg);
    const bool kkt_too_large = cfg.backend == Backend::Kkt &&
                               (cfg.horizon + 1) * cfg.dim + cfg.horizon * cfg.dim > kKktMaxPrimal;
    if (row.peak_bytes > cfg.memory_budget || kkt_too_large) {
        row.out_of_memory = true;
        return row;
    }

    ConditioningSpec spec;
    spec.a_form = cfg.diagonal ? AForm::Diagonal : AForm::Dense;
    spec.r_form = cfg.diagonal ? RForm::DiagonalInverse : RForm::Dense;
    std::vector<ValidatedProblem> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch));
    for (Index b = 0; b < cfg.batch; ++b)
        batch.push_back(validate_problem(random_problem(cfg.seed + std::uint64_t(b), cfg.dim, cfg.dim, cfg.horizon, spec)));
    const Vector g = Vector::Ones(cfg.dim);

    {
        CounterScope untimed;  // warm caches and allocator outside the clock and the counters
        solve_one(cfg, batch.front(), g);
        thread_counters() = thread_counters() - untimed.delta();
    }

    const auto nthreads = static_cast<std::size_t>(std::min(cfg.threads, cfg.batch));
    std::vector<double> times;
    Counters total;
    for (Index rep = 0; rep < cfg.repeat; ++rep) {
        std::vector<Counters> per(nthreads);
        std::vector<std::exception_ptr> errors(nthreads);
        auto work = [&](std::size_t k) {
            try {
                CounterScope scope;
                for (std::size_t b = k; b < batch.size(); b += nthreads) solve_one(cfg, batch[b], g);
                per[k] = scope.delta();
            } catch (...) {
                errors[k] = std::current_exception();
            }
        };
        const auto t0 = std::chrono::steady_clock::now();
        if (nthreads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(work, k);
            for (auto& th : pool) th.join();
        }
        const auto t1 = std::chrono::steady_clock::now();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        for (const auto& c : per) total += c;
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }

    row.median_s = percentile(times, 0.5);
    row.p20_s = percentile(times, 0.2);
    row.p80_s = percentile(times, 0.8);
    if (!(row.median_s > 0.0) || !std::isfinite(row.median_s))
        throw std::runtime_error("timer returned a non-positive duration");
    const double n = double(cfg.dim);
    row.throughput_flops = double(cfg.batch) * double(cfg.horizon) * n * n * n / row.median_s;
    const auto solves = std::uint64_t(cfg.batch * cfg.repeat);
    row.factorizations = total.factorizations / solves;
    row.sweep_steps = steps_of(total) / solves;
    return row;
}

std::string csv_header() {
    return "backend,batch,dim,horizon,precision,structured,median_s,p20_s,p80_s,throughput_flops,factorizations,"
           "sweep_steps,peak_bytes";
}

std::string csv_row(const BenchRow& r) {
    const BenchConfig& c = r.config;
    std::ostringstream os;
    os.precision(6);
    os << to_string(c.backend) << ',' << c.batch << ',' << c.dim << ',' << c.horizon << ','
       << (c.precision == Precision::Float32 ? 32 : 64) << ',' << (c.diagonal ? "diag" : "dense") << ','
       << r.median_s << ',' << r.p20_s << ',' << r.p80_s << ',' << r.throughput_flops << ',' << r.factorizations
       << ',' << r.sweep_steps << ',' << r.peak_bytes;
    return os.str();
}

std::string json_rows(const std::vector<BenchRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        const BenchConfig& c = r.config;
        out.push_back({{"backend", to_string(c.backend)},
                       {"pass", to_string(c.pass)},
                       {"batch", c.batch},
                       {"dim", c.dim},
                       {"horizon", c.horizon},
                       {"precision", c.precision == Precision::Float32 ? 32 : 64},
                       {"structured", c.diagonal ? "diag" : "dense"},
                       {"threads", c.threads},
                       {"repeat", c.repeat},
                       {"median_s", r.median_s},
                       {"p20_s", r.p20_s},
                       {"p80_s", r.p80_s},
                       {"throughput_flops", r.throughput_flops},
                       {"factorizations", r.factorizations},
                       {"sweep_steps", r.sweep_steps},
                       {"peak_bytes", r.peak_bytes},
                       {"peak_bytes_kind", "estimate"},
                       {"out_of_memory", r.out_of_memory}});
    }
    return out.dump(2);
}

}  // namespace symlqr
