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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "symlqr/autodiff.hpp"
#include "symlqr/bench.hpp"
#include "symlqr/kkt_oracle.hpp"
#include "symlqr/riccati.hpp"
#include "symlqr/ttc_layer.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace symlqr;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Vector gaussian(boost::random::mt19937_64& eng, Index n) {
    boost::random::normal_distribution<double> nd;
    return Vector::NullaryExpr(n, [&] { return nd(eng); });
}

ConditioningSpec forms(int variant, bool affine) {
    ConditioningSpec s;
    s.affine = affine;
    switch (variant % 3) {
        case 0: break;
        case 1: s.a_form = AForm::Diagonal; s.r_form = RForm::DiagonalInverse; break;
        case 2: s.a_form = AForm::Diagonal; s.r_form = RForm::Diagonal; break;
    }
    return s;
}

// 1
Outcome solver_equivalence() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    int count = 0;
    std::string where;
    for (int rep = 0; rep < 5; ++rep)
        for (Index n : {1, 2, 4, 8, 16})
            for (Index T : {1, 2, 8, 64})
                for (bool affine : {false, true}) {
                    const auto seed = std::uint64_t(1000 + count);
                    const auto vp = validate_problem(random_problem(seed, n, n, T, forms(rep, affine)));
                    const auto a = riccati_solve(vp), b = symplectic_solve(vp), c = oracle_solve(vp);
                    const double d = std::max({compare(a, b).max(), compare(a, c).max(), compare(b, c).max()});
                    if (d > worst) {
                        worst = d;
                        where = fmt("seed %llu n=%lld T=%lld", (unsigned long long)seed, (long long)n, (long long)T);
                    }
                    ++count;
                }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 60.0 && count == 200,
            fmt("%d problems, max pairwise rel dev %.2e (%s), %.1f s", count, worst, where.c_str(), secs)};
}

// 2
Outcome scalar_instance() {
    LqrProblem p;
    p.n = p.m = 1;
    p.h0 = Vector::Ones(1);
    StepParams s;
    s.A = s.B = s.Q = s.R = Matrix::Ones(1, 1);
    p.steps = {s, s};
    const auto vp = validate_problem(p);
    const double u[] = {-0.6, -0.2}, h[] = {1, 0.4, 0.2}, l[] = {0.6, 0.6, 0.2};
    double worst = 0.0;
    for (const auto& traj : {riccati_solve(vp), symplectic_solve(vp), oracle_solve(vp)}) {
        for (int i = 0; i < 2; ++i) worst = std::max(worst, std::abs(traj.u[std::size_t(i)](0) - u[i]));
        for (int i = 0; i < 3; ++i) {
            worst = std::max(worst, std::abs(traj.h[std::size_t(i)](0) - h[i]));
            worst = std::max(worst, std::abs(traj.lambda[std::size_t(i)](0) - l[i]));
        }
        worst = std::max(worst, std::abs(traj.cost - 0.3));
    }
    return {worst <= 1e-12, fmt("3 backends, max abs error %.2e", worst)};
}

// 3
Outcome gradients() {
    const auto t0 = Clock::now();
    boost::random::mt19937_64 eng(3);
    double worst_fd = 0.0, worst_kkt = 0.0;
    int count = 0, fd_fail = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (Index n : {1, 2, 4, 8})
            for (Index T : {1, 2, 8, 16}) {
                const auto vp = validate_problem(random_problem(500 + seed, n, n, T, forms(int(seed), seed % 2 == 1)));
                const Vector g = gaussian(eng, n);
                const auto fr = ttc_forward(vp);
                const auto ours = ttc_backward(vp, fr.cache, g);
                const auto fd = fd_gradients(vp, g);
                if (!within(ours, fd, 1e-4, 1e-7)) ++fd_fail;
                worst_fd = std::max(worst_fd, compare(ours, fd).max());
                worst_kkt = std::max(worst_kkt, compare(ours, oracle_gradients(vp, g)).max());
                ++count;
            }

    LqrProblem p;
    p.n = p.m = 1;
    p.h0 = Vector::Ones(1);
    StepParams s;
    s.A = s.B = s.Q = s.R = Matrix::Ones(1, 1);
    p.steps = {s, s};
    const auto vp = validate_problem(p);
    const auto fr = ttc_forward(vp);
    const auto g = ttc_backward(vp, fr.cache, Vector::Ones(1));
    const double hand = std::max({std::abs(g.g_h0(0) + 0.6), std::abs(g.gA[0](0, 0) + 0.6),
                                  std::abs(g.gB[0](0, 0) - 0.12), std::abs(g.gR[0](0, 0) - 0.24),
                                  std::abs(g.gQ[0](0, 0) + 0.16), std::abs(g.gQ[1](0, 0) + 0.04)});
    return {fd_fail == 0 && worst_kkt <= 1e-8 && hand <= 1e-12,
            fmt("%d problems: FD entrywise failures %d (max norm-wise dev %.2e), dual-KKT max rel %.2e; "
                "scalar hand values max abs err %.2e; %.1f s",
                count, fd_fail, worst_fd, worst_kkt, hand, seconds_since(t0))};
}

// 4
Outcome symplecticity() {
    double worst = 0.0;
    int steps = 0;
    for (std::uint64_t seed = 0; steps < 500; ++seed) {
        const Index n = 1 + Index(seed % 8);
        const auto vp = validate_problem(random_problem(700 + seed, n, 1 + Index(seed % 5), 10, forms(int(seed), false)));
        const Matrix J = symplectic_form(n);
        for (Index t = 1; t <= 10; ++t, ++steps)
            for (auto which : {StepMatrix::Sigma, StepMatrix::S}) {
                const Matrix M = materialize_step(vp, t, which);
                worst = std::max(worst, (M.transpose() * J * M - J).cwiseAbs().maxCoeff());
            }
    }
    return {worst <= 1e-10, fmt("%d steps, max ||M^T J M - J||_inf %.2e", steps, worst)};
}

// 5
Outcome factorization_counts() {
    bool ok = true;
    std::string detail;
    for (Index T : {16, 64, 256, 1024}) {
        for (Index n : {4, 16}) {
            BenchConfig c;
            c.batch = 2;
            c.dim = n;
            c.horizon = T;
            c.repeat = 1;
            c.diagonal = true;
            c.backend = Backend::Riccati;
            const auto r = run_bench(c);
            c.backend = Backend::Symplectic;
            const auto s = run_bench(c);
            c.pass = BenchPass::Full;
            const auto sf = run_bench(c);
            ok = ok && r.factorizations == std::uint64_t(T) && s.factorizations == 1 && sf.factorizations == 1;
            detail += fmt("n=%lld T=%lld: riccati %llu symplectic %llu; ", (long long)n, (long long)T,
                          (unsigned long long)r.factorizations, (unsigned long long)s.factorizations);
        }
    }
    // dense Riccati also factors once per step
    const auto vp = validate_problem(random_problem(5, 6, 3, 40));
    CounterScope scope;
    riccati_solve(vp);
    ok = ok && scope.delta().factorizations == 40;
    detail += fmt("dense riccati T=40: %llu", (unsigned long long)scope.delta().factorizations);
    return {ok, detail};
}

// 6
Outcome normalization() {
    ConditioningSpec spec;
    spec.family = ProblemFamily::Unstable;
    const auto vp = validate_problem(random_problem(24, 4, 4, 2048, spec));
    SweepOptions raw;
    raw.normalize = false;
    bool overflowed = false;
    try {
        const auto acc = reverse_sweep(vp, raw);
        overflowed = !acc.Y1.allFinite() || !acc.Y2.allFinite();
    } catch (const LqrError& e) {
        overflowed = e.code() == ErrorCode::NonFiniteAccumulator;
    }
    const Vector l = first_action(reverse_sweep(vp), vp, vp.initial_state()).lambda0;
    const double unstable = rel_diff(l, riccati_solve(vp).lambda[0]);

    double stable = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Index T = 1 + Index(seed * 5 % 32);
        const auto sp = validate_problem(random_problem(800 + seed, 1 + Index(seed % 8), 3, T, forms(int(seed), seed % 2 == 0)));
        const Vector a = first_action(reverse_sweep(sp), sp, sp.initial_state()).lambda0;
        const Vector b = first_action(reverse_sweep(sp, raw), sp, sp.initial_state()).lambda0;
        stable = std::max(stable, rel_diff(a, b));
    }
    return {overflowed && unstable <= 1e-4 && stable <= 1e-8,
            fmt("T=2048 unnormalized non-finite: %s; normalized lambda0 vs Riccati %.2e; stable T<=32 normalized vs "
                "raw max %.2e",
                overflowed ? "yes" : "no", unstable, stable)};
}

// 7
Outcome caching() {
    boost::random::mt19937_64 eng(7);
    double worst = 0.0;
    std::uint64_t sweeps = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Index n = 1 + Index(seed % 8), T = 1 + Index(seed * 3 % 40);
        const auto vp = validate_problem(random_problem(900 + seed, n, n, T, forms(int(seed), seed % 2 == 1)));
        const Vector g = gaussian(eng, n);
        const auto fr = ttc_forward(vp);
        CounterScope scope;
        const auto cached = ttc_backward(vp, fr.cache, g);
        sweeps += scope.delta().reverse_sweeps;
        worst = std::max(worst, compare(cached, backward_uncached(vp, g)).max());
    }
    return {worst <= 1e-10 && sweeps == 0,
            fmt("40 problems, max rel dev %.2e, reverse sweeps in cached backward %llu", worst, (unsigned long long)sweeps)};
}

// 8
Outcome optimality() {
    boost::random::mt19937_64 eng(8);
    double worst = -1e300;
    int trials = 0;
    for (std::uint64_t seed = 0; trials < 1000; ++seed) {
        const Index n = 1 + Index(seed % 6), T = 1 + Index(seed % 12);
        const auto vp = validate_problem(random_problem(1100 + seed, n, n, T, forms(int(seed), seed % 2 == 1)));
        const auto opt = riccati_solve(vp);
        for (int k = 0; k < 50; ++k, ++trials) {
            std::vector<Vector> d;
            double sq = 0.0;
            for (Index t = 0; t < T; ++t) {
                d.push_back(gaussian(eng, n));
                sq += d.back().squaredNorm();
            }
            std::vector<Vector> u = opt.u;
            for (Index t = 0; t < T; ++t) u[std::size_t(t)] += 1e-3 / std::sqrt(sq) * d[std::size_t(t)];
            const double decrease = opt.cost - evaluate_cost(vp, rollout(vp, u), u);
            worst = std::max(worst, decrease);
        }
    }
    return {worst <= 1e-12, fmt("%d perturbations, largest cost decrease %.2e", trials, worst)};
}

// 9
Outcome ttc_layer() {
    LayerConfig cfg;
    cfg.zero_output = true;
    const auto w0 = init_weights(cfg, 1);
    boost::random::mt19937_64 eng(9);
    bool identity = true;
    for (int i = 0; i < 10; ++i) {
        const Vector x = gaussian(eng, cfg.model_dim);
        identity = identity && (block_forward(w0, x, 1 + i).array() == x.array()).all();
    }

    LayerConfig small;
    small.model_dim = 6;
    small.heads = 1;
    small.head_dim = 4;
    const auto w = init_weights(small, 2);
    const auto fd = fd_check_block(w, gaussian(eng, 6), 3, gaussian(eng, 6));
    int fd_bad = 0;
    for (const auto& e : fd) fd_bad += e.ok(1e-3, 1e-6) ? 0 : 1;

    HorizonSampler sampler(HorizonSampler::Config{});
    double sum = 0.0;
    Index lo = 1000, hi = 0;
    for (int i = 0; i < 100000; ++i) {
        const Index T = sampler.sample();
        lo = std::min(lo, T);
        hi = std::max(hi, T);
        sum += double(T);
    }
    const double mean = sum / 1e5;

    LayerConfig one;
    one.heads = 1;
    const auto w1 = init_weights(one, 3);
    const Vector x = gaussian(eng, one.model_dim);
    bool counts = true, finite = true;
    for (Index T = 1; T <= 128; ++T) {
        CounterScope scope;
        finite = finite && block_forward(w1, x, T).allFinite();
        counts = counts && scope.delta().reverse_steps == std::uint64_t(T);
    }
    const bool sampler_ok = lo >= 1 && hi <= 32 && std::abs(mean - 9.0) <= 0.9;
    return {identity && fd_bad == 0 && sampler_ok && counts && finite,
            fmt("(a) W_out=0 bit-exact: %s; (b) FD %zu entries, %d outside tol; (c) samples in [%lld,%lld], mean %.3f; "
                "(d) T=1..128 finite %s, sweep steps == T %s",
                identity ? "yes" : "no", fd.size(), fd_bad, (long long)lo, (long long)hi, mean, finite ? "yes" : "no",
                counts ? "yes" : "no")};
}

// 10
Outcome throughput() {
    const std::string csv = "acceptance_bench.csv";
    const std::string cmd = std::string(SYMLQR_CLI) +
                            " bench --backend riccati,symplectic --batch 256 --dim 16 --horizon 64,128 --repeat 7"
                            " --structured diag --format csv --threads 1 --output " + csv;
    if (std::system(cmd.c_str()) != 0) return {false, "bench command failed: " + cmd};
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::map<std::pair<std::string, long>, double> median;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 13) return {false, "malformed CSV row: " + line};
        median[{f[0], std::stol(f[3])}] = std::stod(f[6]);
    }
    bool ok = median.size() == 4;
    std::string detail;
    for (long T : {64L, 128L}) {
        const double r = median[{"riccati", T}], s = median[{"symplectic", T}];
        ok = ok && s > 0.0 && s <= r;
        detail += fmt("B=256 n=16 T=%ld: symplectic %.4f s vs riccati %.4f s; ", T, s, r);
    }
    return {ok, detail + "CSV at " + csv};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 solver equivalence", solver_equivalence},
        {"2 scalar instance", scalar_instance},
        {"3 gradients vs FD and dual KKT", gradients},
        {"4 symplecticity", symplecticity},
        {"5 factorization counts", factorization_counts},
        {"6 normalization", normalization},
        {"7 cached backward", caching},
        {"8 optimality under perturbation", optimality},
        {"9 test-time control layer", ttc_layer},
        {"10 batched throughput direction", throughput},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "criterion " << name << ": " << o.detail << std::endl;
    }
    std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed" : std::string("acceptance: all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
