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

// symlqr command-line front end.
//
//   exit 0  success
//   exit 1  a check failed (validate, gradcheck, grad checks, ttc-demo FD)
//   exit 2  invalid input or flags
//   exit 3  solver failure
//   exit 4  timer or allocation failure while benchmarking

#include "CLI11.hpp"
#include "json.hpp"
#include "symlqr/autodiff.hpp"
#include "symlqr/bench.hpp"
#include "symlqr/io.hpp"
#include "symlqr/kkt_oracle.hpp"
#include "symlqr/riccati.hpp"
#include "symlqr/ttc_layer.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <chrono>
#include <iostream>
#include <new>

using namespace symlqr;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kBadInput = 2, kSolverFailed = 3, kBenchFailed = 4 };

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ValidatedProblem load_problem(const std::string& path) {
    try {
        auto vp = validate_problem(io::parse_problem(io::read_file(path)));
        for (const auto& w : vp.warnings()) std::cerr << "warning: " << w << "\n";
        return vp;
    } catch (const LqrError& e) {
        throw InputError(path + ": " + e.what());
    }
}

Vector load_vector(const std::string& path, Index m) {
    Vector g;
    try {
        g = io::parse_vector(io::read_file(path));
    } catch (const LqrError& e) {
        throw InputError(path + ": " + e.what());
    }
    if (g.size() != m) throw InputError(path + ": loss gradient has " + std::to_string(g.size()) + " entries, expected " + std::to_string(m));
    return g;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text << "\n";
    else
        io::write_file(path, text);
}

bool layout_fits_kkt(Index n, Index T) { return KktLayout{n, n, T}.primal_dim() <= kKktMaxPrimal; }

json diff_json(const GradientDiff& d) { return {{"A", d.A}, {"B", d.B}, {"Q", d.Q}, {"R", d.R}, {"h0", d.h0}, {"max", d.max()}}; }

// --------------------------------------------------------------------- solve

struct SolveArgs {
    std::string input, output, solver = "riccati";
    int precision = 64;
};

int cmd_solve(const SolveArgs& a) {
    const auto vp = load_problem(a.input);
    if (a.precision == 32 && a.solver != "symplectic")
        throw InputError("--precision 32 is only available with --solver symplectic");
    LqrTrajectory traj;
    try {
        if (a.solver == "riccati") {
            traj = riccati_solve(vp);
        } else if (a.solver == "symplectic") {
            SweepOptions opt;
            opt.precision = a.precision == 32 ? Precision::Float32 : Precision::Float64;
            traj = symplectic_solve(vp, opt);
        } else {
            traj = oracle_solve(vp);
        }
    } catch (const LqrError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailed;
    }
    emit(a.output, io::trajectory_json(traj));
    return kOk;
}

// ------------------------------------------------------------------ validate

struct ValidateArgs {
    std::uint64_t seed = 0;
    Index cases = 200;
    std::vector<Index> dims{1, 2, 4, 8, 16};
    std::vector<Index> horizons{1, 2, 8, 64};
    double tol = 1e-6;
    std::string report;
};

struct Suite {
    std::string name;
    double max_dev = 0.0;
    json failures = json::array();

    void record(double dev, double tol, const json& where) {
        max_dev = std::max(max_dev, dev);
        if (!(dev <= tol)) {
            json f = where;
            f["deviation"] = dev;
            failures.push_back(std::move(f));
        }
    }
};

int cmd_validate(const ValidateArgs& a) {
    if (a.dims.empty() || a.horizons.empty() || a.cases < 1) throw InputError("need at least one case, dim and horizon");
    for (Index v : a.dims)
        if (v < 1) throw InputError("dims must be positive");
    for (Index v : a.horizons)
        if (v < 1) throw InputError("horizons must be positive");

    Suite equiv{"solver-equivalence"}, sympl{"symplecticity"}, optim{"optimality-perturbation"},
        norm{"normalization-neutrality"};
    const auto nd = static_cast<Index>(a.dims.size()), nh = static_cast<Index>(a.horizons.size());
    json cases = json::array();

    for (Index i = 0; i < a.cases; ++i) {
        const Index n = a.dims[static_cast<std::size_t>(i % nd)];
        const Index T = a.horizons[static_cast<std::size_t>((i / nd) % nh)];
        const bool affine = (i / (nd * nh)) % 2 == 1;
        const std::uint64_t seed = a.seed + std::uint64_t(i);
        json where{{"case", i}, {"seed", seed}, {"n", n}, {"T", T}, {"affine", affine}};
        ConditioningSpec spec;
        spec.affine = affine;
        json row = where;
        try {
            const auto vp = validate_problem(random_problem(seed, n, n, T, spec));
            const auto ric = riccati_solve(vp), sym = symplectic_solve(vp);
            double dev = compare(ric, sym).max();
            if (layout_fits_kkt(n, T)) {
                const auto kkt = oracle_solve(vp);
                dev = std::max({dev, compare(ric, kkt).max(), compare(sym, kkt).max()});
            }
            equiv.record(dev, a.tol, where);
            row["equivalence"] = dev;

            // one Σ_t and one S_t per case, relative to ‖M‖²
            const Matrix J = symplectic_form(n);
            double sdev = 0.0;
            for (auto which : {StepMatrix::Sigma, StepMatrix::S}) {
                const Matrix M = materialize_step(vp, 1 + Index(seed % std::uint64_t(T)), which);
                const double scale = std::max(1.0, M.cwiseAbs().rowwise().sum().maxCoeff());
                sdev = std::max(sdev, (M.transpose() * J * M - J).cwiseAbs().maxCoeff() / (scale * scale));
            }
            sympl.record(sdev, a.tol, where);
            row["symplecticity"] = sdev;

            boost::random::mt19937_64 eng(seed ^ 0x9e3779b97f4a7c15ULL);
            boost::random::normal_distribution<double> nd01;
            double odev = 0.0;
            for (int k = 0; k < 5; ++k) {
                std::vector<Vector> u = ric.u;
                double sq = 0.0;
                std::vector<Vector> d(u.size());
                for (auto& v : d) {
                    v = Vector::NullaryExpr(n, [&] { return nd01(eng); });
                    sq += v.squaredNorm();
                }
                for (std::size_t t = 0; t < u.size(); ++t) u[t] += 1e-3 / std::sqrt(sq) * d[t];
                const double c = evaluate_cost(vp, rollout(vp, u), u);
                odev = std::max(odev, (ric.cost - c) / std::max(1.0, std::abs(ric.cost)));
            }
            optim.record(odev, a.tol, where);
            row["optimality"] = odev;

            SweepOptions raw;
            raw.normalize = false;
            const Vector l_norm = first_action(reverse_sweep(vp), vp, vp.initial_state()).lambda0;
            const Vector l_raw = first_action(reverse_sweep(vp, raw), vp, vp.initial_state()).lambda0;
            const double ndev = rel_diff(l_norm, l_raw);
            norm.record(ndev, a.tol, where);
            row["normalization"] = ndev;
        } catch (const LqrError& e) {
            json f = where;
            f["error"] = e.what();
            equiv.failures.push_back(f);
            row["error"] = e.what();
        }
        cases.push_back(std::move(row));
    }

    json suites = json::object();
    bool pass = true;
    for (Suite* s : {&equiv, &sympl, &optim, &norm}) {
        suites[s->name] = {{"max_deviation", s->max_dev}, {"failures", s->failures}};
        for (const auto& f : s->failures) {
            pass = false;
            std::cerr << "FAIL " << s->name << " case " << f["case"] << " seed " << f["seed"] << " n " << f["n"]
                      << " T " << f["T"] << " affine " << f["affine"];
            if (f.contains("deviation")) std::cerr << " deviation " << f["deviation"].get<double>();
            if (f.contains("error")) std::cerr << " error " << f["error"].get<std::string>();
            std::cerr << "\n";
        }
    }
    const json report{{"seed", a.seed}, {"cases", a.cases}, {"tol", a.tol}, {"pass", pass}, {"suites", suites},
                      {"per_case", cases}};
    emit(a.report, a.report.empty() ? json{{"seed", a.seed}, {"pass", pass}, {"suites", suites}}.dump(2) : report.dump(2));
    return pass ? kOk : kCheckFailed;
}

// ----------------------------------------------------------------- gradients

struct GradArgs {
    std::string input, loss_grad, output, against = "both";
    bool corrupt = false, check_fd = false, check_oracle = false;
};

constexpr double kFdRel = 1e-4, kFdAbs = 1e-7, kOracleRel = 1e-8;

// Runs the requested oracle comparisons, appending results to `report`.
bool check_gradients(const ValidatedProblem& vp, const Vector& g, const LqrGradients& ours, bool fd, bool kkt,
                     json& report) {
    bool ok = true;
    if (fd) {
        const auto ref = fd_gradients(vp, g);
        const bool pass = within(ours, ref, kFdRel, kFdAbs);
        report["fd"] = {{"max_rel_err", diff_json(compare(ours, ref))}, {"rel_tol", kFdRel}, {"abs_tol", kFdAbs}, {"pass", pass}};
        ok = ok && pass;
    }
    if (kkt) {
        const auto ref = oracle_gradients(vp, g);
        const auto d = compare(ours, ref);
        const bool pass = d.max() <= kOracleRel;
        report["kkt"] = {{"max_rel_err", diff_json(d)}, {"rel_tol", kOracleRel}, {"pass", pass}};
        ok = ok && pass;
    }
    report["pass"] = ok;
    return ok;
}

LqrGradients backward(const ValidatedProblem& vp, const Vector& g) {
    const auto fr = ttc_forward(vp);
    return ttc_backward(vp, fr.cache, g);
}

int cmd_gradcheck(const GradArgs& a) {
    const auto vp = load_problem(a.input);
    const Vector g = load_vector(a.loss_grad, vp.control_dim());
    if (a.against != "fd" && a.against != "kkt" && a.against != "both") throw InputError("--against must be fd, kkt or both");
    debug::set_corrupt_backward(a.corrupt);
    json report;
    bool ok;
    try {
        const auto ours = backward(vp, g);
        ok = check_gradients(vp, g, ours, a.against != "kkt", a.against != "fd", report);
    } catch (const LqrError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailed;
    }
    std::cout << report.dump(2) << "\n";
    return ok ? kOk : kCheckFailed;
}

int cmd_grad(const GradArgs& a) {
    const auto vp = load_problem(a.input);
    const Vector g = load_vector(a.loss_grad, vp.control_dim());
    debug::set_corrupt_backward(a.corrupt);
    json report;
    bool ok = true;
    try {
        const auto ours = backward(vp, g);
        emit(a.output, io::gradients_json(ours));
        if (a.check_fd || a.check_oracle) {
            ok = check_gradients(vp, g, ours, a.check_fd, a.check_oracle, report);
            std::cerr << report.dump(2) << "\n";
        }
    } catch (const LqrError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailed;
    }
    return ok ? kOk : kCheckFailed;
}

// --------------------------------------------------------------------- bench

struct BenchArgs {
    std::vector<std::string> backends{"symplectic"};
    std::vector<Index> batch{16}, dim{16}, horizon{64};
    Index repeat = 5;
    std::string structured = "diag", format = "csv", pass = "forward", output;
    int precision = 64;
    Index threads = 0;  // 0: SYMLQR_THREADS or 1
    std::uint64_t seed = 0;
    double memory_gb = 4.0;
};

int cmd_bench(const BenchArgs& a) {
    if (a.structured != "diag" && a.structured != "dense") throw InputError("--structured must be diag or dense");
    if (a.format != "csv" && a.format != "json") throw InputError("--format must be csv or json");
    std::vector<BenchConfig> configs;
    for (const auto& be : a.backends)
        for (Index B : a.batch)
            for (Index n : a.dim)
                for (Index T : a.horizon) {
                    BenchConfig c;
                    try {
                        c.backend = parse_backend(be);
                        c.pass = parse_pass(a.pass);
                    } catch (const LqrError& e) {
                        throw InputError(e.what());
                    }
                    c.batch = B;
                    c.dim = n;
                    c.horizon = T;
                    c.repeat = a.repeat;
                    c.diagonal = a.structured == "diag";
                    c.precision = a.precision == 32 ? Precision::Float32 : Precision::Float64;
                    c.threads = a.threads > 0 ? a.threads : default_threads();
                    c.seed = a.seed;
                    c.memory_budget = static_cast<std::uint64_t>(a.memory_gb * double(1ULL << 30));
                    configs.push_back(c);
                }

    std::vector<BenchRow> rows;
    for (const auto& c : configs) {
        try {
            rows.push_back(run_bench(c));
        } catch (const LqrError& e) {
            if (e.code() == ErrorCode::InvalidArgument) throw InputError(e.what());
            std::cerr << "solver failure: " << e.what() << "\n";
            return kSolverFailed;
        } catch (const std::bad_alloc&) {
            std::cerr << "allocation failure\n";
            return kBenchFailed;
        } catch (const std::runtime_error& e) {
            std::cerr << "timer failure: " << e.what() << "\n";
            return kBenchFailed;
        }
    }
    std::string text;
    if (a.format == "csv") {
        text = csv_header();
        for (const auto& r : rows) text += "\n" + csv_row(r);
    } else {
        text = json_rows(rows);
    }
    emit(a.output, text);
    return kOk;
}

// ------------------------------------------------------------------ ttc-demo

struct DemoArgs {
    Index heads = 2, dim = 32, width = 16, basis = 2;
    double horizon_mean = 8.0, horizon_sigma = 0.1;
    Index horizon_max = 32;
    std::uint64_t seed = 0;
    Index repeat = 5;
};

int cmd_ttc_demo(const DemoArgs& a) {
    LayerConfig cfg;
    cfg.model_dim = a.dim;
    cfg.heads = a.heads;
    cfg.head_dim = a.width;
    cfg.basis = a.basis;
    TtcLayerWeights w;
    Index T;
    try {
        w = init_weights(cfg, a.seed);
        HorizonSampler sampler({a.horizon_mean, a.horizon_sigma, a.horizon_max, a.seed, false});
        T = sampler.sample();
    } catch (const LqrError& e) {
        throw InputError(e.what());
    }
    std::cout << "head slices: " << a.heads << "x" << a.width << " (model dim " << a.dim << ")\n";
    std::cout << "sampled horizon: " << T << "\n";

    boost::random::mt19937_64 eng(a.seed);
    boost::random::normal_distribution<double> nd;
    const Vector x = Vector::NullaryExpr(a.dim, [&] { return nd(eng); });
    const Vector probe = Vector::NullaryExpr(a.dim, [&] { return nd(eng); });

    std::vector<std::string> names;
    for_each_tensor(w, [&](const std::string& name, const auto&) { names.push_back(name); });
    boost::random::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
    const std::string tensor = names[pick(eng)];

    std::vector<FdEntry> fd;
    try {
        fd = fd_check_block(w, x, T, probe, {tensor});
    } catch (const LqrError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailed;
    }
    double max_rel = 0.0;
    bool ok = true;
    for (const auto& e : fd) {
        const double scale = std::max(std::abs(e.analytic), std::abs(e.numeric));
        if (scale > 1e-6) max_rel = std::max(max_rel, std::abs(e.analytic - e.numeric) / scale);
        ok = ok && e.ok(1e-3, 1e-6);
    }
    std::cout << "fd check: tensor " << tensor << ", " << fd.size() << " entries, max rel err " << max_rel
              << (ok ? " (pass)" : " (FAIL)") << "\n";

    std::cout << "T,median_s,reverse_steps,forward_steps\n";
    for (Index Th : {4, 8, 16, 32, 64}) {
        std::vector<double> times;
        Counters steps;
        for (Index r = 0; r < a.repeat; ++r) {
            CounterScope scope;
            const auto t0 = std::chrono::steady_clock::now();
            BlockCache cache;
            block_forward(w, x, Th, &cache);
            block_backward(w, cache, probe);
            const auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
            steps = scope.delta();
        }
        std::cout << Th << "," << percentile(times, 0.5) << "," << steps.reverse_steps << "," << steps.forward_steps << "\n";
    }
    return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Batched finite-horizon LQR: solve, validate, gradient-check, benchmark"};
    app.require_subcommand(1);

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "Solve one problem and write its trajectory");
    solve->add_option("--input", sa.input, "Problem JSON")->required();
    solve->add_option("--solver", sa.solver)->check(CLI::IsMember({"riccati", "symplectic", "kkt"}));
    solve->add_option("--output", sa.output, "Trajectory JSON (stdout when omitted)");
    solve->add_option("--precision", sa.precision)->check(CLI::IsMember({32, 64}));

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Run the seeded property suites");
    validate->add_option("--seed", va.seed);
    validate->add_option("--cases", va.cases);
    validate->add_option("--dims", va.dims)->delimiter(',');
    validate->add_option("--horizons", va.horizons)->delimiter(',');
    validate->add_option("--tol", va.tol);
    validate->add_option("--report", va.report, "Full per-case JSON report (summary on stdout otherwise)");

    GradArgs ga;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare backward gradients against oracles");
    gradcheck->add_option("--input", ga.input)->required();
    gradcheck->add_option("--loss-grad", ga.loss_grad)->required();
    gradcheck->add_option("--against", ga.against)->check(CLI::IsMember({"fd", "kkt", "both"}));
    gradcheck->add_flag("--debug-corrupt-backward", ga.corrupt, "Negative control: flip the sign of gB");

    GradArgs gr;
    auto* grad = app.add_subcommand("grad", "Write gradients JSON for a loss gradient on u_1");
    grad->add_option("--input", gr.input)->required();
    grad->add_option("--loss-grad", gr.loss_grad)->required();
    grad->add_option("--output", gr.output);
    grad->add_flag("--check-fd", gr.check_fd);
    grad->add_flag("--check-oracle", gr.check_oracle);
    grad->add_flag("--debug-corrupt-backward", gr.corrupt);

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Batched wall-clock benchmark (CSV or JSON)");
    bench->add_option("--backend", ba.backends)->delimiter(',');
    bench->add_option("--batch", ba.batch)->delimiter(',');
    bench->add_option("--dim", ba.dim)->delimiter(',');
    bench->add_option("--horizon", ba.horizon)->delimiter(',');
    bench->add_option("--repeat", ba.repeat);
    bench->add_option("--structured", ba.structured);
    bench->add_option("--format", ba.format);
    bench->add_option("--pass", ba.pass, "forward, full or forward-backward");
    bench->add_option("--precision", ba.precision)->check(CLI::IsMember({32, 64}));
    bench->add_option("--threads", ba.threads, "Workers (default: SYMLQR_THREADS or 1)");
    bench->add_option("--seed", ba.seed);
    bench->add_option("--memory-gb", ba.memory_gb, "Budget beyond which a row reports zero throughput");
    bench->add_option("--output", ba.output);

    DemoArgs da;
    auto* demo = app.add_subcommand("ttc-demo", "Random test-time control layer: FD check and horizon sweep");
    demo->add_option("--heads", da.heads);
    demo->add_option("--dim", da.dim, "Model dimension");
    demo->add_option("--width", da.width, "Head width");
    demo->add_option("--basis", da.basis);
    demo->add_option("--horizon-mean", da.horizon_mean);
    demo->add_option("--horizon-sigma", da.horizon_sigma);
    demo->add_option("--horizon-max", da.horizon_max);
    demo->add_option("--seed", da.seed);
    demo->add_option("--repeat", da.repeat);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadInput;
    }

    try {
        if (*solve) return cmd_solve(sa);
        if (*validate) return cmd_validate(va);
        if (*gradcheck) return cmd_gradcheck(ga);
        if (*grad) return cmd_grad(gr);
        if (*bench) return cmd_bench(ba);
        if (*demo) return cmd_ttc_demo(da);
    } catch (const InputError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kBadInput;
    } catch (const LqrError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolverFailed;
    } catch (const std::bad_alloc&) {
        std::cerr << "allocation failure\n";
        return kBenchFailed;
    }
    return kBadInput;
}
