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

#include "symlqr/ttc_layer.hpp"

#include <boost/container_hash/hash.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

namespace symlqr {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Vector softplus(const Vector& z) { return z.unaryExpr([](double v) { return softplus(v); }); }
Vector sigmoid(const Vector& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

using Engine = boost::random::mt19937_64;

Engine make_engine(std::uint64_t seed, std::uint32_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt};
    return Engine(seq);
}

Matrix normal(Engine& eng, Index rows, Index cols, double sd) {
    boost::random::normal_distribution<double> nd(0.0, sd);
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) M(i, j) = nd(eng);
    return M;
}

Linear make_linear(Engine& eng, Index out, Index in, double sd, double bias) {
    return {normal(eng, out, in, sd / std::sqrt(double(in))), Vector::Constant(out, bias)};
}

template <typename D>
void hash_dense(std::size_t& seed, const Eigen::DenseBase<D>& M) {
    boost::hash_combine(seed, M.rows());
    boost::hash_combine(seed, M.cols());
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) boost::hash_combine(seed, M(i, j));
}

}  // namespace

TtcLayerWeights init_weights(const LayerConfig& cfg, std::uint64_t seed) {
    if (cfg.model_dim < 1 || cfg.heads < 1 || cfg.head_dim < 1 || cfg.basis < 1)
        throw LqrError(ErrorCode::InvalidArgument, "layer dimensions must be positive");
    TtcLayerWeights w;
    w.model_dim = cfg.model_dim;
    w.heads = cfg.heads;
    w.head_dim = cfg.head_dim;
    w.basis = cfg.basis;
    w.guard_a = cfg.guard_a;
    const Index n = cfg.head_dim, r = cfg.basis, D = cfg.model_dim, HW = w.inner_dim();

    Engine eng = make_engine(seed, 0x77);
    for (Index i = 0; i < r; ++i) w.Qc.push_back(normal(eng, n, n, 1.0));
    for (Index i = 0; i < r; ++i) w.Bb.push_back(normal(eng, n, n, 1.0 / std::sqrt(double(n))));
    w.s_Q = make_linear(eng, r, n, 0.1, -2.0);
    w.s_B = make_linear(eng, r, n, 0.1, 0.5);
    // a ≈ −0.5 at init keeps 1 + e^{−tγ}a inside (0.5, 1)
    const double a_bias = cfg.guard_a ? std::log(std::expm1(0.5 - kGuardEps)) : -0.5;
    for (Index k = 0; k < cfg.heads; ++k) {
        HeadWeights h;
        h.s_A = make_linear(eng, n, n, 0.1, a_bias);
        h.s_GA = make_linear(eng, n, n, 0.1, -1.5);
        h.s_GB = make_linear(eng, n, n, 0.1, -1.5);
        h.s_GQ = make_linear(eng, n, n, 0.1, -1.5);
        h.s_R = make_linear(eng, n, n, 0.1, 0.5);
        h.s_Qf = make_linear(eng, r, n, 0.1, -2.0);
        w.head.push_back(std::move(h));
    }
    w.W_in = normal(eng, HW, D, 1.0 / std::sqrt(double(D)));
    w.W_out = cfg.zero_output ? Matrix::Zero(D, HW) : normal(eng, D, HW, 1.0 / std::sqrt(double(HW)));
    w.ln_in = Vector::Ones(D);
    w.ln_out = Vector::Ones(HW);
    return w;
}

TtcLayerWeights zeros_like(const TtcLayerWeights& w) {
    TtcLayerWeights z = w;
    for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
    return z;
}

std::uint64_t fingerprint(const TtcLayerWeights& w) {
    std::size_t seed = 0;
    boost::hash_combine(seed, w.model_dim);
    boost::hash_combine(seed, w.heads);
    boost::hash_combine(seed, w.head_dim);
    boost::hash_combine(seed, w.basis);
    boost::hash_combine(seed, w.guard_a);
    for_each_tensor(w, [&](const std::string&, const auto& t) { hash_dense(seed, t); });
    return static_cast<std::uint64_t>(seed);
}

// ------------------------------------------------------------ contextualize

ContextProblem::ContextProblem(const TtcLayerWeights& w, Index head, const Vector& c, Index T)
    : w_(w.head_dim), T_(T), h0_(c) {
    if (T < 1) throw LqrError(ErrorCode::InvalidArgument, "horizon must be positive");
    if (head < 0 || head >= w.heads) throw LqrError(ErrorCode::IndexOutOfRange, "head index");
    if (c.size() != w_) throw LqrError(ErrorCode::DimensionMismatch, "context width differs from head width");
    const HeadWeights& hw = w.head[static_cast<std::size_t>(head)];

    co_.z_a = hw.s_A(c);
    co_.a = w.guard_a ? Vector(softplus(co_.z_a).array() - (1.0 - kGuardEps)) : co_.z_a;
    co_.z_ga = hw.s_GA(c);
    co_.gamma_a = softplus(co_.z_ga);
    co_.z_gb = hw.s_GB(c);
    co_.gamma_b = softplus(co_.z_gb);
    co_.z_gq = hw.s_GQ(c);
    co_.gamma_q = softplus(co_.z_gq);
    co_.z_r = hw.s_R(c);
    co_.rho = softplus(co_.z_r);
    co_.z_q = w.s_Q(c);
    co_.beta_q = softplus(co_.z_q);
    co_.z_qf = hw.s_Qf(c);
    co_.beta_qf = softplus(co_.z_qf);
    co_.beta_b = w.s_B(c);

    if (!(co_.rho.minCoeff() > 0.0) || !co_.rho.allFinite())
        throw LqrError(ErrorCode::NotPd, "inverse-R diagonal underflowed to zero");

    const double inv_sqrt = 1.0 / std::sqrt(double(w_));
    Qbar_ = Matrix::Zero(w_, w_);
    Qterm_ = Matrix::Zero(w_, w_);
    Bbar_ = Matrix::Zero(w_, w_);
    for (Index i = 0; i < w.basis; ++i) {
        const Matrix& Qc = w.Qc[static_cast<std::size_t>(i)];
        Qbasis_.push_back(Qc * Qc.transpose() * inv_sqrt);
        Qbar_ += co_.beta_q(i) * Qbasis_.back();
        Qterm_ += co_.beta_qf(i) * Qbasis_.back();
        Bbar_ += co_.beta_b(i) * w.Bb[static_cast<std::size_t>(i)];
    }

    for (Index t = 1; t <= T; ++t)
        for (Index j = 0; j < w_; ++j) {
            const double d = 1.0 + std::exp(-double(t) * co_.gamma_a(j)) * co_.a(j);
            if (!(std::abs(d) >= 1e-10))
                throw LqrError(ErrorCode::SingularContextA,
                               "|1 + γ^t·a| below 1e-10 at j=" + std::to_string(j), t);
        }

    std::size_t seed = 0;
    boost::hash_combine(seed, T);
    hash_dense(seed, h0_);
    for (const Vector* v : {&co_.a, &co_.gamma_a, &co_.gamma_b, &co_.gamma_q, &co_.rho}) hash_dense(seed, *v);
    hash_dense(seed, Qbar_);
    hash_dense(seed, Qterm_);
    hash_dense(seed, Bbar_);
    fingerprint_ = seed;
}

const StepParams& ContextProblem::step(Index t, StepParams& s) const {
    if (t < 1 || t > T_) throw LqrError(ErrorCode::IndexOutOfRange, "step index", t);
    const double tt = double(t);
    s.a_form = AForm::Diagonal;
    s.a_diag = (1.0 + (-tt * co_.gamma_a).array().exp() * co_.a.array()).matrix();
    s.B = Bbar_ * (-tt * co_.gamma_b).array().exp().matrix().asDiagonal();
    if (t < T_) {
        const Vector q = (-tt * co_.gamma_q).array().exp();
        s.Q = q.asDiagonal() * Qbar_ * q.asDiagonal();
    } else {
        s.Q = Qterm_;
    }
    s.r_form = RForm::DiagonalInverse;
    s.r_diag = co_.rho;
    s.affine.reset();
    return s;
}

ContextProblem contextualize(const TtcLayerWeights& w, const Vector& context, Index T, Index head) {
    return ContextProblem(w, head, context, T);
}

// --------------------------------------------------------------- layer norm

Vector layer_norm(const Vector& x, const Vector& scale, LnCache* cache) {
    const double mu = x.mean();
    const Vector xc = x.array() - mu;
    const double inv_std = 1.0 / std::sqrt(xc.squaredNorm() / double(x.size()) + kLnEps);
    Vector xhat = xc * inv_std;
    Vector y = scale.cwiseProduct(xhat);
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = inv_std;
    }
    return y;
}

Vector layer_norm_backward(const LnCache& c, const Vector& scale, const Vector& dy, Vector& dscale) {
    dscale += dy.cwiseProduct(c.xhat);
    const Vector dxhat = dy.cwiseProduct(scale);
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(c.xhat).mean();
    return c.inv_std * (dxhat.array() - m1 - c.xhat.array() * m2).matrix();
}

// -------------------------------------------------------------------- block

Vector block_forward(const TtcLayerWeights& w, const Vector& x_in, Index T, BlockCache* cache,
                     const BlockOptions& opt) {
    if (x_in.size() != w.model_dim) throw LqrError(ErrorCode::DimensionMismatch, "x_in width differs from model dim");
    if (T < 1) throw LqrError(ErrorCode::InvalidArgument, "horizon must be positive");
    const Index n = w.head_dim;

    LnCache ln_in;
    const Vector y_in = layer_norm(x_in, w.ln_in, &ln_in);
    const Vector h = w.W_in * y_in;

    std::vector<HeadCache> heads(static_cast<std::size_t>(w.heads));
    auto run_head = [&](Index k) {
        try {
            auto prob = std::make_shared<const ContextProblem>(w, k, h.segment(k * n, n), T);
            auto fr = ttc_forward(*prob, opt.sweep);
            heads[static_cast<std::size_t>(k)] = {std::move(prob), std::move(fr.cache)};
            return fr.u1;
        } catch (const LqrError& e) {
            throw LqrError(e.code(), "head " + std::to_string(k) + ": " + e.what(), e.step());
        }
    };

    Vector o(w.inner_dim());
    if (opt.threads > 1 && w.heads > 1) {
        // one task per head; counter deltas are folded back into this thread
        std::vector<std::future<std::pair<Vector, Counters>>> fut;
        for (Index k = 0; k < w.heads; ++k)
            fut.push_back(std::async(std::launch::async, [&, k] {
                CounterScope scope;
                Vector u = run_head(k);
                return std::make_pair(std::move(u), scope.delta());
            }));
        for (Index k = 0; k < w.heads; ++k) {
            auto [u, d] = fut[static_cast<std::size_t>(k)].get();
            o.segment(k * n, n) = u;
            thread_counters() += d;
        }
    } else {
        for (Index k = 0; k < w.heads; ++k) o.segment(k * n, n) = run_head(k);
    }

    LnCache ln_out;
    const Vector y_out = layer_norm(o, w.ln_out, &ln_out);
    Vector x_out = x_in + w.W_out * y_out;

    if (cache) {
        cache->weights_fingerprint = fingerprint(w);
        cache->T = T;
        cache->x_in = x_in;
        cache->ln_in = std::move(ln_in);
        cache->y_in = y_in;
        cache->h = h;
        cache->heads = std::move(heads);
        cache->o = o;
        cache->ln_out = std::move(ln_out);
        cache->y_out = y_out;
    }
    return x_out;
}

namespace {

void linear_backward(const Linear& L, const Vector& x, const Vector& dz, Linear& dL, Vector& dx) {
    dL.W.noalias() += dz * x.transpose();
    dL.b += dz;
    dx.noalias() += L.W.transpose() * dz;
}

// Gradient contributions of one head: its own maps plus its share of the
// shared bases and maps. Written into a zeroed copy so heads can run apart.
struct HeadGrad {
    HeadWeights own;
    std::vector<Matrix> dQc, dBb;
    Linear ds_Q, ds_B;
    Vector dc;
};

HeadGrad head_backward(const TtcLayerWeights& w, const TtcLayerWeights& zero, Index k, const HeadCache& hc,
                       const Vector& grad_u1) {
    const ContextProblem& prob = *hc.problem;
    const HeadCoefficients& co = prob.coefficients();
    const Vector& c = prob.initial_state();
    const Index n = w.head_dim, T = prob.horizon();
    const double inv_sqrt = 1.0 / std::sqrt(double(n));

    HeadGrad g{zero.head[static_cast<std::size_t>(k)], zero.Qc, zero.Bb, zero.s_Q, zero.s_B, Vector::Zero(n)};
    const LqrGradients lg = ttc_backward(prob, hc.lqr, grad_u1);

    Vector da = Vector::Zero(n), dga = Vector::Zero(n), dgb = Vector::Zero(n), dgq = Vector::Zero(n),
           drho = Vector::Zero(n);
    Matrix dQbar = Matrix::Zero(n, n), dBbar = Matrix::Zero(n, n);
    const Matrix& dQterm = lg.gQ[static_cast<std::size_t>(T - 1)];
    for (Index t = 1; t <= T; ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        const double tt = double(t);
        const Vector ea = (-tt * co.gamma_a).array().exp();
        const Vector da_t = lg.gA[i].diagonal();
        da.array() += da_t.array() * ea.array();
        dga.array() += da_t.array() * co.a.array() * (-tt) * ea.array();

        const Vector eb = (-tt * co.gamma_b).array().exp();
        dBbar.noalias() += lg.gB[i] * eb.asDiagonal();
        const Vector db_t = lg.gB[i].cwiseProduct(prob.Bbar()).colwise().sum().transpose();
        dgb.array() += -tt * eb.array() * db_t.array();

        if (t < T) {
            const Vector q = (-tt * co.gamma_q).array().exp();
            dQbar.noalias() += q.asDiagonal() * lg.gQ[i] * q.asDiagonal();
            const Vector dq = 2.0 * (lg.gQ[i].cwiseProduct(prob.Qbar()) * q);
            dgq.array() += -tt * q.array() * dq.array();
        }
        drho += inverse_r_grad(lg.gR[i], co.rho);
    }

    Vector dbq(w.basis), dbqf(w.basis), dbb(w.basis);
    for (Index i = 0; i < w.basis; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const Matrix& Qi = prob.Qbasis()[ii];
        dbq(i) = dQbar.cwiseProduct(Qi).sum();
        dbqf(i) = dQterm.cwiseProduct(Qi).sum();
        dbb(i) = dBbar.cwiseProduct(w.Bb[ii]).sum();
        const Matrix dQi = co.beta_q(i) * dQbar + co.beta_qf(i) * dQterm;
        g.dQc[ii].noalias() += (dQi + dQi.transpose()) * w.Qc[ii] * inv_sqrt;
        g.dBb[ii] += co.beta_b(i) * dBbar;
    }

    const HeadWeights& hw = w.head[static_cast<std::size_t>(k)];
    const Vector dz_a = w.guard_a ? Vector(da.cwiseProduct(sigmoid(co.z_a))) : da;
    linear_backward(hw.s_A, c, dz_a, g.own.s_A, g.dc);
    linear_backward(hw.s_GA, c, dga.cwiseProduct(sigmoid(co.z_ga)), g.own.s_GA, g.dc);
    linear_backward(hw.s_GB, c, dgb.cwiseProduct(sigmoid(co.z_gb)), g.own.s_GB, g.dc);
    linear_backward(hw.s_GQ, c, dgq.cwiseProduct(sigmoid(co.z_gq)), g.own.s_GQ, g.dc);
    linear_backward(hw.s_R, c, drho.cwiseProduct(sigmoid(co.z_r)), g.own.s_R, g.dc);
    linear_backward(hw.s_Qf, c, dbqf.cwiseProduct(sigmoid(co.z_qf)), g.own.s_Qf, g.dc);
    linear_backward(w.s_Q, c, dbq.cwiseProduct(sigmoid(co.z_q)), g.ds_Q, g.dc);
    linear_backward(w.s_B, c, dbb, g.ds_B, g.dc);
    g.dc += lg.g_h0;  // c is also the initial state
    return g;
}

}  // namespace

BlockGradients block_backward(const TtcLayerWeights& w, const BlockCache& cache, const Vector& grad_x_out,
                              const BlockOptions& opt) {
    if (cache.weights_fingerprint != fingerprint(w))
        throw LqrError(ErrorCode::StaleCache, "weights changed since the forward pass");
    if (grad_x_out.size() != w.model_dim)
        throw LqrError(ErrorCode::DimensionMismatch, "gradient width differs from model dim");
    const Index n = w.head_dim;

    BlockGradients out{zeros_like(w), grad_x_out};
    TtcLayerWeights& d = out.weights;

    d.W_out.noalias() += grad_x_out * cache.y_out.transpose();
    const Vector dy_out = w.W_out.transpose() * grad_x_out;
    const Vector d_o = layer_norm_backward(cache.ln_out, w.ln_out, dy_out, d.ln_out);

    std::vector<HeadGrad> parts;
    parts.reserve(static_cast<std::size_t>(w.heads));
    auto run = [&](Index k) {
        return head_backward(w, d, k, cache.heads[static_cast<std::size_t>(k)], d_o.segment(k * n, n));
    };
    if (opt.threads > 1 && w.heads > 1) {
        std::vector<std::future<std::pair<HeadGrad, Counters>>> fut;
        for (Index k = 0; k < w.heads; ++k)
            fut.push_back(std::async(std::launch::async, [&, k] {
                CounterScope scope;
                HeadGrad g = run(k);
                return std::make_pair(std::move(g), scope.delta());
            }));
        for (auto& f : fut) {
            auto [g, delta] = f.get();
            parts.push_back(std::move(g));
            thread_counters() += delta;
        }
    } else {
        for (Index k = 0; k < w.heads; ++k) parts.push_back(run(k));
    }

    // reduce in head order so threaded and serial runs agree bit for bit
    Vector dh(w.inner_dim());
    for (Index k = 0; k < w.heads; ++k) {
        HeadGrad& g = parts[static_cast<std::size_t>(k)];
        d.head[static_cast<std::size_t>(k)] = std::move(g.own);
        for (Index i = 0; i < w.basis; ++i) {
            d.Qc[static_cast<std::size_t>(i)] += g.dQc[static_cast<std::size_t>(i)];
            d.Bb[static_cast<std::size_t>(i)] += g.dBb[static_cast<std::size_t>(i)];
        }
        d.s_Q.W += g.ds_Q.W;
        d.s_Q.b += g.ds_Q.b;
        d.s_B.W += g.ds_B.W;
        d.s_B.b += g.ds_B.b;
        dh.segment(k * n, n) = g.dc;
    }

    d.W_in.noalias() += dh * cache.y_in.transpose();
    const Vector dy_in = w.W_in.transpose() * dh;
    out.x_in += layer_norm_backward(cache.ln_in, w.ln_in, dy_in, d.ln_in);
    return out;
}

// ------------------------------------------------------------ finite diffs

bool FdEntry::ok(double rel, double abs) const {
    return std::abs(analytic - numeric) <= std::max(rel * std::max(std::abs(analytic), std::abs(numeric)), abs);
}

std::vector<FdEntry> fd_check_block(const TtcLayerWeights& w, const Vector& x_in, Index T, const Vector& probe,
                                    const std::vector<std::string>& tensors, double step) {
    auto wanted = [&](const std::string& name) {
        return tensors.empty() || std::find(tensors.begin(), tensors.end(), name) != tensors.end();
    };
    BlockCache cache;
    block_forward(w, x_in, T, &cache);
    const BlockGradients g = block_backward(w, cache, probe);

    std::vector<FdEntry> out;
    auto central = [&](auto&& perturbed_loss, double theta) {
        const double h = step * (1.0 + std::abs(theta));
        return (perturbed_loss(theta + h) - perturbed_loss(theta - h)) / (2.0 * h);
    };

    if (wanted("x_in")) {
        Vector x = x_in;
        for (Index i = 0; i < x.size(); ++i) {
            const double x0 = x(i);
            auto loss = [&](double v) {
                x(i) = v;
                return probe.dot(block_forward(w, x, T));
            };
            out.push_back({"x_in", i, g.x_in(i), central(loss, x0)});
            x(i) = x0;
        }
    }

    TtcLayerWeights wp = w;
    std::vector<std::pair<std::string, const double*>> analytic;
    for_each_tensor(g.weights, [&](const std::string& name, const auto& t) { analytic.emplace_back(name, t.data()); });
    std::size_t slot = 0;
    for_each_tensor(wp, [&](const std::string& name, auto& t) {
        const double* ga = analytic[slot++].second;
        if (!wanted(name)) return;
        for (Index i = 0; i < t.size(); ++i) {
            const double v0 = t.data()[i];
            auto loss = [&](double v) {
                t.data()[i] = v;
                return probe.dot(block_forward(wp, x_in, T));
            };
            out.push_back({name, i, ga[i], central(loss, v0)});
            t.data()[i] = v0;
        }
    });
    return out;
}

// ------------------------------------------------------------------ sampler

struct HorizonSampler::Impl {
    Engine eng;
};

HorizonSampler::HorizonSampler(const Config& cfg) : cfg_(cfg) {
    if (!(cfg.T_mu > 0.0) || !(cfg.T_sigma >= 0.0) || cfg.T_max < 1)
        throw LqrError(ErrorCode::InvalidArgument, "sampler needs T_mu > 0, T_sigma ≥ 0, T_max ≥ 1");
    impl_ = std::make_shared<Impl>(Impl{make_engine(cfg.seed, 0x5a)});
}

Index HorizonSampler::sample() {
    const double var = cfg_.T_sigma * cfg_.T_sigma;
    boost::random::normal_distribution<double> tau(std::log(cfg_.T_mu) - 0.5 * var, cfg_.T_sigma);
    for (std::uint64_t i = 0; i < kMaxTries; ++i) {
        const double lam = std::exp(tau(impl_->eng));
        double T;
        if (cfg_.mean_mode) {
            T = std::round(lam) + 1.0;
        } else {
            if (!(lam < 1e15)) continue;
            boost::random::poisson_distribution<std::int64_t, double> pd(lam);
            T = double(pd(impl_->eng)) + 1.0;
        }
        if (T >= 1.0 && T <= double(cfg_.T_max)) return static_cast<Index>(T);
    }
    throw LqrError(ErrorCode::SamplerStuck, "no horizon in [1, T_max] after 1e6 draws");
}

}  // namespace symlqr
