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

// Test-time control block.
//
//   h   = W_in·LN(x_in)                       split into H slices c_k of width w
//   o_k = u_1 of the LQR contextualized by c_k (initial state c_k)
//   x_out = x_in + W_out·LN(o_1 ‖ … ‖ o_H)
//
// Per head, with z = s(c) for each coefficient map s:
//
//   A_t = I + diag(e^{−t·γ_A} ⊙ a)            a = s_A(c), γ_A = softplus(s_ΓA(c))
//   B_t = (Σ_i β_B,i B⁽ⁱ⁾)·diag(e^{−t·γ_B})   β_B = s_B(c)
//   Q_t = D_t (Σ_i β_Q,i Q⁽ⁱ⁾) D_t, t < T      D_t = diag(e^{−t·γ_Q}), β_Q = softplus(s_Q(c))
//   Q_T = Σ_i β_Qf,i Q⁽ⁱ⁾                       β_Qf = softplus(s_Qf(c))
//   R_t⁻¹ = diag(ρ)                            ρ = softplus(s_R(c))
//   Q⁽ⁱ⁾ = Qc⁽ⁱ⁾Qc⁽ⁱ⁾ᵀ/√w
//
// The bases Qc, B and the maps s_Q, s_B are shared by all heads.

#pragma once

#include "symlqr/autodiff.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace symlqr {

struct Linear {
    Matrix W;
    Vector b;

    Vector operator()(const Vector& x) const { return W * x + b; }
};

struct HeadWeights {
    Linear s_A, s_GA, s_GB, s_GQ, s_R, s_Qf;
};

struct TtcLayerWeights {
    Index model_dim = 0;   // D
    Index heads = 1;       // H
    Index head_dim = 16;   // w; n = m = w
    Index basis = 2;       // r
    bool guard_a = false;  // a = softplus(z) − (1 − ε) instead of a = z

    std::vector<Matrix> Qc;  // r × (w×w)
    std::vector<Matrix> Bb;  // r × (w×w)
    Linear s_Q, s_B;         // w → r, shared
    std::vector<HeadWeights> head;
    Matrix W_in;             // (H·w) × D
    Matrix W_out;            // D × (H·w)
    Vector ln_in;            // LN scale, length D
    Vector ln_out;           // LN scale, length H·w

    Index inner_dim() const { return heads * head_dim; }
};

struct LayerConfig {
    Index model_dim = 32;
    Index heads = 2;
    Index head_dim = 16;
    Index basis = 2;
    bool guard_a = false;
    bool zero_output = false;  // W_out = 0
};

TtcLayerWeights init_weights(const LayerConfig& cfg, std::uint64_t seed);

/// Same shapes, every entry zero.
TtcLayerWeights zeros_like(const TtcLayerWeights& w);

/// Visits every tensor as (name, Matrix& or Vector&), in a fixed order.
template <typename W, typename F>
void for_each_tensor(W& w, F&& f) {
    for (std::size_t i = 0; i < w.Qc.size(); ++i) f("Qc." + std::to_string(i), w.Qc[i]);
    for (std::size_t i = 0; i < w.Bb.size(); ++i) f("B." + std::to_string(i), w.Bb[i]);
    f("s_Q.W", w.s_Q.W);
    f("s_Q.b", w.s_Q.b);
    f("s_B.W", w.s_B.W);
    f("s_B.b", w.s_B.b);
    for (std::size_t k = 0; k < w.head.size(); ++k) {
        auto& h = w.head[k];
        const std::string p = "head" + std::to_string(k) + ".";
        f(p + "s_A.W", h.s_A.W);
        f(p + "s_A.b", h.s_A.b);
        f(p + "s_GA.W", h.s_GA.W);
        f(p + "s_GA.b", h.s_GA.b);
        f(p + "s_GB.W", h.s_GB.W);
        f(p + "s_GB.b", h.s_GB.b);
        f(p + "s_GQ.W", h.s_GQ.W);
        f(p + "s_GQ.b", h.s_GQ.b);
        f(p + "s_R.W", h.s_R.W);
        f(p + "s_R.b", h.s_R.b);
        f(p + "s_Qf.W", h.s_Qf.W);
        f(p + "s_Qf.b", h.s_Qf.b);
    }
    f("W_in", w.W_in);
    f("W_out", w.W_out);
    f("ln_in", w.ln_in);
    f("ln_out", w.ln_out);
}

std::uint64_t fingerprint(const TtcLayerWeights& w);

/// Per-head coefficients produced from a context slice.
struct HeadCoefficients {
    Vector a, gamma_a, gamma_b, gamma_q, rho, beta_q, beta_qf, beta_b;
    // pre-activations kept for the backward pass
    Vector z_a, z_ga, z_gb, z_gq, z_r, z_q, z_qf;
};

/// Lazily generated LQR for one head. Steps are synthesized on demand.
class ContextProblem final : public StepSource {
public:
    ContextProblem(const TtcLayerWeights& w, Index head, const Vector& context, Index T);

    Index state_dim() const override { return w_; }
    Index control_dim() const override { return w_; }
    Index horizon() const override { return T_; }
    const Vector& initial_state() const override { return h0_; }
    AForm a_form() const override { return AForm::Diagonal; }
    RForm r_form() const override { return RForm::DiagonalInverse; }
    bool has_affine() const override { return false; }
    const StepParams& step(Index t, StepParams& scratch) const override;
    std::uint64_t fingerprint() const override { return fingerprint_; }

    const HeadCoefficients& coefficients() const { return co_; }
    const Matrix& Qbar() const { return Qbar_; }
    const Matrix& Qterm() const { return Qterm_; }
    const Matrix& Bbar() const { return Bbar_; }
    const std::vector<Matrix>& Qbasis() const { return Qbasis_; }

private:
    Index w_, T_;
    Vector h0_;
    HeadCoefficients co_;
    Matrix Qbar_, Qterm_, Bbar_;
    std::vector<Matrix> Qbasis_;
    std::uint64_t fingerprint_ = 0;
};

/// Lazily generated problem for head 0 of a layer. Throws SingularContextA
/// when some |1 + e^{−tγ_j}a_j| falls below 1e-10.
ContextProblem contextualize(const TtcLayerWeights& w, const Vector& context, Index T, Index head = 0);

inline constexpr double kLnEps = 1e-5;
inline constexpr double kGuardEps = 1e-3;

struct LnCache {
    Vector xhat;
    double inv_std = 0.0;
};

Vector layer_norm(const Vector& x, const Vector& scale, LnCache* cache = nullptr);
/// Returns dx; accumulates dscale.
Vector layer_norm_backward(const LnCache& c, const Vector& scale, const Vector& dy, Vector& dscale);

struct HeadCache {
    std::shared_ptr<const ContextProblem> problem;
    ForwardCache lqr;
};

struct BlockCache {
    std::uint64_t weights_fingerprint = 0;
    Index T = 0;
    Vector x_in;
    LnCache ln_in;
    Vector y_in;  // LN(x_in)
    Vector h;     // W_in·y_in
    std::vector<HeadCache> heads;
    Vector o;
    LnCache ln_out;
    Vector y_out;  // LN(o)
};

struct BlockOptions {
    Index threads = 1;  // heads run in parallel when > 1
    SweepOptions sweep;
};

Vector block_forward(const TtcLayerWeights& w, const Vector& x_in, Index T, BlockCache* cache = nullptr,
                     const BlockOptions& opt = {});

struct BlockGradients {
    TtcLayerWeights weights;
    Vector x_in;
};

/// Throws StaleCache when the weights changed after the forward pass.
BlockGradients block_backward(const TtcLayerWeights& w, const BlockCache& cache, const Vector& grad_x_out,
                              const BlockOptions& opt = {});

/// One entry of a finite-difference check of the loss probeᵀ·x_out.
struct FdEntry {
    std::string tensor;
    Index index = 0;  // column-major flat index
    double analytic = 0.0;
    double numeric = 0.0;

    bool ok(double rel, double abs) const;
};

/// Central differences over every entry of the named tensors ("x_in" is the
/// block input; empty list means all tensors).
std::vector<FdEntry> fd_check_block(const TtcLayerWeights& w, const Vector& x_in, Index T, const Vector& probe,
                                    const std::vector<std::string>& tensors = {}, double step = 1e-6);

/// Truncated Poisson log-normal horizon: τ ~ N(log T_μ − ½T_σ², T_σ²),
/// T = Poisson(e^τ) + 1, redrawn until T ∈ [1, T_max].
class HorizonSampler {
public:
    struct Config {
        double T_mu = 8.0;
        double T_sigma = 0.1;
        Index T_max = 32;
        std::uint64_t seed = 0;
        bool mean_mode = false;  // Poisson replaced by round(e^τ)
    };

    explicit HorizonSampler(const Config& cfg);
    Index sample();

    static constexpr std::uint64_t kMaxTries = 1000000;

private:
    struct Impl;
    Config cfg_;
    std::shared_ptr<Impl> impl_;
};

}  // namespace symlqr
