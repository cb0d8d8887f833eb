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

#include "symlqr/autodiff.hpp"

#include "step_ops.hpp"

#include <atomic>

namespace symlqr {

namespace debug {
namespace {
std::atomic<bool> corrupt_backward{false};
}
void set_corrupt_backward(bool on) { corrupt_backward = on; }
}  // namespace debug

ForwardResult ttc_forward(const StepSource& p, const SweepOptions& opt) {
    const auto acc = reverse_sweep(p, opt);
    auto fa = first_action(acc, p, p.initial_state());
    ForwardResult out;
    out.u1 = std::move(fa.u1);
    out.cache.lu = std::move(fa.lu);
    out.cache.Y3cache = acc.Y3cache;
    out.cache.lambda0 = std::move(fa.lambda0);
    out.cache.h0 = p.initial_state();
    out.cache.fingerprint = p.fingerprint();
    out.cache.precision = opt.precision;
    return out;
}

LqrProblem build_dual(const StepSource& p, const Vector& loss_grad) {
    if (loss_grad.size() != p.control_dim())
        throw LqrError(ErrorCode::DimensionMismatch, "loss gradient length differs from control dim");
    LqrProblem d = materialize(p);
    d.h0.setZero();
    for (auto& s : d.steps) s.affine.reset();
    d.steps.front().affine = loss_grad;
    return d;
}

LqrGradients ttc_backward(const StepSource& p, const ForwardCache& cache, const Vector& g) {
    if (cache.fingerprint != p.fingerprint())
        throw LqrError(ErrorCode::StaleCache, "problem changed since the forward pass");
    const Index n = p.state_dim(), m = p.control_dim(), T = p.horizon();
    if (g.size() != m) throw LqrError(ErrorCode::DimensionMismatch, "loss gradient length differs from control dim");

    LqrGradients out = LqrGradients::zeros(n, m, T);
    if (g.isZero(0.0)) return out;

    // Dual seed: λ̃0 = Y1⁻¹·Y3·(−g), h̃0 = 0.
    Vector lam_d = cache.lu.solve(cache.Y3cache * (-g));
    Vector h_d = Vector::Zero(n);
    Vector lam = cache.lambda0;
    Vector h = cache.h0;
    out.g_h0 = lam_d;

    detail::StepWindow win(p);
    const StepParams* prev = nullptr;
    for (Index t = 1; t <= T; ++t) {
        const StepParams& s = win.fetch(t);
        const auto i = static_cast<std::size_t>(t - 1);
        detail::InvTransposeA ainvt(s, t);
        detail::InvR rinv(s, t);

        Vector rl = lam, rd = lam_d;
        if (prev) {
            rl -= prev->Q * h;
            rd -= prev->Q * h_d;
        }
        const Vector lam_n = ainvt.apply(rl);
        const Vector lam_dn = ainvt.apply(rd);
        Vector vl = s.B.transpose() * lam_n;
        if (s.affine) vl += *s.affine;
        Vector vd = s.B.transpose() * lam_dn;
        if (t == 1) vd += g;
        const Vector u = -rinv.apply(vl);
        const Vector u_d = -rinv.apply(vd);

        out.gA[i] = lam_n * h_d.transpose() + lam_dn * h.transpose();
        out.gB[i] = lam_n * u_d.transpose() + lam_dn * u.transpose();
        const Matrix ur = u * u_d.transpose();
        out.gR[i] = 0.5 * (ur + ur.transpose());

        h = detail::apply_A(s, h) + s.B * u;
        h_d = detail::apply_A(s, h_d) + s.B * u_d;
        const Matrix hq = h * h_d.transpose();
        out.gQ[i] = 0.5 * (hq + hq.transpose());

        lam = lam_n;
        lam_d = lam_dn;
        prev = &s;
        ++thread_counters().forward_steps;
    }
    if (debug::corrupt_backward)
        for (auto& gb : out.gB) gb = -gb;
    return out;
}

LqrGradients backward_uncached(const StepSource& p, const Vector& loss_grad, const SweepOptions& opt) {
    const LqrTrajectory primal = symplectic_solve(p, opt);
    const ValidatedProblem dual = ValidatedProblem::unchecked(build_dual(p, loss_grad));
    const LqrTrajectory dsol = symplectic_solve(dual, opt);
    return combine(primal, dsol);
}

}  // namespace symlqr
