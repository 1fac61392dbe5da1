// Coherent quantum absorber: post-processing unitary V on (absorber, unit) so
// that the doubled system (system, absorber) has a pure stationary state and
// passes the input units through unchanged at the reference parameter.

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/chain.hpp"
#include "qmarkov/interaction.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qmarkov {

inline constexpr double kSchmidtCutoff = 1e-12;

/// sum_i sqrt(l_i) |f_i> (x) |f_i>, dropping eigenvalues at or below `cutoff`.
inline CVector purify(const CMatrix& rho, double cutoff = kSchmidtCutoff) {
    const auto eig = eig_hermitian(rho, 1e-9);
    const Eigen::Index d = rho.rows();
    CVector out = CVector::Zero(d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double l = eig.values(i);
        if (l < -1e-9) throw std::invalid_argument("purify: negative eigenvalue");
        if (l <= cutoff) continue;
        const auto& f = eig.vectors[static_cast<std::size_t>(i)];
        out += std::sqrt(l) * kron(f, f);
    }
    return out / out.norm();
}

/// Compose V (on absorber (x) unit) after a system interaction: the doubled
/// isometry on system (x) absorber. Row layout ((s' d + a') k + u').
inline CMatrix lift_isometry(const CMatrix& V, const CMatrix& iso, Eigen::Index d, Eigen::Index k) {
    CMatrix out = CMatrix::Zero(d * d * k, d * d);
    for (Eigen::Index s = 0; s < d; ++s)
        for (Eigen::Index a = 0; a < d; ++a) {
            // phi[(s' d + a) k + u] = iso[s' k + u, s], then V acts on (a, u).
            for (Eigen::Index sp = 0; sp < d; ++sp) {
                CVector au = CVector::Zero(d * k);
                for (Eigen::Index u = 0; u < k; ++u) au(a * k + u) = iso(sp * k + u, s);
                const CVector mapped = V * au;
                out.block(sp * d * k, s * d + a, d * k, 1) = mapped;
            }
        }
    return out;
}

inline InteractionModel lift_model(const CMatrix& V, const InteractionModel& model) {
    const Eigen::Index d = model.D(), k = model.k();
    InteractionModel w;
    w.sys_dim = static_cast<std::size_t>(d * d);
    w.unit_dim = model.unit_dim;
    w.chi = model.chi;
    w.iso = lift_isometry(V, model.iso, d, k);
    w.iso_dot = lift_isometry(V, model.iso_dot, d, k);
    return w;
}

struct AbsorberResult {
    CMatrix V;                 // (d k) x (d k) unitary on absorber (x) unit
    InteractionModel W_model;  // doubled chain, sys_dim = d^2
    CVector psi_tilde;
};

inline AbsorberResult build_absorber(const InteractionModel& model, const CMatrix& rho_ss,
                                     double cutoff = kSchmidtCutoff) {
    model.validate();
    const Eigen::Index d = model.D(), k = model.k();
    const auto eig = eig_hermitian(rho_ss, 1e-9);
    const CVector psi_tilde = purify(rho_ss, cutoff);

    // phi = U |psi_tilde (x) chi>, layout (s, a, u).
    CVector phi = CVector::Zero(d * d * k);
    for (Eigen::Index s = 0; s < d; ++s)
        for (Eigen::Index a = 0; a < d; ++a) {
            const cplx amp = psi_tilde(s * d + a);
            if (amp == cplx{0.0}) continue;
            for (Eigen::Index sp = 0; sp < d; ++sp)
                for (Eigen::Index u = 0; u < k; ++u) phi((sp * d + a) * k + u) += amp * model.iso(sp * k + u, s);
        }

    std::vector<CVector> sources, targets;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double l = eig.values(i);
        if (l <= cutoff) continue;
        const auto& f = eig.vectors[static_cast<std::size_t>(i)];
        CVector g = CVector::Zero(d * k);
        for (Eigen::Index sp = 0; sp < d; ++sp) {
            const cplx w = std::conj(f(sp));
            g += w * phi.segment(sp * d * k, d * k);
        }
        g /= std::sqrt(l);
        sources.push_back(g);
        targets.push_back(kron(f, model.chi));
    }
    CMatrix gram(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(sources.size()));
    for (std::size_t i = 0; i < sources.size(); ++i)
        for (std::size_t j = 0; j < sources.size(); ++j)
            gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sources[i].dot(sources[j]);
    if ((gram - CMatrix::Identity(gram.rows(), gram.cols())).norm() > 1e-8)
        throw std::runtime_error("inconsistent Schmidt vectors");

    // Remove the residual O(1e-9) non-orthogonality before completing.
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) sources[i] -= sources[j].dot(sources[i]) * sources[j];
        sources[i].normalize();
    }

    const auto dk = static_cast<std::size_t>(d * k);
    const auto src = complete_orthonormal(sources, dk, 1e-9);
    const auto tgt = complete_orthonormal(targets, dk, 1e-9);
    CMatrix V = CMatrix::Zero(d * k, d * k);
    for (std::size_t m = 0; m < dk; ++m) V += tgt[m] * src[m].adjoint();

    return {V, lift_model(V, model), psi_tilde};
}

/// Remove the phase drift of the derivative: iso_dot -= <psi chi|iso_dot psi> iso.
inline InteractionModel gauge_fix(const InteractionModel& model, const CVector& psi) {
    InteractionModel out = model;
    const cplx c = model.gauge_overlap(psi);
    out.iso_dot = model.iso_dot - c * model.iso;
    return out;
}

/// A chain with a pure stationary state at the reference parameter, ready for
/// the measurement filter. When the original chain already has one, no
/// absorber is used.
struct PureChain {
    InteractionModel model;  // gauge-fixed, at the reference parameter
    CVector psi;
    std::optional<CMatrix> V;
    CMatrix rho_ss;  // stationary state of the original chain

    /// Model at another parameter value, post-processed by the same V.
    InteractionModel lift(const InteractionModel& original) const {
        return V ? lift_model(*V, original) : original;
    }

    /// Embed a system state into the (possibly doubled) chain.
    CVector embed(const CVector& sys_state, const CVector& absorber_state) const {
        return V ? CVector(kron(sys_state, absorber_state)) : sys_state;
    }
};

inline PureChain prepare_pure_chain(const InteractionModel& model) {
    model.validate();
    const auto st = stationary(transition_op(kraus_standard(model)));
    const auto eig = eig_hermitian(st.rho_ss, 1e-9);
    PureChain pc;
    pc.rho_ss = st.rho_ss;
    if (eig.values(0) > 1.0 - 1e-10) {
        const CVector& psi = eig.vectors[0];
        if (model.stationarity_residual(psi) < 1e-9) {
            pc.model = gauge_fix(model, psi);
            pc.psi = psi;
            return pc;
        }
    }
    auto ab = build_absorber(model, st.rho_ss);
    pc.model = gauge_fix(ab.W_model, ab.psi_tilde);
    pc.psi = ab.psi_tilde;
    pc.V = ab.V;
    return pc;
}

}  // namespace qmarkov
