// Measurement filter: the recursion that selects, from the outcomes seen so
// far, the basis in which the next noise unit is measured.
//
// The conditioned operator at step j is
//
//     A_j = k^{-(j-1)} A_1 + W (Pi_{j-1} (x) P_chi) W^dagger,   B_j = Tr_sys A_j,
//     Pi_j = <e_{i_j}| A_j |e_{i_j}>,
//
// with A_1 = Wdot P_{psi chi} - P_{psi chi} Wdot^dagger. Both A_j and Pi_j shrink
// geometrically, so the state stores Pi_j / |Pi_j| together with the relative
// weight beta of the A_1 term; the basis conditions are invariant under the
// positive rescaling this introduces.

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/basis.hpp"
#include "qmarkov/interaction.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>

namespace qmarkov {

/// Trace over the system factor of an operator on system (x) unit.
inline CMatrix trace_system(const CMatrix& a, Eigen::Index D, Eigen::Index k) {
    CMatrix out = CMatrix::Zero(k, k);
    for (Eigen::Index s = 0; s < D; ++s) out += a.block(s * k, s * k, k, k);
    return out;
}

/// (I (x) <e|) A (I (x) |e>) for an operator on system (x) unit.
inline CMatrix sandwich_unit(const CMatrix& a, const CVector& e, Eigen::Index D, Eigen::Index k) {
    CMatrix out(D, D);
    for (Eigen::Index s = 0; s < D; ++s)
        for (Eigen::Index t = 0; t < D; ++t) out(s, t) = e.dot(a.block(s * k, t * k, k, k) * e);
    return out;
}

struct FilterContext {
    InteractionModel model;  // gauge-fixed, reference parameter
    CVector psi;
    CMatrix chi_proj;
    CMatrix a1;  // (D k) x (D k)
    CMatrix b1;  // k x k
    BasisOptions basis_options;
};

struct FilterState {
    std::shared_ptr<const FilterContext> ctx;
    std::size_t step = 0;
    CMatrix pi_hat;         // D x D, unit Frobenius norm or zero
    double beta = 1.0;      // weight of A_1 relative to the normalized filter
    double log_scale = 0.0; // log of the factor relating Pi_j to pi_hat
    std::optional<MeasBasis> last_basis;

    /// Working operator beta * A_1 + W (pi_hat (x) P_chi) W^dagger.
    CMatrix working_operator() const {
        const auto& m = ctx->model;
        return beta * ctx->a1 + m.iso * pi_hat * m.iso.adjoint();
    }

    /// The filter operator without the normalization (small n only).
    CMatrix raw_pi() const { return std::exp(log_scale) * pi_hat; }

    /// A_{step+1} as it appears in the unnormalized recursion.
    CMatrix raw_working_operator() const { return std::exp(log_scale) * working_operator(); }
};

inline FilterState init_filter(const InteractionModel& w_model, const CVector& psi,
                               const BasisOptions& opt = {}) {
    w_model.validate();
    if (w_model.stationarity_residual(psi) > 1e-9)
        throw std::invalid_argument("init_filter: psi is not stationary");
    if (!w_model.gauge_ok(psi))
        throw std::invalid_argument("init_filter: gauge condition violated");
    auto ctx = std::make_shared<FilterContext>();
    ctx->model = w_model;
    ctx->psi = psi;
    ctx->chi_proj = projector(w_model.chi);
    const CVector pc = kron(psi, w_model.chi);
    const CVector v = w_model.iso_dot * psi;
    ctx->a1 = v * pc.adjoint() - pc * v.adjoint();
    ctx->b1 = trace_system(ctx->a1, w_model.D(), w_model.k());
    ctx->basis_options = opt;

    FilterState st;
    st.ctx = std::move(ctx);
    st.pi_hat = CMatrix::Zero(w_model.D(), w_model.D());
    return st;
}

/// Basis for the next unit, from B = Tr_sys of the working operator.
inline MeasBasis next_basis(const FilterState& st) {
    const auto& m = st.ctx->model;
    const CMatrix b = trace_system(st.working_operator(), m.D(), m.k());
    const MeasBasis* prev = st.last_basis ? &*st.last_basis : nullptr;
    return solve_basis(b, st.ctx->chi_proj, prev, st.ctx->basis_options);
}

inline FilterState step_filter(const FilterState& st, const MeasBasis& basis, Eigen::Index outcome) {
    const auto& m = st.ctx->model;
    if (outcome < 0 || outcome >= m.k()) throw std::out_of_range("step_filter: outcome out of range");
    const CMatrix raw = sandwich_unit(st.working_operator(), basis.vec(outcome), m.D(), m.k());
    const double nu = raw.norm();
    FilterState out;
    out.ctx = st.ctx;
    out.step = st.step + 1;
    out.last_basis = basis;
    const double logk = std::log(static_cast<double>(m.k()));
    if (nu > 1e-300) {
        out.pi_hat = raw / nu;
        out.beta = st.beta / (static_cast<double>(m.k()) * nu);
        out.log_scale = st.log_scale + std::log(nu);
    } else {
        out.pi_hat = CMatrix::Zero(m.D(), m.D());
        out.beta = 1.0;
        out.log_scale = -static_cast<double>(out.step) * logk;
    }
    return out;
}

/// Basis for the optional final joint measurement of the (doubled) system.
inline MeasBasis final_system_basis(const FilterState& st, const CVector& psi) {
    const MeasBasis* prev = nullptr;
    if (st.last_basis && st.last_basis->size() == psi.size()) prev = &*st.last_basis;
    return solve_basis(st.pi_hat, projector(psi), prev, st.ctx->basis_options);
}

}  // namespace qmarkov
