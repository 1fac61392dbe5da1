// Quantum Markov chain data: Kraus operators, the transition operator and its
// stationary state.

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/interaction.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace qmarkov {

struct KrausSet {
    std::size_t sys_dim = 0;
    std::size_t unit_dim = 0;
    std::vector<CMatrix> kraus;
    std::vector<CMatrix> kraus_dot;

    double completeness_residual() const {
        CMatrix s = CMatrix::Zero(static_cast<Eigen::Index>(sys_dim), static_cast<Eigen::Index>(sys_dim));
        for (const auto& k : kraus) s += k.adjoint() * k;
        return (s - CMatrix::Identity(s.rows(), s.cols())).norm();
    }

    double derivative_residual() const {
        CMatrix s = CMatrix::Zero(static_cast<Eigen::Index>(sys_dim), static_cast<Eigen::Index>(sys_dim));
        for (std::size_t i = 0; i < kraus.size() && i < kraus_dot.size(); ++i)
            s += kraus_dot[i].adjoint() * kraus[i] + kraus[i].adjoint() * kraus_dot[i];
        return s.norm();
    }
};

/// K = (I (x) <e|) iso for a single unit vector e.
inline CMatrix kraus_for_vector(const CMatrix& iso, Eigen::Index unit_dim, const CVector& e) {
    const Eigen::Index D = iso.cols();
    CMatrix k = CMatrix::Zero(D, D);
    for (Eigen::Index sp = 0; sp < D; ++sp)
        for (Eigen::Index u = 0; u < unit_dim; ++u) {
            const cplx w = std::conj(e(u));
            if (w != cplx{0.0}) k.row(sp) += w * iso.row(sp * unit_dim + u);
        }
    return k;
}

/// Kraus operators of the model in the unit basis given by the columns of `basis`.
inline KrausSet kraus_from_isometry(const InteractionModel& model, const CMatrix& basis,
                                    double tol = kDefaultTol) {
    if (basis.rows() != model.k() || basis.cols() != model.k() || !is_unitary(basis, tol))
        throw std::invalid_argument("kraus_from_isometry: basis is not orthonormal");
    KrausSet out{model.sys_dim, model.unit_dim, {}, {}};
    for (Eigen::Index i = 0; i < model.k(); ++i) {
        out.kraus.push_back(kraus_for_vector(model.iso, model.k(), basis.col(i)));
        out.kraus_dot.push_back(kraus_for_vector(model.iso_dot, model.k(), basis.col(i)));
    }
    return out;
}

inline KrausSet kraus_standard(const InteractionModel& model) {
    return kraus_from_isometry(model, CMatrix::Identity(model.k(), model.k()));
}

struct TransitionOp {
    std::size_t dim = 0;
    CMatrix vectorized;  // D^2 x D^2, column stacking
};

inline TransitionOp transition_op(const KrausSet& ks) {
    const auto D = static_cast<Eigen::Index>(ks.sys_dim);
    TransitionOp t{ks.sys_dim, CMatrix::Zero(D * D, D * D)};
    for (const auto& k : ks.kraus) t.vectorized += kron(CMatrix(k.conjugate()), k);
    return t;
}

inline CMatrix apply_T(const TransitionOp& t, const CMatrix& rho) {
    return unvec(t.vectorized * vec(rho), static_cast<Eigen::Index>(t.dim));
}

inline CMatrix apply_T(const KrausSet& ks, const CMatrix& rho) {
    CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
    for (const auto& k : ks.kraus) out += k * rho * k.adjoint();
    return out;
}

struct StationaryInfo {
    CMatrix rho_ss;
    double gap = 0.0;
    bool primitive = false;
    bool full_rank = false;
    double second_eigmod = 0.0;
    std::vector<cplx> spectrum;  // sorted by decreasing modulus
};

/// Hermitize, clip negative eigenvalues and renormalize to unit trace.
inline CMatrix project_density(const CMatrix& m) {
    const CMatrix h = 0.5 * (m + m.adjoint());
    const auto eig = eig_hermitian(h, 1e-6);
    CMatrix out = CMatrix::Zero(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i)
        if (eig.values(i) > 0.0)
            out += eig.values(i) * projector(eig.vectors[static_cast<std::size_t>(i)]);
    const cplx tr = out.trace();
    if (std::abs(tr) <= 0.0) throw std::runtime_error("project_density: zero trace");
    return out / tr.real();
}

inline StationaryInfo stationary(const TransitionOp& t, double rank_tol = kDefaultTol) {
    const auto D = static_cast<Eigen::Index>(t.dim);
    Eigen::ComplexEigenSolver<CMatrix> es(t.vectorized);
    const auto& vals = es.eigenvalues();
    const Eigen::Index n = vals.size();

    Eigen::Index lead = 0;
    for (Eigen::Index i = 1; i < n; ++i)
        if (std::abs(vals(i) - 1.0) < std::abs(vals(lead) - 1.0)) lead = i;
    if (std::abs(vals(lead) - 1.0) > 1e-8) throw std::runtime_error("not trace preserving");

    // Among (near) unit eigenvectors prefer the one with the largest trace;
    // a degenerate eigenspace may hand back traceless fixed points.
    std::vector<Eigen::Index> unit_idx;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(vals(i) - 1.0) <= 1e-8) unit_idx.push_back(i);
    Eigen::Index best = lead;
    double best_tr = -1.0;
    for (auto i : unit_idx) {
        const double tr = std::abs(unvec(es.eigenvectors().col(i), D).trace());
        if (tr > best_tr + 1e-12) {
            best_tr = tr;
            best = i;
        }
    }

    StationaryInfo info;
    if (best_tr > 1e-8) {
        CMatrix fp = unvec(es.eigenvectors().col(best), D);
        fp /= fp.trace();
        info.rho_ss = project_density(fp);
    } else {
        // Cesaro average of T^m(I/D).
        CMatrix rho = CMatrix::Identity(D, D) / static_cast<double>(D);
        CMatrix acc = CMatrix::Zero(D, D);
        for (int m = 0; m < 2000; ++m) {
            acc += rho;
            rho = apply_T(t, rho);
        }
        info.rho_ss = project_density(acc);
    }

    std::vector<cplx> spec(vals.data(), vals.data() + n);
    std::stable_sort(spec.begin(), spec.end(),
                     [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
    info.spectrum = spec;

    // Drop one copy of the eigenvalue closest to 1, the rest gives the gap.
    std::vector<cplx> rest;
    bool removed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!removed && i == lead) {
            removed = true;
            continue;
        }
        rest.push_back(vals(i));
    }
    double second = 0.0;
    bool unit_simple = true;
    for (auto v : rest) {
        second = std::max(second, std::abs(v));
        if (std::abs(v - 1.0) <= 1e-8) unit_simple = false;
    }
    info.second_eigmod = second;
    info.gap = 1.0 - second;

    const auto eig = eig_hermitian(info.rho_ss, 1e-6);
    info.full_rank = eig.values(eig.values.size() - 1) > rank_tol;
    info.primitive = unit_simple && second < 1.0 - 1e-8 && info.full_rank;
    return info;
}

// ---------------------------------------------------------------------------
// Dense system-output states (small n only)
// ---------------------------------------------------------------------------

/// |Psi(n)> and its derivative, factor order (u_1, ..., u_n, s).
struct DenseChainState {
    std::size_t n = 0;
    std::size_t unit_dim = 0;
    std::size_t sys_dim = 0;
    CVector psi;
    CVector psi_dot;

    std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d(n, unit_dim);
        d.push_back(sys_dim);
        return d;
    }
};

inline constexpr double kDenseCapBits = 14.0;

inline DenseChainState chain_state_dense(const InteractionModel& model, const CVector& psi0,
                                         std::size_t n) {
    const double bits = static_cast<double>(n) * std::log2(static_cast<double>(model.unit_dim)) +
                        std::log2(static_cast<double>(model.sys_dim));
    if (bits > kDenseCapBits + 1e-9) throw std::invalid_argument("dense cap exceeded");
    const Eigen::Index D = model.D(), k = model.k();
    CVector cur = psi0;
    CVector dot = CVector::Zero(D);
    Eigen::Index prefix = 1;
    for (std::size_t j = 0; j < n; ++j) {
        CVector nc = CVector::Zero(prefix * k * D);
        CVector nd = CVector::Zero(prefix * k * D);
        for (Eigen::Index x = 0; x < prefix; ++x) {
            const CVector a = model.iso * cur.segment(x * D, D);
            const CVector b = model.iso * dot.segment(x * D, D) + model.iso_dot * cur.segment(x * D, D);
            // iso rows are s' * k + u; the new layout is (prefix, u, s').
            for (Eigen::Index sp = 0; sp < D; ++sp)
                for (Eigen::Index u = 0; u < k; ++u) {
                    nc((x * k + u) * D + sp) = a(sp * k + u);
                    nd((x * k + u) * D + sp) = b(sp * k + u);
                }
        }
        cur = std::move(nc);
        dot = std::move(nd);
        prefix *= k;
    }
    return {n, model.unit_dim, model.sys_dim, cur, dot};
}

}  // namespace qmarkov
