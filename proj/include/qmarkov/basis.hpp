// Measurement bases satisfying the two optimality conditions
//
//     <e_i| B |e_i> = 0     and     <e_i| rho |e_i> = 1/k     for all i,
//
// for an anti-Hermitian traceless B and a reference state rho (usually |chi><chi|).

#pragma once

#include "qmarkov/algebra.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace qmarkov {

struct MeasBasis {
    CMatrix vectors;  // columns are the basis vectors
    double angle = std::numeric_limits<double>::quiet_NaN();  // qubit only, in [-pi/2, pi/2)

    Eigen::Index size() const { return vectors.cols(); }
    CVector vec(Eigen::Index i) const { return vectors.col(i); }
};

/// Reduce an angle modulo pi into [-pi/2, pi/2).
inline double wrap_half_pi(double a) {
    const double pi = std::numbers::pi;
    double r = std::fmod(a + pi / 2, pi);
    if (r < 0) r += pi;
    r -= pi / 2;
    if (r >= pi / 2) r -= pi;
    return r;
}

using Bloch = std::array<double, 3>;

/// Coefficients r with m = c0 I + r . sigma (r complex in general).
inline std::array<cplx, 3> pauli_coefficients(const CMatrix& m) {
    return {0.5 * (m(0, 1) + m(1, 0)), 0.5 * kI * (m(0, 1) - m(1, 0)), 0.5 * (m(0, 0) - m(1, 1))};
}

/// Bloch vector r of an anti-Hermitian traceless B = i r . sigma.
inline Bloch bloch_of_antihermitian(const CMatrix& b) {
    const auto c = pauli_coefficients(b);
    return {(c[0] / kI).real(), (c[1] / kI).real(), (c[2] / kI).real()};
}

/// Bloch vector of a Hermitian 2x2 matrix, normalized by its trace.
inline Bloch bloch_of_state(const CMatrix& rho) {
    const auto c = pauli_coefficients(rho);
    const double tr = rho.trace().real();
    return {2.0 * c[0].real() / tr, 2.0 * c[1].real() / tr, 2.0 * c[2].real() / tr};
}

inline double norm3(const Bloch& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
inline double dot3(const Bloch& a, const Bloch& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Bloch cross3(const Bloch& a, const Bloch& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Qubit basis {Bloch +s, Bloch -s}.
inline MeasBasis basis_from_bloch(const Bloch& s) {
    const double n = norm3(s);
    const double sz = std::clamp(s[2] / n, -1.0, 1.0);
    const double polar = std::acos(sz);
    const double azim = std::atan2(s[1], s[0]);
    const cplx ph = std::polar(1.0, azim);
    MeasBasis out;
    out.vectors.resize(2, 2);
    out.vectors(0, 0) = std::cos(polar / 2);
    out.vectors(1, 0) = ph * std::sin(polar / 2);
    out.vectors(0, 1) = std::sin(polar / 2);
    out.vectors(1, 1) = -ph * std::cos(polar / 2);
    out.angle = wrap_half_pi(azim);
    return out;
}

inline MeasBasis basis_from_angle(double angle) {
    return basis_from_bloch({std::cos(angle), std::sin(angle), 0.0});
}

inline Bloch bloch_of_vector(const CVector& e) { return bloch_of_state(projector(e)); }

/// Sum of squared condition violations; B is normalized to unit Frobenius norm.
inline double basis_residual(const MeasBasis& basis, const CMatrix& b, const CMatrix& rho) {
    const double nb = b.norm();
    const double k = static_cast<double>(basis.size());
    const double tr = rho.trace().real();
    double res = 0.0;
    for (Eigen::Index i = 0; i < basis.size(); ++i) {
        const CVector e = basis.vec(i);
        if (nb > 2e-14) res += std::norm(e.dot(b * e) / nb);
        const double p = e.dot(rho * e).real() / tr;
        res += (p - 1.0 / k) * (p - 1.0 / k);
    }
    const CMatrix g = basis.vectors.adjoint() * basis.vectors - CMatrix::Identity(basis.size(), basis.size());
    return res + g.squaredNorm();
}

struct BasisOptions {
    double default_angle = 0.0;  // used when B gives no direction and no previous basis applies
    double degenerate_tol = 1e-10;
    double accept_residual = 1e-8;
};

/// Closed-form qubit solver: the basis Bloch vector is orthogonal to both the
/// Bloch vector r of B and the Bloch vector q of rho, s = r x q. For rho = |0><0|
/// this is s = (r_y, -r_x, 0).
inline MeasBasis solve_basis_qubit(const CMatrix& b, const CMatrix& rho, const MeasBasis* prev = nullptr,
                                   const BasisOptions& opt = {}) {
    if (b.rows() != 2 || b.cols() != 2 || rho.rows() != 2)
        throw std::invalid_argument("solve_basis_qubit: expects 2x2 input");
    const Bloch r = bloch_of_antihermitian(b);
    const Bloch q = bloch_of_state(rho);
    const double nr = norm3(r), nq = norm3(q);
    const bool r_on = nr > 1e-14;
    const bool q_on = nq > 1e-12;

    MeasBasis out;
    Bloch n{0, 0, 0};
    if (r_on && q_on) n = cross3(r, q);
    const double scale = (r_on ? nr : 1.0) * (q_on ? nq : 1.0);
    if (r_on && q_on && norm3(n) > opt.degenerate_tol * scale) {
        out = basis_from_bloch(n);
    } else {
        // Any s orthogonal to the remaining constraint direction works.
        std::optional<Bloch> v;
        if (q_on) v = Bloch{q[0] / nq, q[1] / nq, q[2] / nq};
        else if (r_on) v = Bloch{r[0] / nr, r[1] / nr, r[2] / nr};
        if (prev && prev->size() == 2) {
            const Bloch sp = bloch_of_vector(prev->vec(0));
            const bool ok_q = !q_on || std::abs(dot3(sp, q)) <= 1e-9 * nq;
            const bool ok_r = !r_on || std::abs(dot3(sp, r)) <= 1e-9 * nr;
            if (ok_q && ok_r) return *prev;
        }
        const double a = opt.default_angle;
        for (const Bloch cand : {Bloch{std::cos(a), std::sin(a), 0.0}, Bloch{-std::sin(a), std::cos(a), 0.0},
                                 Bloch{0.0, 0.0, 1.0}}) {
            Bloch s = cand;
            if (v) {
                const double p = dot3(s, *v);
                for (int i = 0; i < 3; ++i) s[i] -= p * (*v)[i];
            }
            if (norm3(s) > 1e-6) {
                out = basis_from_bloch(s);
                break;
            }
        }
    }
    const double res = basis_residual(out, b, rho);
    if (res > opt.accept_residual)
        throw std::runtime_error("solve_basis_qubit: constraint residual " + std::to_string(res));
    return out;
}

inline MeasBasis solve_basis_qubit(const CMatrix& b, const CVector& chi, const MeasBasis* prev = nullptr,
                                   const BasisOptions& opt = {}) {
    return solve_basis_qubit(b, projector(chi), prev, opt);
}

namespace detail {

/// Unit vector x in span{x1, x2} (orthonormal) with <x|C|x> equal to
/// z1 + tau (z2 - z1), where z_i = <x_i|C|x_i> and tau in [0, 1].
inline CVector segment_point(const CMatrix& c, const CVector& x1, const CVector& x2, double tau, double tol = 1e-300) {
    const cplx z1 = x1.dot(c * x1), z2 = x2.dot(c * x2);
    const cplx c12 = x1.dot(c * x2), c21 = x2.dot(c * x1);
    const cplx w = z2 - z1;
    if (std::abs(w) <= tol) return x1;
    // Pick the relative phase so the cross term is parallel to w.
    const cplx alpha = c12 * std::conj(w), gamma = c21 * std::conj(w);
    const double A = alpha.real() - gamma.real();
    const double B = alpha.imag() + gamma.imag();
    const double ph = (std::abs(A) + std::abs(B) > 0.0) ? std::atan2(-B, A) : 0.0;
    const cplx g = std::polar(1.0, ph) * c12 + std::polar(1.0, -ph) * c21;
    const double r = (g * std::conj(w)).real() / std::norm(w);
    // sin^2 s + r sin s cos s = tau  <=>  r sin u - cos u = 2 tau - 1, u = 2s.
    const double R = std::sqrt(1.0 + r * r);
    const double delta = std::atan2(1.0, r);
    const double u = delta + std::asin(std::clamp((2.0 * tau - 1.0) / R, -1.0, 1.0));
    const double s = 0.5 * u;
    return std::cos(s) * x1 + std::polar(std::sin(s), ph) * x2;
}

/// Unit vector x with <x|C|x> = 0 for a traceless C (numerical range argument).
/// Entries below the absolute tolerance `tol` count as zero.
inline CVector numerical_range_zero(const CMatrix& c, double tol) {
    const Eigen::Index m = c.rows();
    if (m == 1) return CVector::Ones(1);
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(c(i, i)) <= tol) return CVector::Unit(m, i);
    if (m == 2) return segment_point(c, CVector::Unit(2, 0), CVector::Unit(2, 1), 0.5, tol);
    // The compression to e_0^perp has average diagonal p = -c00/(m-1); find y
    // there with <y|C|y> = p, then 0 sits on the segment [c00, p].
    const cplx c00 = c(0, 0);
    const cplx p = -c00 / static_cast<double>(m - 1);
    CMatrix sub = c.bottomRightCorner(m - 1, m - 1);
    sub -= p * CMatrix::Identity(m - 1, m - 1);
    const CVector ysub = numerical_range_zero(sub, tol);
    CVector y = CVector::Zero(m);
    y.tail(m - 1) = ysub;
    const double tau = static_cast<double>(m - 1) / static_cast<double>(m);
    return segment_point(c, CVector::Unit(m, 0), y, tau, tol);
}

/// Orthonormal basis of C^m with zero diagonal for a traceless C.
inline CMatrix zero_diagonal_basis(const CMatrix& c) {
    const Eigen::Index m = c.rows();
    const double tol = 1e-12 * std::max(c.norm(), 1e-300);
    CMatrix q = CMatrix::Identity(m, m);  // current subspace basis (columns)
    CMatrix out(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index rem = m - j;
        CMatrix comp = q.adjoint() * c * q;
        comp -= (comp.trace() / static_cast<double>(rem)) * CMatrix::Identity(rem, rem);
        const CVector x = numerical_range_zero(comp, tol);
        out.col(j) = q * x;
        if (rem == 1) break;
        const auto full = complete_orthonormal({x / x.norm()}, static_cast<std::size_t>(rem), 1e-8);
        CMatrix nq(m, rem - 1);
        for (Eigen::Index i = 1; i < rem; ++i) nq.col(i - 1) = q * full[static_cast<std::size_t>(i)];
        q = nq;
    }
    return out;
}

}  // namespace detail

/// General-dimension solver. Both conditions are combined into one traceless
/// matrix C = iB/|B| + i(rho/tr rho - I/k); a basis with zero diagonal for C
/// satisfies both, and one is built by repeatedly splitting off a vector in the
/// numerical range zero set.
inline MeasBasis solve_basis_general(const CMatrix& b, const CMatrix& rho, const MeasBasis* prev = nullptr,
                                     const BasisOptions& opt = {}) {
    const Eigen::Index k = b.rows();
    if (k < 2 || b.cols() != k || rho.rows() != k || rho.cols() != k)
        throw std::invalid_argument("solve_basis_general: dimension mismatch");
    const double nb = b.norm();
    const bool degenerate = nb <= 1e-14;
    if (degenerate && prev && prev->size() == k && basis_residual(*prev, b, rho) <= opt.accept_residual)
        return *prev;

    CMatrix h1 = CMatrix::Zero(k, k);
    if (!degenerate) h1 = kI * b / nb;
    const CMatrix h2 = rho / rho.trace().real() - CMatrix::Identity(k, k) / static_cast<double>(k);
    CMatrix c = h1 + kI * h2;
    c -= (c.trace() / static_cast<double>(k)) * CMatrix::Identity(k, k);

    MeasBasis out;
    out.vectors = detail::zero_diagonal_basis(c);
    for (Eigen::Index i = 0; i < k; ++i) {
        CVector v = out.vectors.col(i);
        fix_phase(v);
        out.vectors.col(i) = v;
    }
    if (k == 2) out.angle = wrap_half_pi(std::arg(out.vectors(1, 0) / out.vectors(0, 0)));
    const double res = basis_residual(out, b, rho);
    if (res > opt.accept_residual)
        throw std::runtime_error("basis search failed: residual " + std::to_string(res));
    return out;
}

inline MeasBasis solve_basis_general(const CMatrix& b, const CVector& chi, const MeasBasis* prev = nullptr,
                                     const BasisOptions& opt = {}) {
    return solve_basis_general(b, projector(chi), prev, opt);
}

/// Qubit closed form for k = 2, general construction otherwise.
inline MeasBasis solve_basis(const CMatrix& b, const CMatrix& rho, const MeasBasis* prev = nullptr,
                             const BasisOptions& opt = {}) {
    return b.rows() == 2 ? solve_basis_qubit(b, rho, prev, opt) : solve_basis_general(b, rho, prev, opt);
}

}  // namespace qmarkov
