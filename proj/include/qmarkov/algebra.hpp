// Dense complex linear algebra used throughout qmarkov.
//
// Matrices and vectors are Eigen dynamic-size complex types. Tensor products
// follow the usual row-major index convention: for factors with dimensions
// (d_0, ..., d_{p-1}) the composite index is ((i_0 * d_1 + i_1) * d_2 + ...).
// Superoperators use column-stacking vectorization, vec(A X B) = (B^T (x) A) vec(X).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace qmarkov {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-10;
inline constexpr double kPinvCutoff = 1e-12;

inline const cplx kI{0.0, 1.0};

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

inline bool is_square(const CMatrix& m) { return m.rows() == m.cols(); }

inline bool is_hermitian(const CMatrix& m, double tol = kDefaultTol) {
    return is_square(m) && (m - m.adjoint()).norm() <= tol;
}

inline bool is_anti_hermitian(const CMatrix& m, double tol = kDefaultTol) {
    return is_square(m) && (m + m.adjoint()).norm() <= tol;
}

inline bool is_isometry(const CMatrix& m, double tol = kDefaultTol) {
    return (m.adjoint() * m - CMatrix::Identity(m.cols(), m.cols())).norm() <= tol;
}

inline bool is_unitary(const CMatrix& m, double tol = kDefaultTol) {
    return is_square(m) && is_isometry(m, tol) &&
           (m * m.adjoint() - CMatrix::Identity(m.rows(), m.rows())).norm() <= tol;
}

// ---------------------------------------------------------------------------
// Tensor structure
// ---------------------------------------------------------------------------

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline CVector kron(const CVector& a, const CVector& b) {
    CVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

inline std::size_t product(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

/// Partial trace over every factor not listed in `keep`.
///
/// `keep` holds factor positions; their relative order in the result follows
/// the original factor order regardless of the order given.
inline CMatrix partial_trace(const CMatrix& m, std::span<const std::size_t> dims,
                             std::span<const std::size_t> keep) {
    const std::size_t total = product(dims);
    if (!is_square(m) || static_cast<std::size_t>(m.rows()) != total)
        throw std::invalid_argument("bad tensor factorization");
    const std::size_t p = dims.size();
    std::vector<bool> kept(p, false);
    for (auto k : keep) {
        if (k >= p) throw std::invalid_argument("bad tensor factorization");
        kept[k] = true;
    }
    std::vector<std::size_t> kdims, tdims;
    for (std::size_t i = 0; i < p; ++i) (kept[i] ? kdims : tdims).push_back(dims[i]);
    const std::size_t nk = product(kdims), nt = product(tdims);

    // Strides of each factor in the composite index.
    std::vector<std::size_t> stride(p, 1);
    for (std::size_t i = p; i-- > 1;) stride[i - 1] = stride[i] * dims[i];

    auto compose = [&](std::size_t kidx, std::size_t tidx) {
        std::size_t full = 0;
        for (std::size_t i = p; i-- > 0;) {
            if (kept[i]) {
                full += (kidx % dims[i]) * stride[i];
                kidx /= dims[i];
            } else {
                full += (tidx % dims[i]) * stride[i];
                tidx /= dims[i];
            }
        }
        return full;
    };

    std::vector<std::size_t> table(nk * nt);
    for (std::size_t a = 0; a < nk; ++a)
        for (std::size_t t = 0; t < nt; ++t) table[a * nt + t] = compose(a, t);

    CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(nk));
    for (std::size_t r = 0; r < nk; ++r)
        for (std::size_t c = 0; c < nk; ++c) {
            cplx acc{0.0, 0.0};
            for (std::size_t t = 0; t < nt; ++t)
                acc += m(static_cast<Eigen::Index>(table[r * nt + t]),
                         static_cast<Eigen::Index>(table[c * nt + t]));
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc;
        }
    return out;
}

inline CMatrix partial_trace(const CMatrix& m, std::initializer_list<std::size_t> dims,
                             std::initializer_list<std::size_t> keep) {
    std::vector<std::size_t> d(dims), k(keep);
    return partial_trace(m, d, k);
}

// Column-stacking vectorization.
inline CVector vec(const CMatrix& m) {
    return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unvec(const CVector& v, Eigen::Index rows) {
    const Eigen::Index cols = v.size() / rows;
    return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

/// Moore-Penrose pseudoinverse; singular values below cutoff * sigma_max are dropped.
inline CMatrix pinv_matrix(const CMatrix& m, double cutoff = kPinvCutoff) {
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    RVector sinv = RVector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff * smax && s(i) > 0.0) sinv(i) = 1.0 / s(i);
    const Eigen::Index r = s.size();
    return svd.matrixV().leftCols(r) * sinv.asDiagonal() * svd.matrixU().leftCols(r).adjoint();
}

/// Rotate v so its first component with modulus above tol is real and positive.
inline void fix_phase(CVector& v, double tol = 1e-12) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > tol) {
            v *= std::conj(v(i)) / a;
            return;
        }
    }
}

struct HermitianEigen {
    RVector values;                // descending
    std::vector<CVector> vectors;  // orthonormal, phase-fixed
};

inline HermitianEigen eig_hermitian(const CMatrix& m, double tol = kDefaultTol) {
    if (!is_hermitian(m, tol * std::max(1.0, m.norm())))
        throw std::invalid_argument("eig_hermitian: matrix is not Hermitian");
    const CMatrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    const Eigen::Index n = h.rows();
    HermitianEigen out;
    out.values.resize(n);
    out.vectors.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = n - 1 - i;
        out.values(i) = es.eigenvalues()(src);
        CVector v = es.eigenvectors().col(src);
        fix_phase(v);
        out.vectors.push_back(std::move(v));
    }
    return out;
}

/// Extend an orthonormal family to a basis of C^dim by Gram-Schmidt against
/// the canonical basis vectors taken in index order.
inline std::vector<CVector> complete_orthonormal(const std::vector<CVector>& partial,
                                                 std::size_t dim, double tol = kDefaultTol) {
    const auto n = static_cast<Eigen::Index>(dim);
    for (std::size_t i = 0; i < partial.size(); ++i) {
        if (partial[i].size() != n)
            throw std::invalid_argument("complete_orthonormal: dimension mismatch");
        for (std::size_t j = 0; j <= i; ++j) {
            const cplx g = partial[j].dot(partial[i]);
            const cplx target = (i == j) ? cplx{1.0} : cplx{0.0};
            if (std::abs(g - target) > tol)
                throw std::invalid_argument("complete_orthonormal: input not orthonormal");
        }
    }
    if (partial.size() > dim)
        throw std::invalid_argument("complete_orthonormal: too many vectors");

    std::vector<CVector> basis = partial;
    // Any threshold below 1/sqrt(dim) guarantees the sweep completes the basis.
    const double accept = 0.5 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index m = 0; m < n && basis.size() < dim; ++m) {
        CVector c = CVector::Unit(n, m);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) c -= b.dot(c) * b;
        const double nc = c.norm();
        if (nc > accept) basis.push_back(c / nc);
    }
    return basis;
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline CMatrix projector(const CVector& v) { return v * v.adjoint(); }

/// Im(X) = (X - X^dagger) / 2i, a Hermitian matrix.
inline CMatrix herm_imag(const CMatrix& x) { return (x - x.adjoint()) / (2.0 * kI); }

inline CMatrix pauli_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
inline CMatrix pauli_y() {
    CMatrix m(2, 2);
    m << 0, -kI, kI, 0;
    return m;
}
inline CMatrix pauli_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

}  // namespace qmarkov
