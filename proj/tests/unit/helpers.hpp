#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/interaction.hpp"

#include <random>

namespace testutil {

using namespace qmarkov;

inline CMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    CMatrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cplx(nd(g), nd(g));
    return m;
}

inline CVector random_unit(Eigen::Index d, std::mt19937_64& g) {
    CVector v = random_matrix(d, 1, g).col(0);
    return v / v.norm();
}

inline CMatrix random_unitary(Eigen::Index d, std::mt19937_64& g) {
    Eigen::HouseholderQR<CMatrix> qr(random_matrix(d, d, g));
    return qr.householderQ() * CMatrix::Identity(d, d);
}

inline CMatrix random_hermitian(Eigen::Index d, std::mt19937_64& g) {
    const CMatrix a = random_matrix(d, d, g);
    return 0.5 * (a + a.adjoint());
}

inline CMatrix random_anti_hermitian_traceless(Eigen::Index d, std::mt19937_64& g) {
    CMatrix h = random_hermitian(d, g);
    h -= (h.trace() / static_cast<double>(d)) * CMatrix::Identity(d, d);
    return kI * h;
}

inline CMatrix random_density(Eigen::Index d, std::mt19937_64& g) {
    const CMatrix a = random_matrix(d, d, g);
    CMatrix r = a * a.adjoint();
    return r / r.trace().real();
}

/// Columns |x (x) chi> of a random unitary U, with derivative i H U for a random Hermitian H.
inline InteractionModel random_model(Eigen::Index D, Eigen::Index k, std::mt19937_64& g) {
    const CMatrix u = random_unitary(D * k, g);
    const CMatrix h = random_hermitian(D * k, g);
    InteractionModel m;
    m.sys_dim = static_cast<std::size_t>(D);
    m.unit_dim = static_cast<std::size_t>(k);
    m.chi = CVector::Zero(k);
    m.chi(0) = 1.0;
    m.iso.resize(D * k, D);
    for (Eigen::Index x = 0; x < D; ++x) m.iso.col(x) = u.col(x * k);
    m.iso_dot = kI * h * m.iso;
    return m;
}

}  // namespace testutil
