// System / noise-unit interaction restricted to inputs of the form |x> (x) |chi>.

#pragma once

#include "qmarkov/algebra.hpp"

#include <cstddef>
#include <stdexcept>

namespace qmarkov {

/// The isometry x -> U(x (x) chi) together with its parameter derivative.
///
/// `iso` is (sys_dim * unit_dim) x sys_dim with row index s' * unit_dim + u.
/// Only these columns of the interaction unitary are ever needed.
struct InteractionModel {
    std::size_t sys_dim = 0;
    std::size_t unit_dim = 0;
    CVector chi;
    CMatrix iso;
    CMatrix iso_dot;

    Eigen::Index D() const { return static_cast<Eigen::Index>(sys_dim); }
    Eigen::Index k() const { return static_cast<Eigen::Index>(unit_dim); }

    void validate(double tol = kDefaultTol) const {
        if (iso.rows() != D() * k() || iso.cols() != D() || iso_dot.rows() != iso.rows() ||
            iso_dot.cols() != iso.cols() || chi.size() != k())
            throw std::invalid_argument("InteractionModel: inconsistent dimensions");
        if (std::abs(chi.norm() - 1.0) > tol)
            throw std::invalid_argument("InteractionModel: input state not normalized");
        if (!is_isometry(iso, tol)) throw std::invalid_argument("InteractionModel: not an isometry");
    }

    /// Residual of iso * psi == psi (x) chi.
    double stationarity_residual(const CVector& psi) const {
        return (iso * psi - kron(psi, chi)).norm();
    }

    /// <psi (x) chi | iso_dot psi>, zero in the gauge used by the filter.
    cplx gauge_overlap(const CVector& psi) const { return kron(psi, chi).dot(iso_dot * psi); }

    bool gauge_ok(const CVector& psi, double tol = kDefaultTol) const {
        return std::abs(gauge_overlap(psi)) <= tol;
    }
};

}  // namespace qmarkov
