// Two-level simulation model: a qubit system coupled to qubit noise units,
// with decay parameter lambda, phase phi and unknown parameter theta.
//
//   U|00> = cos(t) sqrt(1-t^2) |00> + i sin(t) sqrt(1-t^2) |10> + t |11>
//   U|10> = i sin(t) a |00> + cos(t) a |10> + b e^{i phi} |01>
//
// with |system, unit> ordering, a = sqrt(1-lambda), b = sqrt(lambda).

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/interaction.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qmarkov {

struct QubitModelParams {
    double theta = 0.0;
    double lambda = 0.8;
    double phi = std::numbers::pi / 4.0;

    double a() const { return std::sqrt(1.0 - lambda); }
    double b() const { return std::sqrt(lambda); }

    void validate() const {
        if (!(std::abs(theta) < 1.0)) throw std::invalid_argument("qubit model: |theta| must be < 1");
        if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("qubit model: lambda must lie in (0, 1]");
        if (!std::isfinite(phi)) throw std::invalid_argument("qubit model: phi must be finite");
    }
};

inline InteractionModel build_interaction(const QubitModelParams& p) {
    p.validate();
    const double t = p.theta, c = std::cos(t), s = std::sin(t), r = std::sqrt(1.0 - t * t);
    const double a = p.a(), b = p.b();
    const cplx eiphi = std::polar(1.0, p.phi);

    InteractionModel m;
    m.sys_dim = 2;
    m.unit_dim = 2;
    m.chi = CVector::Zero(2);
    m.chi(0) = 1.0;
    m.iso = CMatrix::Zero(4, 2);
    m.iso_dot = CMatrix::Zero(4, 2);

    // rows: |00>, |01>, |10>, |11>
    m.iso(0, 0) = c * r;
    m.iso(2, 0) = kI * s * r;
    m.iso(3, 0) = t;
    m.iso(0, 1) = kI * s * a;
    m.iso(2, 1) = c * a;
    m.iso(1, 1) = b * eiphi;

    const double dr = -t / r;
    m.iso_dot(0, 0) = -s * r + c * dr;
    m.iso_dot(2, 0) = kI * (c * r + s * dr);
    m.iso_dot(3, 0) = 1.0;
    m.iso_dot(0, 1) = kI * c * a;
    m.iso_dot(2, 1) = -s * a;
    return m;
}

enum class ClosedFormVariant { appendix, lemma };

/// Finite-n system-output QFI of the model at theta = 0.
/// The appendix form is exact; the compact lemma form is kept for comparison.
inline double qfi_model_closed(std::size_t n_steps, double lambda, ClosedFormVariant variant) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("qfi_model_closed: lambda must lie in (0, 1]");
    if (n_steps < 1) throw std::invalid_argument("qfi_model_closed: n must be >= 1");
    const double n = static_cast<double>(n_steps);
    const double a = std::sqrt(1.0 - lambda), b2 = lambda;
    const double an = std::pow(a, n), a2n = std::pow(a, 2.0 * n), a2n2 = std::pow(a, 2.0 * (n - 1.0));
    const double om = 1.0 - a;
    const double lead = 8.0 * n / om;
    if (variant == ClosedFormVariant::lemma)
        return lead + 4.0 * (2.0 * (a * a - an) / (om * om) - 2.0 * b2 * (a - an) / (om * om * om) +
                             2.0 * (a * a - a2n) / b2);
    const double g = (1.0 - an) / om;
    return lead +
           4.0 * (g * g - b2 / (om * om) + (a * a - a2n) / (om * om) - 2.0 * b2 * (a - an) / (om * om * om) +
                  (1.0 - a2n2) / b2 + a2n2) -
           4.0 * (1.0 + (a * a - a2n) / b2);
}

inline double qfi_rate_model(double lambda) { return 8.0 / (1.0 - std::sqrt(1.0 - lambda)); }

struct ReferenceAnswers {
    double rate = 0.0;
    double qfi_appendix = 0.0;
    double qfi_lemma = 0.0;
    CVector stationary;
    std::vector<double> spectrum;  // moduli of the transition operator spectrum
};

inline ReferenceAnswers reference_answers(const QubitModelParams& p, std::size_t n) {
    if (p.theta != 0.0) throw std::invalid_argument("reference_answers: theta must be 0");
    p.validate();
    const double a = p.a();
    ReferenceAnswers out;
    out.rate = qfi_rate_model(p.lambda);
    out.qfi_appendix = qfi_model_closed(n, p.lambda, ClosedFormVariant::appendix);
    out.qfi_lemma = qfi_model_closed(n, p.lambda, ClosedFormVariant::lemma);
    out.stationary = CVector::Zero(2);
    out.stationary(0) = 1.0;
    out.spectrum = {1.0, a, a, a * a};
    return out;
}

}  // namespace qmarkov
