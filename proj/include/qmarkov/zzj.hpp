// Generic adaptive measurement for a pure multipartite model: subsystems are
// measured one at a time, each basis chosen from the operator
// M = |psi'><psi| - |psi><psi'| conditioned on the earlier outcomes and
// reduced to the next subsystem. Dense and small; used as a reference.

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/basis.hpp"
#include "qmarkov/chain.hpp"
#include "qmarkov/rng.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace qmarkov {

inline constexpr std::size_t kReferenceMaxDim = 256;

struct MultipartiteModel {
    std::vector<std::size_t> dims;
    CVector psi;
    CVector psi_dot;

    void validate(double tol = 1e-10) const {
        if (dims.empty() || static_cast<std::size_t>(psi.size()) != product(dims) || psi_dot.size() != psi.size())
            throw std::invalid_argument("MultipartiteModel: inconsistent dimensions");
        if (product(dims) > kReferenceMaxDim) throw std::invalid_argument("MultipartiteModel: dimension too large");
        if (std::abs(psi.norm() - 1.0) > 1e-12) throw std::invalid_argument("MultipartiteModel: psi not normalized");
        if (std::abs(psi.dot(psi_dot)) > tol) throw std::invalid_argument("MultipartiteModel: gauge violated");
    }
};

/// System-output state of a chain as a multipartite model, factors (u_1..u_n, s).
inline MultipartiteModel multipartite_from_chain(const InteractionModel& model, const CVector& psi, std::size_t n) {
    const auto st = chain_state_dense(model, psi, n);
    return {st.dims(), st.psi, st.psi_dot};
}

inline CMatrix build_M(const MultipartiteModel& m) {
    m.validate();
    return m.psi_dot * m.psi.adjoint() - m.psi * m.psi_dot.adjoint();
}

/// <e| X |e> on the first tensor factor; the result acts on the remaining factors.
inline CMatrix condition_first(const CMatrix& x, std::span<const std::size_t> dims, const CVector& e) {
    const auto d1 = static_cast<Eigen::Index>(dims[0]);
    if (e.size() != d1 || x.rows() != static_cast<Eigen::Index>(product(dims)))
        throw std::invalid_argument("bad tensor factorization");
    const Eigen::Index r = x.rows() / d1;
    CMatrix out = CMatrix::Zero(r, r);
    for (Eigen::Index a = 0; a < d1; ++a)
        for (Eigen::Index b = 0; b < d1; ++b) {
            const cplx w = std::conj(e(a)) * e(b);
            if (w != cplx{0.0}) out += w * x.block(a * r, b * r, r, r);
        }
    return out;
}

/// (<e| (x) I) v for a vector whose first factor has dimension d.
inline CVector condition_vector(const CVector& v, Eigen::Index d, const CVector& e) {
    const Eigen::Index r = v.size() / d;
    CVector out = CVector::Zero(r);
    for (Eigen::Index a = 0; a < d; ++a) out += std::conj(e(a)) * v.segment(a * r, r);
    return out;
}

/// Trace out every factor but the first.
inline CMatrix reduce_to_first(const CMatrix& x, std::span<const std::size_t> dims) {
    const std::size_t keep[] = {0};
    return partial_trace(x, dims, keep);
}

/// Condition the first factor on `e`, then reduce to the factor that follows.
inline CMatrix condition_and_reduce(const CMatrix& x, std::span<const std::size_t> dims, const CVector& e) {
    const CMatrix c = condition_first(x, dims, e);
    return reduce_to_first(c, dims.subspan(1));
}

/// Conditioned operators along one branch of the reference measurement.
struct ReferenceStep {
    CMatrix m_reduced;    // M conditioned on earlier outcomes, reduced to this factor
    CMatrix rho_reduced;  // same for |psi><psi| (unnormalized)
    MeasBasis basis;
};

/// Walks the reference procedure along a prescribed outcome sequence.
/// `outcomes` may be shorter than the number of factors; the walk stops after
/// choosing the basis for factor outcomes.size().
inline std::vector<ReferenceStep> branch_steps(const MultipartiteModel& model, const std::vector<Eigen::Index>& outcomes,
                                               const BasisOptions& opt = {}) {
    model.validate();
    const std::size_t m = model.dims.size();
    if (outcomes.size() > m) throw std::invalid_argument("branch_steps: too many outcomes");
    CMatrix mcur = build_M(model);
    CMatrix rcur = projector(model.psi);
    std::vector<std::size_t> dims = model.dims;
    std::vector<ReferenceStep> steps;
    const MeasBasis* prev = nullptr;
    for (std::size_t f = 0; f < m && f <= outcomes.size(); ++f) {
        ReferenceStep st;
        st.m_reduced = reduce_to_first(mcur, dims);
        st.rho_reduced = reduce_to_first(rcur, dims);
        const MeasBasis* use_prev = (prev && prev->size() == static_cast<Eigen::Index>(dims[0])) ? prev : nullptr;
        st.basis = solve_basis(st.m_reduced, st.rho_reduced, use_prev, opt);
        steps.push_back(std::move(st));
        prev = &steps.back().basis;
        if (f == outcomes.size() || f + 1 == m) break;
        const CVector e = steps.back().basis.vec(outcomes[f]);
        mcur = condition_first(mcur, dims, e);
        rcur = condition_first(rcur, dims, e);
        dims.erase(dims.begin());
    }
    return steps;
}

inline std::vector<MeasBasis> branch_bases(const MultipartiteModel& model, const std::vector<Eigen::Index>& outcomes,
                                           const BasisOptions& opt = {}) {
    std::vector<MeasBasis> out;
    for (auto& s : branch_steps(model, outcomes, opt)) out.push_back(std::move(s.basis));
    return out;
}

struct ReferenceRun {
    std::vector<MeasBasis> bases;
    std::vector<Eigen::Index> outcomes;
    std::vector<double> step_probabilities;  // conditional probability of each outcome
    double joint_probability = 1.0;
};

/// Sample a full record of the reference measurement on the model's own state.
inline ReferenceRun run_reference(const MultipartiteModel& model, RngStream& rng, const BasisOptions& opt = {}) {
    model.validate();
    const std::size_t m = model.dims.size();
    CMatrix mcur = build_M(model);
    CVector phi = model.psi;  // conditioned state, unnormalized
    std::vector<std::size_t> dims = model.dims;
    ReferenceRun run;
    const MeasBasis* prev = nullptr;
    for (std::size_t f = 0; f < m; ++f) {
        const CMatrix mred = reduce_to_first(mcur, dims);
        const CMatrix rho = reduce_to_first(projector(phi), dims);
        const MeasBasis* use_prev = (prev && prev->size() == static_cast<Eigen::Index>(dims[0])) ? prev : nullptr;
        run.bases.push_back(solve_basis(mred, rho, use_prev, opt));
        prev = &run.bases.back();
        const auto d = static_cast<Eigen::Index>(dims[0]);
        const double tr = rho.trace().real();
        std::vector<double> p(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) {
            const CVector e = run.bases.back().vec(i);
            p[static_cast<std::size_t>(i)] = e.dot(rho * e).real() / tr;
        }
        const double u = rng.uniform();
        double acc = 0.0;
        Eigen::Index out = d - 1;
        for (Eigen::Index i = 0; i < d; ++i) {
            acc += p[static_cast<std::size_t>(i)];
            if (u < acc) {
                out = i;
                break;
            }
        }
        run.outcomes.push_back(out);
        run.step_probabilities.push_back(p[static_cast<std::size_t>(out)]);
        run.joint_probability *= p[static_cast<std::size_t>(out)];
        const CVector e = run.bases.back().vec(out);
        mcur = condition_first(mcur, dims, e);
        phi = condition_vector(phi, d, e);
        dims.erase(dims.begin());
    }
    return run;
}

/// Classical Fisher information of the full reference measurement, summing
/// (dp/dtheta)^2 / p over every outcome branch.
inline double reference_cfi(const MultipartiteModel& model, const BasisOptions& opt = {},
                            double* max_condition_residual = nullptr) {
    model.validate();
    double total = 0.0, worst = 0.0;
    const double dtot = static_cast<double>(product(model.dims));
    std::function<void(CMatrix, CVector, CVector, std::vector<std::size_t>, const MeasBasis*)> walk =
        [&](CMatrix mcur, CVector phi, CVector dphi, std::vector<std::size_t> dims, const MeasBasis* prev) {
            if (dims.empty()) {
                const double p = std::norm(phi(0));
                const double dp = 2.0 * (std::conj(phi(0)) * dphi(0)).real();
                if (p > 0.0) total += dp * dp / p;
                // product basis conditions: zero diagonal of M and uniform probability
                worst = std::max(worst, std::abs(mcur(0, 0)));
                worst = std::max(worst, std::abs(p - 1.0 / dtot));
                return;
            }
            const CMatrix mred = reduce_to_first(mcur, dims);
            const CMatrix rho = reduce_to_first(projector(phi), dims);
            const MeasBasis* use_prev = (prev && prev->size() == static_cast<Eigen::Index>(dims[0])) ? prev : nullptr;
            const MeasBasis basis = solve_basis(mred, rho, use_prev, opt);
            const auto d = static_cast<Eigen::Index>(dims[0]);
            std::vector<std::size_t> rest(dims.begin() + 1, dims.end());
            for (Eigen::Index i = 0; i < d; ++i) {
                const CVector e = basis.vec(i);
                walk(condition_first(mcur, dims, e), condition_vector(phi, d, e), condition_vector(dphi, d, e), rest,
                     &basis);
            }
        };
    walk(build_M(model), model.psi, model.psi_dot, model.dims, nullptr);
    if (max_condition_residual) *max_condition_residual = worst;
    return total;
}

}  // namespace qmarkov
