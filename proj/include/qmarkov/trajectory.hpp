// Monte Carlo measurement records: sampling at the true parameter with bases
// chosen at the reference parameter, likelihood replay and score functions.

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/basis.hpp"
#include "qmarkov/filter.hpp"
#include "qmarkov/interaction.hpp"
#include "qmarkov/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qmarkov {

struct Strategy {
    enum class Kind { fixed, adaptive, adaptive_with_system };
    Kind kind = Kind::adaptive;
    std::optional<MeasBasis> fixed_basis;
    double initial_angle = 0.0;

    static Strategy fixed(const MeasBasis& b) { return {Kind::fixed, b, 0.0}; }
    static Strategy adaptive(double initial_angle = 0.0) { return {Kind::adaptive, std::nullopt, initial_angle}; }
    static Strategy adaptive_with_system(double initial_angle = 0.0) {
        return {Kind::adaptive_with_system, std::nullopt, initial_angle};
    }

    void validate() const {
        if ((kind == Kind::fixed) != fixed_basis.has_value())
            throw std::invalid_argument("Strategy: fixed_basis must be present exactly for the fixed kind");
    }
};

inline const char* strategy_name(Strategy::Kind k) {
    switch (k) {
        case Strategy::Kind::fixed: return "fixed";
        case Strategy::Kind::adaptive: return "adaptive";
        case Strategy::Kind::adaptive_with_system: return "adaptive_with_system";
    }
    return "?";
}

inline constexpr double kScoreMonitor = 1e8;
inline constexpr double kSimplexTol = 1e-9;

struct Trajectory {
    std::vector<Eigen::Index> outcomes;
    std::optional<Eigen::Index> system_outcome;
    std::vector<double> angles;
    std::vector<MeasBasis> bases;
    std::optional<MeasBasis> system_basis;
    std::vector<double> p_outcome;
    std::vector<double> loglik_running;
    CVector cond_state;
    double loglik = 0.0;
    double score = 0.0;        // f, or f-tilde when the system was measured
    double score_output = 0.0; // f from the output record alone
    double u_norm_max = 0.0;
    bool score_flagged = false;
};

/// Amplitudes (I (x) <e|) phi for an isometry image phi on system (x) unit.
inline CVector contract_unit(const CVector& phi, const CVector& e, Eigen::Index D, Eigen::Index k) {
    CVector out(D);
    for (Eigen::Index s = 0; s < D; ++s) out(s) = e.dot(phi.segment(s * k, k));
    return out;
}

namespace detail {

inline Eigen::Index sample_index(const std::vector<double>& p, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<Eigen::Index>(i);
    }
    // u lands in the rounding slack above the cumulative sum
    for (std::size_t i = p.size(); i-- > 0;)
        if (p[i] > 0.0) return static_cast<Eigen::Index>(i);
    return static_cast<Eigen::Index>(p.size() - 1);
}

inline void check_simplex(const std::vector<double>& p) {
    double total = 0.0;
    for (double v : p) {
        if (v < -kSimplexTol) throw std::runtime_error("probability vector left the simplex");
        total += v;
    }
    if (std::abs(total - 1.0) > kSimplexTol) throw std::runtime_error("probability vector left the simplex");
}

/// Forward score recursion u_j = (K_j u_{j-1} + Kdot_j psi) / c_j at the reference parameter.
class ScoreRecursion {
public:
    explicit ScoreRecursion(const FilterContext& ctx)
        : ctx_(ctx), u_(CVector::Zero(ctx.model.D())), dpsi_(ctx.model.iso_dot * ctx.psi) {}

    void step(const CVector& e) {
        const auto& m = ctx_.model;
        const cplx c = e.dot(m.chi);
        if (std::abs(c) < 1e-12) throw std::runtime_error("score: basis vector orthogonal to the input state");
        const CVector ku = contract_unit(m.iso * u_, e, m.D(), m.k());
        const CVector kd = contract_unit(dpsi_, e, m.D(), m.k());
        u_ = (ku + kd) / c;
        u_norm_max_ = std::max(u_norm_max_, u_.norm());
    }

    double f() const { return 2.0 * ctx_.psi.dot(u_).real(); }

    double f_system(const CVector& p) const {
        const double D = static_cast<double>(ctx_.model.D());
        return 2.0 * D * (ctx_.psi.dot(p) * p.dot(u_)).real();
    }

    double u_norm_max() const { return u_norm_max_; }
    const CVector& u() const { return u_; }

private:
    const FilterContext& ctx_;
    CVector u_;
    CVector dpsi_;
    double u_norm_max_ = 0.0;
};

}  // namespace detail

struct SampleOptions {
    bool compute_score = true;
};

/// Sample one record of n output units (plus the system for the
/// adaptive_with_system strategy). `model_true` and `psi0` describe the chain
/// actually measured; `filter` carries the reference-parameter machinery.
inline Trajectory sample_trajectory(const InteractionModel& model_true, const CVector& psi0,
                                    const FilterState& filter, const Strategy& strategy, std::size_t n,
                                    RngStream& rng, const SampleOptions& opt = {}) {
    strategy.validate();
    if (n < 1) throw std::invalid_argument("sample_trajectory: n must be >= 1");
    const auto& ref = filter.ctx->model;
    if (model_true.D() != ref.D() || model_true.k() != ref.k() || psi0.size() != ref.D())
        throw std::invalid_argument("sample_trajectory: dimension mismatch");
    const Eigen::Index D = model_true.D(), k = model_true.k();
    const bool adaptive = strategy.kind != Strategy::Kind::fixed;

    Trajectory tr;
    tr.outcomes.reserve(n);
    tr.angles.reserve(n);
    tr.bases.reserve(n);
    tr.p_outcome.reserve(n);
    tr.loglik_running.reserve(n);

    FilterState fs = filter;
    std::optional<detail::ScoreRecursion> score;
    if (opt.compute_score) score.emplace(*filter.ctx);

    CVector state = psi0;
    std::vector<double> p(static_cast<std::size_t>(k));
    std::vector<CVector> amps(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < n; ++j) {
        const MeasBasis basis = adaptive ? next_basis(fs) : *strategy.fixed_basis;
        const CVector phi = model_true.iso * state;
        for (Eigen::Index i = 0; i < k; ++i) {
            amps[static_cast<std::size_t>(i)] = contract_unit(phi, basis.vec(i), D, k);
            p[static_cast<std::size_t>(i)] = amps[static_cast<std::size_t>(i)].squaredNorm();
        }
        detail::check_simplex(p);
        const Eigen::Index out = detail::sample_index(p, rng.uniform());
        const double po = p[static_cast<std::size_t>(out)];
        state = amps[static_cast<std::size_t>(out)] / std::sqrt(po);
        tr.loglik += std::log(po);

        tr.outcomes.push_back(out);
        tr.angles.push_back(basis.angle);
        tr.p_outcome.push_back(po);
        tr.loglik_running.push_back(tr.loglik);
        if (score) score->step(basis.vec(out));
        if (adaptive) fs = step_filter(fs, basis, out);
        tr.bases.push_back(basis);
    }

    if (score) {
        tr.score_output = score->f();
        tr.score = tr.score_output;
    }

    if (strategy.kind == Strategy::Kind::adaptive_with_system) {
        const MeasBasis fb = final_system_basis(fs, filter.ctx->psi);
        std::vector<double> ps(static_cast<std::size_t>(D));
        for (Eigen::Index i = 0; i < D; ++i) ps[static_cast<std::size_t>(i)] = std::norm(fb.vec(i).dot(state));
        detail::check_simplex(ps);
        const Eigen::Index out = detail::sample_index(ps, rng.uniform());
        tr.loglik += std::log(ps[static_cast<std::size_t>(out)]);
        tr.system_outcome = out;
        tr.system_basis = fb;
        state = fb.vec(out);
        if (score) tr.score = score->f_system(fb.vec(out));
    }
    if (score) {
        tr.u_norm_max = score->u_norm_max();
        tr.score_flagged = tr.u_norm_max > kScoreMonitor;
    }
    tr.cond_state = state;
    return tr;
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

struct ReplayResult {
    double loglik = 0.0;
    CVector state;  // conditional state after the replayed segment
};

/// Log-likelihood of recorded outcomes in recorded bases under `model`,
/// starting from `psi0`. A zero-probability branch gives -infinity.
inline ReplayResult replay(const InteractionModel& model, const CVector& psi0, const std::vector<MeasBasis>& bases,
                           const std::vector<Eigen::Index>& outcomes, const MeasBasis* system_basis = nullptr,
                           std::optional<Eigen::Index> system_outcome = std::nullopt) {
    if (bases.size() != outcomes.size()) throw std::invalid_argument("replay: bases and outcomes differ in length");
    const Eigen::Index D = model.D(), k = model.k();
    ReplayResult r{0.0, psi0};
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
        const CVector amp = contract_unit(model.iso * r.state, bases[j].vec(outcomes[j]), D, k);
        const double p = amp.squaredNorm();
        if (!(p > 0.0)) {
            r.loglik = -std::numeric_limits<double>::infinity();
            return r;
        }
        r.loglik += std::log(p);
        r.state = amp / std::sqrt(p);
    }
    if (system_basis && system_outcome) {
        const CVector v = system_basis->vec(*system_outcome);
        const double p = std::norm(v.dot(r.state));
        if (!(p > 0.0)) {
            r.loglik = -std::numeric_limits<double>::infinity();
            return r;
        }
        r.loglik += std::log(p);
        r.state = v;
    }
    return r;
}

inline double log_likelihood(const InteractionModel& model, const CVector& psi0, const std::vector<MeasBasis>& bases,
                             const std::vector<Eigen::Index>& outcomes) {
    return replay(model, psi0, bases, outcomes).loglik;
}

inline double log_likelihood(const InteractionModel& model, const CVector& psi0, const Trajectory& tr) {
    return replay(model, psi0, tr.bases, tr.outcomes, tr.system_basis ? &*tr.system_basis : nullptr,
                  tr.system_outcome)
        .loglik;
}

// ---------------------------------------------------------------------------
// Score functions
// ---------------------------------------------------------------------------

/// f = d/dtheta log p at the reference parameter, from the recorded bases.
inline double score_f(const FilterState& filter, const std::vector<MeasBasis>& bases,
                      const std::vector<Eigen::Index>& outcomes) {
    detail::ScoreRecursion rec(*filter.ctx);
    for (std::size_t j = 0; j < outcomes.size(); ++j) rec.step(bases[j].vec(outcomes[j]));
    return rec.f();
}

/// f-tilde for a record completed by a system measurement in `system_basis`.
inline double score_f_system(const FilterState& filter, const std::vector<MeasBasis>& bases,
                             const std::vector<Eigen::Index>& outcomes, const MeasBasis& system_basis,
                             Eigen::Index system_outcome) {
    detail::ScoreRecursion rec(*filter.ctx);
    for (std::size_t j = 0; j < outcomes.size(); ++j) rec.step(bases[j].vec(outcomes[j]));
    return rec.f_system(system_basis.vec(system_outcome));
}

using ModelFamily = std::function<InteractionModel(double)>;

/// Central-difference score, the fallback when the recursion monitor trips.
inline double score_numeric(const ModelFamily& family, double theta0, const CVector& psi0, const Trajectory& tr,
                            double h = 1e-5) {
    const double lp = log_likelihood(family(theta0 + h), psi0, tr);
    const double lm = log_likelihood(family(theta0 - h), psi0, tr);
    return (lp - lm) / (2.0 * h);
}

}  // namespace qmarkov
