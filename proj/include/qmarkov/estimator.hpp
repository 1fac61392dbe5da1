// Maximum-likelihood estimation from measurement records, Monte Carlo MSE
// studies and the two-stage (rough, then adaptive) pipeline.

#pragma once

#include "qmarkov/absorber.hpp"
#include "qmarkov/algebra.hpp"
#include "qmarkov/filter.hpp"
#include "qmarkov/parallel.hpp"
#include "qmarkov/qubit_model.hpp"
#include "qmarkov/rng.hpp"
#include "qmarkov/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmarkov {

struct MleConfig {
    double search_lo = -0.3;
    double search_hi = 0.3;
    double tol = 1e-6;
    std::size_t grid_points = 41;

    static MleConfig around(double theta0, double half_width = 0.3) {
        MleConfig c;
        c.search_lo = theta0 - half_width;
        c.search_hi = theta0 + half_width;
        return c;
    }

    void validate() const {
        if (!(search_lo < search_hi)) throw std::invalid_argument("mle: search_lo must be < search_hi");
        if (!(tol > 0.0)) throw std::invalid_argument("mle: tol must be > 0");
        if (grid_points < 3) throw std::invalid_argument("mle: grid_points must be >= 3");
    }

    double midpoint() const { return 0.5 * (search_lo + search_hi); }
};

struct MleResult {
    double theta_hat = 0.0;
    double loglik_max = 0.0;
};

using LogLikelihood = std::function<double(double)>;

namespace detail {
inline constexpr double kFlatTol = 1e-12;
}

/// Coarse grid scan, then golden-section search on the two grid cells around
/// the best grid point. Among grid points tied within 1e-12 of the maximum,
/// the one closest to the interval midpoint wins; a refined point replaces it
/// only if strictly better, so a flat likelihood returns the midpoint.
inline MleResult maximize_loglik(const LogLikelihood& ll, const MleConfig& cfg) {
    cfg.validate();
    const std::size_t m = cfg.grid_points;
    const double step = (cfg.search_hi - cfg.search_lo) / static_cast<double>(m - 1);
    std::vector<double> grid(m), vals(m);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        grid[i] = i + 1 == m ? cfg.search_hi : cfg.search_lo + step * static_cast<double>(i);
        if (m % 2 == 1 && 2 * i + 1 == m) grid[i] = cfg.midpoint();
        vals[i] = ll(grid[i]);
        if (std::isnan(vals[i])) throw std::runtime_error("mle: log-likelihood is NaN");
        best = std::max(best, vals[i]);
    }
    if (best == -std::numeric_limits<double>::infinity()) throw std::runtime_error("degenerate record");

    const double mid = cfg.midpoint();
    std::size_t ib = m;
    for (std::size_t i = 0; i < m; ++i) {
        if (vals[i] < best - detail::kFlatTol) continue;
        if (ib == m || std::abs(grid[i] - mid) < std::abs(grid[ib] - mid)) ib = i;
    }

    double lo = grid[ib == 0 ? 0 : ib - 1];
    double hi = grid[ib + 1 == m ? m - 1 : ib + 1];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = ll(x1), f2 = ll(x2);
    while (hi - lo > cfg.tol) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = ll(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = ll(x2);
        }
    }
    const double xr = 0.5 * (lo + hi);
    const double fr = ll(xr);
    if (fr > vals[ib] + detail::kFlatTol) return {xr, fr};
    return {grid[ib], vals[ib]};
}

/// MLE of a single record under a one-parameter model family. `family` must
/// return models acting on the same space as `psi0`.
inline MleResult mle_fit(const Trajectory& record, const ModelFamily& family, const CVector& psi0,
                         const MleConfig& cfg) {
    if (record.outcomes.empty()) throw std::invalid_argument("mle: empty record");
    return maximize_loglik([&](double tau) { return log_likelihood(family(tau), psi0, record); }, cfg);
}

// ---------------------------------------------------------------------------
// Sample moments
// ---------------------------------------------------------------------------

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // population
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

inline Moments sample_moments(const std::vector<double>& x) {
    Moments mo;
    if (x.empty()) return mo;
    const double N = static_cast<double>(x.size());
    for (double v : x) mo.mean += v;
    mo.mean /= N;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mo.mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= N;
    m3 /= N;
    m4 /= N;
    mo.variance = m2;
    if (m2 > 0.0) {
        mo.skewness = m3 / std::pow(m2, 1.5);
        mo.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return mo;
}

// ---------------------------------------------------------------------------
// MSE study on the qubit model
// ---------------------------------------------------------------------------

struct MseSetup {
    QubitModelParams model;  // model.theta is the reference parameter
    double theta_true = 0.0;
    std::size_t n = 200;
    std::size_t n_runs = 10000;
    Strategy strategy = Strategy::adaptive();
    std::uint64_t seed = 0;
    MleConfig mle = MleConfig::around(0.0);
};

struct MseStudy {
    std::size_t n = 0;
    double theta_true = 0.0;
    std::size_t n_runs = 0;
    std::vector<double> estimates;
    std::vector<double> loglik_max;
    double mse = 0.0;
    double inv_mse = 0.0;
    double mse_se = 0.0;
    Moments moments;
};

/// Family of models at parameter tau, lifted through the chain's absorber.
inline ModelFamily qubit_family(const QubitModelParams& base, const PureChain& pc) {
    return [base, pc](double tau) {
        QubitModelParams p = base;
        p.theta = tau;
        return pc.lift(build_interaction(p));
    };
}

inline MseStudy mse_study(const MseSetup& s) {
    if (s.n_runs < 100) throw std::invalid_argument("mse_study: n_runs must be >= 100");
    if (s.n == 0) throw std::invalid_argument("mse_study: n must be >= 1");
    s.strategy.validate();
    s.mle.validate();
    const auto pc = prepare_pure_chain(build_interaction(s.model));
    BasisOptions bo;
    bo.default_angle = s.strategy.initial_angle;
    const auto filter = init_filter(pc.model, pc.psi, bo);
    const auto family = qubit_family(s.model, pc);
    const auto truth = family(s.theta_true);

    MseStudy out;
    out.n = s.n;
    out.theta_true = s.theta_true;
    out.n_runs = s.n_runs;
    out.estimates.assign(s.n_runs, 0.0);
    out.loglik_max.assign(s.n_runs, 0.0);
    SampleOptions so;
    so.compute_score = false;
    parallel_for(s.n_runs, [&](std::size_t i) {
        RngStream rng(s.seed, i);
        const auto tr = sample_trajectory(truth, pc.psi, filter, s.strategy, s.n, rng, so);
        const auto fit = mle_fit(tr, family, pc.psi, s.mle);
        out.estimates[i] = fit.theta_hat;
        out.loglik_max[i] = fit.loglik_max;
    });

    const double N = static_cast<double>(s.n_runs);
    std::vector<double> sq(s.n_runs);
    for (std::size_t i = 0; i < s.n_runs; ++i) {
        const double d = out.estimates[i] - s.theta_true;
        sq[i] = d * d;
        out.mse += sq[i];
    }
    out.mse /= N;
    double v = 0.0;
    for (double q : sq) v += (q - out.mse) * (q - out.mse);
    out.mse_se = std::sqrt(v / (N - 1.0) / N);
    out.inv_mse = out.mse > 0.0 ? 1.0 / out.mse : std::numeric_limits<double>::infinity();
    out.moments = sample_moments(out.estimates);
    return out;
}

// ---------------------------------------------------------------------------
// Two-stage estimation
// ---------------------------------------------------------------------------

struct TwoStageSetup {
    QubitModelParams model;  // model.theta: parameter the initial system state is prepared at
    double theta_true = 0.0;
    std::size_t n = 400;
    double epsilon = 0.2;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double fixed_angle = 0.0;  // stage-one basis
    MleConfig mle = MleConfig::around(0.0);
};

struct TwoStageResult {
    double theta_hat = 0.0;
    double loglik_max = 0.0;
    double theta_stage1 = 0.0;
    std::size_t n_stage1 = 0;
    bool stage1_fallback = false;
};

inline std::size_t stage_one_size(std::size_t n, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("two-stage: epsilon must lie in (0, 0.5)");
    const auto nt = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 1.0 - epsilon) - 1e-12));
    if (nt < 20) throw std::invalid_argument("two-stage: first stage needs at least 20 units");
    return std::min(nt, n);
}

/// Leading eigenvector of the absorber marginal of a doubled pure state.
inline CVector absorber_start_state(const PureChain& pc) {
    if (!pc.V) return CVector();
    const auto d = static_cast<std::size_t>(pc.rho_ss.rows());
    const std::vector<std::size_t> dims{d, d};
    const std::size_t keep[] = {1};
    return eig_hermitian(partial_trace(projector(pc.psi), dims, keep)).vectors[0];
}

/// Record of a fixed-basis measurement; needs no filter.
inline Trajectory sample_fixed_basis(const InteractionModel& model, const CVector& psi0, const MeasBasis& basis,
                                     std::size_t n, RngStream& rng) {
    const Eigen::Index D = model.D(), k = model.k();
    Trajectory tr;
    tr.cond_state = psi0;
    for (std::size_t j = 0; j < n; ++j) {
        const CVector out = model.iso * tr.cond_state;
        std::vector<double> p(static_cast<std::size_t>(k));
        for (Eigen::Index i = 0; i < k; ++i)
            p[static_cast<std::size_t>(i)] = contract_unit(out, basis.vec(i), D, k).squaredNorm();
        detail::check_simplex(p);
        const Eigen::Index o = detail::sample_index(p, rng.uniform());
        const CVector amp = contract_unit(out, basis.vec(o), D, k);
        const double po = p[static_cast<std::size_t>(o)];
        tr.outcomes.push_back(o);
        tr.bases.push_back(basis);
        tr.angles.push_back(basis.angle);
        tr.p_outcome.push_back(po);
        tr.loglik += std::log(po);
        tr.loglik_running.push_back(tr.loglik);
        tr.cond_state = amp / std::sqrt(po);
    }
    return tr;
}

inline TwoStageResult two_stage_estimate(const TwoStageSetup& s) {
    s.mle.validate();
    TwoStageResult res;
    res.n_stage1 = stage_one_size(s.n, s.epsilon);
    const std::size_t n2 = s.n - res.n_stage1;

    auto at = [&](double tau) {
        QubitModelParams p = s.model;
        p.theta = tau;
        return build_interaction(p);
    };
    // Stage one: the bare chain, started in the dominant stationary vector at model.theta.
    const auto st0 = stationary(transition_op(kraus_standard(at(s.model.theta))));
    const CVector psi_init = eig_hermitian(st0.rho_ss).vectors[0];
    const MeasBasis fixed = basis_from_angle(s.fixed_angle);

    RngStream rng(s.seed, s.stream);
    SampleOptions so;
    so.compute_score = false;
    const Trajectory rec1 = sample_fixed_basis(at(s.theta_true), psi_init, fixed, res.n_stage1, rng);
    const LogLikelihood ll1 = [&](double tau) { return replay(at(tau), psi_init, rec1.bases, rec1.outcomes).loglik; };
    try {
        res.theta_stage1 = maximize_loglik(ll1, s.mle).theta_hat;
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()) != "degenerate record") throw;
        res.theta_stage1 = s.mle.midpoint();
        res.stage1_fallback = true;
        std::cerr << "warning: first-stage likelihood is degenerate; using the search midpoint\n";
    }

    if (n2 == 0) {
        const auto fit = maximize_loglik(ll1, s.mle);
        res.theta_hat = fit.theta_hat;
        res.loglik_max = fit.loglik_max;
        return res;
    }

    // Stage two: filter rebuilt at the rough estimate.
    const auto pc = prepare_pure_chain(at(res.theta_stage1));
    const CVector anc = absorber_start_state(pc);
    const auto filter = init_filter(pc.model, pc.psi);
    const auto truth2 = pc.lift(at(s.theta_true));
    const auto rec2 =
        sample_trajectory(truth2, pc.embed(rec1.cond_state, anc), filter, Strategy::adaptive(), n2, rng, so);

    const LogLikelihood ll = [&](double tau) {
        const auto r1 = replay(at(tau), psi_init, rec1.bases, rec1.outcomes);
        if (r1.loglik == -std::numeric_limits<double>::infinity()) return r1.loglik;
        return r1.loglik + replay(pc.lift(at(tau)), pc.embed(r1.state, anc), rec2.bases, rec2.outcomes).loglik;
    };
    const auto fit = maximize_loglik(ll, s.mle);
    res.theta_hat = fit.theta_hat;
    res.loglik_max = fit.loglik_max;
    return res;
}

}  // namespace qmarkov
