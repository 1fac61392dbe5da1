// Quantum and classical Fisher information: dense oracle, asymptotic rate,
// sampled classical information and the output-only gap bound.

#pragma once

#include "qmarkov/algebra.hpp"
#include "qmarkov/chain.hpp"
#include "qmarkov/filter.hpp"
#include "qmarkov/interaction.hpp"
#include "qmarkov/parallel.hpp"
#include "qmarkov/qubit_model.hpp"
#include "qmarkov/rng.hpp"
#include "qmarkov/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qmarkov {

struct FisherReport {
    std::size_t n = 0;
    std::optional<double> qfi_oracle;
    double qfi_appendix = 0.0;
    double qfi_lemma = 0.0;
    double rate = 0.0;
    double cfi = 0.0;
    double cfi_se = 0.0;
    double score_mean = 0.0;
    double score_mean_se = 0.0;
    std::size_t n_traj = 0;
    std::size_t n_flagged = 0;  // records whose score recursion tripped the monitor
};

/// 4 (|Psi'|^2 - |<Psi|Psi'>|^2) for the system-output state after n units.
inline double qfi_pure_oracle(const InteractionModel& model, const CVector& psi, std::size_t n,
                              double* overlap_out = nullptr) {
    const auto st = chain_state_dense(model, psi, n);
    const cplx ov = st.psi.dot(st.psi_dot);
    if (overlap_out) *overlap_out = std::abs(ov);
    return 4.0 * (st.psi_dot.squaredNorm() - std::norm(ov));
}

/// Asymptotic QFI per unit:
/// 4 sum_i [Tr(rho Kd_i^* Kd_i) + 2 Tr(Im(K_i rho Kd_i^*) R(Im sum_j Kd_j^* K_j))],
/// R the pseudo-inverse of Id - T. Derivatives must be gauge fixed.
inline double qfi_rate(const KrausSet& ks, const StationaryInfo& info, double cutoff = kPinvCutoff) {
    const auto D = static_cast<Eigen::Index>(ks.sys_dim);
    const auto t = transition_op(ks);
    const CMatrix r = pinv_matrix(CMatrix::Identity(D * D, D * D) - t.vectorized, cutoff);
    CMatrix s = CMatrix::Zero(D, D);
    for (std::size_t j = 0; j < ks.kraus.size(); ++j) s += ks.kraus_dot[j].adjoint() * ks.kraus[j];
    const CMatrix rs = unvec(r * vec(herm_imag(s)), D);
    const CMatrix& rho = info.rho_ss;
    double total = 0.0;
    for (std::size_t i = 0; i < ks.kraus.size(); ++i) {
        const CMatrix& k = ks.kraus[i];
        const CMatrix& kd = ks.kraus_dot[i];
        total += (rho * kd.adjoint() * kd).trace().real();
        total += 2.0 * (herm_imag(k * rho * kd.adjoint()) * rs).trace().real();
    }
    return 4.0 * total;
}

/// 4 / (1 - a)^2 with a the second largest eigenvalue modulus of the chain.
inline double cfi_qfi_gap_bound(const StationaryInfo& info) {
    if (info.second_eigmod >= 1.0 - 1e-8) throw std::runtime_error("no spectral gap");
    const double g = 1.0 - info.second_eigmod;
    return 4.0 / (g * g);
}

struct CfiOptions {
    std::size_t n_traj = 10000;
    std::uint64_t seed = 0;
    std::uint64_t stream_offset = 0;  // first substream index
    const ModelFamily* family = nullptr;  // enables the numerical score fallback
    double theta0 = 0.0;
};

/// Monte Carlo estimate of the classical Fisher information of `strategy` at
/// the reference parameter: the mean of the squared score over records.
inline FisherReport cfi_sampled(const FilterState& filter, const Strategy& strategy, std::size_t n,
                                const CfiOptions& opt) {
    if (opt.n_traj < 2) throw std::invalid_argument("cfi_sampled: n_traj must be >= 2");
    const auto& model = filter.ctx->model;
    const CVector& psi = filter.ctx->psi;
    std::vector<double> scores(opt.n_traj);
    std::vector<char> flagged(opt.n_traj, 0);
    parallel_for(opt.n_traj, [&](std::size_t i) {
        RngStream rng(opt.seed, opt.stream_offset + i);
        const auto tr = sample_trajectory(model, psi, filter, strategy, n, rng);
        double f = tr.score;
        if (tr.score_flagged) {
            flagged[i] = 1;
            if (opt.family) f = score_numeric(*opt.family, opt.theta0, psi, tr);
        }
        scores[i] = f;
    });

    const double N = static_cast<double>(opt.n_traj);
    double s1 = 0.0, s2 = 0.0;
    for (double f : scores) {
        s1 += f;
        s2 += f * f;
    }
    const double mean_f = s1 / N, mean_f2 = s2 / N;
    double var_f = 0.0, var_f2 = 0.0;
    for (double f : scores) {
        var_f += (f - mean_f) * (f - mean_f);
        var_f2 += (f * f - mean_f2) * (f * f - mean_f2);
    }
    var_f /= (N - 1.0);
    var_f2 /= (N - 1.0);

    FisherReport rep;
    rep.n = n;
    rep.n_traj = opt.n_traj;
    rep.cfi = mean_f2;
    rep.cfi_se = std::sqrt(var_f2 / N);
    rep.score_mean = mean_f;
    rep.score_mean_se = std::sqrt(var_f / N);
    for (char c : flagged) rep.n_flagged += static_cast<std::size_t>(c);
    return rep;
}

}  // namespace qmarkov
