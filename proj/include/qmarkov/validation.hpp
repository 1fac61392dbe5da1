// Cross-checks shared by the command-line validate suite and the acceptance
// runner: recursive filter against the dense reference procedure, and the
// dense QFI against the closed form.

#pragma once

#include "qmarkov/absorber.hpp"
#include "qmarkov/filter.hpp"
#include "qmarkov/fisher.hpp"
#include "qmarkov/qubit_model.hpp"
#include "qmarkov/zzj.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qmarkov {

/// Every outcome sequence of length n over k outcomes, in lexicographic order.
inline std::vector<std::vector<Eigen::Index>> all_branches(std::size_t n, Eigen::Index k) {
    std::vector<std::vector<Eigen::Index>> out{{}};
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::vector<Eigen::Index>> next;
        next.reserve(out.size() * static_cast<std::size_t>(k));
        for (const auto& b : out)
            for (Eigen::Index i = 0; i < k; ++i) {
                next.push_back(b);
                next.back().push_back(i);
            }
        out = std::move(next);
    }
    return out;
}

struct EquivalenceReport {
    std::size_t branches = 0;
    double basis_err = 0.0;     // max over branches, steps and vectors
    double operator_err = 0.0;  // max relative error of B_j and Pi_j
    double final_basis_err = 0.0;
};

/// Filter versus reference on every branch of length n. Conditioned operators
/// are compared after undoing the filter normalization.
inline EquivalenceReport compare_filter_reference(const InteractionModel& model, const CVector& psi, std::size_t n) {
    const Eigen::Index k = model.k();
    const auto mm = multipartite_from_chain(model, psi, n);
    std::vector<MultipartiteModel> prefix;
    for (std::size_t j = 1; j <= n; ++j) prefix.push_back(multipartite_from_chain(model, psi, j));

    EquivalenceReport rep;
    for (const auto& branch : all_branches(n, k)) {
        ++rep.branches;
        const auto ref = branch_steps(mm, branch);
        auto fs = init_filter(model, psi);
        for (std::size_t j = 0; j < n; ++j) {
            const CMatrix b_raw = trace_system(fs.raw_working_operator(), model.D(), k);
            rep.operator_err = std::max(rep.operator_err, (b_raw - ref[j].m_reduced).norm() /
                                                              std::max(1.0, ref[j].m_reduced.norm()));
            const auto basis = next_basis(fs);
            for (Eigen::Index i = 0; i < k; ++i)
                rep.basis_err = std::max(rep.basis_err, (basis.vec(i) - ref[j].basis.vec(i)).norm());
            fs = step_filter(fs, basis, branch[j]);

            const std::vector<Eigen::Index> pre(branch.begin(), branch.begin() + static_cast<long>(j + 1));
            const CMatrix& pi_ref = branch_steps(prefix[j], pre).back().m_reduced;
            rep.operator_err =
                std::max(rep.operator_err, (fs.raw_pi() - pi_ref).norm() / std::max(1.0, pi_ref.norm()));
        }
        const auto fb = final_system_basis(fs, psi);
        for (Eigen::Index i = 0; i < model.D(); ++i)
            rep.final_basis_err = std::max(rep.final_basis_err, (fb.vec(i) - ref[n].basis.vec(i)).norm());
    }
    return rep;
}

struct ClosedFormCheck {
    double max_rel_err = 0.0;
    double worst_lambda = 0.0;
    std::size_t worst_n = 0;
};

/// Dense QFI against the exact closed form for n = 1..n_max at each lambda.
inline ClosedFormCheck check_closed_form(const std::vector<double>& lambdas, std::size_t n_max, double phi) {
    ClosedFormCheck out;
    for (double lambda : lambdas) {
        const auto pc = prepare_pure_chain(build_interaction({0.0, lambda, phi}));
        for (std::size_t n = 1; n <= n_max; ++n) {
            const double o = qfi_pure_oracle(pc.model, pc.psi, n);
            const double c = qfi_model_closed(n, lambda, ClosedFormVariant::appendix);
            const double e = std::abs(o - c) / std::max(1.0, std::abs(o));
            if (e >= out.max_rel_err) out = {e, lambda, n};
        }
    }
    return out;
}

}  // namespace qmarkov
