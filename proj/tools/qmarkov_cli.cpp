// qmarkov: command-line front end.
//
//   qmarkov <command> [--config file.json] [flags]
//
// Commands: stationary, absorber, fisher, trajectory, mle, validate.
// Exit status: 0 success, 1 computation error, 2 configuration error.

#include "qmarkov/absorber.hpp"
#include "qmarkov/config.hpp"
#include "qmarkov/estimator.hpp"
#include "qmarkov/fisher.hpp"
#include "qmarkov/io.hpp"
#include "qmarkov/validation.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>

using namespace qmarkov;
using io::Cell;
using io::json;

namespace {

std::string table_text(const RunConfig& cfg, const io::Table& t) {
    return cfg.output.format == "json" ? io::to_json(t) : io::to_csv(t);
}

std::string table_name(const RunConfig& cfg, const std::string& stem) {
    return stem + (cfg.output.format == "json" ? ".json" : ".csv");
}

InteractionModel model_at(const RunConfig& cfg, double theta) { return build_interaction(cfg.params_at(theta)); }

// ---------------------------------------------------------------------------

int cmd_stationary(const RunConfig& cfg) {
    const auto info = stationary(transition_op(kraus_standard(model_at(cfg, cfg.model.theta0))));
    CVector spec(static_cast<Eigen::Index>(info.spectrum.size()));
    for (std::size_t i = 0; i < info.spectrum.size(); ++i) spec(static_cast<Eigen::Index>(i)) = info.spectrum[i];
    const json j = {{"theta", cfg.model.theta0},
                    {"lambda", cfg.model.lambda},
                    {"phi", cfg.model.phi},
                    {"rho_ss", io::matrix_to_json(info.rho_ss)},
                    {"spectrum", io::matrix_to_json(spec)},
                    {"second_eigmod", info.second_eigmod},
                    {"gap", info.gap},
                    {"primitive", info.primitive},
                    {"full_rank", info.full_rank}};
    io::OutputSet out(cfg.output.dir);
    out.write("stationary.json", j.dump(2) + "\n");
    out.commit();
    return 0;
}

int cmd_absorber(const RunConfig& cfg) {
    const auto pc = prepare_pure_chain(model_at(cfg, cfg.model.theta0));
    json checks = json::object();
    checks["stationarity_residual"] = pc.model.stationarity_residual(pc.psi);
    if (pc.V) {
        const auto n = pc.V->rows();
        checks["V_unitarity"] = (pc.V->adjoint() * *pc.V - CMatrix::Identity(n, n)).norm();
        const auto d = static_cast<std::size_t>(pc.rho_ss.rows());
        const std::vector<std::size_t> dims{d, d};
        const std::size_t keep[] = {0};
        checks["marginal_error"] = (partial_trace(projector(pc.psi), dims, keep) - pc.rho_ss).norm();
    } else {
        checks["marginal_error"] = (projector(pc.psi) - pc.rho_ss).norm();
    }
    const json j = {{"theta", cfg.model.theta0},
                    {"pure_stationary", !pc.V.has_value()},
                    {"V", pc.V ? io::matrix_to_json(*pc.V) : json(nullptr)},
                    {"psi", io::matrix_to_json(pc.psi)},
                    {"chi", io::matrix_to_json(pc.model.chi)},
                    {"W_iso", io::matrix_to_json(pc.model.iso)},
                    {"W_iso_dot", io::matrix_to_json(pc.model.iso_dot)},
                    {"rho_ss", io::matrix_to_json(pc.rho_ss)},
                    {"checks", checks}};
    io::OutputSet out(cfg.output.dir);
    out.write("absorber.json", j.dump(2) + "\n");
    out.commit();
    return 0;
}

int cmd_fisher(const RunConfig& cfg) {
    const auto params = cfg.params_at(cfg.model.theta0);
    const auto pc = prepare_pure_chain(build_interaction(params));
    BasisOptions bo;
    bo.default_angle = cfg.sim.initial_angle;
    const auto filter = init_filter(pc.model, pc.psi, bo);
    const auto ks = kraus_standard(pc.model);
    const double rate = qfi_rate(ks, stationary(transition_op(ks)));
    const auto family = qubit_family(params, pc);
    const bool closed = cfg.model.theta0 == 0.0;

    const Strategy strategies[3] = {Strategy::adaptive_with_system(cfg.sim.initial_angle),
                                    Strategy::adaptive(cfg.sim.initial_angle),
                                    Strategy::fixed(basis_from_angle(wrap_half_pi(cfg.sim.fixed_basis_angle)))};
    io::Table t{{"n", "qfi_oracle", "qfi_appendix", "qfi_lemma", "rate_times_n", "cfi_adaptive_sys", "se_adaptive_sys",
                 "cfi_adaptive_out", "se_adaptive_out", "cfi_fixed", "se_fixed", "n_traj", "seed"},
                {}};
    std::uint64_t row = 0;
    for (std::size_t n = cfg.sim.n_step; n <= cfg.sim.n_max; n += cfg.sim.n_step, ++row) {
        std::optional<double> oracle;
        const double dim = static_cast<double>(pc.psi.size()) * std::pow(static_cast<double>(pc.model.k()), n);
        if (dim <= std::exp2(kDenseCapBits)) oracle = qfi_pure_oracle(pc.model, pc.psi, n);
        std::vector<Cell> r{static_cast<double>(n), io::opt_cell(oracle),
                            closed ? Cell{qfi_model_closed(n, cfg.model.lambda, ClosedFormVariant::appendix)} : Cell{std::monostate{}},
                            closed ? Cell{qfi_model_closed(n, cfg.model.lambda, ClosedFormVariant::lemma)} : Cell{std::monostate{}},
                            rate * static_cast<double>(n)};
        for (std::uint64_t s = 0; s < 3; ++s) {
            CfiOptions opt;
            opt.n_traj = cfg.sim.n_traj;
            opt.seed = cfg.sim.seed;
            opt.stream_offset = (row * 3 + s) * cfg.sim.n_traj;
            opt.family = &family;
            opt.theta0 = cfg.model.theta0;
            const auto rep = cfi_sampled(filter, strategies[s], n, opt);
            if (rep.n_flagged)
                std::cerr << "note: " << rep.n_flagged << " records at n=" << n << " used the numerical score\n";
            r.push_back(rep.cfi);
            r.push_back(rep.cfi_se);
        }
        r.push_back(static_cast<double>(cfg.sim.n_traj));
        r.push_back(std::to_string(cfg.sim.seed));
        t.add(std::move(r));
    }
    io::OutputSet out(cfg.output.dir);
    out.write(table_name(cfg, "fisher"), table_text(cfg, t));
    out.commit();
    return 0;
}

int cmd_trajectory(const RunConfig& cfg) {
    if (cfg.sim.strategy == StrategyName::two_stage)
        throw ConfigError("sim.strategy: two_stage applies to the mle command only");
    const auto pc = prepare_pure_chain(model_at(cfg, cfg.model.theta0));
    const auto strategy = cfg.strategy();
    BasisOptions bo;
    bo.default_angle = strategy.initial_angle;
    const auto filter = init_filter(pc.model, pc.psi, bo);
    RngStream rng(cfg.sim.seed, 0);
    SampleOptions so;
    so.compute_score = false;
    const auto tr = sample_trajectory(pc.lift(model_at(cfg, cfg.model.theta_true)), pc.psi, filter, strategy,
                                      cfg.sim.n, rng, so);
    io::Table t{{"step", "outcome", "basis_angle", "p_outcome", "loglik_running"}, {}};
    for (std::size_t j = 0; j < tr.outcomes.size(); ++j)
        t.add({static_cast<double>(j + 1), static_cast<double>(tr.outcomes[j]), tr.angles[j], tr.p_outcome[j],
               tr.loglik_running[j]});
    io::OutputSet out(cfg.output.dir);
    out.write(table_name(cfg, "trajectory"), table_text(cfg, t));
    out.commit();
    return 0;
}

int cmd_mle(const RunConfig& cfg) {
    const auto mle = cfg.mle_config();
    const auto sizes = cfg.mle_sizes();
    if (cfg.sim.strategy == StrategyName::two_stage)
        for (std::size_t n : sizes) {
            try {
                stage_one_size(n, cfg.sim.epsilon);
            } catch (const std::invalid_argument& e) {
                throw ConfigError("sim.n: " + std::string(e.what()));
            }
        }
    io::Table runs{{"run_id", "n", "theta_true", "theta_hat", "loglik_max"}, {}};
    io::Table summary{{"n", "mse", "inv_mse", "n_runs", "strategy"}, {}};
    for (std::size_t n : sizes) {
        const std::uint64_t seed_n = splitmix64(cfg.sim.seed ^ splitmix64(n));
        std::vector<double> est(cfg.sim.n_runs), ll(cfg.sim.n_runs);
        double mse = 0.0;
        if (cfg.sim.strategy == StrategyName::two_stage) {
            parallel_for(cfg.sim.n_runs, [&](std::size_t i) {
                TwoStageSetup s;
                s.model = cfg.params_at(cfg.model.theta0);
                s.theta_true = cfg.model.theta_true;
                s.n = n;
                s.epsilon = cfg.sim.epsilon;
                s.seed = seed_n;
                s.stream = i;
                s.fixed_angle = wrap_half_pi(cfg.sim.fixed_basis_angle);
                s.mle = mle;
                const auto r = two_stage_estimate(s);
                est[i] = r.theta_hat;
                ll[i] = r.loglik_max;
            });
            for (double e : est) mse += (e - cfg.model.theta_true) * (e - cfg.model.theta_true);
            mse /= static_cast<double>(est.size());
        } else {
            MseSetup s;
            s.model = cfg.params_at(cfg.model.theta0);
            s.theta_true = cfg.model.theta_true;
            s.n = n;
            s.n_runs = cfg.sim.n_runs;
            s.strategy = cfg.strategy();
            s.seed = seed_n;
            s.mle = mle;
            const auto st = mse_study(s);
            est = st.estimates;
            ll = st.loglik_max;
            mse = st.mse;
        }
        for (std::size_t i = 0; i < est.size(); ++i)
            runs.add({static_cast<double>(i), static_cast<double>(n), cfg.model.theta_true, est[i], ll[i]});
        summary.add({static_cast<double>(n), mse, 1.0 / mse, static_cast<double>(cfg.sim.n_runs),
                     std::string(to_string(cfg.sim.strategy))});
    }
    io::OutputSet out(cfg.output.dir);
    out.write(table_name(cfg, "mle_runs"), table_text(cfg, runs));
    out.write(table_name(cfg, "mle_summary"), table_text(cfg, summary));
    out.commit();
    return 0;
}

int cmd_validate(const RunConfig& cfg) {
    bool all = true;
    auto line = [&](bool ok, const std::string& name, const std::string& detail) {
        all = all && ok;
        std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    };
    char buf[256];

    const auto pc = prepare_pure_chain(build_interaction({0.0, cfg.model.lambda, cfg.model.phi}));
    for (std::size_t n : {2u, 3u, 4u}) {
        const auto rep = compare_filter_reference(pc.model, pc.psi, n);
        const bool ok = rep.basis_err < 1e-9 && rep.final_basis_err < 1e-9 && rep.operator_err < 1e-10;
        std::snprintf(buf, sizeof buf, "%zu branches, basis err %.3g, final basis err %.3g, operator err %.3g",
                      rep.branches, rep.basis_err, rep.final_basis_err, rep.operator_err);
        line(ok, "filter_vs_reference n=" + std::to_string(n), buf);
    }

    const std::vector<double> lambdas{0.25, 0.5, 0.75, 0.8, 1.0};
    const auto cf = check_closed_form(lambdas, 10, cfg.model.phi);
    std::snprintf(buf, sizeof buf, "n=1..10, max relative error %.3g (lambda=%g, n=%zu)", cf.max_rel_err,
                  cf.worst_lambda, cf.worst_n);
    line(cf.max_rel_err < 1e-10, "oracle_vs_closed_form", buf);

    double anchor = 0.0;
    for (double lambda : lambdas) {
        const auto p = prepare_pure_chain(build_interaction({0.0, lambda, cfg.model.phi}));
        anchor = std::max(anchor, std::abs(qfi_pure_oracle(p.model, p.psi, 1) - 8.0));
        anchor = std::max(anchor, std::abs(qfi_pure_oracle(p.model, p.psi, 2) - 16.0 - 8.0 * std::sqrt(1.0 - lambda)));
    }
    std::snprintf(buf, sizeof buf, "F(1)=8 and F(2)=16+8 sqrt(1-lambda), max deviation %.3g", anchor);
    line(anchor < 1e-10, "oracle_anchors", buf);

    const double lemma = qfi_model_closed(2, 0.75, ClosedFormVariant::lemma);
    const double exact = qfi_model_closed(2, 0.75, ClosedFormVariant::appendix);
    std::printf("INFO compact closed form at n=2, lambda=0.75 gives %.17g; the exact value is %.17g\n", lemma, exact);
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive measurement and Fisher information for quantum Markov chains"};
    app.require_subcommand(1);

    std::string config_path;
    json patch = json::object();
    const std::map<std::string, std::pair<std::string, std::string>> reals{
        {"--lambda", {"model", "lambda"}},        {"--phi", {"model", "phi"}},
        {"--theta0", {"model", "theta0"}},        {"--theta-true", {"model", "theta_true"}},
        {"--fixed-angle", {"sim", "fixed_basis_angle"}}, {"--initial-angle", {"sim", "initial_angle"}},
        {"--epsilon", {"sim", "epsilon"}},        {"--search-lo", {"mle", "search_lo"}},
        {"--search-hi", {"mle", "search_hi"}},    {"--tol", {"mle", "tol"}}};
    const std::map<std::string, std::pair<std::string, std::string>> counts{
        {"--n", {"sim", "n"}},           {"--n-traj", {"sim", "n_traj"}}, {"--seed", {"sim", "seed"}},
        {"--n-max", {"sim", "n_max"}},   {"--n-step", {"sim", "n_step"}}, {"--n-runs", {"sim", "n_runs"}},
        {"--grid-points", {"mle", "grid_points"}}};
    const std::map<std::string, std::pair<std::string, std::string>> strings{
        {"--strategy", {"sim", "strategy"}}, {"--out", {"output", "dir"}}, {"--format", {"output", "format"}}};

    const std::map<std::string, std::pair<std::string, std::function<int(const RunConfig&)>>> commands{
        {"stationary", {"Stationary state and spectrum of the transition operator (JSON)", cmd_stationary}},
        {"absorber", {"Coherent absorber for the reference parameter (JSON)", cmd_absorber}},
        {"fisher", {"Quantum and classical Fisher information versus n", cmd_fisher}},
        {"trajectory", {"One measurement record with its basis angles", cmd_trajectory}},
        {"mle", {"Maximum-likelihood estimation study", cmd_mle}},
        {"validate", {"Filter-vs-reference and closed-form checks", cmd_validate}}};

    std::map<CLI::App*, std::function<int(const RunConfig&)>> runners;
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "JSON configuration file");
        for (const auto& [flag, path] : reals)
            sub->add_option_function<double>(flag, [&patch, path](double v) { patch[path.first][path.second] = v; });
        for (const auto& [flag, path] : counts)
            sub->add_option_function<std::uint64_t>(flag,
                                                    [&patch, path](std::uint64_t v) { patch[path.first][path.second] = v; });
        for (const auto& [flag, path] : strings)
            sub->add_option_function<std::string>(flag,
                                                  [&patch, path](const std::string& v) { patch[path.first][path.second] = v; });
        sub->add_option_function<std::vector<std::uint64_t>>(
               "--n-list", [&patch](const std::vector<std::uint64_t>& v) { patch["sim"]["n_list"] = v; },
               "Comma-separated sample sizes for mle")
            ->delimiter(',');
        runners[sub] = entry.second;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunConfig cfg;
    try {
        json doc = config_path.empty() ? json::object() : load_config_file(config_path);
        if (!doc.is_object()) throw ConfigError("config: top level must be an object");
        doc.merge_patch(patch);
        cfg = parse_config(doc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        for (auto* sub : app.get_subcommands()) return runners.at(sub)(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
