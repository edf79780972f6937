#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "acceptance.hpp"
#include "chaos.hpp"
#include "conditions.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "fbm.hpp"
#include "fraccalc.hpp"
#include "lambda_space.hpp"
#include "parallel.hpp"

namespace frachaos {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by the CLI: 0 pass/complete, 1 error, 2 a condition failed.
enum ExitCode { kExitOk = 0, kExitError = 1, kExitConditionFailed = 2 };

struct RunManifest {
    std::string command;
    std::string config_snapshot;
    std::uint64_t seed = 0;
    double wall_clock = 0;
    std::vector<std::pair<std::string, std::size_t>> tables;  // file, data rows
    std::string summary;
    int exit_code = kExitOk;
};

/// Grid, order, drift and diffusion as configured.
struct Problem {
    Grid grid;
    FracOrder order;
    SampledFunction drift;
    LambdaElement diffusion;
};

inline double polynomial(const std::vector<double>& c, double x) {
    double s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
    return s;
}

inline Problem make_problem(const SolverConfig& c) {
    const Grid g = make_grid(c.horizon, c.n_cells);
    const auto o = FracOrder::from_hurst(c.hurst);
    auto a = SampledFunction::from(g, [&](double t) { return polynomial(c.a_coefficients, t); });
    auto b = c.b_kind == "constant"
                 ? constant_element(g, o, c.b_data[0])
                 : from_phi(SampledFunction::from(g, [&](double s) { return polynomial(c.b_data, s); }), o, c.p);
    b.p_hint = c.p;
    return {g, o, std::move(a), std::move(b)};
}

/// η as a chaos expansion; norm sequences only feed the condition checks.
inline EtaSpec make_eta(const SolverConfig& c, const Problem& pr) {
    if (c.eta_kind == "norm-sequence")
        throw ConfigError("eta_spec.kind: norm-sequence only describes the level norms; use it with check");
    const auto v = detail::parse_list("eta_spec.data", c.eta_data);
    EtaSpec eta = EtaSpec::deterministic(v[0]);
    if (c.eta_kind == "finite-chaos" && v.size() > 1) {
        const auto e = from_phi(SampledFunction::from(pr.grid, [&](double s) { return polynomial(c.eta_factor, s); }),
                                pr.order);
        for (std::size_t k = 1; k < v.size(); ++k)
            if (v[k] != 0.0) eta.add(v[k], std::vector<LambdaElement>(k, e));
    }
    return eta;
}

inline double operator_norm(const SolverConfig& c, FracOrder o, double p) {
    return c.operator_norm ? *c.operator_norm : default_operator_norm(o, p);
}

/// Node times i T / parts, i = 0..parts, snapped down to the grid.
inline std::vector<double> snapped_times(const Grid& g, int parts) {
    std::vector<double> t;
    for (int i = 0; i <= parts; ++i) {
        const double x = g.node(g.floor_index(g.horizon() * i / parts));
        if (t.empty() || x != t.back()) t.push_back(x);
    }
    return t;
}

namespace commands {

using Files = std::vector<std::pair<std::string, std::string>>;  // name, content

inline std::size_t data_rows(const std::string& csv) {
    const auto n = std::size_t(std::count(csv.begin(), csv.end(), '\n'));
    return n ? n - 1 : 0;
}

inline void require_paths(const SolverConfig& c, const char* cmd) {
    if (c.n_paths < 100) throw ConfigError(std::string("n_paths must be >= 100 for ") + cmd);
}

inline int fracint(const SolverConfig& c, Files& out, std::string& summary) {
    const auto pr = make_problem(c);
    const auto& f = pr.diffusion.f;
    const auto I = frac_integral(f, pr.order);
    const auto D = frac_derivative(f, pr.order);
    std::ostringstream os;
    os << "t,f,frac_integral,frac_derivative\n";
    for (std::size_t k = 0; k < pr.grid.size(); ++k)
        os << csv_number(pr.grid.node(k)) << ',' << csv_number(f[k]) << ',' << csv_number(I[k]) << ','
           << csv_number(D.values[k]) << '\n';
    out.push_back({"fracint.csv", os.str()});
    summary = std::string("marchaud_tail = ") + (D.converges ? "converges" : "does not converge") +
              "; frac_derivative at T copies T - h";
    return kExitOk;
}

inline int simulate(const SolverConfig& c, Files& out, std::string& summary) {
    require_paths(c, "simulate");
    const Grid g = make_grid(c.horizon, c.n_cells);
    const auto batch = frachaos::simulate(c.hurst, g, std::size_t(c.n_paths), c.seed);
    std::ostringstream os;
    write_paths_csv(os, batch);
    out.push_back({"paths.csv", os.str()});
    summary = std::to_string(c.n_paths) + " paths";
    return kExitOk;
}

inline int check(const SolverConfig& c, Files& out, std::string& summary) {
    const auto pr = make_problem(c);
    const double c_pt = operator_norm(c, pr.order, c.p_tilde);
    const auto sup = sup_b_constant(pr.order, c.p_tilde, pr.drift, pr.diffusion, c_pt);
    const auto bounds =
        bound_constants(pr.order, c.p_tilde, c.horizon, pr.drift, restrict(pr.diffusion, sup.t_at_sup), c_pt);

    LogNorms norms;
    if (c.eta_kind == "norm-sequence") {
        if (c.eta_data == "critical") norms = critical_log_norms(sup.value);
        else if (c.eta_data.rfind("exp-growth:", 0) == 0)
            norms = exp_growth_log_norms(detail::parse_real("eta_spec.data", detail::trim(c.eta_data.substr(11))));
        else norms = tabulated_log_norms(detail::parse_list("eta_spec.data", c.eta_data.substr(5)));
    } else {
        norms = tabulated_log_norms(eta_level_norms(make_eta(c, pr), std::min(c.eta_levels, 13)));
    }
    const SeriesOptions opt{c.eta_levels};
    const auto solv = solvability_condition(norms, sup, opt);
    const auto cont = continuity_condition(norms, c.theta, pr.order, c.p, opt);

    Verdict overall = Verdict::pass;
    for (auto v : {solv.verdict, cont.verdict}) {
        if (v == Verdict::fail) overall = Verdict::fail;
        else if (v == Verdict::inconclusive && overall == Verdict::pass) overall = Verdict::inconclusive;
    }
    std::ostringstream os;
    os.precision(17);
    os << "verdict = " << to_string(overall) << "\n\n[bounds]\n";
    os << "p_tilde = " << c.p_tilde << "\noperator_norm = " << c_pt << "\nB_T_p = " << bounds.B_T_p
       << "\nB_H_p_t = " << bounds.B_H_p_t << "\nA = " << bounds.A << "\nB_p = " << bounds.B_p
       << "\nb_sup = " << sup.value << "\nt_at_sup = " << sup.t_at_sup << '\n';
    os << "\n[solvability]\n" << format_report(solv) << "\n[continuity]\n" << format_report(cont);
    out.push_back({"condition_report.txt", os.str()});
    summary = std::string("solvability ") + to_string(solv.verdict) + ", continuity " + to_string(cont.verdict);
    return overall == Verdict::fail ? kExitConditionFailed : kExitOk;
}

inline int moments(const SolverConfig& c, Files& out, std::string& summary) {
    const auto pr = make_problem(c);
    const auto eta = make_eta(c, pr);
    std::ostringstream os;
    os << "t,mean,second_moment,tail_flag\n";
    int flagged = 0;
    for (double t : snapped_times(pr.grid, 64)) {
        const auto S = build_kernels(pr.drift, pr.diffusion, eta, t, c.n_max);
        const auto m2 = second_moment(S);
        flagged += m2.tail_flag;
        os << csv_number(t) << ',' << csv_number(mean(S)) << ',' << csv_number(m2.value) << ','
           << (m2.tail_flag ? 1 : 0) << '\n';
    }
    out.push_back({"moments.csv", os.str()});
    summary = std::to_string(flagged) + " rows with tail_flag";
    return kExitOk;
}

inline int solve(const SolverConfig& c, Files& out, std::string& summary) {
    require_paths(c, "solve");
    const auto pr = make_problem(c);
    const auto eta = make_eta(c, pr);
    std::vector<ChaosSolution> slices;
    for (double t : snapped_times(pr.grid, 16)) slices.push_back(build_kernels(pr.drift, pr.diffusion, eta, t, c.n_max));
    FbmSampler sampler(c.hurst, pr.grid);
    const std::size_t n = std::size_t(c.n_paths);
    std::vector<std::vector<double>> X(n, std::vector<double>(slices.size()));
    parallel_for(n, [&](std::size_t i) {
        const auto path = sampler.sample(c.seed, i);
        for (std::size_t k = 0; k < slices.size(); ++k) X[i][k] = evaluate_solution(slices[k], path).value;
    });
    std::ostringstream os;
    os << "t,path_id,X_t\n";
    for (std::size_t k = 0; k < slices.size(); ++k)
        for (std::size_t i = 0; i < n; ++i)
            os << csv_number(slices[k].t) << ',' << i << ',' << csv_number(X[i][k]) << '\n';
    out.push_back({"solve.csv", os.str()});
    std::ostringstream ks;
    write_kernel_csv(ks, slices.back());
    out.push_back({"kernels.csv", ks.str()});
    summary = std::to_string(slices.size()) + " times x " + std::to_string(n) + " paths; kernels at t = T";
    return kExitOk;
}

inline int validate(const SolverConfig&, Files& out, std::string& summary) {
    const auto results = run_acceptance();
    std::ostringstream os;
    os << "criterion,value,threshold,seconds,verdict\n";
    int failed = 0;
    for (const auto& r : results) {
        os << r.id << ',' << csv_number(r.measured) << ',' << csv_number(r.threshold) << ',' << csv_number(r.seconds)
           << ',' << (r.passed ? "pass" : "fail") << '\n';
        failed += !r.passed;
        summary += format_result(r) + '\n';
    }
    out.push_back({"acceptance.csv", os.str()});
    return failed ? kExitConditionFailed : kExitOk;
}

}  // namespace commands

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"fracint", "simulate", "check", "moments", "solve", "validate"};
    return names;
}

inline std::string format_manifest(const RunManifest& m) {
    std::ostringstream os;
    os.precision(6);
    os << "artifact = frachaos\nversion = " << kVersion << "\ncommand = " << m.command << "\nseed = " << m.seed
       << "\nthreads = " << worker_count() << "\nwall_clock_seconds = " << m.wall_clock
       << "\nexit_code = " << m.exit_code << '\n';
    for (const auto& [file, rows] : m.tables) os << "rows." << file << " = " << rows << '\n';
    std::istringstream s(m.summary);
    for (std::string line; std::getline(s, line);)
        if (!line.empty()) os << "summary = " << line << '\n';
    os << "\n[config]\n" << m.config_snapshot;
    return os.str();
}

/// Runs one subcommand, writes its files and manifest.txt into c.output_dir.
inline RunManifest run_command(const std::string& name, const SolverConfig& c) {
    using Fn = int (*)(const SolverConfig&, commands::Files&, std::string&);
    Fn fn = nullptr;
    if (name == "fracint") fn = commands::fracint;
    else if (name == "simulate") fn = commands::simulate;
    else if (name == "check") fn = commands::check;
    else if (name == "moments") fn = commands::moments;
    else if (name == "solve") fn = commands::solve;
    else if (name == "validate") fn = commands::validate;
    else throw InvalidArgument("unknown command '" + name + "'");

    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = name;
    m.seed = c.seed;
    m.config_snapshot = format_config(c);
    commands::Files files;
    m.exit_code = fn(c, files, m.summary);
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    for (const auto& [file, content] : files) {
        write_atomically(dir / file, content);
        m.tables.push_back({file, file.ends_with(".csv") ? commands::data_rows(content) : 0});
    }
    write_atomically(dir / "manifest.txt", format_manifest(m));
    return m;
}

}  // namespace frachaos
