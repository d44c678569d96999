// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_TOOLS_CLI_HPP
#define TFJKO_TOOLS_CLI_HPP

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <tfjko/csv.hpp>
#include <tfjko/functionals.hpp>
#include <tfjko/jko.hpp>
#include <tfjko/stationary.hpp>
#include <tfjko/verify.hpp>

namespace tfjko::cli
{

enum ExitCode : int
{
    exit_ok = 0,
    exit_solver = 1,
    exit_usage = 2,
    exit_verification = 3,
};

struct UsageError : Error
{
    int code;
    std::string text;
    UsageError(int c, std::string t)
        : Error(t)
        , code(c)
        , text(std::move(t))
    {
    }
};

struct RunConfig
{
    std::string command;
    std::string target; // verify target

    double lambda = 1.0;
    double eps = 0.0;
    std::string h = "h1";
    bool unsafe_h = false;
    std::size_t M = 2048;

    JkoConfig jko;
    std::string init = "stationary-shift:0.5";
    double t0 = 1.0;
    double t1 = std::numeric_limits<double>::infinity();

    std::vector<double> eps_list;
    std::size_t jobs = 1;

    std::string out;
    std::string final_out;
    std::string steps_out;
    std::string trace;
    std::uint64_t seed = 20240601;
    std::size_t count = 0; // verify sample size; 0 selects the default

    ProblemParams params() const
    {
        ProblemParams p;
        p.lambda = lambda;
        p.eps = eps;
        p.nl = find_nonlinearity(h);
        p.validate();
        return p;
    }
};

namespace detail
{

inline const std::vector<std::string>& flag_options()
{
    static const std::vector<std::string> f{"unsafe-h", "keep-states"};
    return f;
}

// Pulls `--config FILE` out of the arguments and turns its `key = value`
// lines into flags placed ahead of the command-line ones.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args)
{
    std::vector<std::string> rest;
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw UsageError(exit_usage, "--config needs a file");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty())
        return rest;
    std::ifstream in(path);
    if (!in)
        throw UsageError(exit_usage, "cannot read config file " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw UsageError(exit_usage, "config file " + path + ": " + e.what());
    }
    std::vector<std::string> injected;
    for (const auto& it : items) {
        if (!it.parents.empty() && !(it.parents.size() == 1 && it.parents[0] == "default"))
            throw UsageError(exit_usage, "config file " + path + ": sections are not supported");
        if (it.name == "++" || it.name == "--")
            continue;
        const auto& flags = flag_options();
        if (std::find(flags.begin(), flags.end(), it.name) != flags.end()) {
            if (it.inputs.size() == 1 && (it.inputs[0] == "true" || it.inputs[0] == "1"))
                injected.push_back("--" + it.name);
            continue;
        }
        injected.push_back("--" + it.name);
        std::string joined;
        for (std::size_t k = 0; k < it.inputs.size(); ++k)
            joined += (k ? "," : "") + it.inputs[k];
        injected.push_back(joined);
    }
    // subcommand tokens first, then the file, then the command line
    std::size_t head = 0;
    if (!rest.empty() && rest[0].rfind("-", 0) != 0) {
        head = 1;
        if (rest[0] == "verify" && rest.size() > 1 && rest[1].rfind("-", 0) != 0)
            head = 2;
    }
    std::vector<std::string> out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(head));
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(head), rest.end());
    return out;
}

inline void add_problem(CLI::App* a, RunConfig& c, bool with_eps = true)
{
    a->add_option("--lambda", c.lambda, "confinement strength")->check(CLI::PositiveNumber);
    if (with_eps)
        a->add_option("--eps", c.eps, "perturbation size")->check(CLI::NonNegativeNumber);
    a->add_option("--h", c.h, "perturbation nonlinearity");
    a->add_flag("--unsafe-h", c.unsafe_h, "skip the admissibility check on h");
    a->add_option("--m", c.M, "stationary grid size")->check(CLI::Range(std::size_t{16}, std::size_t{1} << 22));
}

inline void add_jko(CLI::App* a, RunConfig& c)
{
    a->add_option("--tau", c.jko.tau, "time step")->check(CLI::PositiveNumber);
    a->add_option("--t-end", c.jko.t_end, "final time")->check(CLI::NonNegativeNumber);
    a->add_option("--n", c.jko.N, "particle count")->check(CLI::Range(std::size_t{32}, std::size_t{1} << 20));
    a->add_option("--inner-tol", c.jko.inner_tol, "gradient tolerance (0 = default)")->check(CLI::NonNegativeNumber);
    a->add_option("--inner-max", c.jko.inner_max, "inner iteration cap")->check(CLI::PositiveNumber);
    a->add_option("--record-every", c.jko.record_every, "trace decimation")->check(CLI::PositiveNumber);
    a->add_option("--init", c.init, "stationary-shift:A | bump | file:PATH");
    a->add_option("--t0", c.t0, "fit window start");
    a->add_option("--t1", c.t1, "fit window end");
}

} // namespace detail

inline RunConfig parse_args(const std::vector<std::string>& raw)
{
    std::vector<std::string> args = detail::expand_config(raw);
    RunConfig c;
    CLI::App app{"thin-film JKO laboratory", "tfjko"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_help_flag("--help", "print help");
    app.set_help_all_flag("--help-all");

    auto* st = app.add_subcommand("stationary", "solve for the stationary profile");
    detail::add_problem(st, c);
    st->add_option("--out", c.out, "profile CSV")->capture_default_str();

    auto* ev = app.add_subcommand("evolve", "run the JKO scheme");
    detail::add_problem(ev, c);
    detail::add_jko(ev, c);
    ev->add_option("--out", c.out, "trace CSV");
    ev->add_option("--final", c.final_out, "final density CSV");
    ev->add_option("--steps-out", c.steps_out, "per-step records CSV");

    auto* ra = app.add_subcommand("rate", "fit the decay rate of a trace");
    detail::add_problem(ra, c);
    ra->add_option("--trace", c.trace, "trace CSV")->required();
    ra->add_option("--t0", c.t0, "fit window start");
    ra->add_option("--t1", c.t1, "fit window end");

    auto* sw = app.add_subcommand("sweep", "rates across perturbation sizes");
    detail::add_problem(sw, c, false);
    detail::add_jko(sw, c);
    sw->add_option("--eps-list,--eps", c.eps_list, "comma separated eps values")->delimiter(',')->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->check(CLI::NonNegativeNumber);
    sw->add_option("--jobs", c.jobs, "concurrent trajectories")->check(CLI::PositiveNumber);
    sw->add_option("--out", c.out, "sweep CSV");

    auto* ve = app.add_subcommand("verify", "verification suites");
    ve->require_subcommand(1);
    for (const char* name : {"hypotheses", "inequalities", "splitting", "wderiv", "decay"}) {
        auto* v = ve->add_subcommand(name);
        detail::add_problem(v, c);
        v->add_option("--seed", c.seed, "generator seed");
        v->add_option("--count", c.count, "sample size");
        v->add_option("--out", c.out, "report CSV");
        if (std::string(name) == "decay")
            detail::add_jko(v, c);
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        throw UsageError(exit_ok, app.help());
    } catch (const CLI::CallForAllHelp&) {
        throw UsageError(exit_ok, app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::ParseError& e) {
        throw UsageError(exit_usage, e.what());
    }
    for (auto* s : {st, ev, ra, sw})
        if (s->parsed())
            c.command = s->get_name();
    if (ve->parsed()) {
        c.command = "verify";
        for (auto* v : ve->get_subcommands())
            c.target = v->get_name();
    }
    try {
        find_nonlinearity(c.h);
        c.jko.validate();
    } catch (const InputError& e) {
        throw UsageError(exit_usage, e.what());
    }
    if (c.command == "evolve" || c.command == "sweep" || c.command == "verify") {
        if (c.t1 <= c.t0)
            throw UsageError(exit_usage, "--t1 must exceed --t0");
    }
    return c;
}

namespace detail
{

inline StationaryProfile stationary_for(const RunConfig& c, const ProblemParams& p)
{
    StationaryOptions o;
    o.M = c.M;
    o.unsafe_h = c.unsafe_h;
    return solve_stationary(p, o);
}

inline GridDensity initial_density(const RunConfig& c, const AuxiliaryPotential& W)
{
    const std::string& s = c.init;
    if (s.rfind("stationary-shift:", 0) == 0) {
        double a;
        try {
            a = std::stod(s.substr(17));
        } catch (const std::exception&) {
            throw InputError("bad shift in --init " + s);
        }
        const double xs = W.x_star();
        return density_from_function(a - xs, a + xs, 4 * c.jko.N + 1, [&](double x) { return W.rho_bar(x - a); });
    }
    if (s == "bump")
        return density_from_function(-1.5, 1.5, 4 * c.jko.N + 1, [](double x) { return quartic_bump(x / 1.5); });
    if (s.rfind("file:", 0) == 0)
        return read_density(s.substr(5));
    throw InputError("unknown --init " + s);
}

inline CsvTable trace_table(const EvolutionTrace& tr)
{
    CsvTable t({"t", "E", "L", "production", "w2_step", "l1_to_eq", "entropy", "h2norm"});
    for (const auto& r : tr.rows)
        t.add({r.t, r.E, r.L, r.production, r.w2_step, r.l1_to_eq, r.entropy, r.h2norm});
    return t;
}

inline CsvTable steps_table(const EvolutionTrace& tr)
{
    CsvTable t({"t", "E_hat", "E_plus", "w2", "L_hat", "L_plus", "iterations", "grad_norm", "converged",
                "energy_estimate"});
    for (const auto& s : tr.steps)
        t.add({s.t, s.E_hat, s.E_plus, s.w2, s.L_hat, s.L_plus, static_cast<double>(s.iterations), s.grad_norm,
               s.converged ? 1.0 : 0.0, s.energy_estimate ? 1.0 : 0.0});
    return t;
}

inline std::string meta_path(const std::string& out)
{
    std::filesystem::path p(out);
    std::filesystem::path m = p.parent_path() / (p.stem().string() + ".meta.csv");
    return m.string();
}

struct Trajectory
{
    EvolutionTrace trace;
    RateFit fit;
    bool fitted = false;
    std::string fit_error;
};

inline Trajectory run_trajectory(const RunConfig& c, const ProblemParams& p)
{
    auto st = stationary_for(c, p);
    auto W = build_potential(st);
    Trajectory out;
    out.trace = evolve(initial_density(c, W), p, c.jko, W);
    try {
        out.fit = fit_trace_rate(out.trace, c.t0, c.t1);
        out.fitted = true;
    } catch (const EvaluationError& e) {
        out.fit_error = e.what();
    }
    return out;
}

inline int cmd_stationary(const RunConfig& c, std::ostream& out)
{
    auto p = c.params();
    auto st = stationary_for(c, p);
    std::string path = c.out.empty() ? "profile.csv" : c.out;
    write_density(path, st.profile);
    CsvTable meta({"x_star", "C_eps", "c1", "c2", "lambda_tilde", "rho0", "M", "lambda", "eps", "el_residual",
                   "mass_error"});
    meta.add({st.x_star, st.C_eps, st.c1, st.c2, st.lambda_tilde, st.rho0, static_cast<double>(st.M), p.lambda,
              p.eps, st.diag.el_residual, st.diag.mass_error});
    write_csv(meta_path(path), meta);
    out << "x_star,C_eps,c1,c2,lambda_tilde\n"
        << fmt17(st.x_star) << ',' << fmt17(st.C_eps) << ',' << fmt17(st.c1) << ',' << fmt17(st.c2) << ','
        << fmt17(st.lambda_tilde) << '\n';
    return exit_ok;
}

inline int cmd_evolve(const RunConfig& c, std::ostream& out)
{
    auto p = c.params();
    auto tr = run_trajectory(c, p);
    write_csv(c.out.empty() ? "trace.csv" : c.out, trace_table(tr.trace));
    if (!c.final_out.empty())
        write_density(c.final_out, tr.trace.final_density);
    if (!c.steps_out.empty())
        write_csv(c.steps_out, steps_table(tr.trace));
    std::size_t unconverged = 0;
    for (const auto& s : tr.trace.steps)
        unconverged += s.converged ? 0 : 1;
    const auto& last = tr.trace.rows.back();
    out << "steps,final_t,final_gap,unconverged_steps\n"
        << tr.trace.steps.size() << ',' << fmt17(last.t) << ',' << fmt17(last.L - tr.trace.L_bar) << ','
        << unconverged << '\n';
    if (tr.fitted)
        out << "rate " << fmt17(tr.fit.rate) << " r2 " << fmt17(tr.fit.r2) << '\n';
    else
        out << "rate unavailable: " << tr.fit_error << '\n';
    return exit_ok;
}

inline int cmd_rate(const RunConfig& c, std::ostream& out)
{
    auto p = c.params();
    auto W = build_potential(stationary_for(c, p));
    const double Lb = lyapunov_equilibrium(W);
    auto rows = read_numeric_csv(c.trace, {"t", "E", "L", "production", "w2_step", "l1_to_eq", "entropy", "h2norm"});
    std::vector<double> t, gap;
    for (const auto& r : rows) {
        t.push_back(r[0]);
        gap.push_back(r[2] - Lb);
    }
    auto f = fit_rate(t, gap, c.t0, c.t1);
    out << "rate,r2,points\n" << fmt17(f.rate) << ',' << fmt17(f.r2) << ',' << f.points << '\n';
    return exit_ok;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out)
{
    const std::size_t n = c.eps_list.size();
    std::vector<Trajectory> runs(n);
    std::vector<std::string> errors(n);
    std::mutex mtx;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t k;
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (next >= n)
                    return;
                k = next++;
            }
            try {
                RunConfig ck = c;
                ck.eps = c.eps_list[k];
                runs[k] = run_trajectory(ck, ck.params());
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::min(c.jobs, n); ++j)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    for (std::size_t k = 0; k < n; ++k)
        if (!errors[k].empty())
            throw SolverError("eps = " + fmt17(c.eps_list[k]) + ": " + errors[k]);

    CsvTable t({"eps", "rate_emp"});
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < n; ++k) {
        if (!runs[k].fitted)
            throw EvaluationError("eps = " + fmt17(c.eps_list[k]) + ": " + runs[k].fit_error);
        t.add({c.eps_list[k], runs[k].fit.rate});
        xs.push_back(c.eps_list[k]);
        ys.push_back(runs[k].fit.rate);
    }
    write_csv(c.out.empty() ? "sweep.csv" : c.out, t);
    out << t.str();
    if (n >= 2) {
        auto a = fit_affine(xs, ys);
        out << "affine fit: rate = " << fmt17(a.intercept) << " - " << fmt17(-a.slope) << " * eps, r2 "
            << fmt17(a.r2) << '\n';
        out << "C_emp " << fmt17(-a.slope) << '\n';
    }
    return exit_ok;
}

inline int verify_hypotheses(const RunConfig& c, std::ostream& out)
{
    auto nl = find_nonlinearity(c.h);
    auto r = default_hypothesis_check(nl);
    CsvTable t({"bound", "worst_ratio", "at"});
    t.add_cells({"h''", fmt17(r.d2.worst), fmt17(r.d2.at)});
    t.add_cells({"h''''", fmt17(r.d4.worst), fmt17(r.d4.at)});
    t.add_cells({"h'", fmt17(r.d1.worst), fmt17(r.d1.at)});
    t.add_cells({"h", fmt17(r.h.worst), fmt17(r.h.at)});
    if (!c.out.empty())
        write_csv(c.out, t);
    out << t.str() << "h(0) " << fmt17(r.h_at_zero) << "\n" << (r.pass ? "PASS" : "FAIL") << '\n';
    return r.pass ? exit_ok : exit_verification;
}

inline int verify_inequalities(const RunConfig& c, std::ostream& out)
{
    auto p = c.params();
    auto W = build_potential(stationary_for(c, p));
    auto rhos = generate_test_densities(W, c.count ? c.count : 200, c.seed);
    auto rep = inequality_report(rhos, W, p);
    CsvTable t({"case_id", "kind", "lhs", "rhs", "ratio"});
    for (const auto& r : rep.rows)
        t.add_cells({std::to_string(r.case_id), r.kind, fmt17(r.lhs), fmt17(r.rhs), fmt17(r.ratio)});
    write_csv(c.out.empty() ? "inequalities.csv" : c.out, t);
    out << "densities " << rhos.size() << " rows " << rep.rows.size() << '\n'
        << "dissipation violations " << rep.dissipation_violations << " min ratio "
        << fmt17(rep.dissipation_ratio_min) << '\n';
    if (p.eps > 0.0)
        out << "kappa1 " << fmt17(rep.kappa1) << " kappa2 " << fmt17(rep.kappa2) << " kappa3 " << fmt17(rep.kappa3)
            << " kappa " << fmt17(rep.kappa) << '\n'
            << "remainder bound " << (rep.remainder_bound_ok ? "holds" : "fails") << '\n';
    bool ok = rep.dissipation_violations == 0 && rep.remainder_bound_ok;
    out << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? exit_ok : exit_verification;
}

inline int verify_splitting_cmd(const RunConfig& c, std::ostream& out)
{
    auto p = c.params();
    auto W = build_potential(stationary_for(c, p));
    auto rep = verify_splitting(W, p);
    CsvTable t({"density", "nodes", "residual"});
    for (std::size_t d = 0; d < rep.densities.size(); ++d)
        for (const auto& l : rep.densities[d])
            t.add({static_cast<double>(d), static_cast<double>(l.nodes), l.residual});
    if (!c.out.empty())
        write_csv(c.out, t);
    out << t.str() << "worst reduction factor " << fmt17(rep.worst_factor) << '\n'
        << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? exit_ok : exit_verification;
}

inline int verify_wderiv_cmd(const RunConfig& c, std::ostream& out)
{
    auto rep = verify_wderiv(c.count ? c.count : 20, c.seed);
    CsvTable t({"case", "analytic", "finite_difference", "rel_error"});
    for (std::size_t k = 0; k < rep.cases.size(); ++k)
        t.add({static_cast<double>(k), rep.cases[k].analytic, rep.cases[k].finite_difference, rep.cases[k].rel_error});
    if (!c.out.empty())
        write_csv(c.out, t);
    out << "max relative error " << fmt17(rep.max_rel_error) << '\n' << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? exit_ok : exit_verification;
}

inline int verify_decay(const RunConfig& c, std::ostream& out)
{
    auto p = c.params();
    auto tr = run_trajectory(c, p);
    auto d = step_decay_check(tr.trace);
    std::size_t energy_failures = 0;
    for (const auto& s : tr.trace.steps)
        energy_failures += s.energy_estimate ? 0 : 1;
    if (!c.out.empty())
        write_csv(c.out, steps_table(tr.trace));
    out << "rate_emp " << fmt17(d.rate_emp) << " steps_checked " << d.steps_checked << '\n'
        << "envelope steps " << d.envelope_steps << " violations " << d.envelope_violations << '\n'
        << "energy estimate failures " << energy_failures << '\n';
    bool ok = d.envelope_violations == 0 && energy_failures == 0 && d.monotone && (d.vacuous || d.rate_emp > 0.0);
    out << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? exit_ok : exit_verification;
}

} // namespace detail

inline int run(const RunConfig& c, std::ostream& out, std::ostream& err)
{
    try {
        if (c.command == "stationary")
            return detail::cmd_stationary(c, out);
        if (c.command == "evolve")
            return detail::cmd_evolve(c, out);
        if (c.command == "rate")
            return detail::cmd_rate(c, out);
        if (c.command == "sweep")
            return detail::cmd_sweep(c, out);
        if (c.target == "hypotheses")
            return detail::verify_hypotheses(c, out);
        if (c.target == "inequalities")
            return detail::verify_inequalities(c, out);
        if (c.target == "splitting")
            return detail::verify_splitting_cmd(c, out);
        if (c.target == "wderiv")
            return detail::verify_wderiv_cmd(c, out);
        if (c.target == "decay")
            return detail::verify_decay(c, out);
        err << "nothing to run\n";
        return exit_usage;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_solver;
    }
}

inline int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig c;
    try {
        c = parse_args(args);
    } catch (const UsageError& e) {
        (e.code == exit_ok ? out : err) << e.text << '\n';
        return e.code;
    }
    return run(c, out, err);
}

} // namespace tfjko::cli

#endif
