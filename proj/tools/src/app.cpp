#include "clustre/cli/app.hpp"

#include "clustre/cli/config.hpp"
#include "clustre/cli/csv.hpp"
#include "clustre/cli/validate.hpp"
#include "clustre/errors.hpp"
#include "clustre/optimizer.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

namespace clustre::cli {
namespace {

namespace fs = std::filesystem;

struct Flags {
    std::string config;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    bool dump_events = false;
    std::optional<std::size_t> grid;
    std::optional<std::string> contract;
    std::optional<std::string> lambda_grid;
    bool fast = false;
};

struct Context {
    ScenarioConfig cfg;
    fs::path out_dir;
    std::ostream& out;

    void write(const CsvTable& table, const std::string& name) const {
        table.write(out_dir / name, cfg.sha256);
        out << "wrote " << (out_dir / name).string() << '\n';
    }
};

std::uint64_t require_seed(const Context& ctx, const Flags& flags, const char* command) {
    if (flags.seed) {
        return *flags.seed;
    }
    if (ctx.cfg.run.seed) {
        return *ctx.cfg.run.seed;
    }
    throw ConfigError(std::string(command) + " is stochastic and needs --seed or run.seed in " +
                      ctx.cfg.source.string());
}

int cmd_simulate(Context& ctx, const Flags& flags) {
    const std::uint64_t seed = require_seed(ctx, flags, "simulate");
    const std::size_t n = flags.paths.value_or(ctx.cfg.run.n_paths);
    if (n < 2) {
        throw ConfigError("simulate needs --paths >= 2 (or run.n_paths)");
    }
    const HawkesParams& p = ctx.cfg.hawkes;
    const double T = ctx.cfg.economic.T;
    std::vector<double> counts(n), totals(n), terminal(n);
    std::vector<std::vector<Event>> events(flags.dump_events ? n : 0);
    simulate_batch(p, T, seed, n, [&](std::size_t i, const EventPath& path) {
        counts[i] = static_cast<double>(path.events.size());
        double x = 0.0;
        for (const auto& e : path.events) {
            x += e.mark;
        }
        totals[i] = x;
        terminal[i] = path.terminal_intensity;
        if (flags.dump_events) {
            events[i] = path.events;
        }
    });

    const MomentBundle b = MomentBundle::compute(p, T);
    const MarkLaw& law = p.marks();
    const double mass = law.total_mass();
    const double theta = theta_bar(law);
    const double hf = p.impact().h_f(law);
    const double h_fz = p.impact().kind() == ImpactSpec::Kind::Linear ? p.impact().value() * law.moment(2)
                                                                      : p.impact().value() * theta;
    const SampleMoments sc = sample_moments(counts);
    const SampleMoments sx = sample_moments(totals);
    const SampleMoments si = sample_moments(terminal);

    CsvTable table({"quantity", "sample", "se", "closed_form"});
    table.add({"mean_N_T", num(sc.mean), num(sc.mean_se), num(mass * b.M_T())});
    table.add({"var_N_T", num(sc.variance), num(sc.variance_se),
               num(mass * mass * b.A_T() + mass * hf * b.B_T() + mass * b.M_T())});
    table.add({"mean_X_T", num(sx.mean), num(sx.mean_se), num(theta * b.M_T())});
    table.add({"var_X_T", num(sx.variance), num(sx.variance_se),
               num(theta * theta * b.A_T() + theta * h_fz * b.B_T() + law.moment(2) * b.M_T())});
    table.add({"mean_lambda_T", num(si.mean), num(si.mean_se), num(b.mean_intensity(T))});
    ctx.write(table, "simulate_summary.csv");

    ctx.out << fmt::format("simulate: {} paths, seed {}, T = {}\n", n, seed, T);
    ctx.out << fmt::format("  {:<16}{:>18}{:>14}{:>18}\n", "quantity", "sample", "se", "closed form");
    for (const auto& r : table.rows()) {
        ctx.out << fmt::format("  {:<16}{:>18.10g}{:>14.4g}{:>18.10g}\n", r[0], std::stod(r[1]), std::stod(r[2]),
                               std::stod(r[3]));
    }
    if (flags.dump_events) {
        CsvTable ev({"path_id", "event_index", "time", "mark", "intensity_after"});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < events[i].size(); ++k) {
                const Event& e = events[i][k];
                ev.add({std::to_string(i), std::to_string(k), num(e.time), num(e.mark), num(e.intensity_after)});
            }
        }
        ctx.write(ev, "events.csv");
    }
    return kExitOk;
}

int cmd_moments(Context& ctx, const Flags& flags) {
    const std::size_t n = flags.grid.value_or(ctx.cfg.run.moments_grid);
    if (n < 1) {
        throw ConfigError("moments needs --grid N >= 1 (or run.moments_grid)");
    }
    const HawkesParams& p = ctx.cfg.hawkes;
    const double T = ctx.cfg.economic.T;
    const MomentBundle b = MomentBundle::compute(p, T);

    CsvTable curve({"t", "m", "m2", "var_lambda", "M", "M2", "A", "B"});
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = T * static_cast<double>(k) / static_cast<double>(n);
        const double A = k == 0 ? 0.0 : coefficient_A(p, t);
        const double B = k == 0 ? 0.0 : coefficient_B(p, t);
        curve.add({num(t), num(b.mean_intensity(t)), num(b.second_moment(t)), num(b.intensity_variance(t)),
                   num(b.cumulative_mean(t)), num(b.cumulative_second_moment(t)), num(A), num(B)});
    }
    ctx.write(curve, "moments.csv");

    const auto ode = reference::moments_ode(p, T);
    const bool quad = !p.is_poisson_branch();
    auto q = [&](double (*f)(const MomentBundle&)) { return quad ? num(f(b)) : std::string(); };
    CsvTable summary({"quantity", "closed_form", "ode", "quadrature"});
    summary.add({"m_T", num(b.mean_intensity(T)), num(ode.m), ""});
    summary.add({"m2_T", num(b.second_moment(T)), num(ode.m2), ""});
    summary.add({"M_T", num(b.M_T()), num(ode.M), q(reference::cumulative_mean_quadrature)});
    summary.add({"M2_T", num(b.M2_T()), num(ode.M2), q(reference::cumulative_second_moment_quadrature)});
    summary.add({"A_T", num(b.A_T()), num(ode.A), q(reference::coefficient_A_quadrature)});
    summary.add({"B_T", num(b.B_T()), num(ode.B), q(reference::coefficient_B_quadrature)});
    ctx.write(summary, "moments_summary.csv");

    ctx.out << fmt::format("moments at T = {} (kappa = {:.10g})\n", T, b.kappa());
    ctx.out << fmt::format("  {:<8}{:>22}{:>22}{:>22}\n", "", "closed form", "ode", "quadrature");
    for (const auto& r : summary.rows()) {
        ctx.out << fmt::format("  {:<8}{:>22}{:>22}{:>22}\n", r[0], r[1], r[2], r[3]);
    }
    return kExitOk;
}

int cmd_evaluate(Context& ctx, const Flags& flags) {
    const auto spec = flags.contract ? flags.contract : ctx.cfg.run.contract;
    if (!spec) {
        throw ConfigError("evaluate needs --contract <spec> (or run.contract)");
    }
    const Contract contract = parse_contract(*spec);
    const HawkesParams& p = ctx.cfg.hawkes;
    const EconomicParams& econ = ctx.cfg.economic;
    const MomentBundle b = MomentBundle::compute(p, econ.T);
    const CriterionReport r = utility_closed_form(contract, econ, b);

    std::optional<McEstimate> mc;
    if (flags.paths) {
        mc = mc_estimate(contract, econ, p, *flags.paths, require_seed(ctx, flags, "evaluate --paths"));
    }
    auto mc_cell = [&](double McEstimate::*field) { return mc ? num((*mc).*field) : std::string(); };

    CsvTable table({"term", "closed_form", "mc_estimate", "se"});
    table.add({"base", num(r.terms.base), "", ""});
    table.add({"linear", num(r.terms.linear), "", ""});
    table.add({"variance_M", num(r.terms.variance_M), "", ""});
    table.add({"variance_A", num(r.terms.variance_A), "", ""});
    table.add({"variance_B", num(r.terms.variance_B), "", ""});
    table.add({"mean", num(r.mean), mc_cell(&McEstimate::mean), mc_cell(&McEstimate::mean_se)});
    table.add({"variance", num(r.variance), mc_cell(&McEstimate::variance), mc_cell(&McEstimate::variance_se)});
    table.add({"utility", num(r.utility), mc_cell(&McEstimate::utility), mc_cell(&McEstimate::utility_se)});
    ctx.write(table, "evaluate.csv");

    const MarkLaw& law = p.marks();
    const double z_hi = law.is_discrete() ? law.atoms().back().z : law.quantile(0.999);
    const Gradient G = gradient(contract, econ, b);
    CsvTable shape({"z", "phi", "G"});
    constexpr int kPoints = 200;
    for (int k = 0; k <= kPoints; ++k) {
        const double z = z_hi * k / kPoints;
        shape.add({num(z), num(contract(z)), num(G(z))});
    }
    ctx.write(shape, "contract_shape.csv");

    ctx.out << fmt::format("evaluate {} (T = {})\n", contract.to_spec(), econ.T);
    ctx.out << fmt::format("  {:<14}{:>24}{:>24}{:>24}\n", "term", "closed form", "monte carlo", "se");
    for (const auto& rr : table.rows()) {
        ctx.out << fmt::format("  {:<14}{:>24}{:>24}{:>24}\n", rr[0], rr[1], rr[2], rr[3]);
    }
    return kExitOk;
}

int cmd_optimize(Context& ctx, const Flags&) {
    const EconomicParams& econ = ctx.cfg.economic;
    const MomentBundle b = MomentBundle::compute(ctx.cfg.hawkes, econ.T);
    ThreePieceOptions opts;
    opts.region_grid = ctx.cfg.run.region_grid;
    const OptimalContractResult r = solve_three_piece(econ, b, opts);

    CsvTable table({"quantity", "value"});
    table.add({"a", num(r.a)});
    table.add({"b", num(r.b)});
    table.add({"slope", num(r.slope)});
    table.add({"slope_from_gap", num(r.slope_from_gap)});
    table.add({"C_star", num(r.C_star)});
    table.add({"utility", num(r.utility)});
    table.add({"residual_1", num(r.residuals[0])});
    table.add({"residual_2", num(r.residuals[1])});
    table.add({"residual_scale", num(r.residual_scale)});
    table.add({"h_gap", num(r.stats.h_gap)});
    table.add({"h_phi", num(r.stats.h_phi)});
    table.add({"cost_rate", num(r.stats.cost_rate)});
    table.add({"M_T", num(b.M_T())});
    table.add({"A_T", num(b.A_T())});
    table.add({"B_T", num(b.B_T())});
    table.add({"region_signs_ok", r.regions.ok() ? "1" : "0"});
    ctx.write(table, "optimize.csv");

    CsvTable shape({"z", "phi", "G"});
    for (std::size_t i = 0; i < r.regions.z.size(); ++i) {
        shape.add({num(r.regions.z[i]), num(r.contract(r.regions.z[i])), num(r.regions.g[i])});
    }
    ctx.write(shape, "optimal_contract.csv");

    ctx.out << fmt::format("optimal contract {}\n", r.contract.to_spec());
    for (const auto& rr : table.rows()) {
        ctx.out << fmt::format("  {:<18}{:>26}\n", rr[0], rr[1]);
    }
    if (!r.regions.ok()) {
        ctx.out << "gradient sign pattern check failed\n";
        return kExitGateFailure;
    }
    return kExitOk;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
            throw ConfigError("--lambda-grid: cannot parse '" + item + "' as a number");
        }
        out.push_back(v);
    }
    return out;
}

int cmd_sweep(Context& ctx, const Flags& flags) {
    const std::vector<double> grid = flags.lambda_grid ? parse_list(*flags.lambda_grid) : ctx.cfg.run.lambda_grid;
    if (grid.empty()) {
        throw ConfigError("sweep needs --lambda-grid <list> (or run.lambda_grid)");
    }
    const SweepResult s = poisson_limit_sweep(ctx.cfg.hawkes, ctx.cfg.economic, grid);

    CsvTable table({"Lambda", "lambda_bar", "gamma", "a", "b", "slope", "M_T", "h_phi", "cost", "ok", "error"});
    for (const auto& r : s.rows) {
        table.add({num(r.Lambda), num(r.lambda_bar), num(r.gamma), num(r.a), num(r.b), num(r.slope), num(r.M_T),
                   num(r.h_phi), num(r.cost), r.ok ? "1" : "0", r.error});
    }
    ctx.write(table, "sweep.csv");

    ctx.out << fmt::format("Poisson-limit sweep: lambda_P = {:.10g}, limit deductible = {:.10g}\n", s.lambda_P,
                           s.poisson_deductible);
    ctx.out << fmt::format("  {:>10}{:>14}{:>12}{:>14}{:>14}{:>14}{:>12}\n", "Lambda", "lambda_bar", "gamma", "a", "b",
                           "slope", "cost");
    for (const auto& r : s.rows) {
        if (r.ok) {
            ctx.out << fmt::format("  {:>10.4g}{:>14.8g}{:>12.6g}{:>14.8g}{:>14.8g}{:>14.10g}{:>12.6g}\n", r.Lambda,
                                   r.lambda_bar, r.gamma, r.a, r.b, r.slope, r.cost);
        } else {
            ctx.out << fmt::format("  {:>10.4g}  failed: {}\n", r.Lambda, r.error);
        }
    }
    ctx.out << fmt::format("  slope non-increasing: {}  a non-increasing: {}  b non-decreasing: {}  cost in band: {}\n",
                           s.slope_monotone, s.a_monotone, s.b_monotone, s.cost_in_band);
    ctx.out << fmt::format("  terminal slope - 1 = {:.3e}, max |M(T)/(lambda_P T) - 1| = {:.3e}\n",
                           s.terminal_slope_gap, s.max_M_rel_error);
    return kExitOk;
}

int cmd_validate(Context& ctx, const Flags& flags) {
    if (flags.seed) {
        ctx.cfg.run.seed = flags.seed;
    }
    require_seed(ctx, flags, "validate");
    const std::vector<Gate> gates = run_gates(ctx.cfg, ValidateOptions{flags.fast});
    CsvTable table({"gate", "observed", "threshold", "pass", "note"});
    bool all = true;
    for (const auto& g : gates) {
        table.add({g.name, num(g.observed), num(g.threshold), g.pass ? "1" : "0", g.note});
        all = all && g.pass;
    }
    ctx.write(table, "validate.csv");
    for (const auto& g : gates) {
        ctx.out << fmt::format("  [{}] {:<36}{:>14.6g}  (limit {:g})  {}\n", g.pass ? "PASS" : "FAIL", g.name,
                               g.observed, g.threshold, g.note);
    }
    ctx.out << (all ? "all gates passed\n" : "gate failure\n");
    return all ? kExitOk : kExitGateFailure;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reinsurance under self-exciting claims: moments, criterion, optimal contracts", "clustre"};
    app.require_subcommand(1);
    Flags flags;
    app.add_option("-c,--config", flags.config, "scenario YAML file")->required();
    app.add_option("-o,--output-dir", flags.output_dir, "output directory (overrides run.output_dir)");

    auto* simulate = app.add_subcommand("simulate", "simulate paths and compare counts with closed-form moments");
    simulate->add_option("--paths", flags.paths, "number of paths");
    simulate->add_option("--seed", flags.seed, "master seed");
    simulate->add_flag("--dump-events", flags.dump_events, "write every event to events.csv");

    auto* moments = app.add_subcommand("moments", "moment curves and the variance coefficients");
    moments->add_option("--grid", flags.grid, "number of time steps on [0, T]");

    auto* evaluate = app.add_subcommand("evaluate", "closed-form criterion of a contract");
    evaluate->add_option("--contract", flags.contract,
                         "zero | full | deductible:A | proportional:K | three_piece:A,B | tabulated:z/phi;...");
    evaluate->add_option("--paths", flags.paths, "add a Monte Carlo estimate with this many paths");
    evaluate->add_option("--seed", flags.seed, "master seed for --paths");

    auto* optimize = app.add_subcommand("optimize", "three-piece optimal contract");

    auto* sweep = app.add_subcommand("sweep", "Poisson-limit sweep over the impact coefficient");
    sweep->add_option("--lambda-grid", flags.lambda_grid, "comma-separated, strictly decreasing");

    auto* validate = app.add_subcommand("validate", "run the oracle suite; exit 1 on any failed gate");
    validate->add_flag("--fast", flags.fast, "fewer Monte Carlo paths");
    validate->add_option("--seed", flags.seed, "master seed (overrides run.seed)");

    for (auto* sub : {simulate, moments, evaluate, optimize, sweep, validate}) {
        sub->fallthrough();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        Context ctx{load_config(flags.config), {}, out};
        ctx.out_dir = flags.output_dir.empty() ? ctx.cfg.run.output_dir : fs::path(flags.output_dir);
        fs::create_directories(ctx.out_dir);

        if (simulate->parsed()) {
            return cmd_simulate(ctx, flags);
        }
        if (moments->parsed()) {
            return cmd_moments(ctx, flags);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(ctx, flags);
        }
        if (optimize->parsed()) {
            return cmd_optimize(ctx, flags);
        }
        if (sweep->parsed()) {
            return cmd_sweep(ctx, flags);
        }
        return cmd_validate(ctx, flags);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const HypothesisViolation& e) {
        err << "hypothesis violated: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NoBracket& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitGateFailure;
    } catch (const ConvergenceError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitGateFailure;
    } catch (const Error& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitGateFailure;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args, std::cout, std::cerr);
}

} // namespace clustre::cli
