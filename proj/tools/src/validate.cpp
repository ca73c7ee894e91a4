#include "clustre/cli/validate.hpp"

#include "clustre/errors.hpp"
#include "clustre/optimizer.hpp"
#include "clustre/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace clustre::cli {
namespace {

double rel_diff(double x, double ref) { return std::abs(x - ref) / std::max(std::abs(ref), 1e-300); }

Gate ratio_gate(std::string name, double observed, double threshold, std::string note = {}) {
    return Gate{std::move(name), observed, threshold, observed <= threshold, std::move(note)};
}

void moment_gates(const HawkesParams& params, double T, std::vector<Gate>& out) {
    const MomentBundle b = MomentBundle::compute(params, T);
    const auto ode = reference::moments_ode(params, T);
    double worst = 0.0;
    // A is a difference against M^2 (and exactly 0 for constant intensity), so M^2 sets its scale.
    const double a_scale = std::max(std::abs(b.A_T()), b.M_T() * b.M_T());
    worst = std::max({worst, rel_diff(ode.M, b.M_T()), rel_diff(ode.M2, b.M2_T()),
                      std::abs(ode.A - b.A_T()) / a_scale, std::abs(b.A_T_literal() - b.A_T()) / a_scale,
                      rel_diff(ode.B, b.B_T())});
    out.push_back(ratio_gate("moments_ode_vs_closed_form", worst, 1e-7, "max relative difference over M, M2, A, B"));
    if (params.is_poisson_branch()) {
        return;
    }
    const double q = std::max({std::abs(reference::coefficient_A_quadrature(b) - b.A_T()) / a_scale,
                               rel_diff(reference::coefficient_B_quadrature(b), b.B_T()),
                               rel_diff(reference::cumulative_mean_quadrature(b), b.M_T()),
                               rel_diff(reference::cumulative_second_moment_quadrature(b), b.M2_T())});
    out.push_back(ratio_gate("moments_quadrature_vs_closed_form", q, 1e-7, "max relative difference over M, M2, A, B"));
}

std::vector<std::pair<std::string, Contract>> test_contracts(const ScenarioConfig& cfg) {
    const MarkLaw& law = cfg.hawkes.marks();
    const double median = law.quantile(0.5);
    std::vector<std::pair<std::string, Contract>> out{
        {"deductible", Contract::deductible(median)},
        {"proportional", Contract::proportional(0.5)},
        {"three_piece", Contract::three_piece(0.5 * median, law.quantile(0.9))},
    };
    return out;
}

void monte_carlo_gates(const ScenarioConfig& cfg, std::size_t n_paths, std::vector<Gate>& out) {
    const HawkesParams& p = cfg.hawkes;
    const double T = cfg.economic.T;
    const MomentBundle b = MomentBundle::compute(p, T);
    const auto contracts = test_contracts(cfg);
    std::vector<RealFunction> hs;
    for (const auto& [name, c] : contracts) {
        hs.emplace_back([c](double z) { return c(z) - z; });
    }
    const std::uint64_t seed = *cfg.run.seed;
    const auto mc = mc_gap_moments(p, T, hs, n_paths, seed);
    for (std::size_t i = 0; i < contracts.size(); ++i) {
        const ContractStats s = stats(contracts[i].second, p.marks(), p.impact(), cfg.economic.c);
        const double mean = s.h_gap * b.M_T();
        const double second =
            s.h_gap * s.h_gap * (b.A_T() + b.M_T() * b.M_T()) + s.h_gap * s.h_f_gap * b.B_T() + s.h_gap_sq * b.M_T();
        const auto& m = mc[i];
        out.push_back(ratio_gate("mc_mean_" + contracts[i].first, std::abs(m.mean - mean) / m.mean_se, 3.0,
                                 "|MC - H[phi-I] M(T)| / SE"));
        out.push_back(ratio_gate("mc_second_moment_" + contracts[i].first,
                                 std::abs(m.second_moment - second) / m.second_moment_se, 3.0,
                                 "|MC - second-moment formula| / SE"));
    }
    const Contract& c = contracts.front().second;
    const McEstimate est = mc_estimate(c, cfg.economic, p, n_paths, seed + 1);
    const double u = utility_closed_form(c, cfg.economic, b).utility;
    out.push_back(ratio_gate("mc_utility_deductible", std::abs(est.utility - u) / est.utility_se, 3.0,
                             "|MC utility - closed form| / SE"));
}

// Finite differences of U on the discretised law against the integral of G g.
void gradient_gates(const ScenarioConfig& cfg, const MarkLaw& grid_law, std::vector<Gate>& out) {
    const HawkesParams dp(cfg.hawkes.lambda0(), cfg.hawkes.lambda_bar(), cfg.hawkes.beta(), cfg.hawkes.impact(),
                          grid_law);
    const MomentBundle b = MomentBundle::compute(dp, cfg.economic.T);
    const auto atoms = grid_law.atoms();
    Engine rng(path_seed(*cfg.run.seed, 0x6772616469656e74ULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr double eps = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Knot> base{{0.0, 0.0}};
        std::vector<Knot> up{{0.0, 0.0}};
        std::vector<Knot> down{{0.0, 0.0}};
        std::vector<double> g(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const double z = atoms[i].z;
            const double phi = (0.05 + 0.9 * unit(rng)) * z;
            g[i] = (2.0 * unit(rng) - 1.0) * z;
            base.push_back({z, phi});
            up.push_back({z, phi + eps * g[i]});
            down.push_back({z, phi - eps * g[i]});
        }
        const Contract phi = Contract::tabulated(base);
        const double fd = (utility_closed_form(Contract::tabulated(up), cfg.economic, b).utility -
                           utility_closed_form(Contract::tabulated(down), cfg.economic, b).utility) /
                          (2.0 * eps);
        const Gradient G = gradient(phi, cfg.economic, b);
        double exact = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            exact += atoms[i].weight * G(atoms[i].z) * g[i];
        }
        worst = std::max(worst, rel_diff(fd, exact));
    }
    out.push_back(ratio_gate("gradient_finite_difference", worst, 1e-4, "max relative error over 10 random (phi, g)"));
}

void optimizer_gates(const ScenarioConfig& cfg, const MarkLaw& grid_law, double spacing, std::vector<Gate>& out) {
    const HawkesParams& p = cfg.hawkes;
    const MomentBundle b = MomentBundle::compute(p, cfg.economic.T);
    const bool applicable = p.impact().kind() == ImpactSpec::Kind::Linear && p.impact().value() > 0.0 &&
                            p.marks().has_unbounded_support() && three_piece_applicable(cfg.economic, b);
    const QPOracleResult qp = qp_oracle(cfg.economic, b, grid_law, p.impact());
    out.push_back(ratio_gate("qp_kkt_residual", qp.kkt_residual, 1e-9,
                             qp.concave ? "relative to the gradient scale" : "non-concave quadratic, best of starts"));
    if (p.is_poisson_branch()) {
        // Separable per atom: phi(z) = (z - d)+ with d = (cT - M)/(2 gamma M).
        const double d = std::max(0.0, (cfg.economic.c * cfg.economic.T - b.M_T()) / (2.0 * cfg.economic.gamma * b.M_T()));
        double sup = 0.0;
        for (std::size_t i = 0; i < qp.grid.size(); ++i) {
            sup = std::max(sup, std::abs(qp.phi[i] - std::max(qp.grid[i] - d, 0.0)));
        }
        out.push_back(ratio_gate("qp_vs_poisson_deductible", sup / spacing, 2.0, "sup |phi_qp - (z - d)+| in grid spacings"));
    }
    if (!applicable) {
        out.push_back(Gate{"three_piece_vs_qp", 0.0, 0.0, true, "skipped: three-piece hypotheses do not hold"});
        return;
    }
    ThreePieceOptions opts;
    opts.region_grid = cfg.run.region_grid;
    const OptimalContractResult opt = solve_three_piece(cfg.economic, b, opts);
    const double scale = opt.residual_scale;
    out.push_back(ratio_gate("three_piece_residuals",
                             std::max(std::abs(opt.residuals[0]), std::abs(opt.residuals[1])) / scale, 1e-9,
                             "scaled by max(1, 2M/B)"));
    out.push_back(Gate{"three_piece_slope_above_one", opt.slope, 1.0, opt.slope > 1.0, "slope b/(b-a)"});
    out.push_back(Gate{"three_piece_sign_pattern", opt.regions.max_abs_affine / std::max(opt.regions.scale, 1.0), 1e-7,
                       opt.regions.ok(), "G(phi*) is (-, 0, +) on the region grid"});
    double sup = 0.0;
    for (std::size_t i = 0; i < qp.grid.size(); ++i) {
        sup = std::max(sup, std::abs(qp.phi[i] - opt.contract(qp.grid[i])));
    }
    out.push_back(ratio_gate("three_piece_vs_qp_phi", sup / spacing, 2.0, "sup |phi_qp - phi*| in grid spacings"));
    out.push_back(ratio_gate("three_piece_vs_qp_utility", rel_diff(qp.utility, opt.utility), 1e-3,
                             "relative utility difference"));
}

} // namespace

double discretisation_cap(const ScenarioConfig& config) {
    if (config.run.qp_z_max > 0.0) {
        return config.run.qp_z_max;
    }
    const MarkLaw& law = config.hawkes.marks();
    return law.is_discrete() ? law.atoms().back().z : law.quantile(1.0 - 1e-12);
}

std::vector<Gate> run_gates(const ScenarioConfig& config, const ValidateOptions& options) {
    if (!config.run.seed) {
        throw InvalidArgument("validate needs run.seed (or --seed)");
    }
    std::vector<Gate> out;
    moment_gates(config.hawkes, config.economic.T, out);
    const std::size_t n_paths = options.fast ? config.run.validate_fast_paths : config.run.validate_paths;
    monte_carlo_gates(config, n_paths, out);

    const MarkLaw& law = config.hawkes.marks();
    const double cap = discretisation_cap(config);
    const MarkLaw grid_law = law.is_discrete() ? law : discretize(law, config.run.qp_atoms, cap);
    const double spacing = cap / static_cast<double>(config.run.qp_atoms);
    gradient_gates(config, grid_law, out);
    optimizer_gates(config, grid_law, spacing, out);
    return out;
}

} // namespace clustre::cli
