#include "clustre/optimizer.hpp"

#include "clustre/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

namespace clustre {
namespace {

constexpr int kRootDigits = std::numeric_limits<double>::digits - 3;

struct LinearProblem {
    const MarkLaw& law;
    ImpactSpec impact;
    double Lambda;
    double M;
    double A;
    double B;
    double cost_gap;  // c T - M
    double gamma;
    double c;
};

struct ShapeEval {
    double b;
    double slope;
    double C_star;
    ContractStats stats;
};

ContractStats three_piece_stats(const LinearProblem& p, double a, double b) {
    return stats(Contract::three_piece(a, b), p.law, p.impact, p.c);
}

double intercept(const LinearProblem& p, const ContractStats& s) {
    return (p.cost_gap + 2.0 * p.gamma * p.A * s.h_gap + p.gamma * p.B * s.h_f_gap) / (2.0 * p.gamma * p.M);
}

// For fixed a, the unique b in (a, inf) solving E1. In terms of D = b - a,
//   F(D) = Lambda (-H[phi - I]) D - (2M/B) a
// is increasing with F'(D) = Lambda (int_0^a z dTheta + a Theta([a, a + D))).
double solve_upper_threshold(const LinearProblem& p, double a) {
    const double target = 2.0 * p.M / p.B * a;
    const double head = p.law.partial_moment(1, 0.0, a);
    auto value = [&](double D) { return p.Lambda * -three_piece_stats(p, a, a + D).h_gap * D - target; };
    auto value_and_slope = [&](double D) {
        return std::make_pair(value(D), p.Lambda * (head + a * p.law.partial_moment(0, a, a + D)));
    };

    const double d_lo = std::max(a * 1e-13, std::numeric_limits<double>::min());
    if (value(d_lo) >= 0.0) {
        return a + d_lo;
    }
    double d_hi = std::max(a, theta_bar(p.law));
    int doublings = 0;
    while (value(d_hi) <= 0.0) {
        d_hi *= 2.0;
        if (++doublings > 1000 || !std::isfinite(d_hi)) {
            throw NoBracket("no upper threshold b found for a = " + std::to_string(a));
        }
    }
    std::uintmax_t max_iter = 200;
    double D = 0.0;
    try {
        D = boost::math::tools::newton_raphson_iterate(value_and_slope, 0.5 * (d_lo + d_hi), d_lo, d_hi, kRootDigits,
                                                       max_iter);
    } catch (const std::exception& e) {
        throw ConvergenceError(std::string("Newton solve for b failed: ") + e.what());
    }
    return a + D;
}

ShapeEval evaluate_shape(const LinearProblem& p, double a) {
    ShapeEval out{};
    out.b = solve_upper_threshold(p, a);
    out.slope = out.b / (out.b - a);
    out.stats = three_piece_stats(p, a, out.b);
    out.C_star = intercept(p, out.stats);
    return out;
}

RegionReport region_report(const Gradient& g, double a, double b, double z_hi, std::size_t n, double rel_tol) {
    RegionReport r;
    r.z.reserve(n);
    r.g.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const double z = z_hi * static_cast<double>(i) / static_cast<double>(n);
        r.z.push_back(z);
        r.g.push_back(g(z));
        r.scale = std::max(r.scale, std::abs(r.g.back()));
    }
    r.tolerance = rel_tol * std::max(r.scale, 1.0);
    r.no_cover_negative = r.affine_zero = r.full_cover_positive = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = r.z[i];
        const double v = r.g[i];
        if (z < a) {
            r.no_cover_negative = r.no_cover_negative && (v < 0.0 || std::abs(v) <= r.tolerance);
        } else if (z <= b) {
            r.max_abs_affine = std::max(r.max_abs_affine, std::abs(v));
            r.affine_zero = r.affine_zero && std::abs(v) <= r.tolerance;
        } else {
            r.full_cover_positive = r.full_cover_positive && (v > 0.0 || std::abs(v) <= r.tolerance);
        }
    }
    return r;
}

void check_horizon(const EconomicParams& econ, const MomentBundle& moments) {
    econ.validate();
    if (econ.T != moments.horizon()) {
        throw InvalidArgument("economic horizon does not match the moment bundle horizon");
    }
}

} // namespace

OptimalContractResult solve_three_piece(const EconomicParams& econ, const MomentBundle& moments,
                                        const ThreePieceOptions& options) {
    check_horizon(econ, moments);
    const auto& params = moments.params();
    const auto& impact = params.impact();
    if (impact.kind() != ImpactSpec::Kind::Linear || !(impact.value() > 0.0)) {
        throw HypothesisViolation("three-piece optimum requires a linear impact f(z) = Lambda z with Lambda > 0");
    }
    if (!params.marks().has_unbounded_support()) {
        throw HypothesisViolation("three-piece optimum requires marks with unbounded support; use qp_oracle for "
                                  "discrete laws");
    }
    const double M = moments.M_T();
    if (!three_piece_applicable(econ, moments)) {
        std::ostringstream os;
        os.precision(10);
        os << "hypothesis c T - M(T) > 0 violated: c T = " << econ.c * econ.T << ", M(T) = " << M;
        throw HypothesisViolation(os.str());
    }

    const LinearProblem p{params.marks(), impact, impact.value(), M, moments.A_T(), moments.B_T(),
                          econ.c * econ.T - M, econ.gamma, econ.c};

    auto residual2 = [&](double a) {
        const ShapeEval s = evaluate_shape(p, a);
        return s.slope * a - s.C_star;
    };

    // slope > 1 and C* <= (cT - M + 2 gamma max(0, -A) theta_bar) / (2 gamma M), so E2 is positive above that bound.
    const double theta = theta_bar(params.marks());
    double a_hi = (p.cost_gap + 2.0 * p.gamma * std::max(0.0, -p.A) * theta) / (2.0 * p.gamma * M);
    a_hi *= 1.0 + 1e-9;
    double a_lo = a_hi * 1e-9;
    while (residual2(a_lo) >= 0.0) {
        a_lo *= 1e-3;
        if (a_lo < 1e-250) {
            throw NoBracket("no sign change of the intercept equation on (0, a_max]");
        }
    }
    if (!(residual2(a_hi) > 0.0)) {
        throw NoBracket("intercept equation is not positive at the analytic upper bound a_max");
    }

    std::uintmax_t max_iter = 400;
    std::pair<double, double> bracket;
    try {
        bracket = boost::math::tools::bisect(residual2, a_lo, a_hi, boost::math::tools::eps_tolerance<double>(kRootDigits),
                                             max_iter);
    } catch (const std::exception& e) {
        throw ConvergenceError(std::string("bisection on a failed: ") + e.what());
    }
    const double a = 0.5 * (bracket.first + bracket.second);
    const ShapeEval shape = evaluate_shape(p, a);

    OptimalContractResult r;
    r.a = a;
    r.b = shape.b;
    r.contract = Contract::three_piece(a, shape.b);
    r.slope = shape.slope;
    r.slope_from_gap = 1.0 - p.Lambda * p.B / (2.0 * M) * shape.stats.h_gap;
    r.C_star = shape.C_star;
    r.stats = shape.stats;
    r.residual_scale = std::max(1.0, 2.0 * M / p.B);
    r.residuals[0] = p.Lambda * -shape.stats.h_gap - 2.0 * M / p.B * a / (shape.b - a);
    r.residuals[1] = shape.slope * a - shape.C_star;
    r.report = utility_from_stats(shape.stats, econ, moments);
    r.utility = r.report.utility;
    if (options.region_grid > 0) {
        const double z_hi = std::max(1.5 * shape.b, params.marks().quantile(0.999));
        r.regions = region_report(gradient(r.contract, econ, moments), a, shape.b, z_hi, options.region_grid,
                                  options.region_tolerance);
    }
    return r;
}

Contract QPOracleResult::as_contract() const {
    std::vector<Knot> knots{{0.0, 0.0}};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] > 0.0) {
            knots.push_back({grid[i], std::clamp(phi[i], 0.0, grid[i])});
        }
    }
    return Contract::tabulated(std::move(knots));
}

QPOracleResult qp_oracle(const EconomicParams& econ, const MomentBundle& moments, const MarkLaw& law,
                         const ImpactSpec& impact, const QpOptions& options) {
    check_horizon(econ, moments);
    if (!law.is_discrete()) {
        throw InvalidArgument("qp_oracle needs a discrete law; discretize continuous laws first");
    }
    const auto atoms = law.atoms();
    const std::size_t n = atoms.size();
    if (n > 10'000) {
        throw InvalidArgument("qp_oracle supports at most 1e4 atoms");
    }
    std::vector<double> z(n), w(n), f(n);
    double W = 0.0, Sf = 0.0, Sff = 0.0, z_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = atoms[i].z;
        w[i] = atoms[i].weight;
        f[i] = impact(z[i]);
        W += w[i];
        Sf += w[i] * f[i];
        Sff += w[i] * f[i] * f[i];
        z_max = std::max(z_max, z[i]);
    }
    const double M = moments.M_T();
    const double A = moments.A_T();
    const double B = moments.B_T();
    const double g = econ.gamma;
    const double lin = M - econ.c * econ.T;

    QPOracleResult out;

    // -Hessian / (2 gamma) in L2(w) is M I + P C P^T with P = [1, f], C = [[A, B/2], [B/2, 0]];
    // its nonzero spectrum beyond M is that of C * Gram(P).
    {
        const double m00 = A * W + 0.5 * B * Sf;
        const double m01 = A * Sf + 0.5 * B * Sff;
        const double m10 = 0.5 * B * W;
        const double m11 = 0.5 * B * Sf;
        const double tr = m00 + m11;
        const double det = m00 * m11 - m01 * m10;
        const double disc = std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
        out.min_curvature = M + std::min(0.0, 0.5 * tr - disc);
        out.concave = out.min_curvature >= -1e-12 * M;
        out.warning = !out.concave;
    }
    const double lipschitz = 2.0 * g * (M + std::abs(A) * W + std::abs(B) * std::sqrt(W * Sff));

    struct State {
        std::vector<double> h;  // phi - z, in [-z, 0]
        double H1 = 0.0, H2 = 0.0, Hf = 0.0;
    };
    auto refresh = [&](State& s) {
        s.H1 = s.H2 = s.Hf = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s.H1 += w[i] * s.h[i];
            s.H2 += w[i] * s.h[i] * s.h[i];
            s.Hf += w[i] * f[i] * s.h[i];
        }
    };
    auto contract_part = [&](const State& s) {
        return s.H1 * lin - g * M * s.H2 - g * A * s.H1 * s.H1 - g * B * s.H1 * s.Hf;
    };
    auto grad = [&](const State& s, std::vector<double>& G) {
        const double k = lin - 2.0 * g * A * s.H1 - g * B * s.Hf;
        for (std::size_t i = 0; i < n; ++i) {
            G[i] = k - g * B * s.H1 * f[i] - 2.0 * g * M * s.h[i];
        }
    };
    auto violation = [&](const State& s, const std::vector<double>& G, std::size_t i) {
        if (s.h[i] <= -z[i]) {
            return std::max(G[i], 0.0);  // phi = 0 needs G <= 0
        }
        if (s.h[i] >= 0.0) {
            return std::max(-G[i], 0.0);  // phi = z needs G >= 0
        }
        return std::abs(G[i]);
    };

    std::vector<double> G(n);
    double scale = 1.0;
    std::vector<State> starts;
    {
        State zero{std::vector<double>(n)}, full{std::vector<double>(n, 0.0)}, ded{std::vector<double>(n)};
        const double d = std::max(lin < 0.0 ? -lin / (2.0 * g * M) : 0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            zero.h[i] = -z[i];
            ded.h[i] = -std::min(z[i], d);
        }
        starts = {zero, full, ded};
        for (auto& s : starts) {
            refresh(s);
            grad(s, G);
            for (double v : G) {
                scale = std::max(scale, std::abs(v));
            }
        }
    }
    const double tol = options.tolerance * scale;

    std::vector<double> trial(n);
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    double best_residual = 0.0;
    bool best_converged = false;
    std::size_t total_iterations = 0;

    for (std::size_t si = 0; si < starts.size(); ++si) {
        State& s = starts[si];
        double step = 1.0 / lipschitz;
        double residual = std::numeric_limits<double>::infinity();
        bool converged = false;
        for (std::size_t it = 0; it < options.max_iterations; ++it) {
            ++total_iterations;
            grad(s, G);
            residual = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                residual = std::max(residual, violation(s, G, i));
            }
            if (residual <= tol) {
                converged = true;
                break;
            }
            step = std::min(2.0 * step, 64.0 / lipschitz);
            bool accepted = false;
            while (step > 1e-12 / lipschitz) {
                double dH1 = 0.0, dH2 = 0.0, dHf = 0.0, directional = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    trial[i] = std::clamp(s.h[i] + step * G[i], -z[i], 0.0);
                    const double d = trial[i] - s.h[i];
                    dH1 += w[i] * d;
                    dH2 += w[i] * d * (2.0 * s.h[i] + d);
                    dHf += w[i] * f[i] * d;
                    directional += w[i] * G[i] * d;
                }
                // Exact change of the quadratic, free of cancellation against the constant part.
                const double gain = dH1 * lin - g * M * dH2 - g * A * dH1 * (2.0 * s.H1 + dH1) -
                                    g * B * (dH1 * s.Hf + s.H1 * dHf + dH1 * dHf);
                if (gain >= 1e-4 * directional) {
                    s.h.swap(trial);
                    refresh(s);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                break;
            }
        }
        const double value = contract_part(s);
        out.start_utilities.push_back(value);
        if (value > best_value) {
            best_value = value;
            best = si;
            best_residual = residual;
            best_converged = converged;
        }
    }

    const State& s = starts[best];
    out.grid = z;
    out.weights = w;
    out.phi.resize(n);
    out.active.resize(n);
    double h_phi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.phi[i] = z[i] + s.h[i];
        h_phi += w[i] * out.phi[i];
        out.active[i] = s.h[i] <= -z[i] ? BoxState::Lower : (s.h[i] >= 0.0 ? BoxState::Upper : BoxState::Interior);
    }
    out.stats = ContractStats{s.H1, s.H2, s.Hf, h_phi, econ.c * h_phi};
    out.utility = utility_from_stats(out.stats, econ, moments).utility;
    for (auto& u : out.start_utilities) {
        u += out.utility - best_value;
    }
    out.kkt_residual = best_residual / scale;
    out.converged = best_converged;
    out.iterations = total_iterations;
    return out;
}

SweepResult poisson_limit_sweep(const HawkesParams& base, const EconomicParams& econ, std::span<const double> lambda_grid,
                                const SweepOptions& options) {
    econ.validate();
    for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] < lambda_grid[i - 1])) {
            throw InvalidArgument("sweep Lambda grid must be strictly decreasing");
        }
    }
    const MarkLaw& law = base.marks();
    const double T = econ.T;
    SweepResult out;
    out.lambda_P = MomentBundle::compute(base, T).M_T() / T;
    if (!(econ.c > out.lambda_P)) {
        throw HypothesisViolation("Poisson-limit sweep needs c > lambda_P so that c T - M(T) > 0 on every row");
    }
    out.poisson_deductible = (econ.c - out.lambda_P) / (2.0 * econ.gamma * out.lambda_P);
    out.target_h_phi = law.partial_moment(1, out.poisson_deductible, std::numeric_limits<double>::infinity()) -
                       out.poisson_deductible *
                           law.partial_moment(0, out.poisson_deductible, std::numeric_limits<double>::infinity());

    ThreePieceOptions solve_options;
    solve_options.region_grid = 0;

    for (const double Lambda : lambda_grid) {
        SweepRow row;
        row.Lambda = Lambda;
        try {
            const auto impact = ImpactSpec::linear(Lambda);
            // M(T) is linear in lambda0 = lambda_bar, so one unit solve fixes the scale.
            const HawkesParams unit(1.0, 1.0, base.beta(), impact, law);
            const double level = out.lambda_P * T / MomentBundle::compute(unit, T).M_T();
            const HawkesParams params(level, level, base.beta(), impact, law);
            const MomentBundle moments = MomentBundle::compute(params, T);

            EconomicParams e = econ;
            auto solve_with = [&](double gamma) {
                e.gamma = gamma;
                return solve_three_piece(e, moments, solve_options);
            };
            if (options.calibrate_cost) {
                auto excess = [&](double log_gamma) { return solve_with(std::exp(log_gamma)).stats.h_phi - out.target_h_phi; };
                double lo = std::log(econ.gamma);
                double hi = lo;
                const double f0 = excess(lo);
                int expansions = 0;
                if (f0 < 0.0) {
                    while (excess(hi) < 0.0) {
                        lo = hi;
                        hi += 1.0;
                        if (++expansions > 60) {
                            throw NoBracket("cost calibration: no gamma reaches the target H[phi*]");
                        }
                    }
                } else {
                    while (excess(lo) > 0.0) {
                        hi = lo;
                        lo -= 1.0;
                        if (++expansions > 60) {
                            throw NoBracket("cost calibration: no gamma reaches the target H[phi*]");
                        }
                    }
                }
                std::uintmax_t max_iter = 200;
                const auto br = boost::math::tools::bisect(excess, lo, hi,
                                                           boost::math::tools::eps_tolerance<double>(kRootDigits), max_iter);
                e.gamma = std::exp(0.5 * (br.first + br.second));
            }
            const OptimalContractResult opt = solve_with(e.gamma);
            row.lambda_bar = level;
            row.gamma = e.gamma;
            row.a = opt.a;
            row.b = opt.b;
            row.slope = opt.slope;
            row.M_T = moments.M_T();
            row.h_phi = opt.stats.h_phi;
            row.cost = opt.stats.cost_rate;
            row.ok = true;
        } catch (const std::exception& ex) {
            row.error = ex.what();
        }
        out.rows.push_back(row);
    }

    const bool all_ok = std::all_of(out.rows.begin(), out.rows.end(), [](const SweepRow& r) { return r.ok; });
    out.slope_monotone = out.a_monotone = out.b_monotone = out.cost_in_band = all_ok && !out.rows.empty();
    const double target_cost = econ.c * out.target_h_phi;
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        const auto& r = out.rows[i];
        if (!r.ok) {
            continue;
        }
        out.max_M_rel_error = std::max(out.max_M_rel_error, std::abs(r.M_T / (out.lambda_P * T) - 1.0));
        out.cost_in_band = out.cost_in_band && std::abs(r.cost / target_cost - 1.0) <= options.cost_band;
        if (i > 0 && out.rows[i - 1].ok) {
            const auto& prev = out.rows[i - 1];
            out.slope_monotone = out.slope_monotone && r.slope <= prev.slope;
            out.a_monotone = out.a_monotone && r.a <= prev.a;
            out.b_monotone = out.b_monotone && r.b >= prev.b;
        }
    }
    if (!out.rows.empty() && out.rows.back().ok) {
        out.terminal_slope_gap = out.rows.back().slope - 1.0;
    }
    return out;
}

} // namespace clustre
