#include "clustre/errors.hpp"
#include "clustre/optimizer.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace clustre {
namespace {

using testing::rel_err;

struct Instance {
    HawkesParams params;
    EconomicParams econ;
    double z_max;  // discretisation cap for the oracle
};

std::vector<Instance> instances() {
    return {
        {HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0)), {10, 0.3, 2.0, 0.5, 1.0}, 30.0},
        {HawkesParams(1.5, 1.0, 3.0, ImpactSpec::linear(2.0), MarkLaw::exponential(1.0)), {10, 0.3, 2.5, 0.3, 2.0}, 30.0},
        {HawkesParams(2.0, 1.0, 1.5, ImpactSpec::linear(0.5), MarkLaw::exponential(2.0)), {10, 0.3, 3.0, 0.2, 5.0}, 60.0},
        {HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::lognormal(0.0, 0.5)), {10, 0.3, 2.2, 0.5, 1.0}, 15.0},
    };
}

TEST(ThreePiece, SolvesBothEquations) {
    for (const auto& in : instances()) {
        const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
        const OptimalContractResult r = solve_three_piece(in.econ, b);
        SCOPED_TRACE(in.params.marks().describe());
        EXPECT_GT(r.a, 0.0);
        EXPECT_GT(r.b, r.a);
        EXPECT_TRUE(std::isfinite(r.b));
        EXPECT_LE(std::abs(r.residuals[0]), 1e-9 * r.residual_scale);
        EXPECT_LE(std::abs(r.residuals[1]), 1e-9 * r.residual_scale);
        EXPECT_GT(r.slope, 1.0);
        EXPECT_LE(rel_err(r.slope, r.slope_from_gap), 1e-8);
        EXPECT_LE(rel_err(r.C_star, r.slope * r.a), 1e-9);
        EXPECT_EQ(r.contract.kind(), Contract::Kind::ThreePiece);
        EXPECT_TRUE(r.regions.ok());
        EXPECT_EQ(r.regions.z.size(), 1000u);
    }
}

TEST(ThreePiece, ResidualsRecomputedIndependently) {
    // E1 and E2 evaluated with quadrature on the density instead of partial moments.
    const auto in = instances().front();
    const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
    const OptimalContractResult r = solve_three_piece(in.econ, b);
    const double lambda = in.params.impact().value();
    const double a = r.a, bb = r.b;
    auto phi = [&](double z) { return std::min(z, bb / (bb - a) * std::max(z - a, 0.0)); };
    auto dens = [](double z) { return std::exp(-z); };
    const double lhs1 = lambda * (testing::integrate([&](double z) { return (z - phi(z)) * dens(z); }, 0.0, a) +
                                  testing::integrate([&](double z) { return (z - phi(z)) * dens(z); }, a, bb));
    EXPECT_NEAR(lhs1, 2.0 * b.M_T() / b.B_T() * a / (bb - a), 1e-9 * r.residual_scale);
    auto gap = [&](double z) { return (phi(z) - z) * dens(z); };
    const double h_gap = testing::integrate(gap, 0.0, a) + testing::integrate(gap, a, bb);
    const double h_f_gap = lambda * (testing::integrate([&](double z) { return z * gap(z); }, 0.0, a) +
                                     testing::integrate([&](double z) { return z * gap(z); }, a, bb));
    const auto& e = in.econ;
    const double c_star = (e.c * e.T - b.M_T() + 2.0 * e.gamma * b.A_T() * h_gap + e.gamma * b.B_T() * h_f_gap) /
                          (2.0 * e.gamma * b.M_T());
    EXPECT_NEAR(bb / (bb - a) * a, c_star, 1e-9 * r.residual_scale);
}

TEST(ThreePiece, RejectsViolatedHypotheses) {
    const MarkLaw exp1 = MarkLaw::exponential(1.0);
    const EconomicParams e{10, 0.3, 2.0, 0.5, 1.0};
    const auto solve = [&](const HawkesParams& p, const EconomicParams& econ) {
        return solve_three_piece(econ, MomentBundle::compute(p, econ.T));
    };
    EXPECT_THROW((void)solve(HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(0.0), exp1), e), HypothesisViolation);
    EXPECT_THROW((void)solve(HawkesParams(1.0, 1.0, 2.0, ImpactSpec::constant(0.5), exp1), e), HypothesisViolation);
    EXPECT_THROW((void)solve(HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(0.5), MarkLaw::discrete({{1.0, 1.0}})), e),
                 HypothesisViolation);
    const EconomicParams cheap{10, 0.3, 1.2, 0.5, 1.0};
    try {
        (void)solve(HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), exp1), cheap);
        FAIL() << "expected HypothesisViolation";
    } catch (const HypothesisViolation& ex) {
        EXPECT_NE(std::string(ex.what()).find("c T - M(T) > 0"), std::string::npos);
    }
}

TEST(ThreePiece, DominatesClassicContracts) {
    for (const auto& in : instances()) {
        const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
        const OptimalContractResult r = solve_three_piece(in.econ, b);
        auto u = [&](const Contract& c) { return utility_closed_form(c, in.econ, b).utility; };
        EXPECT_GE(r.utility, u(Contract::zero()) - 1e-9);
        EXPECT_GE(r.utility, u(Contract::full()) - 1e-9);
        for (double a = 0.0; a <= 6.0; a += 0.05) {
            EXPECT_GE(r.utility, u(Contract::deductible(a)) - 1e-9) << a;
        }
        for (double k = 0.0; k <= 1.0; k += 0.02) {
            EXPECT_GE(r.utility, u(Contract::proportional(k)) - 1e-9) << k;
        }
        for (double da : {-1e-3, 1e-3}) {
            for (double db : {-1e-3, 1e-3}) {
                EXPECT_GE(r.utility, u(Contract::three_piece(r.a + da, r.b + db)) - 1e-12);
            }
        }
    }
}

TEST(ThreePiece, NeitherZeroNorFull) {
    for (const auto& in : instances()) {
        const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
        const OptimalContractResult r = solve_three_piece(in.econ, b);
        EXPECT_GT(r.stats.h_phi, 0.0);
        EXPECT_LT(r.stats.h_phi, theta_bar(in.params.marks()));
    }
}

TEST(QpOracle, AgreesWithTheThreePieceSolution) {
    for (const auto& in : instances()) {
        const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
        const OptimalContractResult r = solve_three_piece(in.econ, b);
        const MarkLaw grid = discretize(in.params.marks(), 400, in.z_max);
        const QPOracleResult q = qp_oracle(in.econ, b, grid, in.params.impact());
        SCOPED_TRACE(in.params.marks().describe());
        ASSERT_TRUE(q.converged);
        EXPECT_TRUE(q.concave);
        double sup = 0.0;
        for (std::size_t i = 0; i < q.grid.size(); ++i) {
            sup = std::max(sup, std::abs(q.phi[i] - r.contract(q.grid[i])));
        }
        EXPECT_LE(sup, 2.0 * in.z_max / 400.0);
        EXPECT_LE(rel_err(q.utility, r.utility), 1e-3);
        // On its own law the oracle can only do better than the three-piece shape.
        const double u_shape = utility_from_stats(stats(r.contract, grid, in.params.impact(), in.econ.c), in.econ, b).utility;
        EXPECT_GE(q.utility, u_shape - 1e-12);
    }
}

TEST(QpOracle, BoxConstraintsAndActiveSets) {
    const auto in = instances()[0];
    const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
    const QPOracleResult q = qp_oracle(in.econ, b, discretize(in.params.marks(), 200, in.z_max), in.params.impact());
    std::size_t lower = 0, upper = 0, interior = 0;
    for (std::size_t i = 0; i < q.grid.size(); ++i) {
        EXPECT_GE(q.phi[i], 0.0);
        EXPECT_LE(q.phi[i], q.grid[i]);
        switch (q.active[i]) {
        case BoxState::Lower:
            EXPECT_EQ(q.phi[i], 0.0);
            ++lower;
            break;
        case BoxState::Upper:
            EXPECT_EQ(q.phi[i], q.grid[i]);
            ++upper;
            break;
        case BoxState::Interior:
            ++interior;
            break;
        }
    }
    EXPECT_GT(lower, 0u);
    EXPECT_GT(interior, 0u);
    EXPECT_GT(upper, 0u);
    EXPECT_LE(q.kkt_residual, 1e-9);

    const Contract c = q.as_contract();
    for (std::size_t i = 0; i < q.grid.size(); ++i) {
        EXPECT_NEAR(c(q.grid[i]), q.phi[i], 1e-12);
    }
}

TEST(QpOracle, StartsAgreeOnAConcaveInstance) {
    const auto in = instances()[0];
    const MomentBundle b = MomentBundle::compute(in.params, in.econ.T);
    const QPOracleResult q = qp_oracle(in.econ, b, discretize(in.params.marks(), 400, in.z_max), in.params.impact());
    ASSERT_TRUE(q.concave);
    ASSERT_EQ(q.start_utilities.size(), 3u);
    for (double u : q.start_utilities) {
        EXPECT_NEAR(u, q.utility, 1e-8);
    }
}

TEST(QpOracle, TwoAtomsMatchExhaustiveSearch) {
    const MarkLaw law = MarkLaw::discrete({{1.0, 0.5}, {5.0, 0.5}});
    const double lambda = 0.3;
    const HawkesParams p(1.0, 1.0, 2.0, ImpactSpec::linear(lambda), law);
    const EconomicParams e{10, 0.3, 3.5, 0.4, 1.0};
    const MomentBundle b = MomentBundle::compute(p, e.T);
    const double M = b.M_T(), A = b.A_T(), B = b.B_T();
    auto value = [&](double p1, double p2) {
        const double h1 = p1 - 1.0, h2 = p2 - 5.0;
        const double H1 = 0.5 * (h1 + h2);
        const double H2 = 0.5 * (h1 * h1 + h2 * h2);
        const double Hf = 0.5 * lambda * (1.0 * h1 + 5.0 * h2);
        return H1 * (M - e.c * e.T) - e.gamma * (H2 * M + H1 * H1 * A + H1 * Hf * B);
    };
    double best = -INFINITY, b1 = 0.0, b2 = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        for (int j = 0; j <= 5000; ++j) {
            const double v = value(i * 1e-3, j * 1e-3);
            if (v > best) {
                best = v;
                b1 = i * 1e-3;
                b2 = j * 1e-3;
            }
        }
    }
    const QPOracleResult q = qp_oracle(e, b, law, p.impact());
    EXPECT_NEAR(q.phi[0], b1, 2e-3);
    EXPECT_NEAR(q.phi[1], b2, 2e-3);
    EXPECT_GE(value(q.phi[0], q.phi[1]), best - 1e-12);
}

TEST(QpOracle, PoissonOptimumIsTheDeductible) {
    const MarkLaw law = MarkLaw::lognormal(0.0, 0.6);
    const double lambda0 = 1.5;
    const HawkesParams p = HawkesParams::poisson(lambda0, law);
    const EconomicParams e{10, 0.3, 2.5, 0.4, 2.0};
    const MomentBundle b = MomentBundle::compute(p, e.T);
    const MarkLaw grid = discretize(law, 400, 12.0);
    const QPOracleResult q = qp_oracle(e, b, grid, p.impact());
    // Per atom: maximise h (lambda0 - c) T - gamma h^2 lambda0 T over h in [-z, 0].
    const double d = (e.c - lambda0) / (2.0 * e.gamma * lambda0);
    for (std::size_t i = 0; i < q.grid.size(); ++i) {
        EXPECT_NEAR(q.phi[i], std::max(q.grid[i] - d, 0.0), 1e-9);
    }
}

TEST(QpOracle, RejectsContinuousAndOversizedLaws) {
    const HawkesParams p(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0));
    const EconomicParams e{10, 0.3, 2.0, 0.5, 1.0};
    const MomentBundle b = MomentBundle::compute(p, 1.0);
    EXPECT_THROW((void)qp_oracle(e, b, p.marks(), p.impact()), InvalidArgument);
    EXPECT_THROW((void)qp_oracle(e, b, discretize(p.marks(), 10'001, 40.0), p.impact()), InvalidArgument);
}

TEST(QpOracle, CurvatureMatchesAFiniteDifferenceHessian) {
    // Smallest eigenvalue of -Hessian/(2 gamma) in L2(w), from the 2x2 reduction, checked on a 3-atom law
    // against second differences of U along the reduced directions.
    const MarkLaw law = MarkLaw::discrete({{1.0, 0.3}, {2.0, 0.3}, {8.0, 0.4}});
    const HawkesParams p(1.0, 1.0, 4.0, ImpactSpec::linear(0.9), law);
    const EconomicParams e{10, 0.3, 9.0, 0.5, 3.0};
    const MomentBundle b = MomentBundle::compute(p, e.T);
    const QPOracleResult q = qp_oracle(e, b, law, p.impact());
    const double M = b.M_T(), A = b.A_T(), B = b.B_T();
    // Quadratic form Q(h) = M H[h^2] + A H[h]^2 + B H[h] H[f h]; minimise Q(h)/H[h^2] by brute force on the sphere.
    double best = INFINITY;
    for (int i = 0; i <= 400; ++i) {
        for (int j = 0; j <= 400; ++j) {
            const double th = M_PI * i / 400.0, ph = 2.0 * M_PI * j / 400.0;
            // Orthonormal coordinates in L2(w): h_k = x_k / sqrt(w_k).
            const double x[3] = {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
            double H1 = 0.0, Hf = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double h = x[k] / std::sqrt(law.atoms()[k].weight);
                H1 += law.atoms()[k].weight * h;
                Hf += law.atoms()[k].weight * 0.9 * law.atoms()[k].z * h;
            }
            best = std::min(best, M + A * H1 * H1 + B * H1 * Hf);
        }
    }
    EXPECT_NEAR(q.min_curvature, best, 1e-3 * M);
}

TEST(Sweep, PoissonLimitShape) {
    const HawkesParams base(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0));
    const EconomicParams e{10, 0.3, 2.0, 0.5, 1.0};
    const std::vector<double> grid{1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
    const SweepResult s = poisson_limit_sweep(base, e, grid);
    ASSERT_EQ(s.rows.size(), grid.size());
    for (const auto& r : s.rows) {
        EXPECT_TRUE(r.ok) << r.error;
        EXPECT_EQ(r.lambda_bar, r.lambda_bar);
        EXPECT_LE(rel_err(r.M_T, s.lambda_P * e.T), 1e-8);
        EXPECT_LE(rel_err(r.h_phi, s.target_h_phi), 1e-9);
    }
    EXPECT_TRUE(s.slope_monotone);
    EXPECT_TRUE(s.a_monotone);
    EXPECT_TRUE(s.b_monotone);
    EXPECT_TRUE(s.cost_in_band);
    EXPECT_LE(s.terminal_slope_gap, 1e-3);
    EXPECT_LE(s.max_M_rel_error, 1e-8);

    // The last row is a deductible up to grid tolerance on the bulk of the law.
    const auto& last = s.rows.back();
    const Contract opt = Contract::three_piece(last.a, last.b);
    const Contract ded = Contract::deductible(s.poisson_deductible);
    const double z_hi = base.marks().quantile(0.999);
    const double spacing = 30.0 / 400.0;
    double sup = 0.0;
    for (double z = 0.0; z <= z_hi; z += 0.01) {
        sup = std::max(sup, std::abs(opt(z) - ded(z)));
    }
    EXPECT_LE(sup, spacing);
}

TEST(Sweep, FixedRiskAversionIsReportedNotCalibrated) {
    const HawkesParams base(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0));
    const EconomicParams e{10, 0.3, 2.0, 0.5, 1.0};
    SweepOptions options;
    options.calibrate_cost = false;
    const std::vector<double> grid{1.0, 0.1, 0.01};
    const SweepResult s = poisson_limit_sweep(base, e, grid, options);
    for (const auto& r : s.rows) {
        EXPECT_TRUE(r.ok);
        EXPECT_EQ(r.gamma, e.gamma);
    }
}

TEST(Sweep, RejectsBadInput) {
    const HawkesParams base(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0));
    const std::vector<double> up{0.1, 0.5};
    EXPECT_THROW((void)poisson_limit_sweep(base, {10, 0.3, 2.0, 0.5, 1.0}, up), InvalidArgument);
    const std::vector<double> grid{1.0, 0.5};
    EXPECT_THROW((void)poisson_limit_sweep(base, {10, 0.3, 1.2, 0.5, 1.0}, grid), HypothesisViolation);
}

} // namespace
} // namespace clustre
