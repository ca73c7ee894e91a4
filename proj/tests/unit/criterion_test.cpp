#include "clustre/criterion.hpp"
#include "clustre/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace clustre {
namespace {

using testing::rel_err;

EconomicParams econ(double T) { return EconomicParams{10.0, 0.3, 2.0, 0.5, T}; }

Contract random_tabulated(Engine& rng, const MarkLaw& law) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Knot> knots{{0.0, 0.0}};
    const double top = law.is_discrete() ? law.atoms().back().z * 1.2 : law.quantile(0.99);
    double z = 0.0;
    while (z < top) {
        z += (0.05 + u(rng)) * top / 6.0;
        knots.push_back({z, u(rng) * z});
    }
    return Contract::tabulated(knots);
}

std::vector<Contract> families(const MarkLaw& law) {
    const double med = law.quantile(0.5);
    return {Contract::deductible(med), Contract::proportional(0.4), Contract::three_piece(0.5 * med, 2.0 * med),
            Contract::tabulated({{0.0, 0.0}, {med, 0.2 * med}, {3.0 * med, 2.5 * med}})};
}

TEST(Criterion, FullCoverIsDeterministic) {
    const HawkesParams p(1.2, 1.0, 2.0, ImpactSpec::linear(0.8), MarkLaw::exponential(1.5));
    const EconomicParams e = econ(2.0);
    const MomentBundle b = MomentBundle::compute(p, 2.0);
    const CriterionReport r = utility_closed_form(Contract::full(), e, b);
    EXPECT_EQ(r.utility, e.R0 + (e.rho - e.c) * 1.5 * e.T);
    EXPECT_EQ(r.variance, 0.0);
    const McEstimate mc = mc_estimate(Contract::full(), e, p, 1000, 5);
    EXPECT_EQ(mc.variance, 0.0);
    EXPECT_EQ(mc.mean, r.mean);
}

TEST(Criterion, ReportIsConsistent) {
    Engine rng(3);
    for (int draw = 0; draw < 12; ++draw) {
        const HawkesParams p = testing::random_params(rng, draw);
        const MomentBundle b = MomentBundle::compute(p, 1.5);
        for (const auto& c : families(p.marks())) {
            const CriterionReport r = utility_closed_form(c, econ(1.5), b);
            EXPECT_GE(r.variance, 0.0);
            EXPECT_LE(rel_err(r.utility, r.mean - econ(1.5).gamma * r.variance), 1e-12);
            const auto& t = r.terms;
            EXPECT_LE(rel_err(r.utility, t.base + t.linear - t.variance_M - t.variance_A - t.variance_B), 1e-12);
        }
    }
}

TEST(Criterion, RejectsMismatchedHorizon) {
    const HawkesParams p(1.0, 1.0, 2.0, ImpactSpec::linear(0.5), MarkLaw::exponential(1.0));
    const MomentBundle b = MomentBundle::compute(p, 1.0);
    EXPECT_THROW((void)utility_closed_form(Contract::zero(), econ(2.0), b), InvalidArgument);
    EXPECT_THROW((void)utility_closed_form(Contract::zero(), EconomicParams{0, 0, 1, 0.0, 1.0}, b), InvalidArgument);
}

TEST(Criterion, PoissonSpecialisationTermByTerm) {
    Engine rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 30; ++draw) {
        const MarkLaw law = draw % 2 == 0 ? MarkLaw::exponential(0.5 + u(rng), 0.5 + u(rng))
                                          : MarkLaw::lognormal(u(rng) - 0.5, 0.2 + u(rng));
        const double lambda0 = 0.2 + 3.0 * u(rng);
        const HawkesParams p = HawkesParams::poisson(lambda0, law);
        const EconomicParams e{20.0 * u(rng), u(rng), 0.5 + 3.0 * u(rng), 0.1 + u(rng), 0.2 + 4.0 * u(rng)};
        const MomentBundle b = MomentBundle::compute(p, e.T);
        for (const auto& c : families(law)) {
            const ContractStats s = stats(c, law, p.impact(), e.c);
            const CriterionReport r = utility_from_stats(s, e, b);
            const double theta = theta_bar(law);
            EXPECT_LE(rel_err(r.terms.base, e.R0 + (e.rho - e.c) * theta * e.T), 1e-12);
            EXPECT_LE(rel_err(r.terms.linear, s.h_gap * (lambda0 - e.c) * e.T), 1e-12);
            EXPECT_LE(rel_err(r.terms.variance_M, e.gamma * s.h_gap_sq * lambda0 * e.T), 1e-12);
            EXPECT_EQ(r.terms.variance_A, 0.0);
            EXPECT_EQ(r.terms.variance_B, 0.0);
            EXPECT_LE(rel_err(r.utility, utility_poisson(s, e, theta, lambda0)), 1e-12);
        }
    }
}

TEST(Criterion, ConstantImpactSpecialisation) {
    Engine rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 30; ++draw) {
        const MarkLaw law = MarkLaw::exponential(0.5 + u(rng), 0.5 + u(rng));
        const double beta = 0.5 + 2.0 * u(rng);
        const double fbar = 0.9 * beta * u(rng) / law.total_mass();
        const double lambda_bar = 0.5 + u(rng);
        const HawkesParams p(lambda_bar * (1.0 + u(rng)), lambda_bar, beta, ImpactSpec::constant(fbar), law);
        const EconomicParams e{5.0, 0.2, 1.0 + 2.0 * u(rng), 0.1 + u(rng), 0.5 + 2.0 * u(rng)};
        const MomentBundle b = MomentBundle::compute(p, e.T);
        for (const auto& c : families(law)) {
            const ContractStats s = stats(c, law, p.impact(), e.c);
            EXPECT_LE(rel_err(s.h_f_gap, fbar * s.h_gap), 1e-12);
            const double via_general = utility_from_stats(s, e, b).utility;
            const double via_grouped = utility_constant_impact(s, e, b, theta_bar(law), fbar);
            EXPECT_LE(rel_err(via_general, via_grouped), 1e-12);
        }
    }
}

TEST(Gradient, FullCoverIsConstant) {
    const HawkesParams p(1.2, 1.0, 2.0, ImpactSpec::linear(0.8), MarkLaw::exponential(1.5));
    const EconomicParams e = econ(2.0);
    const MomentBundle b = MomentBundle::compute(p, 2.0);
    const Gradient g = gradient(Contract::full(), e, b);
    for (double z : {0.0, 1.0, 10.0}) {
        EXPECT_DOUBLE_EQ(g(z), b.M_T() - e.c * e.T);
    }
}

TEST(Gradient, ZeroCoverIsAffineAndIncreasing) {
    const double lambda = 0.8;
    const MarkLaw law = MarkLaw::lognormal(0.1, 0.5);
    const HawkesParams p(1.2, 1.0, 2.0, ImpactSpec::linear(lambda), law);
    const EconomicParams e = econ(2.0);
    const MomentBundle b = MomentBundle::compute(p, 2.0);
    const Gradient g = gradient(Contract::zero(), e, b);
    const double theta = theta_bar(law);
    const double gam = e.gamma;
    const double c0 = (b.M_T() - e.c * e.T) + 2.0 * gam * theta * b.A_T() + gam * lambda * law.moment(2) * b.B_T();
    const double c1 = gam * theta * lambda * b.B_T() + 2.0 * gam * b.M_T();
    for (double z : {0.0, 0.7, 3.0, 40.0}) {
        EXPECT_LE(std::abs(g(z) - (c0 + c1 * z)), 1e-12 * std::max(1.0, std::abs(c0 + c1 * z)));
    }
    EXPECT_GT(c1, 0.0);
}

// Directional derivatives on a discrete law, where U and the integral of G g are exact sums.
TEST(Gradient, MatchesFiniteDifferences) {
    Engine rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr double eps = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Atom> atoms;
        const int n = 3 + static_cast<int>(20 * u(rng));
        for (int k = 0; k < n; ++k) {
            atoms.push_back({0.05 + 5.0 * u(rng), 0.05 + u(rng)});
        }
        const MarkLaw law = MarkLaw::discrete(atoms);
        const double theta = theta_bar(law);
        const double beta = 1.0 + 2.0 * u(rng);
        const ImpactSpec f = trial % 2 == 0 ? ImpactSpec::linear(0.8 * beta * u(rng) / theta)
                                            : ImpactSpec::constant(0.8 * beta * u(rng) / law.total_mass());
        const HawkesParams p(1.0 + u(rng), 1.0, beta, f, law);
        const EconomicParams e{10.0, 0.3, 1.0 + 2.0 * u(rng), 0.2 + u(rng), 0.5 + 2.0 * u(rng)};
        const MomentBundle b = MomentBundle::compute(p, e.T);

        std::vector<Knot> base{{0.0, 0.0}}, up{{0.0, 0.0}}, down{{0.0, 0.0}};
        std::vector<double> dir;
        for (const auto& a : law.atoms()) {
            if (a.z == base.back().z) {
                continue;
            }
            const double phi = (0.05 + 0.9 * u(rng)) * a.z;  // interior, so phi +- eps g stays admissible
            dir.push_back((2.0 * u(rng) - 1.0) * a.z);
            base.push_back({a.z, phi});
            up.push_back({a.z, phi + eps * dir.back()});
            down.push_back({a.z, phi - eps * dir.back()});
        }
        const Contract phi = Contract::tabulated(base);
        const double fd = (utility_closed_form(Contract::tabulated(up), e, b).utility -
                           utility_closed_form(Contract::tabulated(down), e, b).utility) /
                          (2.0 * eps);
        const Gradient g = gradient(phi, e, b);
        double exact = 0.0;
        std::size_t k = 0;
        for (const auto& a : law.atoms()) {
            exact += a.weight * g(a.z) * dir[k++];
        }
        EXPECT_LE(rel_err(fd, exact), 1e-4) << "trial " << trial;
    }
}

TEST(Criterion, IsQuadraticAlongSegments) {
    Engine rng(8);
    for (int draw = 0; draw < 12; ++draw) {
        const HawkesParams p = testing::random_params(rng, draw);
        const EconomicParams e = econ(1.3);
        const MomentBundle b = MomentBundle::compute(p, e.T);
        const Contract c1 = random_tabulated(rng, p.marks());
        const Contract c2 = random_tabulated(rng, p.marks());
        auto mix = [&](double alpha) {
            std::vector<double> zs;
            for (const auto& k : c1.knots()) {
                zs.push_back(k.z);
            }
            for (const auto& k : c2.knots()) {
                zs.push_back(k.z);
            }
            std::sort(zs.begin(), zs.end());
            zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
            const double tail = std::max(zs.back(), 1.0) * 50.0;
            zs.push_back(tail);
            std::vector<Knot> knots;
            for (double z : zs) {
                knots.push_back({z, alpha * c1(z) + (1.0 - alpha) * c2(z)});
            }
            return utility_closed_form(Contract::tabulated(knots), e, b).utility;
        };
        const double u0 = mix(0.0), uh = mix(0.5), u1 = mix(1.0);
        // Lagrange interpolation through alpha = 0, 1/2, 1, evaluated at 0.3.
        const double x = 0.3;
        const double predicted = u0 * (x - 0.5) * (x - 1.0) / 0.5 + uh * x * (x - 1.0) / -0.25 + u1 * x * (x - 0.5) / 0.5;
        EXPECT_LE(rel_err(predicted, mix(x)), 1e-9) << "draw " << draw;
    }
}

TEST(SampleMoments, KnownSample) {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const SampleMoments m = sample_moments(xs);
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.second_moment, 7.5);
    EXPECT_DOUBLE_EQ(m.mean_se, std::sqrt(5.0 / 3.0 / 4.0));
    const std::vector<double> one{1.0};
    EXPECT_THROW((void)sample_moments(one), InvalidArgument);
}

TEST(MonteCarlo, IsDeterministicInTheSeed) {
    const HawkesParams p(1.2, 1.0, 2.0, ImpactSpec::linear(0.8), MarkLaw::exponential(1.5));
    const McEstimate a = mc_estimate(Contract::deductible(1.0), econ(1.0), p, 5000, 9);
    const McEstimate b = mc_estimate(Contract::deductible(1.0), econ(1.0), p, 5000, 9);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.variance, b.variance);
    EXPECT_THROW((void)mc_estimate(Contract::zero(), econ(1.0), p, 1, 9), InvalidArgument);
}

TEST(MonteCarlo, GapMomentsMatchTheClosedForm) {
    const HawkesParams p(1.5, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0));
    const double T = 2.0;
    const MomentBundle b = MomentBundle::compute(p, T);
    const auto cs = families(p.marks());
    std::vector<RealFunction> hs;
    for (const auto& c : cs) {
        hs.emplace_back([c](double z) { return c(z) - z; });
    }
    const auto mc = mc_gap_moments(p, T, hs, 100'000, 404);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const ContractStats s = stats(cs[i], p.marks(), p.impact(), 1.0);
        const double mean = s.h_gap * b.M_T();
        const double second =
            s.h_gap * s.h_gap * (b.A_T() + b.M_T() * b.M_T()) + s.h_gap * s.h_f_gap * b.B_T() + s.h_gap_sq * b.M_T();
        EXPECT_LE(std::abs(mc[i].mean - mean), 3.0 * mc[i].mean_se) << cs[i].to_spec();
        EXPECT_LE(std::abs(mc[i].second_moment - second), 3.0 * mc[i].second_moment_se) << cs[i].to_spec();
    }
}

// Closed form against simulation for every contract family on five parameter sets.
TEST(MonteCarlo, UtilityMatchesTheClosedForm) {
    const std::vector<HawkesParams> sets{
        HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0)),
        HawkesParams(2.0, 1.0, 1.5, ImpactSpec::constant(0.6), MarkLaw::lognormal(0.0, 0.5)),
        HawkesParams(1.5, 1.2, 3.0, ImpactSpec::linear(0.8), MarkLaw::discrete({{0.5, 0.3}, {1.0, 0.4}, {3.0, 0.3}})),
        HawkesParams(0.8, 0.8, 1.0, ImpactSpec::linear(0.3), MarkLaw::exponential(2.0, 0.7)),
        HawkesParams::poisson(2.5, MarkLaw::lognormal(-0.2, 0.7)),
    };
    std::uint64_t seed = 1000;
    for (const auto& p : sets) {
        const EconomicParams e = econ(1.0);
        const MomentBundle b = MomentBundle::compute(p, e.T);
        for (const auto& c : families(p.marks())) {
            const McEstimate mc = mc_estimate(c, e, p, 100'000, ++seed);
            const double u = utility_closed_form(c, e, b).utility;
            EXPECT_LE(std::abs(mc.utility - u), 3.0 * mc.utility_se) << p.marks().describe() << " " << c.to_spec();
        }
    }
}

} // namespace
} // namespace clustre
