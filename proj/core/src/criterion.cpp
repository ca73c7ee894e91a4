#include "clustre/criterion.hpp"

#include "clustre/errors.hpp"

#include <cmath>
#include <string>

namespace clustre {
namespace {

struct CentralMoments {
    double mean = 0.0;
    double m2 = 0.0;  // unbiased variance
    double mu3 = 0.0;
    double mu4 = 0.0;
    double raw2_mean = 0.0;
    double raw2_var = 0.0;
};

// Two-pass moments around the first sample, so that constant samples give exactly zero spread.
CentralMoments central_moments(std::span<const double> xs) {
    const auto n = static_cast<double>(xs.size());
    const double shift = xs.front();
    double sum = 0.0;
    for (double x : xs) {
        sum += x - shift;
    }
    const double dbar = sum / n;
    double s2 = 0.0, s3 = 0.0, s4 = 0.0, r2 = 0.0;
    for (double x : xs) {
        const double d = (x - shift) - dbar;
        const double d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
        r2 += x * x;
    }
    CentralMoments out;
    out.mean = shift + dbar;
    out.m2 = s2 / (n - 1.0);
    out.mu3 = s3 / n;
    out.mu4 = s4 / n;
    out.raw2_mean = r2 / n;
    double rv = 0.0;
    for (double x : xs) {
        const double e = x * x - out.raw2_mean;
        rv += e * e;
    }
    out.raw2_var = rv / (n - 1.0);
    return out;
}

double variance_of_sample_variance(const CentralMoments& c, double n) {
    const double sigma4 = c.m2 * c.m2;
    return std::max(c.mu4 - sigma4 * (n - 3.0) / (n - 1.0), 0.0) / n;
}

} // namespace

void EconomicParams::validate() const {
    for (double x : {R0, rho, c, gamma, T}) {
        if (!std::isfinite(x)) {
            throw InvalidArgument("economic parameters must be finite");
        }
    }
    if (gamma <= 0.0) {
        throw InvalidArgument("risk aversion gamma must be > 0");
    }
    if (T <= 0.0) {
        throw InvalidArgument("horizon T must be > 0");
    }
    if (c < 0.0) {
        throw InvalidArgument("reinsurance cost rate c must be >= 0");
    }
}

bool three_piece_applicable(const EconomicParams& econ, const MomentBundle& moments) {
    return econ.c * econ.T - moments.M_T() > 0.0;
}

CriterionReport utility_from_stats(const ContractStats& s, const EconomicParams& econ, const MomentBundle& moments) {
    econ.validate();
    if (econ.T != moments.horizon()) {
        throw InvalidArgument("economic horizon T = " + std::to_string(econ.T) +
                              " does not match the moment bundle horizon " + std::to_string(moments.horizon()));
    }
    const double M = moments.M_T();
    const double theta = theta_bar(moments.params().marks());
    CriterionTerms t{};
    t.base = econ.R0 + (econ.rho - econ.c) * theta * econ.T;
    t.linear = s.h_gap * (M - econ.c * econ.T);
    t.variance_M = econ.gamma * s.h_gap_sq * M;
    t.variance_A = econ.gamma * s.h_gap * s.h_gap * moments.A_T();
    t.variance_B = econ.gamma * s.h_gap * s.h_f_gap * moments.B_T();

    CriterionReport r{};
    r.terms = t;
    r.stats = s;
    r.mean = t.base + t.linear;
    r.variance = s.h_gap_sq * M + s.h_gap * s.h_gap * moments.A_T() + s.h_gap * s.h_f_gap * moments.B_T();
    r.utility = t.base + t.linear - t.variance_M - t.variance_A - t.variance_B;
    return r;
}

CriterionReport utility_closed_form(const Contract& contract, const EconomicParams& econ, const MomentBundle& moments) {
    const auto& p = moments.params();
    return utility_from_stats(stats(contract, p.marks(), p.impact(), econ.c), econ, moments);
}

double utility_poisson(const ContractStats& s, const EconomicParams& econ, double theta_bar, double lambda0) {
    return econ.R0 + (econ.rho - econ.c) * theta_bar * econ.T + s.h_gap * (lambda0 - econ.c) * econ.T -
           econ.gamma * s.h_gap_sq * lambda0 * econ.T;
}

double utility_constant_impact(const ContractStats& s, const EconomicParams& econ, const MomentBundle& moments,
                               double theta_bar, double fbar) {
    const double M = moments.M_T();
    return econ.R0 + (econ.rho - econ.c) * theta_bar * econ.T + s.h_gap * (M - econ.c * econ.T) -
           econ.gamma * s.h_gap * s.h_gap * (moments.A_T() + fbar * moments.B_T()) - econ.gamma * s.h_gap_sq * M;
}

Gradient gradient(const Contract& contract, const EconomicParams& econ, const MomentBundle& moments) {
    econ.validate();
    const auto& p = moments.params();
    const ContractStats s = stats(contract, p.marks(), p.impact(), econ.c);
    const double M = moments.M_T();
    const double A = moments.A_T();
    const double B = moments.B_T();
    const double g = econ.gamma;
    const double constant = (M - econ.c * econ.T) - 2.0 * g * s.h_gap * A - g * s.h_f_gap * B;
    return Gradient(constant, -g * s.h_gap * B, -2.0 * g * M, contract, p.impact());
}

SampleMoments sample_moments(std::span<const double> xs) {
    if (xs.size() < 2) {
        throw InvalidArgument("sample moments need at least two samples");
    }
    const auto n = static_cast<double>(xs.size());
    const CentralMoments c = central_moments(xs);
    SampleMoments out;
    out.mean = c.mean;
    out.mean_se = std::sqrt(c.m2 / n);
    out.second_moment = c.raw2_mean;
    out.second_moment_se = std::sqrt(c.raw2_var / n);
    out.variance = c.m2;
    out.variance_se = std::sqrt(variance_of_sample_variance(c, n));
    return out;
}

std::vector<SampleMoments> mc_gap_moments(const HawkesParams& params, double horizon, std::span<const RealFunction> hs,
                                          std::size_t n_paths, std::uint64_t seed) {
    if (n_paths < 2) {
        throw InvalidArgument("Monte Carlo needs at least two paths");
    }
    const std::size_t k = hs.size();
    std::vector<double> values(n_paths * k, 0.0);
    simulate_batch(params, horizon, seed, n_paths, [&](std::size_t i, const EventPath& path) {
        for (std::size_t j = 0; j < k; ++j) {
            double x = 0.0;
            for (const auto& e : path.events) {
                x += hs[j](e.mark);
            }
            values[j * n_paths + i] = x;
        }
    });
    std::vector<SampleMoments> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        out.push_back(sample_moments(std::span<const double>(values).subspan(j * n_paths, n_paths)));
    }
    return out;
}

McEstimate mc_estimate(const Contract& contract, const EconomicParams& econ, const HawkesParams& params,
                       std::size_t n_paths, std::uint64_t seed) {
    econ.validate();
    if (n_paths < 2) {
        throw InvalidArgument("Monte Carlo needs at least two paths");
    }
    const ContractStats s = stats(contract, params.marks(), params.impact(), econ.c);
    const double deterministic =
        econ.R0 + (econ.rho - econ.c) * econ.T * theta_bar(params.marks()) - econ.c * econ.T * s.h_gap;

    std::vector<double> wealth(n_paths, 0.0);
    simulate_batch(params, econ.T, seed, n_paths, [&](std::size_t i, const EventPath& path) {
        double x = 0.0;
        for (const auto& e : path.events) {
            x += contract(e.mark) - e.mark;
        }
        wealth[i] = deterministic + x;
    });

    const auto n = static_cast<double>(n_paths);
    const CentralMoments c = central_moments(wealth);
    McEstimate out;
    out.n_paths = n_paths;
    out.mean = c.mean;
    out.mean_se = std::sqrt(c.m2 / n);
    out.variance = c.m2;
    const double var_var = variance_of_sample_variance(c, n);
    out.variance_se = std::sqrt(var_var);
    out.utility = c.mean - econ.gamma * c.m2;
    // Var(xbar - gamma s^2) ~ (sigma^2 - 2 gamma mu3 + gamma^2 (mu4 - sigma^4 (n-3)/(n-1))) / n
    out.utility_se = std::sqrt(std::max(c.m2 / n - 2.0 * econ.gamma * c.mu3 / n + econ.gamma * econ.gamma * var_var, 0.0));
    return out;
}

} // namespace clustre
