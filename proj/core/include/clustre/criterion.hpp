#pragma once

#include "clustre/contracts.hpp"
#include "clustre/hawkes.hpp"
#include "clustre/moments.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace clustre {

struct EconomicParams {
    double R0;     ///< initial capital
    double rho;    ///< premium loading rate, per unit of theta_bar per year
    double c;      ///< reinsurance cost rate, per unit of H[phi] per year
    double gamma;  ///< risk aversion, > 0
    double T;      ///< horizon in years, > 0

    /// Throws InvalidArgument on gamma <= 0, T <= 0 or non-finite fields.
    void validate() const;
};

/// c T - M(T) > 0, the cost hypothesis of the three-piece optimality result.
[[nodiscard]] bool three_piece_applicable(const EconomicParams& econ, const MomentBundle& moments);

// The five summands of the closed-form criterion
//   U = base + linear - variance_M - variance_A - variance_B
// with
//   base       = R0 + (rho - c) theta_bar T
//   linear     = H[phi - I] (M(T) - c T)
//   variance_M = gamma H[(phi - I)^2] M(T)
//   variance_A = gamma H[phi - I]^2 A(T)
//   variance_B = gamma H[phi - I] H[f (phi - I)] B(T)
struct CriterionTerms {
    double base;
    double linear;
    double variance_M;
    double variance_A;
    double variance_B;
};

struct CriterionReport {
    double mean;      ///< E[R_T(phi)]
    double variance;  ///< V[R_T(phi)]
    double utility;   ///< mean - gamma variance
    CriterionTerms terms;
    ContractStats stats;
};

/// Mean-variance criterion of a contract in closed form.
/// Throws InvalidArgument when econ.T differs from moments.horizon().
[[nodiscard]] CriterionReport utility_closed_form(const Contract& contract, const EconomicParams& econ,
                                                  const MomentBundle& moments);

/// Same criterion from precomputed statistics (law and impact fixed by the caller).
[[nodiscard]] CriterionReport utility_from_stats(const ContractStats& stats, const EconomicParams& econ,
                                                 const MomentBundle& moments);

/// Constant-intensity specialisation: base + H[phi-I] (lambda0 - c) T - gamma H[(phi-I)^2] lambda0 T.
[[nodiscard]] double utility_poisson(const ContractStats& stats, const EconomicParams& econ, double theta_bar,
                                     double lambda0);

/// Constant-impact specialisation, grouping the quadratic terms as H[phi-I]^2 (A + fbar B).
[[nodiscard]] double utility_constant_impact(const ContractStats& stats, const EconomicParams& econ,
                                             const MomentBundle& moments, double theta_bar, double fbar);

// Density of the first variation of U at phi with respect to Theta:
//   G(z) = [(M - cT) - 2 gamma H[phi-I] A - gamma H[f(phi-I)] B]
//          - gamma H[phi-I] B f(z) - 2 gamma M (phi(z) - z).
class Gradient {
public:
    Gradient(double constant, double impact_coeff, double gap_coeff, Contract contract, ImpactSpec impact)
        : constant_(constant), impact_coeff_(impact_coeff), gap_coeff_(gap_coeff), contract_(std::move(contract)),
          impact_(impact) {}

    [[nodiscard]] double operator()(double z) const {
        return constant_ + impact_coeff_ * impact_(z) + gap_coeff_ * (contract_(z) - z);
    }

    [[nodiscard]] double constant() const { return constant_; }
    /// Multiplies f(z): -gamma H[phi-I] B.
    [[nodiscard]] double impact_coeff() const { return impact_coeff_; }
    /// Multiplies phi(z) - z: -2 gamma M.
    [[nodiscard]] double gap_coeff() const { return gap_coeff_; }

private:
    double constant_;
    double impact_coeff_;
    double gap_coeff_;
    Contract contract_;
    ImpactSpec impact_;
};

[[nodiscard]] Gradient gradient(const Contract& contract, const EconomicParams& econ, const MomentBundle& moments);

/// Sample moments of X_T[h] with standard errors.
struct SampleMoments {
    double mean = 0.0;
    double mean_se = 0.0;
    double second_moment = 0.0;
    double second_moment_se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
};

/// Simulates n paths and returns, for each h, the sample moments of
/// X_T[h] = sum_i h(Z_i). All h share the same paths. Deterministic in seed.
[[nodiscard]] std::vector<SampleMoments> mc_gap_moments(const HawkesParams& params, double horizon,
                                                        std::span<const RealFunction> hs, std::size_t n_paths,
                                                        std::uint64_t seed);

/// Moments from a vector of i.i.d. samples (accumulated in index order).
[[nodiscard]] SampleMoments sample_moments(std::span<const double> xs);

struct McEstimate {
    std::size_t n_paths = 0;
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    double utility = 0.0;
    double utility_se = 0.0;
};

/// Monte Carlo estimate of E[R_T], V[R_T] and U for a contract, with
/// R_T = R0 + (rho - c) T theta_bar + X_T[phi - I] - c T H[phi - I].
[[nodiscard]] McEstimate mc_estimate(const Contract& contract, const EconomicParams& econ, const HawkesParams& params,
                                     std::size_t n_paths, std::uint64_t seed);

} // namespace clustre
