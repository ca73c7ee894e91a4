#pragma once

#include "clustre/contracts.hpp"
#include "clustre/criterion.hpp"
#include "clustre/moments.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clustre {

/// Sign pattern of G(phi*) on a z-grid: (-) below a, (0) on [a, b], (+) above b.
struct RegionReport {
    std::vector<double> z;
    std::vector<double> g;
    double scale = 0.0;           ///< max |G| on the grid
    double tolerance = 0.0;       ///< absolute tolerance used for the checks
    double max_abs_affine = 0.0;  ///< max |G| on [a, b]
    bool no_cover_negative = false;
    bool affine_zero = false;
    bool full_cover_positive = false;

    [[nodiscard]] bool ok() const { return no_cover_negative && affine_zero && full_cover_positive; }
};

struct OptimalContractResult {
    Contract contract = Contract::zero();
    double a = 0.0;
    double b = 0.0;
    double slope = 0.0;           ///< b / (b - a)
    double slope_from_gap = 0.0;  ///< 1 - Lambda B / (2 M) H[phi* - I]
    double C_star = 0.0;
    double utility = 0.0;
    /// r1: Lambda int_0^b (z - phi*) dTheta - 2M/B a/(b-a);  r2: slope a - C*.
    std::array<double, 2> residuals{};
    double residual_scale = 1.0;  ///< max(1, 2M/B)
    ContractStats stats{};
    CriterionReport report{};
    RegionReport regions;
};

struct ThreePieceOptions {
    std::size_t region_grid = 1000;
    double region_tolerance = 1e-7;
};

// Optimal contract for linear impact f(z) = Lambda z, Lambda > 0, marks with
// unbounded support and c T > M(T). Solves for (a, b)
//   E1:  Lambda int_0^b (z - phi*(z)) Theta(dz) = 2 M/B * a/(b - a)
//   E2:  b/(b - a) * a = C*(a, b)
// by bisection on a with, for each a, a bracketed Newton solve of E1 for b.
// Throws HypothesisViolation when a hypothesis fails, NoBracket or
// ConvergenceError when the root search breaks down.
[[nodiscard]] OptimalContractResult solve_three_piece(const EconomicParams& econ, const MomentBundle& moments,
                                                      const ThreePieceOptions& options = {});

enum class BoxState { Lower, Interior, Upper };

struct QPOracleResult {
    std::vector<double> grid;
    std::vector<double> weights;
    std::vector<double> phi;
    std::vector<BoxState> active;
    double utility = 0.0;
    ContractStats stats{};
    double kkt_residual = 0.0;  ///< max first-order violation, relative to the gradient scale
    std::size_t iterations = 0;
    bool converged = false;
    bool concave = false;
    double min_curvature = 0.0;  ///< smallest eigenvalue of -Hessian / (2 gamma) in L2(Theta)
    bool warning = false;        ///< set when the quadratic is not concave
    std::vector<double> start_utilities;

    /// The optimum as a tabulated contract through (0, 0) and the atoms.
    [[nodiscard]] Contract as_contract() const;
};

struct QpOptions {
    double tolerance = 1e-11;
    std::size_t max_iterations = 200000;
};

// Brute-force maximiser of the closed-form criterion over contracts on a
// discrete law: variables phi_i in [0, z_i], projected-gradient ascent with
// backtracking in the L2(Theta) metric, from zero, full and deductible starts.
// The moment coefficients are taken from `moments` (the law may be a
// discretisation of the one they were computed for).
[[nodiscard]] QPOracleResult qp_oracle(const EconomicParams& econ, const MomentBundle& moments, const MarkLaw& law,
                                       const ImpactSpec& impact, const QpOptions& options = {});

struct SweepRow {
    double Lambda = 0.0;
    double lambda_bar = 0.0;  ///< equal to lambda0 on every row
    double gamma = 0.0;
    double a = 0.0;
    double b = 0.0;
    double slope = 0.0;
    double M_T = 0.0;
    double h_phi = 0.0;
    double cost = 0.0;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    double lambda_P = 0.0;          ///< M(T) / T of the base parameters
    double poisson_deductible = 0.0;
    double target_h_phi = 0.0;      ///< H[(z - d)+] of the Poisson-limit deductible
    std::vector<SweepRow> rows;
    bool slope_monotone = false;    ///< non-increasing as Lambda decreases
    bool a_monotone = false;        ///< non-increasing as Lambda decreases
    bool b_monotone = false;        ///< non-decreasing as Lambda decreases
    bool cost_in_band = false;
    double terminal_slope_gap = 0.0;
    double max_M_rel_error = 0.0;
};

struct SweepOptions {
    /// Re-fit gamma per row so H[phi*] equals the Poisson-limit value (cost invariance).
    bool calibrate_cost = true;
    double cost_band = 0.02;
};

// Poisson-limit sweep over a strictly decreasing Lambda grid. Each row starts
// at lambda0 = lambda_bar, rescaled so that M(T) = lambda_P T.
[[nodiscard]] SweepResult poisson_limit_sweep(const HawkesParams& base, const EconomicParams& econ,
                                              std::span<const double> lambda_grid, const SweepOptions& options = {});

} // namespace clustre
