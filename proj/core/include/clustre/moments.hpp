#pragma once

#include "clustre/exp_poly.hpp"
#include "clustre/hawkes.hpp"

namespace clustre {

// Deterministic moment functions of the intensity and the variance coefficients
// for a fixed parameter set and horizon T:
//
//   m(t)  = E[lambda_t],      M(t)  = int_0^t m,
//   m2(t) = E[lambda_t^2],    M2(t) = int_0^t m2,
//   A(T)  = 2 int_0^T int_0^t e^{-kappa (t-s)} [beta lambda_bar M(s) + m2(s)] ds dt - M(T)^2,
//   B(T)  = 2 int_0^T int_0^t e^{-kappa (t-s)} m(s) ds dt.
//
// All curves are exact exponential polynomials:
//   m'  = beta lambda_bar - kappa m,              m(0) = lambda0,
//   v'  = -2 kappa v + H[f^2] m,                  v(0) = 0,   v = m2 - m^2,
// and A is evaluated through the equivalent cancellation-free form
//   A(T) = 2 int_0^T int_0^t e^{-kappa (t-s)} v(s) ds dt.
class MomentBundle {
public:
    [[nodiscard]] static MomentBundle compute(const HawkesParams& params, double horizon);

    [[nodiscard]] const HawkesParams& params() const { return params_; }
    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] double kappa() const { return params_.kappa(); }

    [[nodiscard]] double mean_intensity(double t) const { return m_(t); }
    [[nodiscard]] double second_moment(double t) const { return m2_(t); }
    [[nodiscard]] double intensity_variance(double t) const { return v_(t); }
    [[nodiscard]] double cumulative_mean(double t) const { return cum_m_(t); }
    [[nodiscard]] double cumulative_second_moment(double t) const { return cum_m2_(t); }

    [[nodiscard]] double M_T() const { return M_T_; }
    [[nodiscard]] double M2_T() const { return M2_T_; }
    [[nodiscard]] double A_T() const { return A_T_; }
    [[nodiscard]] double B_T() const { return B_T_; }

    /// A(T) from the literal integrand (beta lambda_bar M + m2) minus M(T)^2.
    /// Agrees with A_T() up to cancellation error of order 1e-16 M(T)^2.
    [[nodiscard]] double A_T_literal() const;

    [[nodiscard]] const ExpPoly& mean_curve() const { return m_; }
    [[nodiscard]] const ExpPoly& second_moment_curve() const { return m2_; }

private:
    MomentBundle(HawkesParams params, double horizon);

    HawkesParams params_;
    double horizon_;
    ExpPoly m_, v_, m2_, cum_m_, cum_m2_;
    double M_T_ = 0.0, M2_T_ = 0.0, A_T_ = 0.0, B_T_ = 0.0;
};

[[nodiscard]] double mean_intensity(const HawkesParams& params, double t);
[[nodiscard]] double second_moment_intensity(const HawkesParams& params, double t);
[[nodiscard]] double coefficient_A(const HawkesParams& params, double horizon);
[[nodiscard]] double coefficient_B(const HawkesParams& params, double horizon);

/// Independent numerical routes used to cross-check the closed forms.
namespace reference {

struct OdeMoments {
    double m, M, m2, M2, A, B;
};

/// Integrates the moment ODEs together with the two convolution ODEs
/// y' = -kappa y + g, I' = y (adaptive Dormand-Prince, tolerance 1e-13).
[[nodiscard]] OdeMoments moments_ode(const HawkesParams& params, double horizon);

/// Nested adaptive Gauss-Kronrod evaluation of the defining double integrals,
/// with integrands taken from the closed-form m, M, m2 of `bundle`.
[[nodiscard]] double coefficient_A_quadrature(const MomentBundle& bundle);
[[nodiscard]] double coefficient_B_quadrature(const MomentBundle& bundle);
/// int_0^T m and int_0^T m2 by adaptive quadrature of the closed-form curves.
[[nodiscard]] double cumulative_mean_quadrature(const MomentBundle& bundle);
[[nodiscard]] double cumulative_second_moment_quadrature(const MomentBundle& bundle);

} // namespace reference

} // namespace clustre
