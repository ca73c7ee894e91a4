#include "clustre/moments.hpp"

#include "clustre/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <string>

namespace clustre {
namespace {

void require_horizon(double horizon) {
    if (!std::isfinite(horizon) || horizon <= 0.0) {
        throw InvalidArgument("horizon T must be positive and finite");
    }
}

void require_time(double t) {
    if (!std::isfinite(t) || t < 0.0) {
        throw InvalidArgument("time t must be finite and >= 0");
    }
}

template <class F>
double gk(F f, double lo, double hi) {
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-12, &error, &l1);
    if (error > 1e-6 * l1 && error > 1e-300) {
        throw ConvergenceError("moment quadrature did not converge: error " + std::to_string(error / l1) + " relative");
    }
    return value;
}

} // namespace

MomentBundle::MomentBundle(HawkesParams params, double horizon) : params_(std::move(params)), horizon_(horizon) {}

MomentBundle MomentBundle::compute(const HawkesParams& params, double horizon) {
    require_horizon(horizon);
    MomentBundle b(params, horizon);
    const double kappa = params.kappa();
    const double drift = params.beta() * params.lambda_bar();
    const double h_f2 = params.impact().h_f_squared(params.marks());

    b.m_ = solve_linear_ode(kappa, ExpPoly::constant(drift), params.lambda0());
    b.v_ = solve_linear_ode(2.0 * kappa, h_f2 * b.m_, 0.0);
    b.m2_ = b.v_ + b.m_ * b.m_;
    b.cum_m_ = b.m_.integral();
    b.cum_m2_ = b.m2_.integral();

    b.M_T_ = b.cum_m_(horizon);
    b.M2_T_ = b.cum_m2_(horizon);
    b.B_T_ = 2.0 * b.m_.convolve_exp(kappa).integral()(horizon);
    b.A_T_ = 2.0 * b.v_.convolve_exp(kappa).integral()(horizon);
    return b;
}

double MomentBundle::A_T_literal() const {
    const double drift = params_.beta() * params_.lambda_bar();
    const ExpPoly integrand = drift * cum_m_ + m2_;
    return 2.0 * integrand.convolve_exp(kappa()).integral()(horizon_) - M_T_ * M_T_;
}

double mean_intensity(const HawkesParams& params, double t) {
    require_time(t);
    const double kappa = params.kappa();
    if (params.is_poisson_branch()) {
        return params.lambda0();
    }
    const double lambda_inf = params.beta() * params.lambda_bar() / kappa;
    return lambda_inf + (params.lambda0() - lambda_inf) * std::exp(-kappa * t);
}

double second_moment_intensity(const HawkesParams& params, double t) {
    require_time(t);
    return MomentBundle::compute(params, t > 0.0 ? t : 1.0).second_moment(t);
}

double coefficient_A(const HawkesParams& params, double horizon) { return MomentBundle::compute(params, horizon).A_T(); }

double coefficient_B(const HawkesParams& params, double horizon) { return MomentBundle::compute(params, horizon).B_T(); }

namespace reference {

OdeMoments moments_ode(const HawkesParams& params, double horizon) {
    require_horizon(horizon);
    using State = std::array<double, 8>;
    const double kappa = params.kappa();
    const double beta = params.beta();
    const double drift = beta * params.lambda_bar();
    const double h_f2 = params.impact().h_f_squared(params.marks());

    // state: m, M, m2, M2, yA, IA, yB, IB
    auto rhs = [&](const State& x, State& dx, double) {
        dx[0] = drift - kappa * x[0];
        dx[1] = x[0];
        // E[d lambda^2] = 2 lambda beta (lambda_bar - lambda) dt + E[(lambda + f)^2 - lambda^2] lambda dt
        dx[2] = 2.0 * drift * x[0] - 2.0 * beta * x[2] + 2.0 * (beta - kappa) * x[2] + h_f2 * x[0];
        dx[3] = x[2];
        dx[4] = -kappa * x[4] + drift * x[1] + x[2];
        dx[5] = x[4];
        dx[6] = -kappa * x[6] + x[0];
        dx[7] = x[6];
    };
    State x{params.lambda0(), 0.0, params.lambda0() * params.lambda0(), 0.0, 0.0, 0.0, 0.0, 0.0};
    namespace odeint = boost::numeric::odeint;
    auto stepper = odeint::make_controlled(1e-14, 1e-14, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, horizon, horizon * 1e-3);
    return OdeMoments{x[0], x[1], x[2], x[3], 2.0 * x[5] - x[1] * x[1], 2.0 * x[7]};
}

double coefficient_A_quadrature(const MomentBundle& bundle) {
    const double kappa = bundle.kappa();
    const double drift = bundle.params().beta() * bundle.params().lambda_bar();
    auto outer = [&](double t) {
        return gk([&](double s) {
            return std::exp(-kappa * (t - s)) * (drift * bundle.cumulative_mean(s) + bundle.second_moment(s));
        }, 0.0, t);
    };
    const double M = bundle.M_T();
    return 2.0 * gk(outer, 0.0, bundle.horizon()) - M * M;
}

double coefficient_B_quadrature(const MomentBundle& bundle) {
    const double kappa = bundle.kappa();
    auto outer = [&](double t) {
        return gk([&](double s) { return std::exp(-kappa * (t - s)) * bundle.mean_intensity(s); }, 0.0, t);
    };
    return 2.0 * gk(outer, 0.0, bundle.horizon());
}

double cumulative_mean_quadrature(const MomentBundle& bundle) {
    return gk([&](double t) { return bundle.mean_intensity(t); }, 0.0, bundle.horizon());
}

double cumulative_second_moment_quadrature(const MomentBundle& bundle) {
    return gk([&](double t) { return bundle.second_moment(t); }, 0.0, bundle.horizon());
}

} // namespace reference

} // namespace clustre
