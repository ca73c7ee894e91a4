#include "clustre/exp_poly.hpp"

#include <cmath>

namespace clustre {

ExpPoly ExpPoly::constant(double c) { return monomial(c, 0, 0.0); }

ExpPoly ExpPoly::monomial(double c, int power, double rate) {
    ExpPoly p;
    p.add_term(c, power, rate);
    return p;
}

void ExpPoly::add_term(double coef, int power, double rate) {
    if (coef == 0.0) {
        return;
    }
    for (auto& term : terms_) {
        if (term.power == power && term.rate == rate) {
            term.coef += coef;
            return;
        }
    }
    terms_.push_back({coef, power, rate});
}

double ExpPoly::operator()(double t) const {
    double sum = 0.0;
    for (const auto& term : terms_) {
        double v = term.coef * std::exp(-term.rate * t);
        if (term.power > 0) {
            v *= std::pow(t, term.power);
        }
        sum += v;
    }
    return sum;
}

ExpPoly& ExpPoly::operator+=(const ExpPoly& other) {
    for (const auto& term : other.terms_) {
        add_term(term.coef, term.power, term.rate);
    }
    return *this;
}

ExpPoly& ExpPoly::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& term : terms_) {
        term.coef *= s;
    }
    return *this;
}

ExpPoly operator*(const ExpPoly& lhs, const ExpPoly& rhs) {
    ExpPoly out;
    for (const auto& a : lhs.terms_) {
        for (const auto& b : rhs.terms_) {
            out.add_term(a.coef * b.coef, a.power + b.power, a.rate + b.rate);
        }
    }
    return out;
}

namespace {

// coef * exp(-shift t) * int_0^t s^n exp(-rho s) ds, where rate == rho + shift is passed
// separately so the recombined exponent is exact.
void add_truncated_gamma(ExpPoly& out, double coef, int n, double rho, double shift, double rate) {
    if (rho == 0.0) {
        out += ExpPoly::monomial(coef / (n + 1), n + 1, shift);
        return;
    }
    // n!/rho^{n+1} * (1 - exp(-rho t) * sum_{j<=n} (rho t)^j / j!)
    double factorial_n = 1.0;
    for (int j = 2; j <= n; ++j) {
        factorial_n *= j;
    }
    const double lead = coef * factorial_n / std::pow(rho, n + 1);
    out += ExpPoly::monomial(lead, 0, shift);
    double j_factorial = 1.0;
    for (int j = 0; j <= n; ++j) {
        if (j > 0) {
            j_factorial *= j;
        }
        out += ExpPoly::monomial(-lead * std::pow(rho, j) / j_factorial, j, rate);
    }
}

} // namespace

ExpPoly ExpPoly::integral() const {
    ExpPoly out;
    for (const auto& term : terms_) {
        add_truncated_gamma(out, term.coef, term.power, term.rate, 0.0, term.rate);
    }
    return out;
}

ExpPoly ExpPoly::convolve_exp(double k) const {
    // exp(-k t) * int_0^t s^n exp(-(r - k) s) ds
    ExpPoly out;
    for (const auto& term : terms_) {
        add_truncated_gamma(out, term.coef, term.power, term.rate - k, k, term.rate);
    }
    return out;
}

ExpPoly solve_linear_ode(double k, const ExpPoly& forcing, double y0) {
    return ExpPoly::monomial(y0, 0, k) + forcing.convolve_exp(k);
}

} // namespace clustre
