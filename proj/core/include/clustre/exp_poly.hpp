#pragma once

#include <vector>

namespace clustre {

// Exponential polynomial  f(t) = sum_k c_k * t^{n_k} * exp(-r_k * t).
//
// Closed under addition, multiplication, integration from 0 and convolution
// with exp(-k t); this is the algebra in which the intensity moments of an
// exponential-kernel Hawkes process live, so every moment ODE can be solved
// exactly instead of stepped.
class ExpPoly {
public:
    struct Term {
        double coef;
        int power;
        double rate;
    };

    ExpPoly() = default;

    [[nodiscard]] static ExpPoly constant(double c);
    /// c * t^power * exp(-rate t)
    [[nodiscard]] static ExpPoly monomial(double c, int power, double rate);

    [[nodiscard]] double operator()(double t) const;

    ExpPoly& operator+=(const ExpPoly& other);
    ExpPoly& operator*=(double s);

    friend ExpPoly operator+(ExpPoly lhs, const ExpPoly& rhs) { return lhs += rhs; }
    friend ExpPoly operator-(ExpPoly lhs, const ExpPoly& rhs) { return lhs += rhs * -1.0; }
    friend ExpPoly operator*(ExpPoly lhs, double s) { return lhs *= s; }
    friend ExpPoly operator*(double s, ExpPoly rhs) { return rhs *= s; }
    friend ExpPoly operator*(const ExpPoly& lhs, const ExpPoly& rhs);

    /// t -> int_0^t f(s) ds
    [[nodiscard]] ExpPoly integral() const;

    /// t -> int_0^t exp(-k (t - s)) f(s) ds, i.e. the solution of y' = -k y + f, y(0) = 0.
    [[nodiscard]] ExpPoly convolve_exp(double k) const;

    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }

private:
    void add_term(double coef, int power, double rate);

    std::vector<Term> terms_;
};

/// Exact solution of y' = -k y + forcing, y(0) = y0.
[[nodiscard]] ExpPoly solve_linear_ode(double k, const ExpPoly& forcing, double y0);

} // namespace clustre
