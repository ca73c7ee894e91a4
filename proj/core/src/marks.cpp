#include "clustre/marks.hpp"

#include "clustre/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace clustre {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_positive_finite(double x, const char* what) {
    if (!std::isfinite(x) || x <= 0.0) {
        throw InvalidArgument(std::string(what) + " must be positive and finite");
    }
}

// Standard normal Phi(u) - Phi(l), evaluated on the tail that avoids cancellation.
double normal_mass(double l, double u) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    if (u <= l) {
        return 0.0;
    }
    if (l >= 0.0) {
        return 0.5 * (std::erfc(l * inv_sqrt2) - std::erfc(u * inv_sqrt2));
    }
    return 0.5 * (std::erfc(-u * inv_sqrt2) - std::erfc(-l * inv_sqrt2));
}

// int_x^inf z^k e^{-z/mu} / mu dz
double exponential_upper(int k, double x, double mu) {
    if (std::isinf(x)) {
        return 0.0;
    }
    const double e = std::exp(-x / mu);
    switch (k) {
    case 0:
        return e;
    case 1:
        return (x + mu) * e;
    default:
        return (x * x + 2.0 * mu * x + 2.0 * mu * mu) * e;
    }
}

constexpr double kQuadTolerance = 1e-13;
constexpr unsigned kQuadDepth = 18;

std::string fmt_error(double error, double l1) {
    std::ostringstream os;
    os << "H-integral quadrature did not converge (error estimate " << error << ", L1 norm " << l1 << ")";
    return os.str();
}

double gauss_kronrod(const RealFunction& f, double lo, double hi) {
    if (hi <= lo) {
        return 0.0;
    }
    double error = 0.0;
    double l1 = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, kQuadDepth, kQuadTolerance, &error, &l1);
    if (!std::isfinite(value)) {
        throw IntegrabilityError("H-integral quadrature produced a non-finite value");
    }
    if (error > 1e-6 * std::max(l1, 1e-300) && error > 1e-14) {
        throw ConvergenceError(fmt_error(error, l1));
    }
    return value;
}

// Rejects g whose growth beyond the truncation point exceeds C (1 + z^2).
void check_tail_growth(const RealFunction& g, double z_cut) {
    const double r0 = std::abs(g(z_cut)) / (1.0 + z_cut * z_cut);
    for (double mult : {2.0, 4.0, 8.0}) {
        const double z = mult * z_cut;
        const double gz = g(z);
        if (!std::isfinite(gz)) {
            throw IntegrabilityError("integrand is not finite in the tail (z = " + std::to_string(z) + ")");
        }
        const double r = std::abs(gz) / (1.0 + z * z);
        if (r > 4.0 * r0 + 1e-12 && r > 1e-300) {
            throw IntegrabilityError("integrand grows faster than z^2; H-integral is not guaranteed finite");
        }
    }
}

// Integrates f on [lo, hi] splitting at the sorted breakpoints inside the interval.
double integrate_with_breaks(const RealFunction& f, double lo, double hi, std::vector<double> cuts) {
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    double left = lo;
    for (double c : cuts) {
        if (c > left && c < hi) {
            sum += gauss_kronrod(f, left, c);
            left = c;
        }
    }
    return sum + gauss_kronrod(f, left, hi);
}

} // namespace

MarkLaw MarkLaw::exponential(double mean, double total_mass) {
    require_positive_finite(mean, "exponential mean");
    require_positive_finite(total_mass, "total_mass");
    return MarkLaw(ExponentialMarks{mean}, total_mass);
}

MarkLaw MarkLaw::lognormal(double mu, double sigma, double total_mass) {
    if (!std::isfinite(mu)) {
        throw InvalidArgument("lognormal mu must be finite");
    }
    require_positive_finite(sigma, "lognormal sigma");
    require_positive_finite(total_mass, "total_mass");
    // Second moment exp(2 mu + 2 sigma^2) must be representable.
    if (!std::isfinite(std::exp(2.0 * mu + 2.0 * sigma * sigma))) {
        throw InvalidArgument("lognormal second moment overflows");
    }
    return MarkLaw(LogNormalMarks{mu, sigma}, total_mass);
}

MarkLaw MarkLaw::discrete(std::vector<Atom> atoms) {
    double mass = 0.0;
    for (const auto& a : atoms) {
        mass += a.weight;
    }
    return discrete(std::move(atoms), mass);
}

MarkLaw MarkLaw::discrete(std::vector<Atom> atoms, double total_mass) {
    if (atoms.empty()) {
        throw InvalidArgument("discrete mark law needs at least one atom");
    }
    double mass = 0.0;
    for (const auto& a : atoms) {
        if (!std::isfinite(a.z) || a.z < 0.0) {
            throw InvalidArgument("discrete atoms must be finite and >= 0");
        }
        require_positive_finite(a.weight, "discrete atom weight");
        mass += a.weight;
    }
    require_positive_finite(total_mass, "total_mass");
    if (std::abs(mass - total_mass) > 1e-12 * total_mass) {
        throw InvalidArgument("discrete weights sum to " + std::to_string(mass) + ", expected total_mass " +
                              std::to_string(total_mass));
    }
    std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& x, const Atom& y) { return x.z < y.z; });
    return MarkLaw(DiscreteMarks{std::move(atoms)}, total_mass);
}

bool MarkLaw::is_discrete() const { return std::holds_alternative<DiscreteMarks>(family_); }

std::span<const Atom> MarkLaw::atoms() const {
    if (const auto* d = std::get_if<DiscreteMarks>(&family_)) {
        return d->atoms;
    }
    return {};
}

double MarkLaw::partial_moment(int k, double lo, double hi) const {
    if (k < 0 || k > 2) {
        throw InvalidArgument("partial_moment supports k in {0, 1, 2}");
    }
    lo = std::max(lo, 0.0);
    if (!(hi > lo)) {
        return 0.0;
    }
    return std::visit(
        overloaded{
            [&](const ExponentialMarks& e) {
                return total_mass_ * (exponential_upper(k, lo, e.mean) - exponential_upper(k, hi, e.mean));
            },
            [&](const LogNormalMarks& l) {
                // z^k under LN(mu, sigma) is exp(k mu + k^2 sigma^2 / 2) times LN(mu + k sigma^2, sigma).
                const double scale = std::exp(k * l.mu + 0.5 * k * k * l.sigma * l.sigma);
                const double shift = l.mu + k * l.sigma * l.sigma;
                const double ul = lo > 0.0 ? (std::log(lo) - shift) / l.sigma : -std::numeric_limits<double>::infinity();
                const double uh = std::isinf(hi) ? std::numeric_limits<double>::infinity() : (std::log(hi) - shift) / l.sigma;
                return total_mass_ * scale * normal_mass(ul, uh);
            },
            [&](const DiscreteMarks& d) {
                double sum = 0.0;
                for (const auto& a : d.atoms) {
                    if (a.z >= lo && a.z < hi) {
                        sum += a.weight * (k == 0 ? 1.0 : (k == 1 ? a.z : a.z * a.z));
                    }
                }
                return sum;
            },
        },
        family_);
}

double MarkLaw::moment(int k) const {
    // lo = 0 is inclusive so atoms at zero count.
    return partial_moment(k, 0.0, std::numeric_limits<double>::infinity());
}

double MarkLaw::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("quantile level must lie in (0, 1)");
    }
    return std::visit(overloaded{
                          [&](const ExponentialMarks& e) { return -e.mean * std::log1p(-p); },
                          [&](const LogNormalMarks& l) {
                              const boost::math::normal_distribution<double> n(0.0, 1.0);
                              return std::exp(l.mu + l.sigma * boost::math::quantile(n, p));
                          },
                          [&](const DiscreteMarks& d) {
                              double cum = 0.0;
                              for (const auto& a : d.atoms) {
                                  cum += a.weight;
                                  if (cum >= p * total_mass_) {
                                      return a.z;
                                  }
                              }
                              return d.atoms.back().z;
                          },
                      },
                      family_);
}

std::string MarkLaw::describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(overloaded{
                   [&](const ExponentialMarks& e) { os << "Exponential(mean=" << e.mean; },
                   [&](const LogNormalMarks& l) { os << "LogNormal(mu=" << l.mu << ", sigma=" << l.sigma; },
                   [&](const DiscreteMarks& d) { os << "Discrete(" << d.atoms.size() << " atoms"; },
               },
               family_);
    os << ", mass=" << total_mass_ << ")";
    return os.str();
}

ImpactSpec ImpactSpec::constant(double fbar) {
    if (!std::isfinite(fbar) || fbar < 0.0) {
        throw InvalidArgument("constant impact must be finite and >= 0");
    }
    return ImpactSpec(Kind::Constant, fbar);
}

ImpactSpec ImpactSpec::linear(double lambda) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw InvalidArgument("linear impact Lambda must be finite and >= 0");
    }
    return ImpactSpec(Kind::Linear, lambda);
}

double ImpactSpec::h_f(const MarkLaw& law) const {
    return kind_ == Kind::Constant ? value_ * law.total_mass() : value_ * law.moment(1);
}

double ImpactSpec::h_f_squared(const MarkLaw& law) const {
    return kind_ == Kind::Constant ? value_ * value_ * law.total_mass() : value_ * value_ * law.moment(2);
}

std::string ImpactSpec::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << (kind_ == Kind::Constant ? "Constant(fbar=" : "Linear(Lambda=") << value_ << ")";
    return os.str();
}

double h_integral(const MarkLaw& law, const RealFunction& g) { return h_integral(law, g, {}); }

double h_integral(const MarkLaw& law, const RealFunction& g, std::span<const double> breakpoints) {
    return std::visit(
        overloaded{
            [&](const DiscreteMarks& d) {
                double sum = 0.0;
                for (const auto& a : d.atoms) {
                    sum += a.weight * g(a.z);
                }
                if (!std::isfinite(sum)) {
                    throw IntegrabilityError("integrand is not finite on the atoms");
                }
                return sum;
            },
            [&](const ExponentialMarks& e) {
                // Tail of z^2 e^{-z/mu}/mu beyond 45 mu is ~ 1e-17 of the second moment.
                const double z_cut = 45.0 * e.mean;
                check_tail_growth(g, z_cut);
                const RealFunction integrand = [&](double z) { return g(z) * std::exp(-z / e.mean) / e.mean; };
                std::vector<double> cuts(breakpoints.begin(), breakpoints.end());
                return law.total_mass() * integrate_with_breaks(integrand, 0.0, z_cut, std::move(cuts));
            },
            [&](const LogNormalMarks& l) {
                // Integrate in u = log z. The z^2-weighted law is normal around mu + 2 sigma^2,
                // so +-10 sigma around the relevant centres leaves < 1e-23 of the mass out.
                const double u_lo = l.mu - 10.0 * l.sigma;
                const double u_hi = l.mu + 2.0 * l.sigma * l.sigma + 10.0 * l.sigma;
                check_tail_growth(g, std::exp(u_hi));
                const double inv_norm = 1.0 / (l.sigma * std::sqrt(2.0 * std::numbers::pi));
                const RealFunction integrand = [&](double u) {
                    const double x = (u - l.mu) / l.sigma;
                    return g(std::exp(u)) * inv_norm * std::exp(-0.5 * x * x);
                };
                std::vector<double> cuts;
                cuts.push_back(l.mu);
                for (double b : breakpoints) {
                    if (b > 0.0) {
                        cuts.push_back(std::log(b));
                    }
                }
                // Below exp(u_lo) the integrand is bounded by C (1 + z^2) and the mass is negligible.
                return law.total_mass() * integrate_with_breaks(integrand, u_lo, u_hi, std::move(cuts));
            },
        },
        law.family());
}

double theta_bar(const MarkLaw& law) { return law.moment(1); }

double ergodicity_margin(const MarkLaw& law, const ImpactSpec& impact, double beta) {
    return beta - impact.h_f(law);
}

MarkLaw discretize(const MarkLaw& law, std::size_t n_cells, double z_max) {
    if (n_cells < 1) {
        throw InvalidArgument("discretize needs at least one cell");
    }
    require_positive_finite(z_max, "z_max");
    const double h = z_max / static_cast<double>(n_cells);
    std::vector<Atom> atoms;
    atoms.reserve(n_cells);
    double mass = 0.0;
    for (std::size_t i = 0; i < n_cells; ++i) {
        const double lo = h * static_cast<double>(i);
        const double hi = (i + 1 == n_cells) ? std::numeric_limits<double>::infinity() : h * static_cast<double>(i + 1);
        const double w = law.partial_moment(0, lo, hi);
        if (w <= 0.0) {
            continue;
        }
        double z = std::max(law.partial_moment(1, lo, hi) / w, lo);
        if (!std::isinf(hi)) {
            z = std::min(z, hi);
        }
        atoms.push_back({z, w});
        mass += w;
    }
    return MarkLaw::discrete(std::move(atoms), mass);
}

} // namespace clustre
