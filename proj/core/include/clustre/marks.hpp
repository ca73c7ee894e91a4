#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace clustre {

using RealFunction = std::function<double(double)>;

struct ExponentialMarks {
    double mean;
};

struct LogNormalMarks {
    double mu;
    double sigma;
};

struct Atom {
    double z;
    double weight;
};

struct DiscreteMarks {
    std::vector<Atom> atoms;
};

// The claim-size measure Theta(dz) on R+.
//
// Theta is a finite measure of mass total_mass(); with the default mass of 1 it
// is a probability law and the Hawkes intensity counts events per year. All
// families have a finite second moment. Immutable after construction.
class MarkLaw {
public:
    using Family = std::variant<ExponentialMarks, LogNormalMarks, DiscreteMarks>;

    [[nodiscard]] static MarkLaw exponential(double mean, double total_mass = 1.0);
    [[nodiscard]] static MarkLaw lognormal(double mu, double sigma, double total_mass = 1.0);
    /// Total mass is the sum of the weights.
    [[nodiscard]] static MarkLaw discrete(std::vector<Atom> atoms);
    /// Weights must sum to total_mass within 1e-12 relative.
    [[nodiscard]] static MarkLaw discrete(std::vector<Atom> atoms, double total_mass);

    [[nodiscard]] const Family& family() const { return family_; }
    [[nodiscard]] double total_mass() const { return total_mass_; }
    [[nodiscard]] bool is_discrete() const;
    [[nodiscard]] bool has_unbounded_support() const { return !is_discrete(); }
    /// Atoms sorted by z; empty for continuous families.
    [[nodiscard]] std::span<const Atom> atoms() const;

    /// int_{[lo, hi)} z^k Theta(dz) for k in {0, 1, 2}, in closed form for every family.
    [[nodiscard]] double partial_moment(int k, double lo, double hi) const;
    /// int z^k Theta(dz) for k in {0, 1, 2}.
    [[nodiscard]] double moment(int k) const;
    /// Quantile of the normalised law Theta / total_mass.
    [[nodiscard]] double quantile(double p) const;

    [[nodiscard]] std::string describe() const;

private:
    MarkLaw(Family family, double total_mass) : family_(std::move(family)), total_mass_(total_mass) {}

    Family family_;
    double total_mass_;
};

class ImpactSpec {
public:
    enum class Kind { Constant, Linear };

    /// f(z) = fbar
    [[nodiscard]] static ImpactSpec constant(double fbar);
    /// f(z) = Lambda z
    [[nodiscard]] static ImpactSpec linear(double lambda);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double value() const { return value_; }
    [[nodiscard]] bool is_zero() const { return value_ == 0.0; }

    [[nodiscard]] double operator()(double z) const { return kind_ == Kind::Constant ? value_ : value_ * z; }

    /// H[f]
    [[nodiscard]] double h_f(const MarkLaw& law) const;
    /// H[f^2]
    [[nodiscard]] double h_f_squared(const MarkLaw& law) const;

    [[nodiscard]] std::string describe() const;

private:
    ImpactSpec(Kind kind, double value) : kind_(kind), value_(value) {}

    Kind kind_;
    double value_;
};

/// H[g] = int g(z) Theta(dz).
///
/// Discrete laws: exact weighted sum over atoms in z order. Continuous laws:
/// adaptive Gauss-Kronrod on a truncated domain whose omitted z^2-tail is below
/// 1e-12 of the second moment. Throws IntegrabilityError when g grows faster
/// than quadratically or is not finite on the support.
[[nodiscard]] double h_integral(const MarkLaw& law, const RealFunction& g);

/// As above; `breakpoints` are kinks of g, used to split the quadrature domain.
[[nodiscard]] double h_integral(const MarkLaw& law, const RealFunction& g, std::span<const double> breakpoints);

/// Mean claim size, theta_bar = H[I].
[[nodiscard]] double theta_bar(const MarkLaw& law);

/// beta - H[f]; the process is ergodic iff this is strictly positive.
[[nodiscard]] double ergodicity_margin(const MarkLaw& law, const ImpactSpec& impact, double beta);

/// Discretises a law on n uniform cells of [0, z_max): each cell becomes one atom
/// at its conditional mean carrying the cell mass; the last cell absorbs the
/// tail [z_max - h, inf). Preserves total mass and first moment exactly.
[[nodiscard]] MarkLaw discretize(const MarkLaw& law, std::size_t n_cells, double z_max);

} // namespace clustre
