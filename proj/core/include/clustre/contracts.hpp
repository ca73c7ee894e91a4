#pragma once

#include "clustre/marks.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace clustre {

struct Knot {
    double z;
    double phi;
};

/// phi(z) = slope * z + intercept on [lo, hi).
struct LinearPiece {
    double lo;
    double hi;
    double slope;
    double intercept;
};

// A reinsurance contract: a continuous function with 0 <= phi(z) <= z on R+.
//
// Shapes:
//   Zero                phi = 0
//   Full                phi = z
//   Deductible(a)       phi = (z - a)+
//   Proportional(k)     phi = k z,                 k in [0, 1]
//   ThreePiece(a, b)    phi = min{z, b/(b-a) (z - a)+},   0 < a < b
//   Tabulated(knots)    linear interpolation; first knot at z = 0; past the last
//                       knot phi(z) - z stays at its last-knot value.
class Contract {
public:
    enum class Kind { Zero, Full, Deductible, Proportional, ThreePiece, Tabulated };

    [[nodiscard]] static Contract zero();
    [[nodiscard]] static Contract full();
    [[nodiscard]] static Contract deductible(double a);
    [[nodiscard]] static Contract proportional(double k);
    [[nodiscard]] static Contract three_piece(double a, double b);
    [[nodiscard]] static Contract tabulated(std::vector<Knot> knots);

    [[nodiscard]] Kind kind() const { return kind_; }
    /// Deductible/ThreePiece: a; Proportional: k.
    [[nodiscard]] double first_parameter() const { return p1_; }
    /// ThreePiece: b.
    [[nodiscard]] double second_parameter() const { return p2_; }
    [[nodiscard]] const std::vector<Knot>& knots() const { return knots_; }

    [[nodiscard]] double operator()(double z) const;

    /// Exact piecewise-linear representation covering [0, inf).
    [[nodiscard]] const std::vector<LinearPiece>& pieces() const { return pieces_; }
    /// Interior kinks of phi.
    [[nodiscard]] std::vector<double> breakpoints() const;

    /// Round-trippable text form, e.g. "three_piece:1,3" (see parse_contract).
    [[nodiscard]] std::string to_spec() const;

private:
    Contract(Kind kind, double p1, double p2, std::vector<Knot> knots);

    Kind kind_;
    double p1_;
    double p2_;
    std::vector<Knot> knots_;
    std::vector<LinearPiece> pieces_;
};

[[nodiscard]] inline double evaluate(const Contract& contract, double z) { return contract(z); }

/// Parses "zero", "full", "deductible:A", "proportional:K", "three_piece:A,B"
/// and "tabulated:z0/phi0;z1/phi1;...". Throws InvalidArgument.
[[nodiscard]] Contract parse_contract(std::string_view spec);

struct ContractStats {
    double h_gap;     ///< H[phi - I]
    double h_gap_sq;  ///< H[(phi - I)^2]
    double h_f_gap;   ///< H[f (phi - I)]
    double h_phi;     ///< H[phi]
    double cost_rate; ///< c H[phi]
};

/// The H-statistics of a contract, integrated piece by piece against the
/// closed-form partial moments of the law (exact for every family).
[[nodiscard]] ContractStats stats(const Contract& contract, const MarkLaw& law, const ImpactSpec& impact, double c);

} // namespace clustre
