#include "clustre/contracts.hpp"

#include "clustre/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace clustre {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite_nonneg(double x, const char* what) {
    if (!std::isfinite(x) || x < 0.0) {
        throw InvalidArgument(std::string(what) + " must be finite and >= 0");
    }
}

double parse_number(std::string_view text) {
    while (!text.empty() && text.front() == ' ') {
        text.remove_prefix(1);
    }
    while (!text.empty() && text.back() == ' ') {
        text.remove_suffix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw InvalidArgument("contract spec: cannot parse number '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

} // namespace

Contract::Contract(Kind kind, double p1, double p2, std::vector<Knot> knots)
    : kind_(kind), p1_(p1), p2_(p2), knots_(std::move(knots)) {
    switch (kind_) {
    case Kind::Zero:
        pieces_ = {{0.0, kInf, 0.0, 0.0}};
        break;
    case Kind::Full:
        pieces_ = {{0.0, kInf, 1.0, 0.0}};
        break;
    case Kind::Proportional:
        pieces_ = {{0.0, kInf, p1_, 0.0}};
        break;
    case Kind::Deductible:
        pieces_ = {{0.0, p1_, 0.0, 0.0}, {p1_, kInf, 1.0, -p1_}};
        break;
    case Kind::ThreePiece: {
        const double slope = p2_ / (p2_ - p1_);
        pieces_ = {{0.0, p1_, 0.0, 0.0}, {p1_, p2_, slope, -slope * p1_}, {p2_, kInf, 1.0, 0.0}};
        break;
    }
    case Kind::Tabulated:
        for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
            const auto& l = knots_[i];
            const auto& r = knots_[i + 1];
            const double slope = (r.phi - l.phi) / (r.z - l.z);
            pieces_.push_back({l.z, r.z, slope, l.phi - slope * l.z});
        }
        pieces_.push_back({knots_.back().z, kInf, 1.0, knots_.back().phi - knots_.back().z});
        break;
    }
}

Contract Contract::zero() { return Contract(Kind::Zero, 0.0, 0.0, {}); }

Contract Contract::full() { return Contract(Kind::Full, 0.0, 0.0, {}); }

Contract Contract::deductible(double a) {
    require_finite_nonneg(a, "deductible a");
    return Contract(Kind::Deductible, a, 0.0, {});
}

Contract Contract::proportional(double k) {
    if (!(k >= 0.0 && k <= 1.0)) {
        throw InvalidArgument("proportional share k must lie in [0, 1]");
    }
    return Contract(Kind::Proportional, k, 0.0, {});
}

Contract Contract::three_piece(double a, double b) {
    if (!std::isfinite(a) || a <= 0.0) {
        throw InvalidArgument("three-piece contract needs a > 0");
    }
    if (!std::isfinite(b) || b <= a) {
        throw InvalidArgument("three-piece contract needs finite b > a");
    }
    return Contract(Kind::ThreePiece, a, b, {});
}

Contract Contract::tabulated(std::vector<Knot> knots) {
    if (knots.empty()) {
        throw InvalidArgument("tabulated contract needs at least one knot");
    }
    if (knots.front().z != 0.0 || knots.front().phi != 0.0) {
        throw InvalidArgument("tabulated contract must start at the knot (0, 0)");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const auto& k = knots[i];
        if (!std::isfinite(k.z) || !std::isfinite(k.phi)) {
            throw InvalidArgument("tabulated knots must be finite");
        }
        // Both bounds are linear in z, so checking the knots covers every segment.
        if (k.phi < 0.0 || k.phi > k.z) {
            std::ostringstream os;
            os.precision(17);
            os << "tabulated knot " << i << " (z=" << k.z << ", phi=" << k.phi << ") violates 0 <= phi <= z";
            throw InvalidArgument(os.str());
        }
        if (i > 0 && !(k.z > knots[i - 1].z)) {
            throw InvalidArgument("tabulated knots must have strictly increasing z");
        }
    }
    return Contract(Kind::Tabulated, 0.0, 0.0, std::move(knots));
}

double Contract::operator()(double z) const {
    if (!(z >= 0.0)) {
        throw InvalidArgument("contracts are defined on z >= 0");
    }
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::Full:
        return z;
    case Kind::Proportional:
        return p1_ * z;
    case Kind::Deductible:
        return std::max(z - p1_, 0.0);
    case Kind::ThreePiece:
        return std::min(z, p2_ / (p2_ - p1_) * std::max(z - p1_, 0.0));
    case Kind::Tabulated:
        break;
    }
    if (z >= knots_.back().z) {
        return z + (knots_.back().phi - knots_.back().z);
    }
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), z, [](double x, const Knot& k) { return x < k.z; });
    const auto& r = *it;
    const auto& l = *(it - 1);
    const double w = (z - l.z) / (r.z - l.z);
    return l.phi + w * (r.phi - l.phi);
}

std::vector<double> Contract::breakpoints() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
        out.push_back(pieces_[i].lo);
    }
    return out;
}

std::string Contract::to_spec() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
    case Kind::Zero:
        os << "zero";
        break;
    case Kind::Full:
        os << "full";
        break;
    case Kind::Deductible:
        os << "deductible:" << p1_;
        break;
    case Kind::Proportional:
        os << "proportional:" << p1_;
        break;
    case Kind::ThreePiece:
        os << "three_piece:" << p1_ << "," << p2_;
        break;
    case Kind::Tabulated:
        os << "tabulated:";
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            os << (i ? ";" : "") << knots_[i].z << "/" << knots_[i].phi;
        }
        break;
    }
    return os.str();
}

Contract parse_contract(std::string_view spec) {
    const auto colon = spec.find(':');
    const std::string_view name = spec.substr(0, colon);
    const std::string_view args = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
    auto need_args = [&](std::size_t n) {
        const auto parts = args.empty() ? std::vector<std::string_view>{} : split(args, ',');
        if (parts.size() != n) {
            throw InvalidArgument("contract spec '" + std::string(spec) + "' expects " + std::to_string(n) + " argument(s)");
        }
        return parts;
    };
    if (name == "zero") {
        need_args(0);
        return Contract::zero();
    }
    if (name == "full") {
        need_args(0);
        return Contract::full();
    }
    if (name == "deductible") {
        return Contract::deductible(parse_number(need_args(1)[0]));
    }
    if (name == "proportional") {
        return Contract::proportional(parse_number(need_args(1)[0]));
    }
    if (name == "three_piece") {
        const auto p = need_args(2);
        return Contract::three_piece(parse_number(p[0]), parse_number(p[1]));
    }
    if (name == "tabulated") {
        std::vector<Knot> knots;
        for (const auto item : split(args, ';')) {
            const auto pair = split(item, '/');
            if (pair.size() != 2) {
                throw InvalidArgument("tabulated knot '" + std::string(item) + "' must read z/phi");
            }
            knots.push_back({parse_number(pair[0]), parse_number(pair[1])});
        }
        return Contract::tabulated(std::move(knots));
    }
    throw InvalidArgument("unknown contract shape '" + std::string(name) + "'");
}

ContractStats stats(const Contract& contract, const MarkLaw& law, const ImpactSpec& impact, double c) {
    double h_gap = 0.0;
    double h_gap_sq = 0.0;
    double h_z_gap = 0.0;
    double h_phi = 0.0;
    if (law.is_discrete()) {
        // Exact sums on the atoms; the piecewise expansion below cancels badly on steep pieces.
        for (const auto& a : law.atoms()) {
            const double phi = contract(a.z);
            const double gap = phi - a.z;
            h_gap += a.weight * gap;
            h_gap_sq += a.weight * gap * gap;
            h_z_gap += a.weight * a.z * gap;
            h_phi += a.weight * phi;
        }
    } else {
        for (const auto& piece : contract.pieces()) {
            if (!(piece.hi > piece.lo)) {
                continue;
            }
            const double m0 = law.partial_moment(0, piece.lo, piece.hi);
            const double m1 = law.partial_moment(1, piece.lo, piece.hi);
            const double m2 = law.partial_moment(2, piece.lo, piece.hi);
            // phi - z = p z + q on the piece
            const double p = piece.slope - 1.0;
            const double q = piece.intercept;
            h_gap += p * m1 + q * m0;
            h_gap_sq += p * p * m2 + 2.0 * p * q * m1 + q * q * m0;
            h_z_gap += p * m2 + q * m1;
            h_phi += piece.slope * m1 + piece.intercept * m0;
        }
    }
    const double h_f_gap = impact.kind() == ImpactSpec::Kind::Constant ? impact.value() * h_gap : impact.value() * h_z_gap;
    return ContractStats{h_gap, std::max(h_gap_sq, 0.0), h_f_gap, h_phi, c * h_phi};
}

} // namespace clustre
