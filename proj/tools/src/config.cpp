#include "clustre/cli/config.hpp"

#include "clustre/errors.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <array>
#include <fstream>
#include <sstream>

namespace clustre::cli {
namespace {

class Reader {
public:
    explicit Reader(std::string file) : file_(std::move(file)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
        std::ostringstream os;
        os << file_;
        if (node.IsDefined() && node.Mark().line >= 0) {
            os << ':' << node.Mark().line + 1 << ':' << node.Mark().column + 1;
        }
        os << ": " << what;
        throw ConfigError(os.str());
    }

    YAML::Node section(const YAML::Node& root, const std::string& key) const {
        const YAML::Node node = root[key];
        if (!node) {
            fail(root, "missing section '" + key + "'");
        }
        if (!node.IsMap()) {
            fail(node, "section '" + key + "' must be a mapping");
        }
        return node;
    }

    template <class T>
    T required(const YAML::Node& parent, const std::string& key, const std::string& where) const {
        const YAML::Node node = parent[key];
        if (!node) {
            fail(parent, "missing required key '" + where + "." + key + "'");
        }
        return as<T>(node, where + "." + key);
    }

    template <class T>
    T optional(const YAML::Node& parent, const std::string& key, const std::string& where, T fallback) const {
        const YAML::Node node = parent[key];
        return node ? as<T>(node, where + "." + key) : fallback;
    }

    template <class T>
    T as(const YAML::Node& node, const std::string& name) const {
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, "cannot read '" + name + "' as " + type_name<T>());
        }
    }

    // Wraps construction so module-level validation errors point at the section.
    template <class F>
    auto attribute(const YAML::Node& node, F&& make) const {
        try {
            return make();
        } catch (const Error& e) {
            fail(node, e.what());
        }
    }

private:
    template <class T>
    static std::string type_name() {
        if constexpr (std::is_same_v<T, double>) {
            return "a number";
        } else if constexpr (std::is_same_v<T, std::string>) {
            return "a string";
        } else if constexpr (std::is_integral_v<T>) {
            return "a non-negative integer";
        } else {
            return "the expected type";
        }
    }

    std::string file_;
};

ImpactSpec read_impact(const Reader& r, const YAML::Node& hawkes) {
    const YAML::Node node = hawkes["impact"];
    if (!node) {
        r.fail(hawkes, "missing required key 'hawkes.impact'");
    }
    if (!node.IsMap()) {
        r.fail(node, "'hawkes.impact' must be a mapping with 'kind' and 'value'");
    }
    const auto kind = r.required<std::string>(node, "kind", "hawkes.impact");
    const auto value = r.required<double>(node, "value", "hawkes.impact");
    return r.attribute(node, [&] {
        if (kind == "constant") {
            return ImpactSpec::constant(value);
        }
        if (kind == "linear") {
            return ImpactSpec::linear(value);
        }
        throw InvalidArgument("unknown impact kind '" + kind + "' (expected constant or linear)");
    });
}

MarkLaw read_marks(const Reader& r, const YAML::Node& marks) {
    const auto family = r.required<std::string>(marks, "family", "marks");
    const double mass = r.optional<double>(marks, "total_mass", "marks", 1.0);
    if (family == "exponential") {
        const auto mean = r.required<double>(marks, "mean", "marks");
        return r.attribute(marks, [&] { return MarkLaw::exponential(mean, mass); });
    }
    if (family == "lognormal") {
        const auto mu = r.required<double>(marks, "mu", "marks");
        const auto sigma = r.required<double>(marks, "sigma", "marks");
        return r.attribute(marks, [&] { return MarkLaw::lognormal(mu, sigma, mass); });
    }
    if (family == "discrete") {
        const YAML::Node atoms = marks["atoms"];
        if (!atoms || !atoms.IsSequence() || atoms.size() == 0) {
            r.fail(atoms ? atoms : marks, "'marks.atoms' must be a non-empty list of [z, weight] pairs");
        }
        std::vector<Atom> list;
        for (const auto& a : atoms) {
            if (!a.IsSequence() || a.size() != 2) {
                r.fail(a, "each atom must be a pair [z, weight]");
            }
            list.push_back({r.as<double>(a[0], "marks.atoms.z"), r.as<double>(a[1], "marks.atoms.weight")});
        }
        return r.attribute(marks, [&] {
            return marks["total_mass"] ? MarkLaw::discrete(std::move(list), mass) : MarkLaw::discrete(std::move(list));
        });
    }
    r.fail(marks["family"], "unknown mark family '" + family + "' (expected exponential, lognormal or discrete)");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open config file");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const Reader r(path.string());
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        std::ostringstream os;
        os << path.string() << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
        throw ConfigError(os.str());
    }
    if (!root.IsMap()) {
        throw ConfigError(path.string() + ": top level must be a mapping");
    }

    const YAML::Node hawkes = r.section(root, "hawkes");
    const YAML::Node marks = r.section(root, "marks");
    const YAML::Node economic = r.section(root, "economic");

    const MarkLaw law = read_marks(r, marks);
    const ImpactSpec impact = read_impact(r, hawkes);
    const auto lambda0 = r.required<double>(hawkes, "lambda0", "hawkes");
    const auto lambda_bar = r.required<double>(hawkes, "lambda_bar", "hawkes");
    const auto beta = r.required<double>(hawkes, "beta", "hawkes");
    const HawkesParams params = r.attribute(hawkes, [&] { return HawkesParams(lambda0, lambda_bar, beta, impact, law); });

    EconomicParams econ{r.required<double>(economic, "R0", "economic"), r.required<double>(economic, "rho", "economic"),
                        r.required<double>(economic, "c", "economic"), r.required<double>(economic, "gamma", "economic"),
                        r.required<double>(economic, "T", "economic")};
    r.attribute(economic, [&] {
        econ.validate();
        return 0;
    });

    RunOptions run;
    if (const YAML::Node node = root["run"]) {
        if (!node.IsMap()) {
            r.fail(node, "section 'run' must be a mapping");
        }
        if (node["seed"]) {
            run.seed = r.as<std::uint64_t>(node["seed"], "run.seed");
        }
        run.n_paths = r.optional<std::size_t>(node, "n_paths", "run", run.n_paths);
        run.output_dir = r.optional<std::string>(node, "output_dir", "run", run.output_dir.string());
        run.moments_grid = r.optional<std::size_t>(node, "moments_grid", "run", run.moments_grid);
        if (node["contract"]) {
            run.contract = r.as<std::string>(node["contract"], "run.contract");
        }
        if (const YAML::Node grid = node["lambda_grid"]) {
            run.lambda_grid = r.as<std::vector<double>>(grid, "run.lambda_grid");
        }
        run.qp_atoms = r.optional<std::size_t>(node, "qp_atoms", "run", run.qp_atoms);
        run.qp_z_max = r.optional<double>(node, "qp_z_max", "run", run.qp_z_max);
        run.region_grid = r.optional<std::size_t>(node, "region_grid", "run", run.region_grid);
        run.validate_paths = r.optional<std::size_t>(node, "validate_paths", "run", run.validate_paths);
        run.validate_fast_paths = r.optional<std::size_t>(node, "validate_fast_paths", "run", run.validate_fast_paths);
        if (run.qp_atoms < 2 || run.qp_atoms > 10'000) {
            r.fail(node["qp_atoms"], "'run.qp_atoms' must lie in [2, 10000]");
        }
        if (run.qp_z_max < 0.0) {
            r.fail(node["qp_z_max"], "'run.qp_z_max' must be >= 0");
        }
    }

    return ScenarioConfig{path, sha256_hex(text), params, econ, std::move(run)};
}

} // namespace clustre::cli
