#pragma once

#include "clustre/marks.hpp"
#include "clustre/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace clustre {

// Parameters of the marked Hawkes process
//
//   lambda_t = lambda0 + beta int_0^t (lambda_bar - lambda_s-) ds + sum_{T_i < t} f(Z_i),
//
// with event compensator Theta(dz) lambda_t- dt. Construction enforces
// lambda0 >= lambda_bar > 0 and the ergodicity margin beta - H[f] > 0. The one
// exception is the Poisson branch: beta = 0, H[f] = 0 and lambda0 = lambda_bar,
// i.e. a constant intensity.
class HawkesParams {
public:
    HawkesParams(double lambda0, double lambda_bar, double beta, ImpactSpec impact, MarkLaw marks);

    /// Constant-intensity process encoded as beta = 0, zero impact.
    [[nodiscard]] static HawkesParams poisson(double intensity, MarkLaw marks);

    [[nodiscard]] double lambda0() const { return lambda0_; }
    [[nodiscard]] double lambda_bar() const { return lambda_bar_; }
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] const ImpactSpec& impact() const { return impact_; }
    [[nodiscard]] const MarkLaw& marks() const { return marks_; }

    /// kappa = beta - H[f], the effective decay rate of E[lambda_t].
    [[nodiscard]] double kappa() const { return kappa_; }
    [[nodiscard]] bool is_poisson_branch() const { return beta_ == 0.0; }

private:
    double lambda0_;
    double lambda_bar_;
    double beta_;
    ImpactSpec impact_;
    MarkLaw marks_;
    double kappa_;
};

struct Event {
    double time;
    double mark;
    double intensity_after;  ///< lambda at T_i, including the jump f(Z_i)
};

struct EventPath {
    double horizon = 0.0;
    std::vector<Event> events;
    double terminal_intensity = 0.0;
};

struct SimulationOptions {
    std::size_t max_events = 10'000'000;
};

/// Exact sample on (0, T] by thinning with the current intensity as majorant
/// (valid because lambda only decays between events while lambda >= lambda_bar).
/// Deterministic in (params, T, seed). Throws ClusterExplosion past max_events.
[[nodiscard]] EventPath simulate_path(const HawkesParams& params, double horizon, std::uint64_t seed,
                                      const SimulationOptions& options = {});

/// Left limit lambda_{t-} reconstructed from the recorded events, 0 <= t <= T.
[[nodiscard]] double intensity_at(const EventPath& path, const HawkesParams& params, double t);

/// Simulates n paths with seeds path_seed(seed, i) and calls visit(i, path) for
/// each. Paths may be visited concurrently; visit must only touch slot i.
void simulate_batch(const HawkesParams& params, double horizon, std::uint64_t seed, std::size_t n_paths,
                    const std::function<void(std::size_t, const EventPath&)>& visit,
                    const SimulationOptions& options = {});

} // namespace clustre
