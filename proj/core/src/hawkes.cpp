#include "clustre/hawkes.hpp"

#include "clustre/errors.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <variant>

namespace clustre {
namespace {

class MarkSampler {
public:
    explicit MarkSampler(const MarkLaw& law) : family_(&law.family()) {
        if (const auto* d = std::get_if<DiscreteMarks>(family_)) {
            std::vector<double> weights;
            weights.reserve(d->atoms.size());
            for (const auto& a : d->atoms) {
                weights.push_back(a.weight);
            }
            discrete_ = std::discrete_distribution<std::size_t>::param_type(weights.begin(), weights.end());
        }
    }

    double operator()(Engine& rng) const {
        if (const auto* e = std::get_if<ExponentialMarks>(family_)) {
            return std::exponential_distribution<double>(1.0 / e->mean)(rng);
        }
        if (const auto* l = std::get_if<LogNormalMarks>(family_)) {
            return std::lognormal_distribution<double>(l->mu, l->sigma)(rng);
        }
        const auto& atoms = std::get<DiscreteMarks>(*family_).atoms;
        std::discrete_distribution<std::size_t> pick;
        return atoms[pick(rng, discrete_)].z;
    }

private:
    const MarkLaw::Family* family_;
    std::discrete_distribution<std::size_t>::param_type discrete_;
};

EventPath simulate_with(const HawkesParams& params, double horizon, std::uint64_t seed, const MarkSampler& sample_mark,
                        const SimulationOptions& options) {
    Engine rng(seed);
    std::exponential_distribution<double> unit_exp(1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double mass = params.marks().total_mass();
    const double lambda_bar = params.lambda_bar();
    const double beta = params.beta();
    const auto& impact = params.impact();

    EventPath path;
    path.horizon = horizon;
    double t = 0.0;
    double lambda = params.lambda0();

    auto record = [&](double time, double mark) {
        if (path.events.size() >= options.max_events) {
            throw ClusterExplosion("event count exceeded " + std::to_string(options.max_events) +
                                   " before the horizon; the cluster is exploding");
        }
        lambda += impact(mark);
        path.events.push_back({time, mark, lambda});
    };

    if (params.is_poisson_branch()) {
        const double rate = lambda * mass;
        while (true) {
            t += unit_exp(rng) / rate;
            if (t > horizon) {
                break;
            }
            record(t, sample_mark(rng));
        }
        path.terminal_intensity = lambda;
        return path;
    }

    while (true) {
        // lambda is non-increasing until the next event, so its current value bounds it.
        const double majorant = lambda;
        const double wait = unit_exp(rng) / (majorant * mass);
        if (t + wait > horizon) {
            lambda = lambda_bar + (lambda - lambda_bar) * std::exp(-beta * (horizon - t));
            break;
        }
        t += wait;
        lambda = lambda_bar + (lambda - lambda_bar) * std::exp(-beta * wait);
        if (unit(rng) * majorant <= lambda) {
            record(t, sample_mark(rng));
        }
    }
    path.terminal_intensity = lambda;
    return path;
}

} // namespace

HawkesParams::HawkesParams(double lambda0, double lambda_bar, double beta, ImpactSpec impact, MarkLaw marks)
    : lambda0_(lambda0), lambda_bar_(lambda_bar), beta_(beta), impact_(impact), marks_(std::move(marks)) {
    if (!std::isfinite(lambda_bar_) || lambda_bar_ <= 0.0) {
        throw InvalidArgument("lambda_bar must be positive and finite");
    }
    if (!std::isfinite(lambda0_) || lambda0_ < lambda_bar_) {
        throw InvalidArgument("lambda0 must be finite and >= lambda_bar");
    }
    if (!std::isfinite(beta_) || beta_ < 0.0) {
        throw InvalidArgument("beta must be finite and >= 0");
    }
    const double h_f = impact_.h_f(marks_);
    kappa_ = beta_ - h_f;
    if (beta_ == 0.0) {
        if (h_f != 0.0 || lambda0_ != lambda_bar_) {
            throw InvalidArgument("beta = 0 is only admitted for the Poisson branch (zero impact, lambda0 = lambda_bar)");
        }
        return;
    }
    if (!(kappa_ > 0.0)) {
        throw InvalidArgument("ergodicity condition H[f] < beta violated (margin " + std::to_string(kappa_) + ")");
    }
}

HawkesParams HawkesParams::poisson(double intensity, MarkLaw marks) {
    return HawkesParams(intensity, intensity, 0.0, ImpactSpec::constant(0.0), std::move(marks));
}

EventPath simulate_path(const HawkesParams& params, double horizon, std::uint64_t seed, const SimulationOptions& options) {
    if (!std::isfinite(horizon) || horizon <= 0.0) {
        throw InvalidArgument("simulation horizon must be positive and finite");
    }
    const MarkSampler sampler(params.marks());
    return simulate_with(params, horizon, seed, sampler, options);
}

double intensity_at(const EventPath& path, const HawkesParams& params, double t) {
    if (!(t >= 0.0 && t <= path.horizon)) {
        throw InvalidArgument("intensity_at: t outside [0, T]");
    }
    const double lambda_bar = params.lambda_bar();
    const double beta = params.beta();
    double lambda = params.lambda0();
    double s = 0.0;
    for (const auto& e : path.events) {
        if (e.time >= t) {
            break;
        }
        lambda = lambda_bar + (lambda - lambda_bar) * std::exp(-beta * (e.time - s));
        lambda += params.impact()(e.mark);
        s = e.time;
    }
    return lambda_bar + (lambda - lambda_bar) * std::exp(-beta * (t - s));
}

void simulate_batch(const HawkesParams& params, double horizon, std::uint64_t seed, std::size_t n_paths,
                    const std::function<void(std::size_t, const EventPath&)>& visit, const SimulationOptions& options) {
    if (!std::isfinite(horizon) || horizon <= 0.0) {
        throw InvalidArgument("simulation horizon must be positive and finite");
    }
    const MarkSampler sampler(params.marks());
    std::mutex failure_mutex;
    std::size_t failure_index = std::numeric_limits<std::size_t>::max();
    std::exception_ptr failure;

    const auto n = static_cast<std::int64_t>(n_paths);
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            const EventPath path = simulate_with(params, horizon, path_seed(seed, idx), sampler, options);
            visit(idx, path);
        } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (idx < failure_index) {
                failure_index = idx;
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace clustre
