#include "opdyn/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <vector>

#include "opdyn/detail/parallel.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

namespace {

double mu_sum(const ModelParams& params) {
    double s = 0.0;
    for (double m : params.mu) s += m;
    return s;
}

/// Incremental per-user intensity alongside a DecayState. Every excitation
/// term decays at the same rate, so advancing scales the excess over the base
/// rate uniformly; absorbing an event adds the poster's out-edge weights to
/// the followers.
class IntensityTracker {
public:
    IntensityTracker(const SocialGraph& graph, const ModelParams& params)
        : graph_(&graph), params_(&params), excess_(graph.n_users(), 0.0),
          mu_total_(mu_sum(params)) {}

    void decay(double dt) {
        const double w = std::exp(-params_->kernels.nu * dt);
        for (double& e : excess_) e *= w;
        excess_total_ *= w;
    }

    void add_event(UserId poster) {
        for (UserId f : graph_->out_neighbors(poster)) {
            const auto nbrs = graph_->in_neighbors(f);
            const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), poster);
            const double b = params_->b_in[f][static_cast<std::size_t>(it - nbrs.begin())];
            excess_[f] += b;
            excess_total_ += b;
        }
    }

    double total() const { return mu_total_ + excess_total_; }

    double total_after(double dt) const {
        return mu_total_ + excess_total_ * std::exp(-params_->kernels.nu * dt);
    }

    /// Draws the poster proportionally to per-user intensity.
    UserId pick_user(double uniform01) const {
        double target = uniform01 * total();
        double acc = 0.0;
        const std::size_t n = excess_.size();
        for (std::size_t u = 0; u < n; ++u) {
            acc += params_->mu[u] + excess_[u];
            if (target < acc) return static_cast<UserId>(u);
        }
        return static_cast<UserId>(n - 1);
    }

private:
    const SocialGraph* graph_;
    const ModelParams* params_;
    std::vector<double> excess_;
    double excess_total_ = 0.0;
    double mu_total_ = 0.0;
};

/// Ogata thinning over (t, until]. The cursor, decay state and tracker stay
/// consistent on exit, so the walk can be resumed with a later wall (the
/// exponential clock is memoryless). `make_event` reads the latent state at
/// the event time before the event is absorbed.
template <typename MarkFn>
void run_thinning(DecayState& state, IntensityTracker& tracker, double& t, double until,
                  std::size_t max_events, std::mt19937_64& rng, std::vector<Event>& out,
                  MarkFn&& make_event) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    while (true) {
        const double bound = tracker.total();
        if (!(bound > 0.0)) {
            t = until;
            return;
        }
        const double wait = expo(rng) / bound;
        if (t + wait >= until) {
            tracker.decay(until - t);
            t = until;
            return;
        }
        // Intensity is non-increasing between events, so the pre-decay total
        // dominates over the whole waiting interval.
        const double total_next = tracker.total_after(wait);
        tracker.decay(wait);
        t += wait;
        if (unif(rng) * bound > total_next) continue;

        const UserId poster = tracker.pick_user(unif(rng));
        state.advance(t);
        Event e = make_event(poster, t, rng);
        if (!std::isfinite(e.sentiment) || std::abs(e.sentiment) > 1e6)
            throw NumericError("opinion dynamics diverged (mark magnitude blew up); "
                               "check the coupling strength against the opinion decay rate");
        out.push_back(e);
        if (out.size() > max_events)
            throw SizeError("event cap of " + std::to_string(max_events) + " exceeded");
        state.absorb(e);
        tracker.add_event(poster);
    }
}

}  // namespace

ModelParams sample_params(const SocialGraph& graph, std::uint64_t rng_seed, Kernels kernels) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const std::size_t n = graph.n_users();
    ModelParams p;
    p.kernels = kernels;
    p.sigma = 1.0;
    p.alpha.resize(n);
    p.mu.resize(n);
    p.a_in.resize(n);
    p.b_in.resize(n);
    for (UserId u = 0; u < n; ++u) {
        p.alpha[u] = normal(rng);
        p.mu[u] = unif(rng);
        const std::size_t deg = graph.in_neighbors(u).size();
        p.a_in[u].resize(deg);
        p.b_in[u].resize(deg);
        for (std::size_t k = 0; k < deg; ++k) p.a_in[u][k] = normal(rng);
        for (std::size_t k = 0; k < deg; ++k) p.b_in[u][k] = unif(rng);
    }
    return p;
}

double branching_spectral_radius(const ModelParams& params, const SocialGraph& graph) {
    const std::size_t n = graph.n_users();
    if (n == 0 || params.kernels.nu <= 0.0) return 0.0;
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), y(n, 0.0);
    double radius = 0.0;
    for (int iter = 0; iter < 60; ++iter) {
        for (UserId u = 0; u < n; ++u) {
            const auto nbrs = graph.in_neighbors(u);
            double acc = 0.0;
            for (std::size_t k = 0; k < nbrs.size(); ++k)
                acc += params.b_in[u][k] * x[nbrs[k]];
            y[u] = acc / params.kernels.nu;
        }
        double norm = 0.0;
        for (double v : y) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (UserId u = 0; u < n; ++u) x[u] = y[u] / norm;
        radius = norm;
    }
    return radius;
}

EventStream simulate_stream(const SocialGraph& graph, const ModelParams& params,
                            const SimConfig& config) {
    params.validate(graph);
    if (!(config.exo_probability >= 0.0 && config.exo_probability <= 1.0))
        throw InputError("exo_probability must lie in [0,1]");
    if (!(config.exo_mark_std > 0.0)) throw InputError("exo_mark_std must be positive");
    if (!(config.exo_mark_mean_prior_std >= 0.0))
        throw InputError("exo_mark_mean_prior_std must be non-negative");

    const double radius = branching_spectral_radius(params, graph);
    if (radius >= 1.0)
        std::cerr << "warning: excitation spectral radius " << radius
                  << " >= 1, intensity may not die out\n";

    std::mt19937_64 rng(config.rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // One exogenous mark mean per stream; drawn unconditionally so the RNG
    // stream does not depend on exo_probability.
    const double exo_mean =
        config.exo_mark_mean_offset + config.exo_mark_mean_prior_std * normal(rng);

    DecayState state(graph.n_users(), params.kernels);
    IntensityTracker tracker(graph, params);
    std::vector<Event> events;

    // The label coin and one unit normal are consumed for every accepted
    // event on both label paths, keeping the thinning draws aligned when
    // exo_probability changes.
    const auto make_event = [&](UserId poster, double when, std::mt19937_64& r) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> z01(0.0, 1.0);
        const bool exo = u01(r) < config.exo_probability;
        const double z = z01(r);
        Event e;
        e.user = poster;
        e.time = when;
        if (exo) {
            e.sentiment = exo_mean + config.exo_mark_std * z;
            e.label = EventLabel::Exo;
        } else {
            e.sentiment = state.opinion_at(poster, params, graph) + params.sigma * z;
            e.label = EventLabel::Endo;
        }
        return e;
    };

    double cursor = 0.0;
    double horizon = config.horizon;
    if (config.target_events_per_node) {
        if (!(*config.target_events_per_node > 0.0))
            throw InputError("target_events_per_node must be positive");
        const double target_total =
            *config.target_events_per_node * static_cast<double>(graph.n_users());
        const double base_rate = std::max(mu_sum(params), 1e-12);
        const double chunk = std::max(1.0, target_total / base_rate / 8.0);
        double wall = 0.0;
        while (static_cast<double>(events.size()) < target_total) {
            wall += chunk;
            run_thinning(state, tracker, cursor, wall, config.max_events, rng, events,
                         make_event);
        }
        horizon = std::nextafter(events.back().time, std::numeric_limits<double>::infinity());
    } else {
        if (!(horizon > 0.0)) throw InputError("horizon must be positive");
        run_thinning(state, tracker, cursor, horizon, config.max_events, rng, events,
                     make_event);
    }
    return EventStream(std::move(events), horizon);
}

double forecast(UserId u, double t, const EventStream& history, const ModelParams& params,
                const SocialGraph& graph, const ForecastConfig& config) {
    params.validate(graph);
    if (!(config.lookahead >= 0.0)) throw InputError("lookahead must be non-negative");
    if (config.n_samples < 1) throw InputError("n_samples must be at least 1");

    const double cutoff = std::max(0.0, t - config.lookahead);
    DecayState base(graph.n_users(), params.kernels);
    IntensityTracker base_tracker(graph, params);
    double last = 0.0;
    for (const Event& e : history.events()) {
        if (e.time >= cutoff) break;
        base.absorb(e);
        base_tracker.decay(e.time - last);
        base_tracker.add_event(e.user);
        last = e.time;
    }

    if (config.lookahead == 0.0) {
        DecayState state = base;
        state.advance(t);
        return state.opinion_at(u, params, graph);
    }

    // Bring state and tracker to the window start once; rollouts clone them.
    base_tracker.decay(cutoff - last);
    base.advance(cutoff);

    std::vector<double> samples(config.n_samples, 0.0);
    detail::parallel_for(config.n_samples, config.n_threads, [&](std::size_t k) {
        std::mt19937_64 rng(config.rng_seed + k);
        DecayState state = base;
        IntensityTracker tracker = base_tracker;
        std::vector<Event> rollout;
        const auto make_event = [&](UserId poster, double when, std::mt19937_64& r) {
            std::normal_distribution<double> z01(0.0, 1.0);
            Event e;
            e.user = poster;
            e.time = when;
            e.sentiment = state.opinion_at(poster, params, graph) + params.sigma * z01(r);
            return e;
        };
        double cursor = cutoff;
        run_thinning(state, tracker, cursor, t, std::size_t{10'000'000}, rng, rollout,
                     make_event);
        state.advance(t);
        samples[k] = state.opinion_at(u, params, graph);
    });
    return detail::compensated_sum(samples) / static_cast<double>(config.n_samples);
}

}  // namespace opdyn
