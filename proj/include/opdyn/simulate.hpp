#pragma once

#include <cstdint>
#include <optional>

#include "opdyn/dynamics.hpp"
#include "opdyn/events.hpp"
#include "opdyn/graph.hpp"

namespace opdyn {

struct SimConfig {
    double horizon = 10.0;
    double exo_probability = 0.2;
    double exo_mark_mean_prior_std = 1.0;    // std of the once-per-stream mean draw
    double exo_mark_std = 0.31622776601683794;  // sqrt(0.1)
    double exo_mark_mean_offset = 0.0;
    std::uint64_t rng_seed = 0;
    std::size_t max_events = 2'000'000;
    /// When set, the horizon is extended until the mean per-user event count
    /// reaches this value; cfg.horizon is then ignored.
    std::optional<double> target_events_per_node;
};

/// Random generative parameters: alpha and A entries standard normal, mu and
/// B entries uniform on [0,1]; kernel rates and sigma from `kernels`/defaults.
ModelParams sample_params(const SocialGraph& graph, std::uint64_t rng_seed,
                          Kernels kernels = Kernels{});

/// Largest-magnitude eigenvalue estimate of the excitation matrix B / nu;
/// values >= 1 mean the event cascade does not die out.
double branching_spectral_radius(const ModelParams& params, const SocialGraph& graph);

/// Ogata thinning on the mutually-exciting intensity. Every accepted event is
/// independently flagged exogenous with exo_probability; exogenous events
/// keep their sampled time but draw their mark from the stream-level noise
/// distribution instead of the latent opinion. All events, either kind, feed
/// the decay state identically.
EventStream simulate_stream(const SocialGraph& graph, const ModelParams& params,
                            const SimConfig& config);

struct ForecastConfig {
    double lookahead = 0.0;
    std::size_t n_samples = 1;
    std::uint64_t rng_seed = 0;
    unsigned n_threads = 1;
};

/// Monte-Carlo conditional mean of the latent opinion of user u at time t,
/// rolling the process forward over (t - lookahead, t] from the truncated
/// history. Rollout k is seeded with rng_seed + k and results are combined
/// in index order, so the value is independent of scheduling.
double forecast(UserId u, double t, const EventStream& history, const ModelParams& params,
                const SocialGraph& graph, const ForecastConfig& config);

}  // namespace opdyn
