#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "opdyn/events.hpp"
#include "opdyn/graph.hpp"

namespace opdyn {

/// Exponential triggering kernels: g(t) = exp(-omega t) weights opinion
/// influence, kappa(t) = exp(-nu t) weights intensity excitation.
struct Kernels {
    double omega = 1000.0;
    double nu = 10.0;
};

/// Full generative parameter set. Edge weights are stored per user, aligned
/// with SocialGraph::in_neighbors(u): a_in[u][k] couples the k-th influencer
/// of u into u's opinion, b_in[u][k] into u's intensity.
struct ModelParams {
    std::vector<double> alpha;
    std::vector<double> mu;                   // >= 0
    std::vector<std::vector<double>> a_in;
    std::vector<std::vector<double>> b_in;    // >= 0
    double sigma = 1.0;                       // mark noise scale, > 0
    Kernels kernels;

    void validate(const SocialGraph& graph) const;
};

/// JSON with dense alpha/mu arrays and (v,u,value) triplet lists for A and B.
ModelParams load_params(const std::filesystem::path& path, const SocialGraph& graph);
void save_params(const ModelParams& params, const SocialGraph& graph,
                 const std::filesystem::path& path);

/// Per-event regression vector: decayed mark sums of the owner's influencers
/// in in_neighbors order, with a trailing bias entry fixed at 1.
struct FeatureVector {
    UserId owner = 0;
    Eigen::VectorXd values;
};

/// Exponentially decayed per-user accumulators over the combined history:
///   opinion_acc[v]   = sum of zeta_j * exp(-omega (t - t_j)) over v's posts,
///   intensity_acc[v] = sum of         exp(-nu    (t - t_j)) over v's posts.
/// Advancing by dt multiplies every accumulator by the matching decay factor,
/// so a replay is exact without revisiting the history.
class DecayState {
public:
    DecayState(std::size_t n_users, Kernels kernels);

    double time() const noexcept { return time_; }
    const Kernels& kernels() const noexcept { return kernels_; }

    /// Decays all accumulators to `to_time`. Throws OrderingError on regression.
    void advance(double to_time);

    /// advance(event.time), then add the event's mark / unit to its poster.
    /// Every event feeds the state the same way regardless of its label.
    void absorb(const Event& event);

    /// Left-continuous feature of user u at the current state time: an event
    /// absorbed at time t is visible to features of strictly later queries
    /// and to same-time events absorbed after it in stream order.
    FeatureVector feature_at(UserId u, const SocialGraph& graph) const;

    double opinion_at(UserId u, const ModelParams& params, const SocialGraph& graph) const;
    double intensity_at(UserId u, const ModelParams& params, const SocialGraph& graph) const;

    double opinion_acc(UserId u) const { return opinion_acc_.at(u); }
    double intensity_acc(UserId u) const { return intensity_acc_.at(u); }

private:
    std::vector<double> opinion_acc_;
    std::vector<double> intensity_acc_;
    double time_ = 0.0;
    Kernels kernels_;
};

/// One replay of the stream producing every event's feature vector over the
/// full combined history (an event's own mark never enters its own feature).
std::vector<FeatureVector> compute_features(const EventStream& stream, const SocialGraph& graph,
                                            Kernels kernels);

}  // namespace opdyn
