#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "opdyn/dynamics.hpp"
#include "opdyn/events.hpp"
#include "opdyn/graph.hpp"

namespace opdyn {

/// Experimental-design criterion used to score a candidate endogenous set.
enum class Criterion { A, D, E, T };

Criterion parse_criterion(char c);
char criterion_name(Criterion x);

struct DemarcationConfig {
    Criterion criterion = Criterion::D;
    double gamma = 0.2;    // presumed exogenous fraction, in [0,1)
    double c = 1.0;        // ridge constant, > 0
    double sigma = 1.0;    // mark noise scale, > 0
    Kernels kernels;       // feature kernels for replays from raw streams
    unsigned n_threads = 1;

    /// Cardinality of the selected endogenous set for a stream of n events.
    std::size_t selection_size(std::size_t n_events) const;
};

/// Per-user regularized Gram blocks
///   G_u = c I + sigma^{-2} sum_{selected events of u} phi phi^T,
/// whose block-diagonal inverse is the estimation covariance. All four
/// selection objectives reduce to Gram-side quantities, so the covariance is
/// never materialized:
///   f_A = -sum_u tr(G_u^{-1})      f_D = sum_u logdet(G_u)
///   f_E = -max_u 1/lambda_min(G_u) f_T = sum_u tr(G_u)
/// Inverses are maintained by Sherman-Morrison rank-one updates and
/// re-factorized periodically and whenever drift exceeds 1e-8.
class GramState {
public:
    GramState(const SocialGraph& graph, double c, double sigma);
    /// Abstract design space: one block per entry of `block_dims`.
    GramState(std::vector<std::size_t> block_dims, double c, double sigma);

    double ridge_c() const noexcept { return c_; }
    double sigma() const noexcept { return sigma_; }
    std::size_t n_blocks() const noexcept { return blocks_.size(); }

    double objective(Criterion x) const;

    /// Exact marginal gain of adding an event with feature phi for user u;
    /// the state is left untouched.
    double marginal_gain(UserId u, const Eigen::VectorXd& phi, Criterion x) const;

    /// Rank-one commit of the event into its owner's block.
    void commit(UserId u, const Eigen::VectorXd& phi);

    const Eigen::MatrixXd& gram(UserId u) const { return blocks_.at(u).G; }
    const Eigen::MatrixXd& gram_inverse(UserId u) const { return blocks_.at(u).G_inv; }
    double log_det(UserId u) const { return blocks_.at(u).logdet; }
    double trace_inverse(UserId u) const { return blocks_.at(u).trace_inv; }
    double lambda_min(UserId u) const;

    /// Smallest block eigenvalue over all users except u (the full minimum
    /// when u's block is not the unique argmin).
    double min_lambda_excluding(UserId u) const;
    double min_lambda() const;

    /// Bumped on every commit to u's block; lets callers cache per-block work.
    std::uint64_t version(UserId u) const { return blocks_.at(u).version; }

    double inverse_drift(UserId u) const;
    void refactor(UserId u);

private:
    struct Block {
        Eigen::MatrixXd G;
        Eigen::MatrixXd G_inv;
        std::vector<Eigen::VectorXd> committed;
        double logdet = 0.0;
        double trace_inv = 0.0;
        double trace = 0.0;
        std::uint64_t version = 0;
        unsigned commits_since_refactor = 0;
        mutable double lambda_min = 0.0;
        mutable bool eig_fresh = true;
    };

    void refresh_eig(const Block& b) const;
    void refresh_min_cache() const;

    std::vector<Block> blocks_;
    double c_ = 1.0;
    double sigma_ = 1.0;
    double inv_sigma2_ = 1.0;
    double sum_logdet_ = 0.0;
    double sum_trace_inv_ = 0.0;
    double sum_trace_ = 0.0;
    mutable bool min_cache_fresh_ = false;
    mutable double min1_ = 0.0;
    mutable double min2_ = 0.0;
    mutable UserId min1_user_ = 0;
};

struct DemarcationResult {
    std::vector<std::size_t> endogenous;     // selected event indices, pick order
    std::vector<std::size_t> exogenous;      // complement, ascending
    std::vector<double> gains;               // marginal gain per pick
    std::vector<double> objective_trace;     // objective value after each pick
};

/// Greedy maximization of the selection objective over precomputed features.
/// Plain greedy for every criterion; per-block gain caching makes it run at
/// lazy-greedy cost while returning the plain-greedy set. Ties break toward
/// the lowest event index, and gains are evaluated into per-candidate slots,
/// so the result is identical for any thread count.
DemarcationResult greedy_select(const std::vector<FeatureVector>& features,
                                const SocialGraph& graph, const DemarcationConfig& config,
                                std::size_t n_select);

/// Full demarcation: features from a replay of the stream, then greedy
/// selection of ceil((1-gamma) n) events.
DemarcationResult cherry_pick(const EventStream& stream, const SocialGraph& graph,
                              const DemarcationConfig& config);

struct WeakSubmodularityConstants {
    double c_h = 0.0;
    double eps_h = 0.0;
};

/// Exhaustive evaluation of the multiplicative and additive weak-submodularity
/// constants over all nested pairs. Only instances with at most 14 events are
/// accepted. Gains are computed with the same rank-one identities the greedy
/// selector uses.
WeakSubmodularityConstants weak_submodularity_constants(const EventStream& stream,
                                                        const SocialGraph& graph,
                                                        const DemarcationConfig& config);
WeakSubmodularityConstants weak_submodularity_constants(const std::vector<FeatureVector>& features,
                                                        const SocialGraph& graph,
                                                        const DemarcationConfig& config);

/// CSV rows `event_index,assigned_label,step,gain`; step and gain are empty
/// on exogenous rows.
void save_demarcation(const DemarcationResult& result, std::size_t n_events,
                      const std::filesystem::path& path);

}  // namespace opdyn
