#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "opdyn/demarcate.hpp"
#include "opdyn/dynamics.hpp"
#include "opdyn/errors.hpp"
#include "opdyn/events.hpp"
#include "opdyn/graph.hpp"

namespace opdyn {

/// Per-user regularized least-squares data for the opinion parameters.
struct RidgeProblem {
    std::vector<std::vector<Eigen::VectorXd>> rows;  // per user, features of their selected events
    std::vector<std::vector<double>> targets;        // matching marks
    double c = 1.0;
    double sigma = 1.0;
};

struct OpinionParams {
    std::vector<double> alpha;
    std::vector<std::vector<double>> a_in;
};

RidgeProblem build_ridge_problem(const std::vector<FeatureVector>& features,
                                 const EventStream& stream,
                                 const std::vector<std::size_t>& selected,
                                 const SocialGraph& graph, double c, double sigma);

/// Closed-form per-user solve of G_u theta = sigma^{-2} sum m_i phi_i with
/// G_u = c I + sigma^{-2} sum phi_i phi_i^T; the bias entry becomes alpha_u.
OpinionParams fit_opinion(const RidgeProblem& problem, unsigned n_threads = 1);

/// Point-process likelihood data. Excitation vectors and compensator
/// integrals are accumulated over the full combined history; the likelihood
/// sums event terms only over the selected (endogenous) events.
struct IntensityProblem {
    std::vector<std::vector<double>> event_times;            // per user, selected events
    std::vector<std::vector<Eigen::VectorXd>> excitations;   // matching kappa-weighted sums over N(u)
    std::vector<Eigen::VectorXd> compensator;                // per user, per-influencer integral to T
    double horizon = 0.0;
    std::size_t n_users = 0;
};

IntensityProblem build_intensity_problem(const EventStream& stream,
                                         const std::vector<std::size_t>& selected,
                                         const SocialGraph& graph, Kernels kernels);

struct IntensityParams {
    std::vector<double> mu;
    std::vector<std::vector<double>> b_in;
};

/// Log-likelihood of (mu, B): sum over selected events of log lambda at the
/// event minus the integral of lambda over [0, T], both in closed form.
/// Throws BoundaryError if lambda vanishes at an event.
double intensity_loglik(const IntensityParams& params, const IntensityProblem& problem);
IntensityParams intensity_grad(const IntensityParams& params, const IntensityProblem& problem);

struct IntensitySolverConfig {
    double tol = 1e-8;        // relative log-likelihood improvement
    int max_iters = 2000;
    double kkt_tol = 1e-4;    // first-order residual at the returned point
    double armijo = 1e-4;
    unsigned n_threads = 1;
};

struct IntensityFit {
    IntensityParams params;
    std::vector<SolverTraceRow> trace;
};

/// Projected-gradient ascent with backtracking line search from a feasible
/// start (warm-started mu, B = 0). The likelihood never decreases across
/// iterations; non-convergence raises ConvergenceError carrying the trace.
IntensityFit fit_intensity(const IntensityProblem& problem, const IntensitySolverConfig& config);

struct EstimateConfig {
    DemarcationConfig demarcation;
    IntensitySolverConfig solver;
};

struct EstimationResult {
    ModelParams params;
    DemarcationResult demarcation;
    std::vector<SolverTraceRow> solver_trace;
};

/// Full pipeline: demarcate the stream, then fit (A, alpha) by ridge and
/// (mu, B) by maximum likelihood on the selected events, with features and
/// compensators driven by the entire stream.
EstimationResult estimate_all(const EventStream& stream, const SocialGraph& graph,
                              const EstimateConfig& config);

}  // namespace opdyn
