#pragma once

#include <string>
#include <vector>

#include "opdyn/dynamics.hpp"
#include "opdyn/estimate.hpp"
#include "opdyn/events.hpp"
#include "opdyn/graph.hpp"

namespace opdyn {

enum class BaselineMethod { Huber, Lasso, HardThresh, SoftThresh, Slant };

BaselineMethod parse_baseline(const std::string& name);
std::string baseline_name(BaselineMethod m);

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::Huber;
    double huber_c = 1.0;       // quadratic/linear switch at |r| = huber_c / 2
    double c1 = 1e-3;           // parameter regularization weight
    double c2 = 1.0;            // offset (outlier) regularization weight
    double gamma = 0.2;         // target exogenous fraction for HardThresh / Lasso tuning
    int max_iters = 100;
    double tol = 1e-8;
    Kernels kernels;
    double ridge_c = 1.0;       // Slant / intensity-stage ridge constant
    double sigma = 1.0;
    unsigned n_threads = 1;
};

/// Huber piecewise penalty: u^2 on |u| <= c/2, c|u| - c^2/4 beyond.
double huber_rho(double u, double c);
/// S_t(x) = sign(x) max(|x| - t, 0).
double soft_threshold(double x, double threshold);

/// Robust-regression fit of the opinion parameters plus whatever the method
/// says about per-event outliers.
struct RobustFit {
    OpinionParams opinion;
    std::vector<double> offsets;           // per-event o_i (Lasso / SoftThresh)
    std::vector<std::size_t> inliers;      // retained events, ascending
    std::vector<std::size_t> outliers;     // complement, ascending
    std::vector<double> objective_trace;   // objective after each alternation
    double achieved_outlier_fraction = 0.0;
    double tuned_c2 = 0.0;                 // Lasso only
};

/// IRLS minimization of the Huber objective over all events (no filtering,
/// no regularizer). Rank-deficient per-user designs take the minimum-norm
/// solution.
OpinionParams fit_huber(const EventStream& stream, const SocialGraph& graph,
                        const BaselineConfig& config);

/// Alternating minimization of
///   sum (m_i - theta^T phi_i - o_i)^2 + c1 (||A||_1 + ||alpha||_1) + c2 ||o||_1,
/// with c2 bisected until the nonzero-offset fraction lands in gamma +- 0.02.
RobustFit fit_robust_lasso(const EventStream& stream, const SocialGraph& graph,
                           const BaselineConfig& config);

/// Alternating ridge fit / re-selection of the ceil((1-gamma) n) events with
/// the smallest squared residuals. The objective is non-increasing and the
/// loop stops when the inlier set repeats.
RobustFit fit_hard_threshold(const EventStream& stream, const SocialGraph& graph,
                             const BaselineConfig& config);

/// Same alternation as the lasso but with squared (Frobenius/L2)
/// regularization on the parameters and no gamma tuning.
RobustFit fit_soft_threshold(const EventStream& stream, const SocialGraph& graph,
                             const BaselineConfig& config);

/// No filtering: the full estimation pipeline at gamma = 0.
ModelParams fit_slant(const EventStream& stream, const SocialGraph& graph,
                      const BaselineConfig& config);

/// Complete forecast-ready model for any baseline: the method's opinion fit
/// plus an intensity fit on the events the method retained (all of them for
/// Huber and Slant).
struct BaselineModel {
    ModelParams params;
    std::vector<std::size_t> inliers;
    std::vector<std::size_t> outliers;
};

BaselineModel fit_baseline_model(const EventStream& stream, const SocialGraph& graph,
                                 const BaselineConfig& config);

}  // namespace opdyn
