#include "opdyn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "opdyn/detail/parallel.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

namespace {

struct Design {
    std::vector<FeatureVector> features;
    std::vector<double> marks;
    std::vector<std::vector<std::size_t>> by_user;
};

Design build_design(const EventStream& stream, const SocialGraph& graph, Kernels kernels) {
    Design d;
    d.features = compute_features(stream, graph, kernels);
    d.marks.reserve(stream.size());
    for (const Event& e : stream.events()) d.marks.push_back(e.sentiment);
    d.by_user.resize(graph.n_users());
    for (std::size_t i = 0; i < d.features.size(); ++i)
        d.by_user[d.features[i].owner].push_back(i);
    return d;
}

std::vector<Eigen::VectorXd> zero_thetas(const SocialGraph& graph) {
    std::vector<Eigen::VectorXd> theta(graph.n_users());
    for (UserId u = 0; u < graph.n_users(); ++u)
        theta[u] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.feature_dim(u)));
    return theta;
}

std::vector<double> residuals(const Design& d, const std::vector<Eigen::VectorXd>& theta) {
    std::vector<double> r(d.features.size());
    for (std::size_t i = 0; i < d.features.size(); ++i)
        r[i] = d.marks[i] - theta[d.features[i].owner].dot(d.features[i].values);
    return r;
}

OpinionParams thetas_to_params(const std::vector<Eigen::VectorXd>& theta) {
    OpinionParams p;
    p.alpha.resize(theta.size());
    p.a_in.resize(theta.size());
    for (std::size_t u = 0; u < theta.size(); ++u) {
        const auto d = theta[u].size();
        p.a_in[u].assign(theta[u].data(), theta[u].data() + d - 1);
        p.alpha[u] = theta[u][d - 1];
    }
    return p;
}

/// Ridge step of the thresholding objectives:
///   (1/n) sum_{i in active} (y_i - theta^T phi_i)^2 + c1 ||theta||^2
/// solved per user in closed form.
std::vector<Eigen::VectorXd> ridge_step(const Design& d, const std::vector<double>& targets,
                                        const std::vector<char>& active, double c1,
                                        std::size_t n_total, const SocialGraph& graph,
                                        unsigned n_threads) {
    std::vector<Eigen::VectorXd> theta = zero_thetas(graph);
    detail::parallel_for(graph.n_users(), n_threads, [&](std::size_t u) {
        const auto dim = theta[u].size();
        Eigen::MatrixXd G = c1 * static_cast<double>(n_total) *
                            Eigen::MatrixXd::Identity(dim, dim);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
        for (std::size_t i : d.by_user[u]) {
            if (!active[i]) continue;
            G.noalias() += d.features[i].values * d.features[i].values.transpose();
            rhs.noalias() += targets[i] * d.features[i].values;
        }
        theta[u] = Eigen::LLT<Eigen::MatrixXd>(G).solve(rhs);
    });
    return theta;
}

/// Cyclic coordinate descent for the per-user lasso
///   sum_i (y_i - theta^T phi_i)^2 + c1 ||theta||_1.
void lasso_step(const Design& d, const std::vector<double>& targets, double c1,
                std::vector<Eigen::VectorXd>& theta, const SocialGraph& graph, double tol,
                unsigned n_threads) {
    detail::parallel_for(graph.n_users(), n_threads, [&](std::size_t u) {
        const auto& idx = d.by_user[u];
        const auto dim = theta[u].size();
        if (idx.empty()) {
            theta[u].setZero();
            return;
        }
        Eigen::VectorXd z(dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            double s = 0.0;
            for (std::size_t i : idx) {
                const double v = d.features[i].values[j];
                s += v * v;
            }
            z[j] = s;
        }
        std::vector<double> fitted(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k)
            fitted[k] = theta[u].dot(d.features[idx[k]].values);

        for (int pass = 0; pass < 200; ++pass) {
            double max_delta = 0.0;
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (z[j] == 0.0) continue;
                double rho = 0.0;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    const double v = d.features[idx[k]].values[j];
                    rho += v * (targets[idx[k]] - fitted[k] + theta[u][j] * v);
                }
                const double updated = soft_threshold(rho, c1 / 2.0) / z[j];
                const double delta = updated - theta[u][j];
                if (delta != 0.0) {
                    for (std::size_t k = 0; k < idx.size(); ++k)
                        fitted[k] += delta * d.features[idx[k]].values[j];
                    theta[u][j] = updated;
                }
                max_delta = std::max(max_delta, std::abs(delta));
            }
            if (max_delta < tol) break;
        }
    });
}

}  // namespace

BaselineMethod parse_baseline(const std::string& name) {
    if (name == "huber") return BaselineMethod::Huber;
    if (name == "lasso") return BaselineMethod::Lasso;
    if (name == "hard") return BaselineMethod::HardThresh;
    if (name == "soft") return BaselineMethod::SoftThresh;
    if (name == "slant") return BaselineMethod::Slant;
    throw InputError("unknown baseline '" + name + "', expected huber|lasso|hard|soft|slant");
}

std::string baseline_name(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::Huber: return "huber";
        case BaselineMethod::Lasso: return "lasso";
        case BaselineMethod::HardThresh: return "hard";
        case BaselineMethod::SoftThresh: return "soft";
        case BaselineMethod::Slant: return "slant";
    }
    return "?";
}

double huber_rho(double u, double c) {
    const double a = std::abs(u);
    return a <= c / 2.0 ? u * u : c * a - c * c / 4.0;
}

double soft_threshold(double x, double threshold) {
    if (x > threshold) return x - threshold;
    if (x < -threshold) return x + threshold;
    return 0.0;
}

OpinionParams fit_huber(const EventStream& stream, const SocialGraph& graph,
                        const BaselineConfig& config) {
    if (!(config.huber_c > 0.0)) throw InputError("huber_c must be positive");
    const Design d = build_design(stream, graph, config.kernels);
    auto theta = zero_thetas(graph);
    std::vector<double> weights(d.features.size(), 1.0);

    const auto weighted_solve = [&](std::size_t u) {
        const auto& idx = d.by_user[u];
        const auto dim = theta[u].size();
        if (idx.empty()) {
            theta[u].setZero();
            return;
        }
        Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), dim);
        Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const double sw = std::sqrt(weights[idx[k]]);
            X.row(static_cast<Eigen::Index>(k)) = sw * d.features[idx[k]].values.transpose();
            y[static_cast<Eigen::Index>(k)] = sw * d.marks[idx[k]];
        }
        theta[u] = X.completeOrthogonalDecomposition().solve(y);
    };

    bool converged = false;
    std::vector<SolverTraceRow> trace;
    for (int iter = 0; iter < config.max_iters; ++iter) {
        const auto previous = theta;
        detail::parallel_for(graph.n_users(), config.n_threads, weighted_solve);
        const auto r = residuals(d, theta);
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double a = std::abs(r[i]);
            weights[i] = a <= config.huber_c / 2.0 ? 1.0 : (config.huber_c / 2.0) / a;
        }
        double delta = 0.0;
        for (std::size_t u = 0; u < theta.size(); ++u)
            if (theta[u].size() > 0)
                delta = std::max(delta, (theta[u] - previous[u]).cwiseAbs().maxCoeff());
        double objective = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) objective += huber_rho(r[i], config.huber_c);
        trace.push_back({iter, objective, delta});
        if (iter > 0 && delta < config.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("Huber IRLS did not converge within max_iters", trace);
    return thetas_to_params(theta);
}

namespace {

RobustFit run_lasso_alternation(const Design& d, const SocialGraph& graph,
                                const BaselineConfig& config, double c2) {
    const std::size_t n = d.features.size();
    std::vector<double> offsets(n, 0.0);
    auto theta = zero_thetas(graph);
    RobustFit fit;

    double prev_obj = std::numeric_limits<double>::infinity();
    std::vector<double> targets(n, 0.0);
    for (int iter = 0; iter < config.max_iters; ++iter) {
        for (std::size_t i = 0; i < n; ++i) targets[i] = d.marks[i] - offsets[i];
        lasso_step(d, targets, config.c1, theta, graph, config.tol, config.n_threads);

        const auto r = residuals(d, theta);
        for (std::size_t i = 0; i < n; ++i) offsets[i] = soft_threshold(r[i], c2 / 2.0);

        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = r[i] - offsets[i];
            obj += e * e + c2 * std::abs(offsets[i]);
        }
        for (const auto& th : theta) obj += config.c1 * th.cwiseAbs().sum();
        fit.objective_trace.push_back(obj);
        if (std::abs(prev_obj - obj) <= config.tol * (1.0 + std::abs(obj))) break;
        prev_obj = obj;
    }

    fit.opinion = thetas_to_params(theta);
    fit.offsets = offsets;
    std::size_t n_out = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (offsets[i] != 0.0) {
            fit.outliers.push_back(i);
            ++n_out;
        } else {
            fit.inliers.push_back(i);
        }
    }
    fit.achieved_outlier_fraction = n == 0 ? 0.0 : static_cast<double>(n_out) / static_cast<double>(n);
    fit.tuned_c2 = c2;
    return fit;
}

}  // namespace

RobustFit fit_robust_lasso(const EventStream& stream, const SocialGraph& graph,
                           const BaselineConfig& config) {
    if (!(config.c1 > 0.0 && config.c2 > 0.0)) throw InputError("c1 and c2 must be positive");
    if (!(config.gamma >= 0.0 && config.gamma < 1.0)) throw InputError("gamma must lie in [0,1)");
    const Design d = build_design(stream, graph, config.kernels);
    const double band = 0.02;

    // Larger c2 kills more offsets, so the outlier fraction is non-increasing
    // in c2; bracket then bisect.
    double hi = config.c2;
    RobustFit fit = run_lasso_alternation(d, graph, config, hi);
    int guard = 0;
    while (fit.achieved_outlier_fraction > config.gamma + band && guard++ < 60) {
        hi *= 2.0;
        fit = run_lasso_alternation(d, graph, config, hi);
    }
    if (std::abs(fit.achieved_outlier_fraction - config.gamma) <= band) return fit;

    double lo = 0.0;
    for (int step = 0; step < 50; ++step) {
        const double mid = (lo + hi) / 2.0;
        fit = run_lasso_alternation(d, graph, config, mid);
        if (std::abs(fit.achieved_outlier_fraction - config.gamma) <= band) return fit;
        if (fit.achieved_outlier_fraction > config.gamma)
            lo = mid;
        else
            hi = mid;
    }
    throw ConvergenceError(
        "lasso bisection missed the target exogenous fraction (achieved " +
            std::to_string(fit.achieved_outlier_fraction) + ", target " +
            std::to_string(config.gamma) + ")",
        {});
}

RobustFit fit_hard_threshold(const EventStream& stream, const SocialGraph& graph,
                             const BaselineConfig& config) {
    if (!(config.gamma >= 0.0 && config.gamma < 1.0)) throw InputError("gamma must lie in [0,1)");
    const Design d = build_design(stream, graph, config.kernels);
    const std::size_t n = d.features.size();
    const auto n_in = static_cast<std::size_t>(
        std::ceil((1.0 - config.gamma) * static_cast<double>(n) - 1e-9));

    std::vector<char> active(n, 1);
    RobustFit fit;
    auto theta = zero_thetas(graph);
    for (int iter = 0; iter < config.max_iters; ++iter) {
        theta = ridge_step(d, d.marks, active, config.c1, n, graph, config.n_threads);
        const auto r = residuals(d, theta);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return r[a] * r[a] < r[b] * r[b];
        });
        std::vector<char> next(n, 0);
        for (std::size_t k = 0; k < n_in; ++k) next[order[k]] = 1;

        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (next[i]) obj += r[i] * r[i];
        obj /= static_cast<double>(n);
        for (const auto& th : theta) obj += config.c1 * th.squaredNorm();
        fit.objective_trace.push_back(obj);

        if (next == active) break;
        active = std::move(next);
    }

    fit.opinion = thetas_to_params(theta);
    for (std::size_t i = 0; i < n; ++i)
        (active[i] ? fit.inliers : fit.outliers).push_back(i);
    fit.achieved_outlier_fraction =
        n == 0 ? 0.0 : static_cast<double>(fit.outliers.size()) / static_cast<double>(n);
    return fit;
}

RobustFit fit_soft_threshold(const EventStream& stream, const SocialGraph& graph,
                             const BaselineConfig& config) {
    if (!(config.c1 > 0.0 && config.c2 > 0.0)) throw InputError("c1 and c2 must be positive");
    const Design d = build_design(stream, graph, config.kernels);
    const std::size_t n = d.features.size();
    const std::vector<char> all(n, 1);

    std::vector<double> offsets(n, 0.0);
    std::vector<double> targets(n, 0.0);
    auto theta = zero_thetas(graph);
    RobustFit fit;
    double prev_obj = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.max_iters; ++iter) {
        for (std::size_t i = 0; i < n; ++i) targets[i] = d.marks[i] - offsets[i];
        theta = ridge_step(d, targets, all, config.c1, n, graph, config.n_threads);

        const auto r = residuals(d, theta);
        const double threshold = config.c2 * static_cast<double>(n) / 2.0;
        for (std::size_t i = 0; i < n; ++i) offsets[i] = soft_threshold(r[i], threshold);

        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = r[i] - offsets[i];
            obj += e * e / static_cast<double>(n) + config.c2 * std::abs(offsets[i]);
        }
        for (const auto& th : theta) obj += config.c1 * th.squaredNorm();
        fit.objective_trace.push_back(obj);
        if (std::abs(prev_obj - obj) <= config.tol * (1.0 + std::abs(obj))) break;
        prev_obj = obj;
    }

    fit.opinion = thetas_to_params(theta);
    fit.offsets = offsets;
    for (std::size_t i = 0; i < n; ++i)
        (offsets[i] == 0.0 ? fit.inliers : fit.outliers).push_back(i);
    fit.achieved_outlier_fraction =
        n == 0 ? 0.0 : static_cast<double>(fit.outliers.size()) / static_cast<double>(n);
    return fit;
}

ModelParams fit_slant(const EventStream& stream, const SocialGraph& graph,
                      const BaselineConfig& config) {
    EstimateConfig ec;
    ec.demarcation.criterion = Criterion::T;
    ec.demarcation.gamma = 0.0;
    ec.demarcation.c = config.ridge_c;
    ec.demarcation.sigma = config.sigma;
    ec.demarcation.kernels = config.kernels;
    ec.demarcation.n_threads = config.n_threads;
    ec.solver.n_threads = config.n_threads;
    return estimate_all(stream, graph, ec).params;
}

BaselineModel fit_baseline_model(const EventStream& stream, const SocialGraph& graph,
                                 const BaselineConfig& config) {
    BaselineModel model;
    std::vector<std::size_t> retained(stream.size());
    std::iota(retained.begin(), retained.end(), 0);

    OpinionParams opinion;
    switch (config.method) {
        case BaselineMethod::Slant: {
            model.params = fit_slant(stream, graph, config);
            model.inliers = std::move(retained);
            return model;
        }
        case BaselineMethod::Huber:
            opinion = fit_huber(stream, graph, config);
            break;
        case BaselineMethod::Lasso: {
            RobustFit fit = fit_robust_lasso(stream, graph, config);
            opinion = std::move(fit.opinion);
            retained = std::move(fit.inliers);
            model.outliers = std::move(fit.outliers);
            break;
        }
        case BaselineMethod::HardThresh: {
            RobustFit fit = fit_hard_threshold(stream, graph, config);
            opinion = std::move(fit.opinion);
            retained = std::move(fit.inliers);
            model.outliers = std::move(fit.outliers);
            break;
        }
        case BaselineMethod::SoftThresh: {
            RobustFit fit = fit_soft_threshold(stream, graph, config);
            opinion = std::move(fit.opinion);
            retained = std::move(fit.inliers);
            model.outliers = std::move(fit.outliers);
            break;
        }
    }

    IntensitySolverConfig solver;
    solver.n_threads = config.n_threads;
    const IntensityProblem ip = build_intensity_problem(stream, retained, graph, config.kernels);
    IntensityFit intensity = fit_intensity(ip, solver);

    model.params.alpha = std::move(opinion.alpha);
    model.params.a_in = std::move(opinion.a_in);
    model.params.mu = std::move(intensity.params.mu);
    model.params.b_in = std::move(intensity.params.b_in);
    model.params.sigma = config.sigma;
    model.params.kernels = config.kernels;
    model.inliers = std::move(retained);
    return model;
}

}  // namespace opdyn
