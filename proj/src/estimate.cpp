#include "opdyn/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "opdyn/detail/parallel.hpp"

namespace opdyn {

namespace {

double negative_infinity() { return -std::numeric_limits<double>::infinity(); }

/// Non-throwing likelihood used inside the line search; boundary points map
/// to -inf instead of raising.
double loglik_or_neg_inf(const IntensityParams& p, const IntensityProblem& prob,
                         unsigned n_threads) {
    std::vector<double> per_user(prob.n_users, 0.0);
    std::atomic<bool> boundary{false};
    detail::parallel_for(prob.n_users, n_threads, [&](std::size_t u) {
        const double mu = p.mu[u];
        const auto& b = p.b_in[u];
        const Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
        double acc = 0.0;
        for (std::size_t i = 0; i < prob.event_times[u].size(); ++i) {
            const double lambda = mu + bv.dot(prob.excitations[u][i]);
            if (!(lambda > 0.0)) {
                boundary.store(true, std::memory_order_relaxed);
                return;
            }
            acc += std::log(lambda);
        }
        acc -= mu * prob.horizon;
        acc -= bv.dot(prob.compensator[u]);
        per_user[u] = acc;
    });
    if (boundary.load()) return negative_infinity();
    return detail::compensated_sum(per_user);
}

}  // namespace

RidgeProblem build_ridge_problem(const std::vector<FeatureVector>& features,
                                 const EventStream& stream,
                                 const std::vector<std::size_t>& selected,
                                 const SocialGraph& graph, double c, double sigma) {
    if (!(c > 0.0)) throw InputError("ridge constant must be positive");
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    RidgeProblem p;
    p.c = c;
    p.sigma = sigma;
    p.rows.resize(graph.n_users());
    p.targets.resize(graph.n_users());
    std::vector<std::size_t> order(selected);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) {
        const UserId u = features.at(i).owner;
        p.rows[u].push_back(features[i].values);
        p.targets[u].push_back(stream[i].sentiment);
    }
    return p;
}

OpinionParams fit_opinion(const RidgeProblem& problem, unsigned n_threads) {
    const std::size_t n = problem.rows.size();
    const double inv_sigma2 = 1.0 / (problem.sigma * problem.sigma);
    OpinionParams out;
    out.alpha.assign(n, 0.0);
    out.a_in.resize(n);

    detail::parallel_for(n, n_threads, [&](std::size_t u) {
        const auto& rows = problem.rows[u];
        if (rows.empty()) {
            // No selected events: the ridge prior mean (all zeros) stands,
            // but the dimension is unknown without a row; leave empty and
            // let the caller size it against the graph.
            return;
        }
        const Eigen::Index d = rows.front().size();
        Eigen::MatrixXd G = problem.c * Eigen::MatrixXd::Identity(d, d);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            G.noalias() += inv_sigma2 * rows[i] * rows[i].transpose();
            rhs.noalias() += inv_sigma2 * problem.targets[u][i] * rows[i];
        }
        const Eigen::VectorXd theta = Eigen::LLT<Eigen::MatrixXd>(G).solve(rhs);
        out.a_in[u].assign(theta.data(), theta.data() + d - 1);
        out.alpha[u] = theta[d - 1];
    });
    return out;
}

IntensityProblem build_intensity_problem(const EventStream& stream,
                                         const std::vector<std::size_t>& selected,
                                         const SocialGraph& graph, Kernels kernels) {
    IntensityProblem p;
    p.n_users = graph.n_users();
    p.horizon = stream.horizon();
    p.event_times.resize(p.n_users);
    p.excitations.resize(p.n_users);
    p.compensator.resize(p.n_users);

    std::vector<char> in_selection(stream.size(), 0);
    for (std::size_t i : selected) in_selection.at(i) = 1;

    DecayState state(p.n_users, kernels);
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const Event& e = stream[i];
        state.advance(e.time);
        if (in_selection[i]) {
            const auto nbrs = graph.in_neighbors(e.user);
            Eigen::VectorXd k(static_cast<Eigen::Index>(nbrs.size()));
            for (std::size_t j = 0; j < nbrs.size(); ++j)
                k[static_cast<Eigen::Index>(j)] = state.intensity_acc(nbrs[j]);
            p.event_times[e.user].push_back(e.time);
            p.excitations[e.user].push_back(std::move(k));
        }
        state.absorb(e);
    }

    // Closed-form kernel integral per source over the full history:
    //   q_v = sum_{events of v} (1 - exp(-nu (T - t_j))) / nu.
    std::vector<double> q(p.n_users, 0.0);
    for (const Event& e : stream.events()) {
        const double dt = p.horizon - e.time;
        q[e.user] += kernels.nu > 0.0 ? (1.0 - std::exp(-kernels.nu * dt)) / kernels.nu : dt;
    }
    for (UserId u = 0; u < p.n_users; ++u) {
        const auto nbrs = graph.in_neighbors(u);
        p.compensator[u].resize(static_cast<Eigen::Index>(nbrs.size()));
        for (std::size_t j = 0; j < nbrs.size(); ++j)
            p.compensator[u][static_cast<Eigen::Index>(j)] = q[nbrs[j]];
    }
    return p;
}

double intensity_loglik(const IntensityParams& params, const IntensityProblem& problem) {
    const double value = loglik_or_neg_inf(params, problem, 1);
    if (value == negative_infinity())
        throw BoundaryError("intensity vanishes at an observed event");
    return value;
}

IntensityParams intensity_grad(const IntensityParams& params, const IntensityProblem& problem) {
    IntensityParams g;
    g.mu.assign(problem.n_users, 0.0);
    g.b_in.resize(problem.n_users);
    for (std::size_t u = 0; u < problem.n_users; ++u) {
        const auto d = problem.compensator[u].size();
        Eigen::VectorXd gb = -problem.compensator[u];
        double gmu = -problem.horizon;
        const Eigen::Map<const Eigen::VectorXd> bv(params.b_in[u].data(),
                                                   static_cast<Eigen::Index>(params.b_in[u].size()));
        for (std::size_t i = 0; i < problem.event_times[u].size(); ++i) {
            const double lambda = params.mu[u] + bv.dot(problem.excitations[u][i]);
            if (!(lambda > 0.0)) throw BoundaryError("intensity vanishes at an observed event");
            gmu += 1.0 / lambda;
            gb.noalias() += problem.excitations[u][i] / lambda;
        }
        g.mu[u] = gmu;
        g.b_in[u].assign(gb.data(), gb.data() + d);
    }
    return g;
}

namespace {

/// Per-user gradient of the likelihood at (mu, b).
void user_gradient(const IntensityProblem& prob, std::size_t u, double mu,
                   const Eigen::VectorXd& b, Eigen::VectorXd& grad) {
    const auto d = prob.compensator[u].size();
    grad.resize(d + 1);
    grad[0] = -prob.horizon;
    grad.tail(d) = -prob.compensator[u];
    for (std::size_t i = 0; i < prob.event_times[u].size(); ++i) {
        const Eigen::VectorXd& k = prob.excitations[u][i];
        const double lambda = mu + b.dot(k);
        if (!(lambda > 0.0)) throw BoundaryError("intensity vanishes at an observed event");
        const double inv = 1.0 / lambda;
        grad[0] += inv;
        grad.tail(d).noalias() += k * inv;
    }
}

/// Ascent direction per user: Newton step of the concave subproblem reduced
/// to the free coordinates (those off their bound or pushing inward). The
/// active-set reduction keeps the direction feasible to first order; the
/// shared Armijo search below guarantees joint likelihood ascent.
void user_newton_direction(const IntensityProblem& prob, std::size_t u, double mu,
                           const Eigen::VectorXd& b, const Eigen::VectorXd& grad,
                           Eigen::VectorXd& dir) {
    const auto d = prob.compensator[u].size();
    dir = Eigen::VectorXd::Zero(d + 1);

    std::vector<Eigen::Index> free;
    if (mu > 0.0 || grad[0] > 0.0) free.push_back(0);
    for (Eigen::Index k = 0; k < d; ++k)
        if (b[k] > 0.0 || grad[k + 1] > 0.0) free.push_back(k + 1);
    if (free.empty()) return;

    const auto f = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(f, f);
    Eigen::VectorXd q(f);
    for (std::size_t i = 0; i < prob.event_times[u].size(); ++i) {
        const Eigen::VectorXd& k = prob.excitations[u][i];
        const double lambda = mu + b.dot(k);
        const double inv = 1.0 / lambda;
        for (Eigen::Index a = 0; a < f; ++a) q[a] = free[a] == 0 ? 1.0 : k[free[a] - 1];
        hess.selfadjointView<Eigen::Lower>().rankUpdate(q, inv * inv);
    }
    Eigen::VectorXd gf(f);
    for (Eigen::Index a = 0; a < f; ++a) gf[a] = grad[free[a]];
    hess.diagonal().array() += 1e-10 * (1.0 + hess.diagonal().maxCoeff());

    const Eigen::VectorXd df = hess.selfadjointView<Eigen::Lower>().ldlt().solve(gf);
    const bool ascent = df.dot(gf) > 0.0 && df.allFinite();
    for (Eigen::Index a = 0; a < f; ++a)
        dir[free[a]] = ascent ? df[a] : gf[a];  // gradient fallback
}

}  // namespace

IntensityFit fit_intensity(const IntensityProblem& problem, const IntensitySolverConfig& config) {
    // Feasible start: small positive base rates, no excitation.
    const std::size_t n = problem.n_users;
    std::vector<double> mu(n, 1e-3);
    std::vector<Eigen::VectorXd> b(n), grad(n), dir(n);
    for (std::size_t u = 0; u < n; ++u)
        b[u] = Eigen::VectorXd::Zero(problem.compensator[u].size());

    const auto to_params = [&](const std::vector<double>& m,
                               const std::vector<Eigen::VectorXd>& bb) {
        IntensityParams p;
        p.mu = m;
        p.b_in.resize(n);
        for (std::size_t u = 0; u < n; ++u)
            p.b_in[u].assign(bb[u].data(), bb[u].data() + bb[u].size());
        return p;
    };

    const auto kkt_residual = [&] {
        double r = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            r = std::max(r, mu[u] > 0.0 ? std::abs(grad[u][0]) : std::max(grad[u][0], 0.0));
            for (Eigen::Index k = 0; k < b[u].size(); ++k)
                r = std::max(r, b[u][k] > 0.0 ? std::abs(grad[u][k + 1])
                                              : std::max(grad[u][k + 1], 0.0));
        }
        return r;
    };

    std::vector<SolverTraceRow> trace;
    double loglik = loglik_or_neg_inf(to_params(mu, b), problem, config.n_threads);
    if (loglik == negative_infinity())
        throw BoundaryError("infeasible starting point for the intensity fit");

    detail::parallel_for(n, config.n_threads,
                         [&](std::size_t u) { user_gradient(problem, u, mu[u], b[u], grad[u]); });

    double residual = 0.0;
    for (int iter = 0; iter < config.max_iters; ++iter) {
        residual = kkt_residual();
        trace.push_back({iter, loglik, residual});
        if (residual < config.kkt_tol) break;

        detail::parallel_for(n, config.n_threads, [&](std::size_t u) {
            user_newton_direction(problem, u, mu[u], b[u], grad[u], dir[u]);
        });

        double step = 1.0;
        std::vector<double> next_mu(n);
        std::vector<Eigen::VectorXd> next_b(n);
        double next_loglik = negative_infinity();
        bool accepted = false;
        for (int halvings = 0; halvings < 80 && !accepted; ++halvings) {
            double directional = 0.0;
            for (std::size_t u = 0; u < n; ++u) {
                next_mu[u] = std::max(0.0, mu[u] + step * dir[u][0]);
                directional += grad[u][0] * (next_mu[u] - mu[u]);
                next_b[u] = (b[u] + step * dir[u].tail(b[u].size())).cwiseMax(0.0);
                directional += grad[u].tail(b[u].size()).dot(next_b[u] - b[u]);
            }
            if (directional <= 0.0) break;  // projected step is stationary
            next_loglik = loglik_or_neg_inf(to_params(next_mu, next_b), problem, config.n_threads);
            if (next_loglik >= loglik + config.armijo * directional)
                accepted = true;
            else
                step *= 0.5;
        }
        if (!accepted) break;

        const double rel = (next_loglik - loglik) / (1.0 + std::abs(next_loglik));
        mu = std::move(next_mu);
        b = std::move(next_b);
        loglik = next_loglik;
        detail::parallel_for(n, config.n_threads, [&](std::size_t u) {
            user_gradient(problem, u, mu[u], b[u], grad[u]);
        });
        if (rel < config.tol) break;
    }

    residual = kkt_residual();
    trace.push_back({static_cast<int>(trace.size()), loglik, residual});
    if (residual >= config.kkt_tol)
        throw ConvergenceError("intensity fit did not reach first-order stationarity (residual " +
                                   std::to_string(residual) + ")",
                               trace);
    return IntensityFit{to_params(mu, b), std::move(trace)};
}

EstimationResult estimate_all(const EventStream& stream, const SocialGraph& graph,
                              const EstimateConfig& config) {
    const auto features = compute_features(stream, graph, config.demarcation.kernels);
    const std::size_t n_select = config.demarcation.selection_size(stream.size());
    DemarcationResult demarcation = greedy_select(features, graph, config.demarcation, n_select);

    const RidgeProblem ridge = build_ridge_problem(features, stream, demarcation.endogenous, graph,
                                                   config.demarcation.c, config.demarcation.sigma);
    OpinionParams opinion = fit_opinion(ridge, config.demarcation.n_threads);

    IntensitySolverConfig solver = config.solver;
    solver.n_threads = config.demarcation.n_threads;
    const IntensityProblem ip =
        build_intensity_problem(stream, demarcation.endogenous, graph, config.demarcation.kernels);
    IntensityFit intensity = fit_intensity(ip, solver);

    ModelParams params;
    params.alpha = std::move(opinion.alpha);
    params.a_in = std::move(opinion.a_in);
    params.mu = std::move(intensity.params.mu);
    params.b_in = std::move(intensity.params.b_in);
    params.sigma = config.demarcation.sigma;
    params.kernels = config.demarcation.kernels;
    for (UserId u = 0; u < graph.n_users(); ++u)
        if (params.a_in[u].empty() && graph.feature_dim(u) > 1)
            params.a_in[u].assign(graph.in_neighbors(u).size(), 0.0);
    return EstimationResult{std::move(params), std::move(demarcation), std::move(intensity.trace)};
}

}  // namespace opdyn
