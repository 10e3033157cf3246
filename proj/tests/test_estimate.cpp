#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "opdyn/estimate.hpp"
#include "opdyn/errors.hpp"
#include "oracles.hpp"

using namespace opdyn;

namespace {

/// Noiseless self-consistent stream: every mark equals the latent opinion at
/// its own time, so the generating (A, alpha) is exactly recoverable.
EventStream noiseless_stream(const SocialGraph& g, const ModelParams& p, std::size_t n_events,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<UserId> user(0, static_cast<UserId>(g.n_users() - 1));
    std::uniform_real_distribution<double> gap(0.01, 0.2);

    DecayState state(g.n_users(), p.kernels);
    std::vector<Event> events;
    double t = 0.0;
    for (std::size_t i = 0; i < n_events; ++i) {
        t += gap(rng);
        const UserId u = user(rng);
        state.advance(t);
        Event e{u, state.opinion_at(u, p, g), t, std::nullopt};
        state.absorb(e);
        events.push_back(e);
    }
    return EventStream(std::move(events), t + 1.0);
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

TEST_CASE("ridge fit closed forms") {
    SUBCASE("no events means the prior mean") {
        const SocialGraph g(2, {{1, 0}});
        RidgeProblem p;
        p.rows.resize(2);
        p.targets.resize(2);
        p.c = 1.0;
        p.sigma = 1.0;
        const auto fit = fit_opinion(p);
        CHECK(fit.alpha[0] == 0.0);
        CHECK(fit.alpha[1] == 0.0);
    }
    SUBCASE("single bias-only observation") {
        RidgeProblem p;
        p.rows.resize(1);
        p.targets.resize(1);
        Eigen::VectorXd phi(1);
        phi << 1.0;
        p.rows[0].push_back(phi);
        p.targets[0].push_back(2.0);
        p.c = 1.0;
        p.sigma = 1.0;
        const auto fit = fit_opinion(p);
        CHECK(fit.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.a_in[0].empty());
    }
}

TEST_CASE("ridge fit satisfies its normal equations") {
    std::mt19937_64 rng(101);
    auto inst = oracles::make_random_instance(rng, 4, 3, 60);
    const double c = 0.7, sigma = 1.2;
    const auto ridge =
        build_ridge_problem(inst.features, inst.stream, all_indices(inst.stream.size()),
                            inst.graph, c, sigma);
    const auto fit = fit_opinion(ridge);

    const double inv_sigma2 = 1.0 / (sigma * sigma);
    for (UserId u = 0; u < inst.graph.n_users(); ++u) {
        if (ridge.rows[u].empty()) continue;
        const Eigen::Index d = ridge.rows[u].front().size();
        Eigen::MatrixXd G = c * Eigen::MatrixXd::Identity(d, d);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < ridge.rows[u].size(); ++i) {
            G += inv_sigma2 * ridge.rows[u][i] * ridge.rows[u][i].transpose();
            rhs += inv_sigma2 * ridge.targets[u][i] * ridge.rows[u][i];
        }
        Eigen::VectorXd theta(d);
        for (Eigen::Index k = 0; k + 1 < d; ++k) theta[k] = fit.a_in[u][static_cast<std::size_t>(k)];
        theta[d - 1] = fit.alpha[u];
        CHECK((G * theta - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("near-unregularized ridge recovers noiseless parameters") {
    const SocialGraph g(3, {{0, 1}, {1, 2}, {2, 0}});
    ModelParams truth;
    truth.alpha = {0.4, -0.3, 0.2};
    truth.mu = {0.5, 0.5, 0.5};
    truth.a_in = {{0.8}, {-0.6}, {0.5}};
    truth.b_in = {{0.1}, {0.1}, {0.1}};
    truth.kernels = Kernels{1.0, 10.0};
    const EventStream stream = noiseless_stream(g, truth, 150, 5);

    const auto features = compute_features(stream, g, truth.kernels);
    const auto ridge =
        build_ridge_problem(features, stream, all_indices(stream.size()), g, 1e-6, 1.0);
    const auto fit = fit_opinion(ridge);
    for (UserId u = 0; u < 3; ++u) {
        CHECK(std::abs(fit.alpha[u] - truth.alpha[u]) < 1e-3);
        CHECK(std::abs(fit.a_in[u][0] - truth.a_in[u][0]) < 1e-3);
    }
}

TEST_CASE("intensity log-likelihood closed forms") {
    SUBCASE("homogeneous case") {
        // 10 events on [0, 5] with no edges: loglik(mu) = N log mu - mu T.
        const SocialGraph g(1, {});
        std::vector<Event> events;
        for (int i = 0; i < 10; ++i)
            events.push_back(Event{0, 0.0, 0.5 * i + 0.1, std::nullopt});
        const EventStream stream(std::move(events), 5.0);
        const auto problem =
            build_intensity_problem(stream, all_indices(10), g, Kernels{1.0, 10.0});

        IntensityParams p;
        p.mu = {2.0};
        p.b_in = {{}};
        CHECK(intensity_loglik(p, problem) ==
              doctest::Approx(10.0 * std::log(2.0) - 2.0 * 5.0).epsilon(1e-12));

        // And the maximizer is N / T = 2.
        IntensitySolverConfig cfg;
        cfg.kkt_tol = 1e-8;
        const auto fit = fit_intensity(problem, cfg);
        CHECK(std::abs(fit.params.mu[0] - 2.0) < 1e-6);
    }
    SUBCASE("zero intensity at an event is a boundary error") {
        const SocialGraph g(1, {});
        const EventStream stream({{0, 0.0, 1.0, std::nullopt}}, 2.0);
        const auto problem = build_intensity_problem(stream, {0}, g, Kernels{1.0, 10.0});
        IntensityParams p;
        p.mu = {0.0};
        p.b_in = {{}};
        CHECK_THROWS_AS(intensity_loglik(p, problem), BoundaryError);
    }
}

TEST_CASE("intensity gradient matches central finite differences") {
    std::mt19937_64 rng(202);
    auto inst = oracles::make_random_instance(rng, 3, 2, 40, Kernels{1.0, 5.0});
    const auto problem = build_intensity_problem(inst.stream, all_indices(inst.stream.size()),
                                                 inst.graph, Kernels{1.0, 5.0});

    std::uniform_real_distribution<double> unif(0.2, 1.5);
    for (int rep = 0; rep < 5; ++rep) {
        IntensityParams p;
        p.mu.resize(3);
        p.b_in.resize(3);
        for (UserId u = 0; u < 3; ++u) {
            p.mu[u] = unif(rng);
            p.b_in[u].resize(inst.graph.in_neighbors(u).size());
            for (auto& b : p.b_in[u]) b = unif(rng);
        }
        const auto g = intensity_grad(p, problem);
        const double h = 1e-6;
        const auto check_coord = [&](double& coord, double analytic) {
            const double keep = coord;
            coord = keep + h;
            const double up = intensity_loglik(p, problem);
            coord = keep - h;
            const double down = intensity_loglik(p, problem);
            coord = keep;
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(analytic - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        };
        for (UserId u = 0; u < 3; ++u) {
            check_coord(p.mu[u], g.mu[u]);
            for (std::size_t k = 0; k < p.b_in[u].size(); ++k)
                check_coord(p.b_in[u][k], g.b_in[u][k]);
        }
    }
}

TEST_CASE("intensity likelihood is concave along random segments") {
    std::mt19937_64 rng(203);
    auto inst = oracles::make_random_instance(rng, 3, 2, 30, Kernels{1.0, 5.0});
    const auto problem = build_intensity_problem(inst.stream, all_indices(inst.stream.size()),
                                                 inst.graph, Kernels{1.0, 5.0});
    std::uniform_real_distribution<double> unif(0.05, 2.0);

    const auto random_point = [&] {
        IntensityParams p;
        p.mu.resize(3);
        p.b_in.resize(3);
        for (UserId u = 0; u < 3; ++u) {
            p.mu[u] = unif(rng);
            p.b_in[u].resize(inst.graph.in_neighbors(u).size());
            for (auto& b : p.b_in[u]) b = unif(rng);
        }
        return p;
    };
    const auto midpoint = [&](const IntensityParams& a, const IntensityParams& b) {
        IntensityParams m = a;
        for (UserId u = 0; u < 3; ++u) {
            m.mu[u] = 0.5 * (a.mu[u] + b.mu[u]);
            for (std::size_t k = 0; k < m.b_in[u].size(); ++k)
                m.b_in[u][k] = 0.5 * (a.b_in[u][k] + b.b_in[u][k]);
        }
        return m;
    };
    for (int rep = 0; rep < 200; ++rep) {
        const auto a = random_point();
        const auto b = random_point();
        const double la = intensity_loglik(a, problem);
        const double lb = intensity_loglik(b, problem);
        const double lm = intensity_loglik(midpoint(a, b), problem);
        CHECK(lm >= 0.5 * (la + lb) - 1e-9);
    }
}

TEST_CASE("projected gradient fit") {
    std::mt19937_64 rng(204);

    SUBCASE("excitation-free data drives B toward zero") {
        // Poisson events with mu = 0.8 per user on a graph that has edges.
        const SocialGraph g(3, {{0, 1}, {1, 2}, {2, 0}});
        std::vector<Event> events;
        std::exponential_distribution<double> expo(0.8);
        const double horizon = 600.0;
        for (UserId u = 0; u < 3; ++u) {
            double t = expo(rng);
            while (t < horizon) {
                events.push_back(Event{u, 0.0, t, std::nullopt});
                t += expo(rng);
            }
        }
        const EventStream stream(std::move(events), horizon);
        const auto problem = build_intensity_problem(stream, all_indices(stream.size()), g,
                                                     Kernels{1.0, 10.0});
        const auto fit = fit_intensity(problem, IntensitySolverConfig{});
        for (UserId u = 0; u < 3; ++u) {
            const double n_u = static_cast<double>(problem.event_times[u].size());
            CHECK(std::abs(fit.params.mu[u] - n_u / horizon) / (n_u / horizon) < 0.1);
            for (double b : fit.params.b_in[u]) CHECK(b < 1e-3);
        }

        // MLE dominance over the generating parameters on this sample.
        IntensityParams truth;
        truth.mu = {0.8, 0.8, 0.8};
        truth.b_in = {{0.0}, {0.0}, {0.0}};
        CHECK(intensity_loglik(fit.params, problem) >= intensity_loglik(truth, problem) - 1e-9);
    }
    SUBCASE("deterministic across runs and monotone in likelihood") {
        auto inst = oracles::make_random_instance(rng, 3, 2, 50, Kernels{1.0, 5.0});
        const auto problem = build_intensity_problem(inst.stream, all_indices(inst.stream.size()),
                                                     inst.graph, Kernels{1.0, 5.0});
        const auto a = fit_intensity(problem, IntensitySolverConfig{});
        const auto b = fit_intensity(problem, IntensitySolverConfig{});
        CHECK(a.params.mu == b.params.mu);
        CHECK(a.params.b_in == b.params.b_in);
        for (std::size_t i = 1; i + 1 < a.trace.size(); ++i)
            CHECK(a.trace[i].loglik >= a.trace[i - 1].loglik - 1e-12);
    }
}

TEST_CASE("estimate_all composition") {
    std::mt19937_64 rng(205);
    auto inst = oracles::make_random_instance(rng, 4, 3, 60, Kernels{1.0, 5.0});

    SUBCASE("gamma zero keeps the whole stream") {
        EstimateConfig cfg;
        cfg.demarcation.gamma = 0.0;
        cfg.demarcation.kernels = Kernels{1.0, 5.0};
        const auto result = estimate_all(inst.stream, inst.graph, cfg);
        CHECK(result.demarcation.exogenous.empty());
        CHECK(result.params.alpha.size() == inst.graph.n_users());
        result.params.validate(inst.graph);
    }
    SUBCASE("positive gamma filters and still fits") {
        EstimateConfig cfg;
        cfg.demarcation.gamma = 0.25;
        cfg.demarcation.kernels = Kernels{1.0, 5.0};
        const auto result = estimate_all(inst.stream, inst.graph, cfg);
        CHECK(result.demarcation.endogenous.size() == cfg.demarcation.selection_size(60));
        result.params.validate(inst.graph);
    }
}
