#include "opdyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "opdyn/detail/csv.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

void ModelParams::validate(const SocialGraph& graph) const {
    const std::size_t n = graph.n_users();
    if (alpha.size() != n || mu.size() != n || a_in.size() != n || b_in.size() != n)
        throw InputError("parameter arrays do not match the graph's user count");
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    if (!(kernels.omega >= 0.0) || !(kernels.nu >= 0.0))
        throw InputError("kernel rates must be non-negative");
    for (std::size_t u = 0; u < n; ++u) {
        const std::size_t deg = graph.in_neighbors(static_cast<UserId>(u)).size();
        if (a_in[u].size() != deg || b_in[u].size() != deg)
            throw InputError("edge weights for user " + std::to_string(u) +
                             " do not match the in-neighborhood");
        if (!(mu[u] >= 0.0)) throw InputError("mu must be non-negative");
        for (double b : b_in[u])
            if (!(b >= 0.0)) throw InputError("B entries must be non-negative");
    }
}

ModelParams load_params(const std::filesystem::path& path, const SocialGraph& graph) {
    nlohmann::json j;
    detail::open_input(path) >> j;

    ModelParams p;
    p.alpha = j.at("alpha").get<std::vector<double>>();
    p.mu = j.at("mu").get<std::vector<double>>();
    p.sigma = j.at("sigma").get<double>();
    p.kernels.omega = j.at("omega").get<double>();
    p.kernels.nu = j.at("nu").get<double>();

    const std::size_t n = graph.n_users();
    p.a_in.assign(n, {});
    p.b_in.assign(n, {});
    for (UserId u = 0; u < n; ++u) {
        p.a_in[u].assign(graph.in_neighbors(u).size(), 0.0);
        p.b_in[u].assign(graph.in_neighbors(u).size(), 0.0);
    }
    const auto fill = [&](const char* key, std::vector<std::vector<double>>& dst) {
        for (const auto& triplet : j.at(key)) {
            const auto v = triplet.at(0).get<UserId>();
            const auto u = triplet.at(1).get<UserId>();
            const auto value = triplet.at(2).get<double>();
            if (u >= n) throw InputError("parameter triplet references unknown user");
            const auto nbrs = graph.in_neighbors(u);
            const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v);
            if (it == nbrs.end() || *it != v)
                throw InputError("parameter triplet (" + std::to_string(v) + "," +
                                 std::to_string(u) + ") is not a graph edge");
            dst[u][static_cast<std::size_t>(it - nbrs.begin())] = value;
        }
    };
    fill("A", p.a_in);
    fill("B", p.b_in);
    p.validate(graph);
    return p;
}

void save_params(const ModelParams& params, const SocialGraph& graph,
                 const std::filesystem::path& path) {
    params.validate(graph);
    nlohmann::json j;
    j["alpha"] = params.alpha;
    j["mu"] = params.mu;
    j["sigma"] = params.sigma;
    j["omega"] = params.kernels.omega;
    j["nu"] = params.kernels.nu;

    nlohmann::json a = nlohmann::json::array();
    nlohmann::json b = nlohmann::json::array();
    for (UserId u = 0; u < params.a_in.size(); ++u) {
        const auto nbrs = graph.in_neighbors(u);
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            a.push_back({nbrs[k], u, params.a_in[u][k]});
            b.push_back({nbrs[k], u, params.b_in[u][k]});
        }
    }
    j["A"] = a;
    j["B"] = b;
    detail::open_output(path) << j.dump(2) << "\n";
}

DecayState::DecayState(std::size_t n_users, Kernels kernels)
    : opinion_acc_(n_users, 0.0), intensity_acc_(n_users, 0.0), kernels_(kernels) {}

void DecayState::advance(double to_time) {
    if (to_time < time_) throw OrderingError("decay state cannot advance backwards in time");
    const double dt = to_time - time_;
    if (dt == 0.0) return;
    const double ow = std::exp(-kernels_.omega * dt);
    const double iw = std::exp(-kernels_.nu * dt);
    for (double& a : opinion_acc_) a *= ow;
    for (double& a : intensity_acc_) a *= iw;
    time_ = to_time;
}

void DecayState::absorb(const Event& event) {
    if (event.time < time_) throw OrderingError("event absorbed out of order");
    advance(event.time);
    opinion_acc_[event.user] += event.sentiment;
    intensity_acc_[event.user] += 1.0;
}

FeatureVector DecayState::feature_at(UserId u, const SocialGraph& graph) const {
    if (u >= opinion_acc_.size()) throw InputError("unknown user in feature query");
    const auto nbrs = graph.in_neighbors(u);
    FeatureVector phi;
    phi.owner = u;
    phi.values.resize(static_cast<Eigen::Index>(nbrs.size()) + 1);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(nbrs.size()); ++k)
        phi.values[k] = opinion_acc_[nbrs[static_cast<std::size_t>(k)]];
    phi.values[phi.values.size() - 1] = 1.0;
    return phi;
}

double DecayState::opinion_at(UserId u, const ModelParams& params, const SocialGraph& graph) const {
    const auto nbrs = graph.in_neighbors(u);
    double x = params.alpha.at(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
        x += params.a_in[u][k] * opinion_acc_[nbrs[k]];
    return x;
}

double DecayState::intensity_at(UserId u, const ModelParams& params, const SocialGraph& graph) const {
    const auto nbrs = graph.in_neighbors(u);
    double lambda = params.mu.at(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
        lambda += params.b_in[u][k] * intensity_acc_[nbrs[k]];
    return lambda;
}

std::vector<FeatureVector> compute_features(const EventStream& stream, const SocialGraph& graph,
                                            Kernels kernels) {
    DecayState state(graph.n_users(), kernels);
    std::vector<FeatureVector> features;
    features.reserve(stream.size());
    for (const Event& e : stream.events()) {
        state.advance(e.time);
        features.push_back(state.feature_at(e.user, graph));
        state.absorb(e);
    }
    return features;
}

}  // namespace opdyn
