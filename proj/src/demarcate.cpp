#include "opdyn/demarcate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "opdyn/detail/csv.hpp"
#include "opdyn/detail/parallel.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

namespace {

constexpr double kDriftTolerance = 1e-8;
constexpr unsigned kRefactorPeriod = 64;

double smallest_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.rows() == 1) return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace

Criterion parse_criterion(char c) {
    switch (c) {
        case 'A': case 'a': return Criterion::A;
        case 'D': case 'd': return Criterion::D;
        case 'E': case 'e': return Criterion::E;
        case 'T': case 't': return Criterion::T;
    }
    throw InputError(std::string("unknown criterion '") + c + "', expected one of A,D,E,T");
}

char criterion_name(Criterion x) {
    switch (x) {
        case Criterion::A: return 'A';
        case Criterion::D: return 'D';
        case Criterion::E: return 'E';
        case Criterion::T: return 'T';
    }
    return '?';
}

std::size_t DemarcationConfig::selection_size(std::size_t n_events) const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0,1)");
    // ceil((1-gamma) n), guarded against the product landing epsilon above an
    // integer.
    const double v = (1.0 - gamma) * static_cast<double>(n_events);
    return static_cast<std::size_t>(std::ceil(v - 1e-9));
}

GramState::GramState(std::vector<std::size_t> block_dims, double c, double sigma)
    : c_(c), sigma_(sigma) {
    if (!(c > 0.0)) throw InputError("ridge constant must be positive");
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    inv_sigma2_ = 1.0 / (sigma * sigma);
    blocks_.resize(block_dims.size());
    for (std::size_t u = 0; u < block_dims.size(); ++u) {
        const auto d = static_cast<Eigen::Index>(block_dims[u]);
        if (d < 1) throw InputError("block dimension must be at least 1");
        Block& b = blocks_[u];
        b.G = c * Eigen::MatrixXd::Identity(d, d);
        b.G_inv = (1.0 / c) * Eigen::MatrixXd::Identity(d, d);
        b.logdet = static_cast<double>(d) * std::log(c);
        b.trace_inv = static_cast<double>(d) / c;
        b.trace = static_cast<double>(d) * c;
        b.lambda_min = c;
        b.eig_fresh = true;
        sum_logdet_ += b.logdet;
        sum_trace_inv_ += b.trace_inv;
        sum_trace_ += b.trace;
    }
    min_cache_fresh_ = false;
}

GramState::GramState(const SocialGraph& graph, double c, double sigma)
    : GramState(
          [&graph] {
              std::vector<std::size_t> dims(graph.n_users());
              for (UserId u = 0; u < graph.n_users(); ++u) dims[u] = graph.feature_dim(u);
              return dims;
          }(),
          c, sigma) {}

void GramState::refresh_eig(const Block& b) const {
    if (b.eig_fresh) return;
    b.lambda_min = smallest_eigenvalue(b.G);
    b.eig_fresh = true;
}

void GramState::refresh_min_cache() const {
    bool all_fresh = min_cache_fresh_;
    for (const Block& b : blocks_)
        if (!b.eig_fresh) all_fresh = false;
    if (all_fresh) return;

    min1_ = std::numeric_limits<double>::infinity();
    min2_ = std::numeric_limits<double>::infinity();
    min1_user_ = 0;
    for (std::size_t u = 0; u < blocks_.size(); ++u) {
        refresh_eig(blocks_[u]);
        const double lm = blocks_[u].lambda_min;
        if (lm < min1_) {
            min2_ = min1_;
            min1_ = lm;
            min1_user_ = static_cast<UserId>(u);
        } else if (lm < min2_) {
            min2_ = lm;
        }
    }
    min_cache_fresh_ = true;
}

double GramState::lambda_min(UserId u) const {
    refresh_eig(blocks_.at(u));
    return blocks_.at(u).lambda_min;
}

double GramState::min_lambda() const {
    refresh_min_cache();
    return min1_;
}

double GramState::min_lambda_excluding(UserId u) const {
    refresh_min_cache();
    return (u == min1_user_) ? min2_ : min1_;
}

double GramState::objective(Criterion x) const {
    switch (x) {
        case Criterion::A: return -sum_trace_inv_;
        case Criterion::D: return sum_logdet_;
        case Criterion::T: return sum_trace_;
        case Criterion::E: return blocks_.empty() ? 0.0 : -1.0 / min_lambda();
    }
    return 0.0;
}

double GramState::marginal_gain(UserId u, const Eigen::VectorXd& phi, Criterion x) const {
    const Block& b = blocks_.at(u);
    if (phi.size() != b.G.rows())
        throw InputError("feature dimension does not match the user's block");
    switch (x) {
        case Criterion::T:
            return inv_sigma2_ * phi.squaredNorm();
        case Criterion::D: {
            const Eigen::VectorXd w = b.G_inv * phi;
            return std::log1p(inv_sigma2_ * phi.dot(w));
        }
        case Criterion::A: {
            const Eigen::VectorXd w = b.G_inv * phi;
            const double den = 1.0 + inv_sigma2_ * phi.dot(w);
            return inv_sigma2_ * w.squaredNorm() / den;
        }
        case Criterion::E: {
            Eigen::MatrixXd updated = b.G;
            updated.noalias() += inv_sigma2_ * phi * phi.transpose();
            const double lm_new = smallest_eigenvalue(updated);
            const double old_min = min_lambda();
            const double new_min = std::min(lm_new, min_lambda_excluding(u));
            return 1.0 / old_min - 1.0 / new_min;
        }
    }
    return 0.0;
}

void GramState::commit(UserId u, const Eigen::VectorXd& phi) {
    Block& b = blocks_.at(u);
    if (phi.size() != b.G.rows())
        throw InputError("feature dimension does not match the user's block");

    const Eigen::VectorXd w = b.G_inv * phi;
    const double den = 1.0 + inv_sigma2_ * phi.dot(w);
    if (!(den > 0.0))
        throw NumericError("Gram block lost positive definiteness");
    const double d_logdet = std::log(den);
    const double d_trace_inv = inv_sigma2_ * w.squaredNorm() / den;
    const double d_trace = inv_sigma2_ * phi.squaredNorm();

    b.G.noalias() += inv_sigma2_ * phi * phi.transpose();
    b.G_inv.noalias() -= (inv_sigma2_ / den) * w * w.transpose();
    b.logdet += d_logdet;
    b.trace_inv -= d_trace_inv;
    b.trace += d_trace;
    b.committed.push_back(phi);
    ++b.version;
    ++b.commits_since_refactor;
    b.eig_fresh = false;
    min_cache_fresh_ = false;

    sum_logdet_ += d_logdet;
    sum_trace_inv_ -= d_trace_inv;
    sum_trace_ += d_trace;

    const bool check_drift = b.G.rows() <= 32 || b.commits_since_refactor % 8 == 0;
    if (b.commits_since_refactor >= kRefactorPeriod ||
        (check_drift && inverse_drift(u) > kDriftTolerance))
        refactor(u);
}

double GramState::inverse_drift(UserId u) const {
    const Block& b = blocks_.at(u);
    const auto d = b.G.rows();
    return (b.G * b.G_inv - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
}

void GramState::refactor(UserId u) {
    Block& b = blocks_.at(u);
    const auto d = b.G.rows();

    Eigen::MatrixXd fresh = c_ * Eigen::MatrixXd::Identity(d, d);
    for (const Eigen::VectorXd& phi : b.committed)
        fresh.noalias() += inv_sigma2_ * phi * phi.transpose();

    Eigen::LLT<Eigen::MatrixXd> llt(fresh);
    if (llt.info() != Eigen::Success)
        throw NumericError("Gram block factorization failed");

    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) logdet += std::log(llt.matrixLLT()(i, i));
    logdet *= 2.0;

    sum_logdet_ += logdet - b.logdet;
    sum_trace_inv_ += inv.trace() - b.trace_inv;
    sum_trace_ += fresh.trace() - b.trace;

    b.G = std::move(fresh);
    b.G_inv = inv;
    b.logdet = logdet;
    b.trace_inv = b.G_inv.trace();
    b.trace = b.G.trace();
    b.commits_since_refactor = 0;
    b.eig_fresh = false;
    min_cache_fresh_ = false;
    ++b.version;
}

DemarcationResult greedy_select(const std::vector<FeatureVector>& features,
                                const SocialGraph& graph, const DemarcationConfig& config,
                                std::size_t n_select) {
    const std::size_t n = features.size();
    if (n_select > n)
        throw InputError("selection size " + std::to_string(n_select) + " exceeds " +
                         std::to_string(n) + " events");

    GramState state(graph, config.c, config.sigma);
    const Criterion crit = config.criterion;
    const double inv_sigma2 = 1.0 / (config.sigma * config.sigma);

    std::vector<char> selected(n, 0);
    // Per-candidate cache of the block-local quantity (the gain itself for
    // A/D/T, the updated block's smallest eigenvalue for E). A commit touches
    // one user's block, so only that user's candidates go stale.
    std::vector<double> cached(n, 0.0);
    std::vector<std::uint64_t> cached_version(n, std::uint64_t(-1));
    std::vector<std::vector<std::size_t>> by_user(graph.n_users());
    for (std::size_t i = 0; i < n; ++i) by_user[features[i].owner].push_back(i);

    const auto refresh = [&](std::size_t i) {
        const FeatureVector& f = features[i];
        if (crit == Criterion::E) {
            Eigen::MatrixXd updated = state.gram(f.owner);
            updated.noalias() += inv_sigma2 * f.values * f.values.transpose();
            cached[i] = smallest_eigenvalue(updated);
        } else {
            cached[i] = state.marginal_gain(f.owner, f.values, crit);
        }
        cached_version[i] = state.version(f.owner);
    };

    DemarcationResult result;
    result.endogenous.reserve(n_select);

    std::vector<std::size_t> stale(n);
    std::iota(stale.begin(), stale.end(), 0);

    for (std::size_t round = 0; round < n_select; ++round) {
        detail::parallel_for(stale.size(), config.n_threads,
                             [&](std::size_t k) { refresh(stale[k]); });

        double best_gain = -std::numeric_limits<double>::infinity();
        std::size_t best = n;
        if (crit == Criterion::E) {
            const double old_min = state.min_lambda();
            for (std::size_t i = 0; i < n; ++i) {
                if (selected[i]) continue;
                const double new_min =
                    std::min(cached[i], state.min_lambda_excluding(features[i].owner));
                const double gain = 1.0 / old_min - 1.0 / new_min;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = i;
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (selected[i]) continue;
                if (cached[i] > best_gain) {
                    best_gain = cached[i];
                    best = i;
                }
            }
        }

        state.commit(features[best].owner, features[best].values);
        selected[best] = 1;
        result.endogenous.push_back(best);
        result.gains.push_back(best_gain);
        result.objective_trace.push_back(state.objective(crit));

        stale.clear();
        for (std::size_t i : by_user[features[best].owner])
            if (!selected[i]) stale.push_back(i);
    }

    for (std::size_t i = 0; i < n; ++i)
        if (!selected[i]) result.exogenous.push_back(i);
    return result;
}

DemarcationResult cherry_pick(const EventStream& stream, const SocialGraph& graph,
                              const DemarcationConfig& config) {
    const auto features = compute_features(stream, graph, config.kernels);
    return greedy_select(features, graph, config, config.selection_size(stream.size()));
}

WeakSubmodularityConstants weak_submodularity_constants(const EventStream& stream,
                                                        const SocialGraph& graph,
                                                        const DemarcationConfig& config) {
    return weak_submodularity_constants(compute_features(stream, graph, config.kernels), graph,
                                        config);
}

WeakSubmodularityConstants weak_submodularity_constants(const std::vector<FeatureVector>& features,
                                                        const SocialGraph& graph,
                                                        const DemarcationConfig& config) {
    const std::size_t n = features.size();
    if (n > 14)
        throw SizeError("weak-submodularity diagnostics need at most 14 events, got " +
                        std::to_string(n));
    if (n == 0) throw InputError("empty instance");

    const Criterion crit = config.criterion;
    const double inv_sigma2 = 1.0 / (config.sigma * config.sigma);
    const std::size_t n_subsets = std::size_t{1} << n;

    std::vector<UserId> active_users;
    for (const FeatureVector& f : features) active_users.push_back(f.owner);
    std::sort(active_users.begin(), active_users.end());
    active_users.erase(std::unique(active_users.begin(), active_users.end()), active_users.end());
    std::vector<std::size_t> slot(graph.n_users(), std::size_t(-1));
    for (std::size_t k = 0; k < active_users.size(); ++k) slot[active_users[k]] = k;
    const std::size_t n_inactive = graph.n_users() - active_users.size();

    // Block dimensions come from the features themselves so raw (synthetic)
    // feature sets are accepted alongside replayed ones.
    std::vector<Eigen::Index> dim(active_users.size(), 0);
    for (const FeatureVector& f : features) {
        Eigen::Index& d = dim[slot[f.owner]];
        if (d == 0)
            d = f.values.size();
        else if (d != f.values.size())
            throw InputError("inconsistent feature dimensions for a single user");
    }

    // gain[x][S], valid for x not in S, computed with the same rank-one
    // identities the selector uses.
    std::vector<std::vector<double>> gain(n, std::vector<double>(n_subsets, 0.0));

    std::vector<Eigen::MatrixXd> gram(active_users.size());
    std::vector<Eigen::MatrixXd> gram_inv(active_users.size());
    std::vector<double> lmin(active_users.size());

    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
        for (std::size_t k = 0; k < active_users.size(); ++k)
            gram[k] = config.c * Eigen::MatrixXd::Identity(dim[k], dim[k]);
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i))
                gram[slot[features[i].owner]].noalias() +=
                    inv_sigma2 * features[i].values * features[i].values.transpose();
        for (std::size_t k = 0; k < active_users.size(); ++k) {
            Eigen::LLT<Eigen::MatrixXd> llt(gram[k]);
            gram_inv[k] = llt.solve(Eigen::MatrixXd::Identity(gram[k].rows(), gram[k].cols()));
            if (crit == Criterion::E) lmin[k] = smallest_eigenvalue(gram[k]);
        }

        double min1 = std::numeric_limits<double>::infinity();
        double min2 = std::numeric_limits<double>::infinity();
        std::size_t min1_slot = std::size_t(-1);
        if (crit == Criterion::E) {
            if (n_inactive >= 1) min1 = config.c;
            if (n_inactive >= 2) min2 = config.c;
            for (std::size_t k = 0; k < active_users.size(); ++k) {
                if (lmin[k] < min1) {
                    min2 = min1;
                    min1 = lmin[k];
                    min1_slot = k;
                } else if (lmin[k] < min2) {
                    min2 = lmin[k];
                }
            }
        }

        for (std::size_t x = 0; x < n; ++x) {
            if (mask & (std::size_t{1} << x)) continue;
            const std::size_t k = slot[features[x].owner];
            const Eigen::VectorXd& phi = features[x].values;
            switch (crit) {
                case Criterion::T:
                    gain[x][mask] = inv_sigma2 * phi.squaredNorm();
                    break;
                case Criterion::D: {
                    const Eigen::VectorXd w = gram_inv[k] * phi;
                    gain[x][mask] = std::log1p(inv_sigma2 * phi.dot(w));
                    break;
                }
                case Criterion::A: {
                    const Eigen::VectorXd w = gram_inv[k] * phi;
                    const double den = 1.0 + inv_sigma2 * phi.dot(w);
                    gain[x][mask] = inv_sigma2 * w.squaredNorm() / den;
                    break;
                }
                case Criterion::E: {
                    Eigen::MatrixXd updated = gram[k];
                    updated.noalias() += inv_sigma2 * phi * phi.transpose();
                    const double lm_new = smallest_eigenvalue(updated);
                    const double other = (k == min1_slot) ? min2 : min1;
                    const double new_min = std::min(lm_new, other);
                    gain[x][mask] = 1.0 / min1 - 1.0 / new_min;
                    break;
                }
            }
        }
    }

    WeakSubmodularityConstants out;
    out.c_h = -std::numeric_limits<double>::infinity();
    out.eps_h = -std::numeric_limits<double>::infinity();
    const std::size_t full = n_subsets - 1;
    for (std::size_t x = 0; x < n; ++x) {
        const std::size_t ground = full & ~(std::size_t{1} << x);
        std::size_t vbar = ground;
        while (true) {
            const double num = gain[x][vbar];
            std::size_t v = vbar;
            while (true) {
                const double den = gain[x][v];
                out.eps_h = std::max(out.eps_h, num - den);
                if (den > 0.0)
                    out.c_h = std::max(out.c_h, num / den);
                else if (num > 1e-15)
                    out.c_h = std::numeric_limits<double>::infinity();
                if (v == 0) break;
                v = (v - 1) & vbar;
            }
            if (vbar == 0) break;
            vbar = (vbar - 1) & ground;
        }
    }
    return out;
}

void save_demarcation(const DemarcationResult& result, std::size_t n_events,
                      const std::filesystem::path& path) {
    std::vector<std::size_t> step(n_events, 0);
    std::vector<double> gain(n_events, 0.0);
    for (std::size_t k = 0; k < result.endogenous.size(); ++k) {
        step[result.endogenous[k]] = k + 1;
        gain[result.endogenous[k]] = result.gains[k];
    }
    auto out = detail::open_output(path);
    out << "event_index,assigned_label,step,gain\n";
    for (std::size_t i = 0; i < n_events; ++i) {
        if (step[i] > 0)
            out << i << ",endo," << step[i] << "," << detail::format_double(gain[i]) << "\n";
        else
            out << i << ",exo,,\n";
    }
}

}  // namespace opdyn
