#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace opdyn {

using UserId = std::uint32_t;

/// Directed influence graph. A stored edge (v, u) means "u follows v": posts
/// by v reach u, so v appears in in_neighbors(u). Immutable once built and
/// safe to share across threads.
class SocialGraph {
public:
    SocialGraph() = default;

    /// Builds adjacency from an edge list. Rejects self-loops, duplicate
    /// edges and ids outside [0, n_users).
    SocialGraph(std::size_t n_users, std::vector<std::pair<UserId, UserId>> edges);

    std::size_t n_users() const noexcept { return in_.size(); }
    std::size_t n_edges() const noexcept { return n_edges_; }

    /// Influencers of u (the users u follows), sorted ascending.
    std::span<const UserId> in_neighbors(UserId u) const { return in_.at(u); }
    /// Followers of u, sorted ascending.
    std::span<const UserId> out_neighbors(UserId u) const { return out_.at(u); }

    /// Per-user regression dimension: |N(u)| + 1 (bias).
    std::size_t feature_dim(UserId u) const { return in_.at(u).size() + 1; }

    /// All edges as (v, u) pairs, sorted lexicographically.
    std::vector<std::pair<UserId, UserId>> edges() const;

private:
    std::vector<std::vector<UserId>> in_;
    std::vector<std::vector<UserId>> out_;
    std::size_t n_edges_ = 0;
};

/// Stochastic-Kronecker graph on 2^power nodes: each ordered pair (i, j),
/// i != j, is an edge independently with probability given by the Kronecker
/// power of the 2x2 seed matrix. Probabilities are evaluated per pair from
/// the base-2 digits of the endpoints; the full matrix is never materialized.
SocialGraph generate_kronecker(const std::array<std::array<double, 2>, 2>& seed_matrix,
                               unsigned power, std::uint64_t rng_seed);

/// Preferential-attachment graph: a clique on m_attach+1 seed nodes, then
/// every new node attaches to m_attach distinct existing nodes with
/// probability proportional to degree. Undirected links are materialized as
/// two directed edges.
SocialGraph generate_barabasi_albert(std::size_t n_users, std::size_t m_attach,
                                     std::uint64_t rng_seed);

/// CSV edge list with header `src,dst`; an optional leading comment line
/// `# n_users=<k>` declares isolated nodes.
SocialGraph load_graph(const std::filesystem::path& path);
void save_graph(const SocialGraph& g, const std::filesystem::path& path);

}  // namespace opdyn
