#include "opdyn/graph.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

#include "opdyn/detail/csv.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

SocialGraph::SocialGraph(std::size_t n_users, std::vector<std::pair<UserId, UserId>> edges)
    : in_(n_users), out_(n_users) {
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto [v, u] = edges[i];
        if (v >= n_users || u >= n_users)
            throw InputError("edge (" + std::to_string(v) + "," + std::to_string(u) +
                             ") references a user outside [0," + std::to_string(n_users) + ")");
        if (v == u)
            throw InputError("self-loop on user " + std::to_string(v));
        if (i > 0 && edges[i] == edges[i - 1])
            throw InputError("duplicate edge (" + std::to_string(v) + "," + std::to_string(u) + ")");
        in_[u].push_back(v);
        out_[v].push_back(u);
    }
    for (auto& nbrs : in_) std::sort(nbrs.begin(), nbrs.end());
    for (auto& nbrs : out_) std::sort(nbrs.begin(), nbrs.end());
    n_edges_ = edges.size();
}

std::vector<std::pair<UserId, UserId>> SocialGraph::edges() const {
    std::vector<std::pair<UserId, UserId>> out;
    out.reserve(n_edges_);
    for (UserId v = 0; v < out_.size(); ++v)
        for (UserId u : out_[v]) out.emplace_back(v, u);
    std::sort(out.begin(), out.end());
    return out;
}

SocialGraph generate_kronecker(const std::array<std::array<double, 2>, 2>& seed_matrix,
                               unsigned power, std::uint64_t rng_seed) {
    for (const auto& row : seed_matrix)
        for (double p : row)
            if (!(p >= 0.0 && p <= 1.0))
                throw InputError("Kronecker seed entries must lie in [0,1]");
    if (power < 1) throw InputError("Kronecker power must be >= 1");

    const std::size_t n = std::size_t{1} << power;
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<std::pair<UserId, UserId>> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double p = 1.0;
            for (unsigned k = 0; k < power && p > 0.0; ++k)
                p *= seed_matrix[(i >> k) & 1][(j >> k) & 1];
            if (p > 0.0 && unif(rng) < p)
                edges.emplace_back(static_cast<UserId>(i), static_cast<UserId>(j));
        }
    }
    return SocialGraph(n, std::move(edges));
}

SocialGraph generate_barabasi_albert(std::size_t n_users, std::size_t m_attach,
                                     std::uint64_t rng_seed) {
    if (m_attach < 1 || m_attach >= n_users)
        throw InputError("Barabasi-Albert requires 1 <= m_attach < n_users");

    std::mt19937_64 rng(rng_seed);
    // Endpoint pool: each undirected link appends both endpoints, so a draw is
    // degree-proportional.
    std::vector<UserId> pool;
    std::vector<std::pair<UserId, UserId>> links;

    const std::size_t seed_nodes = m_attach + 1;
    for (UserId a = 0; a < seed_nodes; ++a) {
        for (UserId b = a + 1; b < seed_nodes; ++b) {
            links.emplace_back(a, b);
            pool.push_back(a);
            pool.push_back(b);
        }
    }

    std::set<UserId> targets;
    for (UserId node = static_cast<UserId>(seed_nodes); node < n_users; ++node) {
        targets.clear();
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        while (targets.size() < m_attach) targets.insert(pool[pick(rng)]);
        for (UserId t : targets) {
            links.emplace_back(t, node);
            pool.push_back(t);
            pool.push_back(node);
        }
    }

    std::vector<std::pair<UserId, UserId>> edges;
    edges.reserve(2 * links.size());
    for (const auto& [a, b] : links) {
        edges.emplace_back(a, b);
        edges.emplace_back(b, a);
    }
    return SocialGraph(n_users, std::move(edges));
}

SocialGraph load_graph(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    const std::string name = path.string();

    std::string line;
    std::size_t line_no = 0;
    std::size_t declared_users = 0;
    bool have_declared = false;

    // Optional `# n_users=<k>` comment, then the mandatory header.
    if (!std::getline(in, line)) throw FormatError(name, 1, "empty file, expected 'src,dst' header");
    ++line_no;
    std::string stripped = detail::strip(line);
    if (stripped.rfind("#", 0) == 0) {
        const std::string comment = detail::strip(stripped.substr(1));
        const std::string key = "n_users=";
        if (comment.rfind(key, 0) != 0)
            throw FormatError(name, line_no, "unrecognized comment, expected '# n_users=<k>'");
        declared_users = detail::parse_uint(comment.substr(key.size()), name, line_no);
        have_declared = true;
        if (!std::getline(in, line)) throw FormatError(name, 2, "missing 'src,dst' header");
        ++line_no;
        stripped = detail::strip(line);
    }
    if (stripped != "src,dst")
        throw FormatError(name, line_no, "expected header 'src,dst', got '" + stripped + "'");

    std::vector<std::pair<UserId, UserId>> edges;
    std::size_t max_id = 0;
    bool any_edge = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::strip(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 2)
            throw FormatError(name, line_no, "expected 2 fields, got " + std::to_string(fields.size()));
        const auto v = detail::parse_uint(fields[0], name, line_no);
        const auto u = detail::parse_uint(fields[1], name, line_no);
        if (have_declared && (v >= declared_users || u >= declared_users))
            throw FormatError(name, line_no, "user id out of declared range");
        edges.emplace_back(static_cast<UserId>(v), static_cast<UserId>(u));
        max_id = std::max({max_id, static_cast<std::size_t>(v), static_cast<std::size_t>(u)});
        any_edge = true;
    }

    const std::size_t n_users = have_declared ? declared_users : (any_edge ? max_id + 1 : 0);
    return SocialGraph(n_users, std::move(edges));
}

void save_graph(const SocialGraph& g, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "# n_users=" << g.n_users() << "\n";
    out << "src,dst\n";
    for (const auto& [v, u] : g.edges()) out << v << "," << u << "\n";
}

}  // namespace opdyn
