#include "hypersci/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "hypersci/io.hpp"

namespace hypersci {

Hypergraph::Hypergraph(int n, const std::vector<std::vector<int>>& edges) : n_(n) {
    if (n < 1) throw OutOfRangeNode("hypergraph: node count must be >= 1");
    m_ = static_cast<int>(edges.size());

    edge_ptr_.assign(static_cast<size_t>(m_) + 1, 0);
    std::vector<std::size_t> node_count(static_cast<size_t>(n_), 0);
    std::size_t total = 0;
    for (int e = 0; e < m_; ++e) {
        const auto& members = edges[static_cast<size_t>(e)];
        if (members.size() < 2)
            throw DegenerateEdge("hyperedge " + std::to_string(e) + " has size " +
                                 std::to_string(members.size()) + " (< 2)");
        std::unordered_set<int> seen;
        for (int v : members) {
            if (v < 0 || v >= n_)
                throw OutOfRangeNode("hyperedge " + std::to_string(e) + " references node " +
                                     std::to_string(v) + " (n = " + std::to_string(n_) + ")");
            if (!seen.insert(v).second)
                throw DegenerateEdge("hyperedge " + std::to_string(e) + " repeats node " +
                                     std::to_string(v));
            ++node_count[static_cast<size_t>(v)];
        }
        total += members.size();
        edge_ptr_[static_cast<size_t>(e) + 1] = total;
    }

    edge_members_.resize(total);
    for (int e = 0; e < m_; ++e) {
        const auto& members = edges[static_cast<size_t>(e)];
        std::copy(members.begin(), members.end(), edge_members_.begin() + static_cast<long>(edge_ptr_[static_cast<size_t>(e)]));
    }

    node_ptr_.assign(static_cast<size_t>(n_) + 1, 0);
    for (int i = 0; i < n_; ++i) node_ptr_[static_cast<size_t>(i) + 1] = node_ptr_[static_cast<size_t>(i)] + node_count[static_cast<size_t>(i)];
    node_edges_.resize(total);
    std::vector<std::size_t> fill(node_ptr_.begin(), node_ptr_.end() - 1);
    for (int e = 0; e < m_; ++e)
        for (int v : edge_members(e)) node_edges_[fill[static_cast<size_t>(v)]++] = e;
}

Tensor Hypergraph::dense_incidence() const {
    Tensor h(n_, m_);
    for (int e = 0; e < m_; ++e)
        for (int v : edge_members(e)) h(v, e) = 1.0;
    return h;
}

std::vector<std::vector<int>> Hypergraph::edge_lists() const {
    std::vector<std::vector<int>> out(static_cast<size_t>(m_));
    for (int e = 0; e < m_; ++e) {
        auto members = edge_members(e);
        out[static_cast<size_t>(e)].assign(members.begin(), members.end());
    }
    return out;
}

OrdinaryGraph::OrdinaryGraph(int n, const std::vector<std::pair<int, int>>& edges) : n_(n) {
    std::vector<std::pair<int, int>> canon;
    canon.reserve(edges.size());
    for (auto [a, b] : edges) {
        if (a == b) continue;  // no self loops
        if (a > b) std::swap(a, b);
        if (a < 0 || b >= n_) throw OutOfRangeNode("graph edge out of range");
        canon.emplace_back(a, b);
    }
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
    edges_ = std::move(canon);

    std::vector<std::size_t> count(static_cast<size_t>(n_), 0);
    for (auto [a, b] : edges_) {
        ++count[static_cast<size_t>(a)];
        ++count[static_cast<size_t>(b)];
    }
    ptr_.assign(static_cast<size_t>(n_) + 1, 0);
    for (int i = 0; i < n_; ++i) ptr_[static_cast<size_t>(i) + 1] = ptr_[static_cast<size_t>(i)] + count[static_cast<size_t>(i)];
    adj_.resize(ptr_.back());
    std::vector<std::size_t> fill(ptr_.begin(), ptr_.end() - 1);
    for (auto [a, b] : edges_) {
        adj_[fill[static_cast<size_t>(a)]++] = b;
        adj_[fill[static_cast<size_t>(b)]++] = a;
    }
}

Hypergraph build_hypergraph(int n, const std::vector<std::vector<int>>& edges) {
    return Hypergraph(n, edges);
}

std::vector<double> degree_vector(const Hypergraph& h) {
    std::vector<double> d(static_cast<size_t>(h.n_nodes()));
    for (int i = 0; i < h.n_nodes(); ++i) d[static_cast<size_t>(i)] = h.degree(i);
    return d;
}

std::vector<double> edge_size_vector(const Hypergraph& h) {
    std::vector<double> s(static_cast<size_t>(h.n_edges()));
    for (int e = 0; e < h.n_edges(); ++e) s[static_cast<size_t>(e)] = h.edge_size(e);
    return s;
}

Tensor laplacian(const Hypergraph& h, const Tensor* edge_weights) {
    int n = h.n_nodes();
    if (edge_weights) {
        if (edge_weights->rows != n || edge_weights->cols != h.n_edges())
            throw ShapeMismatch("laplacian: edge_weights must be n x m");
    }

    std::vector<double> dinv_sqrt(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        int deg = h.degree(i);
        if (deg > 0) dinv_sqrt[static_cast<size_t>(i)] = 1.0 / std::sqrt(static_cast<double>(deg));
    }

    // L = sum_e (1/|e|) w_e w_e^T restricted to e's members, then the
    // D^{-1/2} scaling folds into each entry.
    Tensor l(n, n);
    for (int e = 0; e < h.n_edges(); ++e) {
        auto members = h.edge_members(e);
        double binv = 1.0 / static_cast<double>(members.size());
        for (int a : members) {
            double wa = edge_weights ? (*edge_weights)(a, e) : 1.0;
            if (wa == 0.0) continue;
            double fa = wa * dinv_sqrt[static_cast<size_t>(a)] * binv;
            for (int b : members) {
                double wb = edge_weights ? (*edge_weights)(b, e) : 1.0;
                l(a, b) += fa * wb * dinv_sqrt[static_cast<size_t>(b)];
            }
        }
    }
    return l;
}

OrdinaryGraph project_clique(const Hypergraph& h) {
    std::vector<std::pair<int, int>> pairs;
    for (int e = 0; e < h.n_edges(); ++e) {
        auto members = h.edge_members(e);
        for (size_t a = 0; a < members.size(); ++a)
            for (size_t b = a + 1; b < members.size(); ++b)
                pairs.emplace_back(members[a], members[b]);
    }
    return OrdinaryGraph(h.n_nodes(), pairs);
}

Tensor gcn_adjacency(const OrdinaryGraph& g) {
    int n = g.n_nodes();
    std::vector<double> dinv_sqrt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        dinv_sqrt[static_cast<size_t>(i)] = 1.0 / std::sqrt(1.0 + static_cast<double>(g.neighbors(i).size()));

    Tensor a(n, n);
    for (int i = 0; i < n; ++i) {
        a(i, i) = dinv_sqrt[static_cast<size_t>(i)] * dinv_sqrt[static_cast<size_t>(i)];
        for (int j : g.neighbors(i)) a(i, j) = dinv_sqrt[static_cast<size_t>(i)] * dinv_sqrt[static_cast<size_t>(j)];
    }
    return a;
}

Hypergraph filter_by_edge_size(const Hypergraph& h, int k) {
    if (k < 2) throw DegenerateEdge("filter_by_edge_size: k must be >= 2");
    std::vector<std::vector<int>> kept;
    for (int e = 0; e < h.n_edges(); ++e) {
        if (h.edge_size(e) <= k) {
            auto members = h.edge_members(e);
            kept.emplace_back(members.begin(), members.end());
        }
    }
    return Hypergraph(h.n_nodes(), kept);
}

std::set<int> neighborhood(const Hypergraph& h, int i) {
    if (i < 0 || i >= h.n_nodes()) throw OutOfRangeNode("neighborhood: node " + std::to_string(i));
    std::set<int> out;
    for (int e : h.node_edges(i))
        for (int j : h.edge_members(e))
            if (j != i) out.insert(j);
    return out;
}

double homophily_ratio(const Hypergraph& h, const std::vector<int>& treatments, int i) {
    auto nbrs = neighborhood(h, i);
    if (nbrs.empty()) throw IsolatedNode("homophily_ratio: node " + std::to_string(i) + " has no neighbors");
    int same = 0;
    for (int j : nbrs)
        if (treatments[static_cast<size_t>(j)] == treatments[static_cast<size_t>(i)]) ++same;
    return static_cast<double>(same) / static_cast<double>(nbrs.size());
}

Hypergraph read_hypergraph(std::istream& in) {
    std::string line;
    auto next_content_line = [&](std::string& out) -> bool {
        while (std::getline(in, out)) {
            size_t pos = out.find_first_not_of(" \t\r");
            if (pos == std::string::npos) continue;
            if (out[pos] == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_content_line(line)) throw ParseError("hypergraph: missing header line");
    std::istringstream header(line);
    long long n = 0, m = 0;
    if (!(header >> n >> m) || n < 1 || m < 0) throw ParseError("hypergraph: bad header '" + line + "'");

    std::vector<std::vector<int>> edges;
    edges.reserve(static_cast<size_t>(m));
    for (long long e = 0; e < m; ++e) {
        if (!next_content_line(line))
            throw ParseError("hypergraph: expected " + std::to_string(m) + " edges, got " + std::to_string(e));
        std::istringstream es(line);
        long long k = 0;
        if (!(es >> k) || k < 2) throw ParseError("hypergraph: bad edge size in '" + line + "'");
        std::vector<int> members(static_cast<size_t>(k));
        for (long long j = 0; j < k; ++j)
            if (!(es >> members[static_cast<size_t>(j)]))
                throw ParseError("hypergraph: truncated edge line '" + line + "'");
        edges.push_back(std::move(members));
    }
    return Hypergraph(static_cast<int>(n), edges);
}

Hypergraph read_hypergraph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open hypergraph file: " + path);
    return read_hypergraph(in);
}

void write_hypergraph(std::ostream& out, const Hypergraph& h) {
    out << h.n_nodes() << ' ' << h.n_edges() << '\n';
    for (int e = 0; e < h.n_edges(); ++e) {
        auto members = h.edge_members(e);
        out << members.size();
        for (int v : members) out << ' ' << v;
        out << '\n';
    }
}

void write_hypergraph_file(const std::string& path, const Hypergraph& h) {
    std::ostringstream buf;
    write_hypergraph(buf, h);
    atomic_write_file(path, buf.str());
}

}  // namespace hypersci
