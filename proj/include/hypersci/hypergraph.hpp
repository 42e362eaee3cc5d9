#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hypersci/tensor.hpp"

namespace hypersci {

// Immutable hypergraph over nodes 0..n-1. The incidence structure is kept in
// compressed sparse form in both orientations, so members of a hyperedge and
// hyperedges of a node are both O(1)-reachable.
class Hypergraph {
public:
    // Empty placeholder; real instances come from the validating constructor.
    Hypergraph() : edge_ptr_(1, 0), node_ptr_(1, 0) {}

    // Every edge must have >= 2 distinct members, all < n.
    Hypergraph(int n, const std::vector<std::vector<int>>& edges);

    int n_nodes() const { return n_; }
    int n_edges() const { return m_; }

    std::span<const int> edge_members(int e) const {
        return {edge_members_.data() + edge_ptr_[e], edge_ptr_[e + 1] - edge_ptr_[e]};
    }
    std::span<const int> node_edges(int i) const {
        return {node_edges_.data() + node_ptr_[i], node_ptr_[i + 1] - node_ptr_[i]};
    }

    int degree(int i) const { return static_cast<int>(node_ptr_[i + 1] - node_ptr_[i]); }
    int edge_size(int e) const { return static_cast<int>(edge_ptr_[e + 1] - edge_ptr_[e]); }
    std::size_t n_incidences() const { return edge_members_.size(); }

    // Dense {0,1} incidence, for oracles and small instances.
    Tensor dense_incidence() const;

    std::vector<std::vector<int>> edge_lists() const;

private:
    int n_ = 0;
    int m_ = 0;
    // Edge-major: members of edge e are edge_members_[edge_ptr_[e] .. edge_ptr_[e+1])
    std::vector<std::size_t> edge_ptr_;
    std::vector<int> edge_members_;
    // Node-major: edges of node i are node_edges_[node_ptr_[i] .. node_ptr_[i+1])
    std::vector<std::size_t> node_ptr_;
    std::vector<int> node_edges_;
};

// Sparse symmetric adjacency, no self loops.
class OrdinaryGraph {
public:
    OrdinaryGraph(int n, const std::vector<std::pair<int, int>>& edges);

    int n_nodes() const { return n_; }
    std::size_t n_links() const { return edges_.size(); }
    std::span<const int> neighbors(int i) const {
        return {adj_.data() + ptr_[i], ptr_[i + 1] - ptr_[i]};
    }
    const std::vector<std::pair<int, int>>& links() const { return edges_; }

private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_;  // i < j, sorted, unique
    std::vector<std::size_t> ptr_;
    std::vector<int> adj_;
};

Hypergraph build_hypergraph(int n, const std::vector<std::vector<int>>& edges);

std::vector<double> degree_vector(const Hypergraph& h);
std::vector<double> edge_size_vector(const Hypergraph& h);

// L = D^{-1/2} H' B^{-1} H'^T D^{-1/2}. D and B always come from the binary
// incidence; edge_weights (when given, shape n x m, zero off the support)
// replace only the two inner incidence factors. Rows/columns of isolated
// nodes are zero.
Tensor laplacian(const Hypergraph& h, const Tensor* edge_weights = nullptr);

OrdinaryGraph project_clique(const Hypergraph& h);

// Symmetric normalization with self loops: D~^{-1/2} (A + I) D~^{-1/2}.
Tensor gcn_adjacency(const OrdinaryGraph& g);

Hypergraph filter_by_edge_size(const Hypergraph& h, int k);

// Union of members of all hyperedges containing i, excluding i.
std::set<int> neighborhood(const Hypergraph& h, int i);

// Fraction of i's neighbors sharing t_i. Throws IsolatedNode when |N_i| = 0.
double homophily_ratio(const Hypergraph& h, const std::vector<int>& treatments, int i);

// Text format: line 1 "n m", then m lines "k id_1 ... id_k". '#' lines ignored.
Hypergraph read_hypergraph(std::istream& in);
Hypergraph read_hypergraph_file(const std::string& path);
void write_hypergraph(std::ostream& out, const Hypergraph& h);
void write_hypergraph_file(const std::string& path, const Hypergraph& h);

}  // namespace hypersci
