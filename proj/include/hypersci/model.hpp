#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypersci/hypergraph.hpp"
#include "hypersci/tape.hpp"

namespace hypersci {

// Full: hypergraph convolution + attention on the original hypergraph.
// ProjectedHyper: the same machinery on the clique expansion, each projected
//   edge kept as a 2-node hyperedge.
// GraphConv: graph convolution (normalized adjacency with self loops) on the
//   clique expansion, no attention.
// NoBalance: Full architecture; the balancing term is dropped from the loss.
enum class Variant { Full, ProjectedHyper, GraphConv, NoBalance };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    int d_in = 50;
    int d_z = 64;
    int d_p = 64;
    int d_a = 64;  // attention projection width
    int attention_heads = 1;
    int conv_layers = 1;
    // When true, tau_hat recomputes the interference representation with the
    // node's own treatment flipped instead of reusing the shared one.
    bool counterfactual_interference = false;
};

struct Mlp {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

struct AttentionHead {
    Tensor proj;  // d_z x d_a
    Tensor vec;   // 2*d_a x 1
};

struct ModelParams {
    ModelConfig cfg;
    Mlp encoder;                       // d_in -> d_z -> d_z
    std::vector<Tensor> conv_weights;  // d_z -> d_p (-> d_p ...)
    std::vector<AttentionHead> attention;
    Mlp head1, head0;  // (d_z + d_p) -> d_z -> 1

    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
    // Flat list in checkpoint order; parallel mask marks non-bias tensors
    // (the ones the L2 term covers).
    std::vector<Tensor*> tensors();
    std::vector<bool> weight_mask() const;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Everything about the interference operator that is fixed given (H, variant):
// the hypergraph being convolved, its normalizers, and either the attention
// mask or the dense GCN matrix.
struct InterferenceStructure {
    Variant variant = Variant::Full;
    Hypergraph conv_h;
    Tensor attn_mask;                // n x m incidence of conv_h (empty for GraphConv)
    std::vector<double> dinv_sqrt;   // 0 for isolated nodes
    std::vector<double> binv;        // 1 / |N_e|
    Tensor gcn;                      // only for GraphConv
};

InterferenceStructure build_structure(const Hypergraph& h, Variant v);

// Parameter tensors bound to tape leaves (params for training, constants for
// inference).
struct ModelVars {
    std::vector<Var> enc_w, enc_b;
    std::vector<Var> conv_w;
    std::vector<Var> attn_proj, attn_vec;
    std::vector<Var> h1_w, h1_b, h0_w, h0_b;
    std::vector<Var> flat;  // same order as ModelParams::tensors()
};

ModelVars bind_params(Tape& tape, const ModelParams& params, bool trainable);

struct ForwardGraph {
    Var z;      // n x d_z
    Var p;      // n x d_p
    Var yhat1;  // n x 1
    Var yhat0;  // n x 1
    Var attn;   // n x m averaged attention; only when has_attn
    bool has_attn = false;
};

// Tape ops specific to the incidence structure.
Var edge_mean(Var z, const Hypergraph& h);                       // (n,d) -> (m,d)
Var incidence_mm(Var alpha, const Hypergraph& h, Var x);         // (n,m)x(m,d) -> (n,d)
Var incidence_mm_t(Var alpha, const Hypergraph& h, Var x);       // (n,m)^T x (n,d) -> (m,d)

Var encode_confounders(Var x, const ModelVars& vars);
Var hyperedge_repr(Var z, const Hypergraph& h);
Var attention_scores(Var z, Var edge_reprs, const ModelVars& vars, const InterferenceStructure& st);
Var interference_forward(Var z, const std::vector<int>& t, const ModelVars& vars,
                         const InterferenceStructure& st, Var attn);
std::pair<Var, Var> predict_outcomes(Var z, Var p, const ModelVars& vars);

ForwardGraph forward_graph(Tape& tape, const ModelVars& vars, const InterferenceStructure& st,
                           const Tensor& x, const std::vector<int>& t);

// Value-level forward for evaluation and checkpoints.
struct ForwardOutput {
    Tensor z;
    Tensor p;
    std::vector<double> yhat1;
    std::vector<double> yhat0;
    Tensor attn;  // rows of isolated nodes are zero; empty for GraphConv
    bool has_attn = false;
};

ForwardOutput forward(const ModelParams& params, const InterferenceStructure& st, const Tensor& x,
                      const std::vector<int>& t);
ForwardOutput forward(const ModelParams& params, const Hypergraph& h, Variant v, const Tensor& x,
                      const std::vector<int>& t);

std::vector<double> estimate_ite(const ForwardOutput& out);

// tau_hat with the interference representation recomputed per node under the
// flipped own treatment (the counterfactual_interference path).
std::vector<double> estimate_ite_flip(const ModelParams& params, const InterferenceStructure& st,
                                      const Tensor& x, const std::vector<int>& t,
                                      const ForwardOutput& shared);

// Checkpoint: JSON document {format_version, params: name -> {shape, data}}.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace hypersci
