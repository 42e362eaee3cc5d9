#include "hypersci/model.hpp"

#include <cmath>

#include <json.hpp>

#include "hypersci/io.hpp"
#include "hypersci/rng.hpp"

namespace hypersci {

namespace {
constexpr double kConvSlope = 0.01;  // LeakyReLU inside the convolution
constexpr double kAttnSlope = 0.2;   // LeakyReLU on attention similarities
}  // namespace

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::ProjectedHyper: return "projected";
        case Variant::GraphConv: return "graph";
        case Variant::NoBalance: return "nobalance";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "projected") return Variant::ProjectedHyper;
    if (name == "graph") return Variant::GraphConv;
    if (name == "nobalance") return Variant::NoBalance;
    throw ConfigError("unknown variant '" + name + "' (expected full|projected|graph|nobalance)");
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (size_t l = 0; l < encoder.weights.size(); ++l) {
        out.emplace_back("encoder." + std::to_string(l) + ".weight", &encoder.weights[l]);
        out.emplace_back("encoder." + std::to_string(l) + ".bias", &encoder.biases[l]);
    }
    for (size_t l = 0; l < conv_weights.size(); ++l)
        out.emplace_back("conv." + std::to_string(l) + ".weight", &conv_weights[l]);
    for (size_t h = 0; h < attention.size(); ++h) {
        out.emplace_back("attn." + std::to_string(h) + ".proj", &attention[h].proj);
        out.emplace_back("attn." + std::to_string(h) + ".vec", &attention[h].vec);
    }
    auto add_head = [&out](const char* name, Mlp& head) {
        for (size_t l = 0; l < head.weights.size(); ++l) {
            out.emplace_back(std::string(name) + "." + std::to_string(l) + ".weight", &head.weights[l]);
            out.emplace_back(std::string(name) + "." + std::to_string(l) + ".bias", &head.biases[l]);
        }
    };
    add_head("head1", head1);
    add_head("head0", head0);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
    auto mut = const_cast<ModelParams*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, ptr] : mut) out.emplace_back(name, ptr);
    return out;
}

std::vector<Tensor*> ModelParams::tensors() {
    std::vector<Tensor*> out;
    for (auto& [name, ptr] : named_tensors()) out.push_back(ptr);
    return out;
}

std::vector<bool> ModelParams::weight_mask() const {
    std::vector<bool> out;
    for (auto& [name, ptr] : named_tensors())
        out.push_back(name.find(".bias") == std::string::npos);
    return out;
}

namespace {

Tensor glorot(Rng& rng, int fan_in, int fan_out, int rows, int cols) {
    double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(rows, cols);
    for (double& v : t.data) v = rng.uniform(-s, s);
    return t;
}

Mlp init_mlp(Rng& rng, const std::vector<int>& dims) {
    Mlp mlp;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        mlp.weights.push_back(glorot(rng, dims[l], dims[l + 1], dims[l], dims[l + 1]));
        mlp.biases.push_back(Tensor::zeros(1, dims[l + 1]));
    }
    return mlp;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 101));
    ModelParams p;
    p.cfg = cfg;
    p.encoder = init_mlp(rng, {cfg.d_in, cfg.d_z, cfg.d_z});
    int din = cfg.d_z;
    for (int l = 0; l < cfg.conv_layers; ++l) {
        p.conv_weights.push_back(glorot(rng, din, cfg.d_p, din, cfg.d_p));
        din = cfg.d_p;
    }
    for (int h = 0; h < cfg.attention_heads; ++h) {
        AttentionHead head;
        head.proj = glorot(rng, cfg.d_z, cfg.d_a, cfg.d_z, cfg.d_a);
        head.vec = glorot(rng, 2 * cfg.d_a, 1, 2 * cfg.d_a, 1);
        p.attention.push_back(std::move(head));
    }
    p.head1 = init_mlp(rng, {cfg.d_z + cfg.d_p, cfg.d_z, 1});
    p.head0 = init_mlp(rng, {cfg.d_z + cfg.d_p, cfg.d_z, 1});
    return p;
}

InterferenceStructure build_structure(const Hypergraph& h, Variant v) {
    InterferenceStructure st;
    st.variant = v;
    if (v == Variant::GraphConv) {
        st.gcn = gcn_adjacency(project_clique(h));
        return st;
    }
    if (v == Variant::ProjectedHyper) {
        OrdinaryGraph g = project_clique(h);
        std::vector<std::vector<int>> pair_edges;
        pair_edges.reserve(g.n_links());
        for (auto [a, b] : g.links()) pair_edges.push_back({a, b});
        st.conv_h = Hypergraph(h.n_nodes(), pair_edges);
    } else {
        st.conv_h = h;
    }
    st.attn_mask = st.conv_h.dense_incidence();
    st.dinv_sqrt.assign(static_cast<size_t>(st.conv_h.n_nodes()), 0.0);
    for (int i = 0; i < st.conv_h.n_nodes(); ++i) {
        int deg = st.conv_h.degree(i);
        if (deg > 0) st.dinv_sqrt[static_cast<size_t>(i)] = 1.0 / std::sqrt(static_cast<double>(deg));
    }
    st.binv.assign(static_cast<size_t>(st.conv_h.n_edges()), 0.0);
    for (int e = 0; e < st.conv_h.n_edges(); ++e)
        st.binv[static_cast<size_t>(e)] = 1.0 / static_cast<double>(st.conv_h.edge_size(e));
    return st;
}

ModelVars bind_params(Tape& tape, const ModelParams& params, bool trainable) {
    ModelVars v;
    auto bind = [&](const Tensor& t) {
        Var var = trainable ? tape.param(t) : tape.constant(t);
        v.flat.push_back(var);
        return var;
    };
    // Must mirror named_tensors() order.
    for (size_t l = 0; l < params.encoder.weights.size(); ++l) {
        v.enc_w.push_back(bind(params.encoder.weights[l]));
        v.enc_b.push_back(bind(params.encoder.biases[l]));
    }
    for (const Tensor& w : params.conv_weights) v.conv_w.push_back(bind(w));
    for (const AttentionHead& head : params.attention) {
        v.attn_proj.push_back(bind(head.proj));
        v.attn_vec.push_back(bind(head.vec));
    }
    for (size_t l = 0; l < params.head1.weights.size(); ++l) {
        v.h1_w.push_back(bind(params.head1.weights[l]));
        v.h1_b.push_back(bind(params.head1.biases[l]));
    }
    for (size_t l = 0; l < params.head0.weights.size(); ++l) {
        v.h0_w.push_back(bind(params.head0.weights[l]));
        v.h0_b.push_back(bind(params.head0.biases[l]));
    }
    return v;
}

Var edge_mean(Var z, const Hypergraph& h) {
    Tape& t = *z.tape;
    const Tensor& zv = t.value(z);
    if (zv.rows != h.n_nodes()) throw ShapeMismatch("edge_mean: row count != node count");
    Tensor out(h.n_edges(), zv.cols);
    for (int e = 0; e < h.n_edges(); ++e) {
        auto members = h.edge_members(e);
        double inv = 1.0 / static_cast<double>(members.size());
        double* orow = &out.data[static_cast<size_t>(e) * out.cols];
        for (int i : members) {
            const double* zrow = &zv.data[static_cast<size_t>(i) * zv.cols];
            for (int c = 0; c < zv.cols; ++c) orow[c] += zrow[c] * inv;
        }
    }
    int pz = z.id;
    const Hypergraph* hp = &h;
    return t.make_node(std::move(out), pz, -1, [pz, hp](Tape& tp, int self) {
        if (pz < 0 || !tp.needs_grad(pz)) return;
        const Tensor& g = tp.upstream(self);
        const Tensor& zv2 = tp.value(pz);
        Tensor d(zv2.rows, zv2.cols);
        for (int e = 0; e < hp->n_edges(); ++e) {
            auto members = hp->edge_members(e);
            double inv = 1.0 / static_cast<double>(members.size());
            const double* grow = &g.data[static_cast<size_t>(e) * g.cols];
            for (int i : members) {
                double* drow = &d.data[static_cast<size_t>(i) * d.cols];
                for (int c = 0; c < g.cols; ++c) drow[c] += grow[c] * inv;
            }
        }
        tp.accumulate(pz, d);
    });
}

Var incidence_mm(Var alpha, const Hypergraph& h, Var x) {
    Tape& t = *alpha.tape;
    const Tensor& av = t.value(alpha);
    const Tensor& xv = t.value(x);
    if (av.rows != h.n_nodes() || av.cols != h.n_edges() || xv.rows != h.n_edges())
        throw ShapeMismatch("incidence_mm: shapes inconsistent with hypergraph");
    Tensor out(h.n_nodes(), xv.cols);
    for (int e = 0; e < h.n_edges(); ++e) {
        const double* xrow = &xv.data[static_cast<size_t>(e) * xv.cols];
        for (int i : h.edge_members(e)) {
            double a = av(i, e);
            if (a == 0.0) continue;
            double* orow = &out.data[static_cast<size_t>(i) * out.cols];
            for (int c = 0; c < xv.cols; ++c) orow[c] += a * xrow[c];
        }
    }
    int pa = alpha.id, px = x.id;
    const Hypergraph* hp = &h;
    return t.make_node(std::move(out), pa, px, [pa, px, hp](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        const Tensor& av2 = tp.value(pa);
        const Tensor& xv2 = tp.value(px);
        bool want_a = tp.needs_grad(pa);
        bool want_x = tp.needs_grad(px);
        Tensor da = want_a ? Tensor(av2.rows, av2.cols) : Tensor();
        Tensor dx = want_x ? Tensor(xv2.rows, xv2.cols) : Tensor();
        for (int e = 0; e < hp->n_edges(); ++e) {
            const double* xrow = &xv2.data[static_cast<size_t>(e) * xv2.cols];
            double* dxrow = want_x ? &dx.data[static_cast<size_t>(e) * dx.cols] : nullptr;
            for (int i : hp->edge_members(e)) {
                const double* grow = &g.data[static_cast<size_t>(i) * g.cols];
                if (want_a) {
                    double s = 0.0;
                    for (int c = 0; c < g.cols; ++c) s += grow[c] * xrow[c];
                    da(i, e) = s;
                }
                if (want_x) {
                    double a = av2(i, e);
                    if (a != 0.0)
                        for (int c = 0; c < g.cols; ++c) dxrow[c] += a * grow[c];
                }
            }
        }
        if (want_a) tp.accumulate(pa, da);
        if (want_x) tp.accumulate(px, dx);
    });
}

Var incidence_mm_t(Var alpha, const Hypergraph& h, Var x) {
    Tape& t = *alpha.tape;
    const Tensor& av = t.value(alpha);
    const Tensor& xv = t.value(x);
    if (av.rows != h.n_nodes() || av.cols != h.n_edges() || xv.rows != h.n_nodes())
        throw ShapeMismatch("incidence_mm_t: shapes inconsistent with hypergraph");
    Tensor out(h.n_edges(), xv.cols);
    for (int e = 0; e < h.n_edges(); ++e) {
        double* orow = &out.data[static_cast<size_t>(e) * out.cols];
        for (int i : h.edge_members(e)) {
            double a = av(i, e);
            if (a == 0.0) continue;
            const double* xrow = &xv.data[static_cast<size_t>(i) * xv.cols];
            for (int c = 0; c < xv.cols; ++c) orow[c] += a * xrow[c];
        }
    }
    int pa = alpha.id, px = x.id;
    const Hypergraph* hp = &h;
    return t.make_node(std::move(out), pa, px, [pa, px, hp](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        const Tensor& av2 = tp.value(pa);
        const Tensor& xv2 = tp.value(px);
        bool want_a = tp.needs_grad(pa);
        bool want_x = tp.needs_grad(px);
        Tensor da = want_a ? Tensor(av2.rows, av2.cols) : Tensor();
        Tensor dx = want_x ? Tensor(xv2.rows, xv2.cols) : Tensor();
        for (int e = 0; e < hp->n_edges(); ++e) {
            const double* grow = &g.data[static_cast<size_t>(e) * g.cols];
            for (int i : hp->edge_members(e)) {
                const double* xrow = &xv2.data[static_cast<size_t>(i) * xv2.cols];
                if (want_a) {
                    double s = 0.0;
                    for (int c = 0; c < g.cols; ++c) s += grow[c] * xrow[c];
                    da(i, e) = s;
                }
                if (want_x) {
                    double a = av2(i, e);
                    if (a != 0.0) {
                        double* dxrow = &dx.data[static_cast<size_t>(i) * dx.cols];
                        for (int c = 0; c < g.cols; ++c) dxrow[c] += a * grow[c];
                    }
                }
            }
        }
        if (want_a) tp.accumulate(pa, da);
        if (want_x) tp.accumulate(px, dx);
    });
}

namespace {

Var mlp_forward(Var x, const std::vector<Var>& weights, const std::vector<Var>& biases) {
    Var h = x;
    for (size_t l = 0; l < weights.size(); ++l) {
        h = add_rowvec(matmul(h, weights[l]), biases[l]);
        if (l + 1 < weights.size()) h = relu(h);
    }
    return h;
}

}  // namespace

Var encode_confounders(Var x, const ModelVars& vars) {
    return mlp_forward(x, vars.enc_w, vars.enc_b);
}

Var hyperedge_repr(Var z, const Hypergraph& h) { return edge_mean(z, h); }

Var attention_scores(Var z, Var edge_reprs, const ModelVars& vars, const InterferenceStructure& st) {
    Tape& t = *z.tape;
    int d_a = t.value(vars.attn_proj[0]).cols;
    std::vector<int> left_ids(static_cast<size_t>(d_a)), right_ids(static_cast<size_t>(d_a));
    for (int k = 0; k < d_a; ++k) {
        left_ids[static_cast<size_t>(k)] = k;
        right_ids[static_cast<size_t>(k)] = d_a + k;
    }

    Var avg{};
    for (size_t head = 0; head < vars.attn_proj.size(); ++head) {
        Var zw = matmul(z, vars.attn_proj[head]);            // n x d_a
        Var zew = matmul(edge_reprs, vars.attn_proj[head]);  // m x d_a
        Var a_left = slice_rows(vars.attn_vec[head], left_ids);
        Var a_right = slice_rows(vars.attn_vec[head], right_ids);
        Var u = matmul(zw, a_left);    // n x 1
        Var v = matmul(zew, a_right);  // m x 1
        Var sim = leaky_relu(outer_add(u, v), kAttnSlope);
        Var alpha = masked_softmax_rows(sim, st.attn_mask);
        avg = head == 0 ? alpha : add(avg, alpha);
    }
    if (vars.attn_proj.size() > 1) avg = scale(avg, 1.0 / static_cast<double>(vars.attn_proj.size()));
    return avg;
}

Var interference_forward(Var z, const std::vector<int>& t, const ModelVars& vars,
                         const InterferenceStructure& st, Var attn) {
    Tape& tape = *z.tape;
    std::vector<double> t_mask(t.size());
    for (size_t i = 0; i < t.size(); ++i) t_mask[i] = t[i] != 0 ? 1.0 : 0.0;
    Var p = scale_rows(z, t_mask);  // p^(0) = t_i * z_i

    for (const Var& w : vars.conv_w) {
        Var propagated;
        if (st.variant == Variant::GraphConv) {
            Var adj = tape.constant(st.gcn);
            propagated = matmul(adj, p);
        } else {
            Var q = scale_rows(p, st.dinv_sqrt);
            q = incidence_mm_t(attn, st.conv_h, q);
            q = scale_rows(q, st.binv);
            q = incidence_mm(attn, st.conv_h, q);
            propagated = scale_rows(q, st.dinv_sqrt);
        }
        p = leaky_relu(matmul(propagated, w), kConvSlope);
    }
    return p;
}

std::pair<Var, Var> predict_outcomes(Var z, Var p, const ModelVars& vars) {
    Var c = concat_cols(z, p);
    Var y1 = mlp_forward(c, vars.h1_w, vars.h1_b);
    Var y0 = mlp_forward(c, vars.h0_w, vars.h0_b);
    return {y1, y0};
}

ForwardGraph forward_graph(Tape& tape, const ModelVars& vars, const InterferenceStructure& st,
                           const Tensor& x, const std::vector<int>& t) {
    if (static_cast<int>(t.size()) != x.rows) throw ShapeMismatch("forward: |T| != rows of X");
    ForwardGraph fg;
    Var xin = tape.constant(x);
    fg.z = encode_confounders(xin, vars);

    Var attn{};
    if (st.variant != Variant::GraphConv) {
        Var ze = hyperedge_repr(fg.z, st.conv_h);
        attn = attention_scores(fg.z, ze, vars, st);
        fg.attn = attn;
        fg.has_attn = true;
    }
    fg.p = interference_forward(fg.z, t, vars, st, attn);
    auto [y1, y0] = predict_outcomes(fg.z, fg.p, vars);
    fg.yhat1 = y1;
    fg.yhat0 = y0;
    return fg;
}

ForwardOutput forward(const ModelParams& params, const InterferenceStructure& st, const Tensor& x,
                      const std::vector<int>& t) {
    Tape tape;
    ModelVars vars = bind_params(tape, params, /*trainable=*/false);
    ForwardGraph fg = forward_graph(tape, vars, st, x, t);
    ForwardOutput out;
    out.z = tape.value(fg.z);
    out.p = tape.value(fg.p);
    out.yhat1 = tape.value(fg.yhat1).data;
    out.yhat0 = tape.value(fg.yhat0).data;
    out.has_attn = fg.has_attn;
    if (fg.has_attn) out.attn = tape.value(fg.attn);
    return out;
}

ForwardOutput forward(const ModelParams& params, const Hypergraph& h, Variant v, const Tensor& x,
                      const std::vector<int>& t) {
    InterferenceStructure st = build_structure(h, v);
    return forward(params, st, x, t);
}

std::vector<double> estimate_ite(const ForwardOutput& out) {
    std::vector<double> tau(out.yhat1.size());
    for (size_t i = 0; i < tau.size(); ++i) tau[i] = out.yhat1[i] - out.yhat0[i];
    return tau;
}

namespace {

// Value-level interference pass with fixed attention, for the flipped-
// treatment counterfactual path.
Tensor interference_values(const Tensor& z, const std::vector<int>& t, const ModelParams& params,
                           const InterferenceStructure& st, const Tensor& attn) {
    Tape tape;
    ModelVars vars = bind_params(tape, params, /*trainable=*/false);
    Var zc = tape.constant(z);
    Var attn_var = st.variant == Variant::GraphConv ? Var{} : tape.constant(attn);
    Var p = interference_forward(zc, t, vars, st, attn_var);
    return tape.value(p);
}

double head_row(const Mlp& head, const std::vector<double>& input) {
    std::vector<double> cur = input;
    for (size_t l = 0; l < head.weights.size(); ++l) {
        const Tensor& w = head.weights[l];
        const Tensor& b = head.biases[l];
        std::vector<double> next(static_cast<size_t>(w.cols));
        for (int j = 0; j < w.cols; ++j) {
            double s = b(0, j);
            for (int i = 0; i < w.rows; ++i) s += cur[static_cast<size_t>(i)] * w(i, j);
            next[static_cast<size_t>(j)] = s;
        }
        if (l + 1 < head.weights.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cur = std::move(next);
    }
    return cur[0];
}

}  // namespace

std::vector<double> estimate_ite_flip(const ModelParams& params, const InterferenceStructure& st,
                                      const Tensor& x, const std::vector<int>& t,
                                      const ForwardOutput& shared) {
    int n = x.rows;
    std::vector<double> tau(static_cast<size_t>(n));
    std::vector<int> t_flip = t;
    std::vector<double> input(static_cast<size_t>(shared.z.cols + shared.p.cols));
    for (int i = 0; i < n; ++i) {
        size_t ui = static_cast<size_t>(i);
        t_flip[ui] = 1 - t_flip[ui];
        Tensor p_cf = interference_values(shared.z, t_flip, params, st, shared.attn);
        t_flip[ui] = t[ui];

        for (int c = 0; c < shared.z.cols; ++c) input[static_cast<size_t>(c)] = shared.z(i, c);
        for (int c = 0; c < shared.p.cols; ++c)
            input[static_cast<size_t>(shared.z.cols + c)] = p_cf(i, c);
        double y_cf = head_row(t[ui] != 0 ? params.head0 : params.head1, input);
        tau[ui] = t[ui] != 0 ? shared.yhat1[ui] - y_cf : y_cf - shared.yhat0[ui];
    }
    return tau;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["config"] = {{"d_in", params.cfg.d_in},
                     {"d_z", params.cfg.d_z},
                     {"d_p", params.cfg.d_p},
                     {"d_a", params.cfg.d_a},
                     {"attention_heads", params.cfg.attention_heads},
                     {"conv_layers", params.cfg.conv_layers},
                     {"counterfactual_interference", params.cfg.counterfactual_interference}};
    nlohmann::json tensors = nlohmann::json::object();
    for (auto& [name, tensor] : params.named_tensors()) {
        tensors[name] = {{"shape", {tensor->rows, tensor->cols}}, {"data", tensor->data}};
    }
    doc["params"] = std::move(tensors);
    atomic_write_file(path, doc.dump() + "\n");
}

ModelParams load_checkpoint(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (doc.at("format_version").get<int>() != 1)
        throw ParseError(path + ": unsupported checkpoint format version");

    const auto& jc = doc.at("config");
    ModelConfig cfg;
    cfg.d_in = jc.at("d_in").get<int>();
    cfg.d_z = jc.at("d_z").get<int>();
    cfg.d_p = jc.at("d_p").get<int>();
    cfg.d_a = jc.at("d_a").get<int>();
    cfg.attention_heads = jc.at("attention_heads").get<int>();
    cfg.conv_layers = jc.at("conv_layers").get<int>();
    cfg.counterfactual_interference = jc.at("counterfactual_interference").get<bool>();

    ModelParams params = init_params(cfg, 0);
    const auto& tensors = doc.at("params");
    for (auto& [name, tensor] : params.named_tensors()) {
        if (!tensors.contains(name)) throw ParseError(path + ": missing tensor " + name);
        const auto& jt = tensors.at(name);
        int rows = jt.at("shape").at(0).get<int>();
        int cols = jt.at("shape").at(1).get<int>();
        if (rows != tensor->rows || cols != tensor->cols)
            throw ParseError(path + ": shape mismatch for " + name);
        auto data = jt.at("data").get<std::vector<double>>();
        if (data.size() != tensor->size()) throw ParseError(path + ": data size mismatch for " + name);
        tensor->data = std::move(data);
    }
    return params;
}

}  // namespace hypersci
