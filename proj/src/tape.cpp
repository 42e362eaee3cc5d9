#include "hypersci/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace hypersci {

Var Tape::make_node(Tensor value, int p0, int p1, BackwardFn back, bool force_grad) {
    Node node;
    node.value = std::move(value);
    node.p0 = p0;
    node.p1 = p1;
    node.back = std::move(back);
    node.needs_grad = force_grad || (p0 >= 0 && nodes_[static_cast<size_t>(p0)].needs_grad) ||
                      (p1 >= 0 && nodes_[static_cast<size_t>(p1)].needs_grad);
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::grad(Var v) const {
    const Node& node = nodes_[static_cast<size_t>(v.id)];
    if (node.grad.rows == 0) return Tensor::zeros(node.value.rows, node.value.cols);
    return node.grad;
}

void Tape::accumulate(int id, const Tensor& delta) {
    Node& node = nodes_[static_cast<size_t>(id)];
    if (node.grad.rows == 0) {
        node.grad = delta;
        return;
    }
    for (size_t i = 0; i < node.grad.size(); ++i) node.grad.data[i] += delta.data[i];
}

void Tape::backward(Var loss) {
    if (backward_done_) throw StaleTape("backward already ran on this tape; reset() first");
    backward_done_ = true;
    const Tensor& lv = value(loss);
    if (lv.rows != 1 || lv.cols != 1) throw ShapeMismatch("backward: loss must be 1x1");
    accumulate(loss.id, Tensor::scalar(1.0));
    for (int id = loss.id; id >= 0; --id) {
        Node& node = nodes_[static_cast<size_t>(id)];
        if (!node.needs_grad || node.grad.rows == 0 || !node.back) continue;
        node.back(*this, id);
    }
}

void Tape::reset() {
    nodes_.clear();
    backward_done_ = false;
}

namespace {

void check_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ShapeMismatch("operands recorded on different tapes");
}

bool wants(Tape& t, int id) { return id >= 0 && t.needs_grad(id); }

}  // namespace

Var add(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    Tensor out = t.value(a) + t.value(b);
    int pa = a.id, pb = b.id;
    return t.make_node(std::move(out), pa, pb, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, pa)) tp.accumulate(pa, g);
        if (wants(tp, pb)) tp.accumulate(pb, g);
    });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    Tensor out = t.value(a) - t.value(b);
    int pa = a.id, pb = b.id;
    return t.make_node(std::move(out), pa, pb, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, pa)) tp.accumulate(pa, g);
        if (wants(tp, pb)) tp.accumulate(pb, -1.0 * g);
    });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) throw ShapeMismatch("mul: shapes differ");
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    int pa = a.id, pb = b.id;
    return t.make_node(std::move(out), pa, pb, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, pa)) {
            Tensor d = g;
            const Tensor& bv2 = tp.value(pb);
            for (size_t i = 0; i < d.size(); ++i) d.data[i] *= bv2.data[i];
            tp.accumulate(pa, d);
        }
        if (wants(tp, pb)) {
            Tensor d = g;
            const Tensor& av2 = tp.value(pa);
            for (size_t i = 0; i < d.size(); ++i) d.data[i] *= av2.data[i];
            tp.accumulate(pb, d);
        }
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    Tensor out = s * t.value(a);
    int pa = a.id;
    return t.make_node(std::move(out), pa, -1, [pa, s](Tape& tp, int self) {
        if (wants(tp, pa)) tp.accumulate(pa, s * tp.upstream(self));
    });
}

Var mul_const(Var a, const Tensor& c) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    if (!av.same_shape(c)) throw ShapeMismatch("mul_const: shapes differ");
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= c.data[i];
    int pa = a.id;
    Tensor cc = c;
    return t.make_node(std::move(out), pa, -1, [pa, cc = std::move(cc)](Tape& tp, int self) {
        if (!wants(tp, pa)) return;
        Tensor d = tp.upstream(self);
        for (size_t i = 0; i < d.size(); ++i) d.data[i] *= cc.data[i];
        tp.accumulate(pa, d);
    });
}

Var matmul(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    Tensor out = matmul(t.value(a), t.value(b));
    int pa = a.id, pb = b.id;
    return t.make_node(std::move(out), pa, pb, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, pa)) tp.accumulate(pa, matmul_nt(g, tp.value(pb)));
        if (wants(tp, pb)) tp.accumulate(pb, matmul_tn(tp.value(pa), g));
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    Tensor out = transpose(t.value(a));
    int pa = a.id;
    return t.make_node(std::move(out), pa, -1, [pa](Tape& tp, int self) {
        if (wants(tp, pa)) tp.accumulate(pa, transpose(tp.upstream(self)));
    });
}

Var add_rowvec(Var x, Var v) {
    check_same_tape(x, v);
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    const Tensor& vv = t.value(v);
    if (vv.rows != 1 || vv.cols != xv.cols) throw ShapeMismatch("add_rowvec: v must be 1 x cols");
    Tensor out = xv;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) += vv(0, j);
    int px = x.id, pv = v.id;
    return t.make_node(std::move(out), px, pv, [px, pv](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, px)) tp.accumulate(px, g);
        if (wants(tp, pv)) {
            Tensor d(1, g.cols);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) d(0, j) += g(i, j);
            tp.accumulate(pv, d);
        }
    });
}

Var add_colvec(Var x, Var u) {
    check_same_tape(x, u);
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    const Tensor& uv = t.value(u);
    if (uv.cols != 1 || uv.rows != xv.rows) throw ShapeMismatch("add_colvec: u must be rows x 1");
    Tensor out = xv;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) += uv(i, 0);
    int px = x.id, pu = u.id;
    return t.make_node(std::move(out), px, pu, [px, pu](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, px)) tp.accumulate(px, g);
        if (wants(tp, pu)) {
            Tensor d(g.rows, 1);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) d(i, 0) += g(i, j);
            tp.accumulate(pu, d);
        }
    });
}

Var outer_add(Var u, Var v) {
    check_same_tape(u, v);
    Tape& t = *u.tape;
    const Tensor& uv = t.value(u);
    const Tensor& vv = t.value(v);
    if (uv.cols != 1 || vv.cols != 1) throw ShapeMismatch("outer_add: operands must be column vectors");
    Tensor out(uv.rows, vv.rows);
    for (int i = 0; i < uv.rows; ++i)
        for (int j = 0; j < vv.rows; ++j) out(i, j) = uv(i, 0) + vv(j, 0);
    int pu = u.id, pv = v.id;
    return t.make_node(std::move(out), pu, pv, [pu, pv](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, pu)) {
            Tensor d(g.rows, 1);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) d(i, 0) += g(i, j);
            tp.accumulate(pu, d);
        }
        if (wants(tp, pv)) {
            Tensor d(g.cols, 1);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) d(j, 0) += g(i, j);
            tp.accumulate(pv, d);
        }
    });
}

Var relu(Var x) {
    Tape& t = *x.tape;
    Tensor out = t.value(x);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        const Tensor& xv = tp.value(px);
        for (size_t i = 0; i < d.size(); ++i)
            if (xv.data[i] <= 0.0) d.data[i] = 0.0;  // subgradient 0 at the kink
        tp.accumulate(px, d);
    });
}

Var leaky_relu(Var x, double slope) {
    Tape& t = *x.tape;
    Tensor out = t.value(x);
    for (double& v : out.data) v = v > 0.0 ? v : slope * v;
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px, slope](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        const Tensor& xv = tp.value(px);
        for (size_t i = 0; i < d.size(); ++i)
            if (xv.data[i] <= 0.0) d.data[i] *= slope;
        tp.accumulate(px, d);
    });
}

Var sigmoid(Var x) {
    Tape& t = *x.tape;
    Tensor out = t.value(x);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        const Tensor& s = tp.value(self);
        for (size_t i = 0; i < d.size(); ++i) d.data[i] *= s.data[i] * (1.0 - s.data[i]);
        tp.accumulate(px, d);
    });
}

Var exp(Var x) {
    Tape& t = *x.tape;
    Tensor out = t.value(x);
    for (double& v : out.data) v = std::exp(v);
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        const Tensor& ev = tp.value(self);
        for (size_t i = 0; i < d.size(); ++i) d.data[i] *= ev.data[i];
        tp.accumulate(px, d);
    });
}

Var sqrt_clamped(Var x) {
    constexpr double kFloor = 1e-30;
    Tape& t = *x.tape;
    Tensor out = t.value(x);
    for (double& v : out.data) v = std::sqrt(v > kFloor ? v : kFloor);
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        const Tensor& xv = tp.value(px);
        const Tensor& yv = tp.value(self);
        for (size_t i = 0; i < d.size(); ++i)
            d.data[i] = xv.data[i] > kFloor ? d.data[i] / (2.0 * yv.data[i]) : 0.0;
        tp.accumulate(px, d);
    });
}

Var sum_all(Var x) {
    Tape& t = *x.tape;
    double s = 0.0;
    for (double v : t.value(x).data) s += v;
    int px = x.id;
    return t.make_node(Tensor::scalar(s), px, -1, [px](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        double g = tp.upstream(self).data[0];
        const Tensor& xv = tp.value(px);
        tp.accumulate(px, Tensor::full(xv.rows, xv.cols, g));
    });
}

Var sum_sq(Var x) {
    Tape& t = *x.tape;
    double s = 0.0;
    for (double v : t.value(x).data) s += v * v;
    int px = x.id;
    return t.make_node(Tensor::scalar(s), px, -1, [px](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        double g = tp.upstream(self).data[0];
        Tensor d = tp.value(px);
        for (double& v : d.data) v *= 2.0 * g;
        tp.accumulate(px, d);
    });
}

Var slice_rows(Var x, std::vector<int> ids) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    Tensor out(static_cast<int>(ids.size()), xv.cols);
    for (size_t k = 0; k < ids.size(); ++k) {
        int i = ids[k];
        if (i < 0 || i >= xv.rows) throw ShapeMismatch("slice_rows: row index out of range");
        for (int j = 0; j < xv.cols; ++j) out(static_cast<int>(k), j) = xv(i, j);
    }
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px, ids = std::move(ids)](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        const Tensor& g = tp.upstream(self);
        const Tensor& xv2 = tp.value(px);
        Tensor d(xv2.rows, xv2.cols);
        for (size_t k = 0; k < ids.size(); ++k)
            for (int j = 0; j < g.cols; ++j) d(ids[k], j) += g(static_cast<int>(k), j);
        tp.accumulate(px, d);
    });
}

Var concat_cols(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (av.rows != bv.rows) throw ShapeMismatch("concat_cols: row counts differ");
    Tensor out(av.rows, av.cols + bv.cols);
    for (int i = 0; i < av.rows; ++i) {
        for (int j = 0; j < av.cols; ++j) out(i, j) = av(i, j);
        for (int j = 0; j < bv.cols; ++j) out(i, av.cols + j) = bv(i, j);
    }
    int pa = a.id, pb = b.id, ca = av.cols;
    return t.make_node(std::move(out), pa, pb, [pa, pb, ca](Tape& tp, int self) {
        const Tensor& g = tp.upstream(self);
        if (wants(tp, pa)) {
            Tensor d(g.rows, ca);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < ca; ++j) d(i, j) = g(i, j);
            tp.accumulate(pa, d);
        }
        if (wants(tp, pb)) {
            Tensor d(g.rows, g.cols - ca);
            for (int i = 0; i < g.rows; ++i)
                for (int j = ca; j < g.cols; ++j) d(i, j - ca) = g(i, j);
            tp.accumulate(pb, d);
        }
    });
}

Var scale_rows(Var x, std::vector<double> s) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    if (static_cast<int>(s.size()) != xv.rows) throw ShapeMismatch("scale_rows: size mismatch");
    Tensor out = xv;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) *= s[static_cast<size_t>(i)];
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px, s = std::move(s)](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        for (int i = 0; i < d.rows; ++i)
            for (int j = 0; j < d.cols; ++j) d(i, j) *= s[static_cast<size_t>(i)];
        tp.accumulate(px, d);
    });
}

Var scale_cols(Var x, std::vector<double> s) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    if (static_cast<int>(s.size()) != xv.cols) throw ShapeMismatch("scale_cols: size mismatch");
    Tensor out = xv;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) *= s[static_cast<size_t>(j)];
    int px = x.id;
    return t.make_node(std::move(out), px, -1, [px, s = std::move(s)](Tape& tp, int self) {
        if (!wants(tp, px)) return;
        Tensor d = tp.upstream(self);
        for (int i = 0; i < d.rows; ++i)
            for (int j = 0; j < d.cols; ++j) d(i, j) *= s[static_cast<size_t>(j)];
        tp.accumulate(px, d);
    });
}

Var masked_softmax_rows(Var scores, Tensor mask) {
    Tape& t = *scores.tape;
    const Tensor& sv = t.value(scores);
    if (!sv.same_shape(mask)) throw ShapeMismatch("masked_softmax_rows: mask shape");
    Tensor out(sv.rows, sv.cols);
    for (int i = 0; i < sv.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < sv.cols; ++j)
            if (mask(i, j) != 0.0) mx = std::max(mx, sv(i, j));
        if (!std::isfinite(mx)) continue;  // isolated row
        double z = 0.0;
        for (int j = 0; j < sv.cols; ++j)
            if (mask(i, j) != 0.0) z += std::exp(sv(i, j) - mx);
        for (int j = 0; j < sv.cols; ++j)
            if (mask(i, j) != 0.0) out(i, j) = std::exp(sv(i, j) - mx) / z;
    }
    int ps = scores.id;
    return t.make_node(std::move(out), ps, -1, [ps, mask = std::move(mask)](Tape& tp, int self) {
        if (!wants(tp, ps)) return;
        const Tensor& g = tp.upstream(self);
        const Tensor& a = tp.value(self);
        Tensor d(g.rows, g.cols);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols; ++j)
                if (mask(i, j) != 0.0) dot += g(i, j) * a(i, j);
            for (int j = 0; j < g.cols; ++j)
                if (mask(i, j) != 0.0) d(i, j) = a(i, j) * (g(i, j) - dot);
        }
        tp.accumulate(ps, d);
    });
}

Var logsumexp_rows(Var m) {
    Tape& t = *m.tape;
    const Tensor& mv = t.value(m);
    Tensor out(mv.rows, 1);
    for (int i = 0; i < mv.rows; ++i) {
        double mx = mv(i, 0);
        for (int j = 1; j < mv.cols; ++j) mx = std::max(mx, mv(i, j));
        double z = 0.0;
        for (int j = 0; j < mv.cols; ++j) z += std::exp(mv(i, j) - mx);
        out(i, 0) = mx + std::log(z);
    }
    int pm = m.id;
    return t.make_node(std::move(out), pm, -1, [pm](Tape& tp, int self) {
        if (!wants(tp, pm)) return;
        const Tensor& g = tp.upstream(self);
        const Tensor& mv2 = tp.value(pm);
        const Tensor& y = tp.value(self);
        Tensor d(mv2.rows, mv2.cols);
        for (int i = 0; i < mv2.rows; ++i)
            for (int j = 0; j < mv2.cols; ++j) d(i, j) = g(i, 0) * std::exp(mv2(i, j) - y(i, 0));
        tp.accumulate(pm, d);
    });
}

Var logsumexp_cols(Var m) {
    Tape& t = *m.tape;
    const Tensor& mv = t.value(m);
    Tensor out(mv.cols, 1);
    for (int j = 0; j < mv.cols; ++j) {
        double mx = mv(0, j);
        for (int i = 1; i < mv.rows; ++i) mx = std::max(mx, mv(i, j));
        double z = 0.0;
        for (int i = 0; i < mv.rows; ++i) z += std::exp(mv(i, j) - mx);
        out(j, 0) = mx + std::log(z);
    }
    int pm = m.id;
    return t.make_node(std::move(out), pm, -1, [pm](Tape& tp, int self) {
        if (!wants(tp, pm)) return;
        const Tensor& g = tp.upstream(self);
        const Tensor& mv2 = tp.value(pm);
        const Tensor& y = tp.value(self);
        Tensor d(mv2.rows, mv2.cols);
        for (int i = 0; i < mv2.rows; ++i)
            for (int j = 0; j < mv2.cols; ++j) d(i, j) = g(j, 0) * std::exp(mv2(i, j) - y(j, 0));
        tp.accumulate(pm, d);
    });
}

Var activation(Var x, Activation kind, double slope) {
    switch (kind) {
        case Activation::Relu:
            return relu(x);
        case Activation::LeakyRelu:
            if (slope <= 0.0 || slope >= 1.0) throw ShapeMismatch("leaky_relu: slope must be in (0,1)");
            return leaky_relu(x, slope);
        case Activation::Sigmoid:
            return sigmoid(x);
    }
    throw ShapeMismatch("activation: unknown kind");
}

double finite_diff_check(const std::vector<Tensor*>& params,
                         const std::vector<Tensor>& analytic_grads,
                         const std::function<double()>& loss_fn, double h) {
    if (h <= 0.0) throw NonFiniteValue("finite_diff_check: h must be > 0");
    if (params.size() != analytic_grads.size())
        throw ShapeMismatch("finite_diff_check: params/grads count mismatch");
    double max_rel = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor& param = *params[p];
        const Tensor& analytic = analytic_grads[p];
        if (!param.same_shape(analytic)) throw ShapeMismatch("finite_diff_check: grad shape mismatch");
        for (size_t k = 0; k < param.size(); ++k) {
            double saved = param.data[k];
            param.data[k] = saved + h;
            double up = loss_fn();
            param.data[k] = saved - h;
            double down = loss_fn();
            param.data[k] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NonFiniteValue("finite_diff_check: loss not finite");
            double numeric = (up - down) / (2.0 * h);
            double rel = std::abs(analytic.data[k] - numeric) / std::max(1e-8, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace hypersci
