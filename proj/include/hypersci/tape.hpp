#pragma once

#include <functional>
#include <vector>

#include "hypersci/tensor.hpp"

namespace hypersci {

class Tape;

// Handle to a tape node. Cheap to copy; valid until Tape::reset().
struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

// Reverse-mode gradient tape over Tensor-valued operations. Single-threaded;
// records a forward pass, then backward() accumulates exact gradients into
// every node reachable from the loss. Nodes whose inputs carry no parameters
// are skipped during the sweep.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int)>;

    Var constant(Tensor value) { return make_node(std::move(value), -1, -1, nullptr, false); }
    Var param(Tensor value) { return make_node(std::move(value), -1, -1, nullptr, true); }

    // Internal node API, also used by higher-level modules to add ops.
    Var make_node(Tensor value, int p0, int p1, BackwardFn back, bool force_grad = false);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }

    // Zero tensor of matching shape when the node was not reached by backward.
    Tensor grad(Var v) const;

    bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    // Upstream gradient of a node during the backward sweep.
    const Tensor& upstream(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

    void accumulate(int id, const Tensor& delta);

    // loss must be 1x1. A second call without reset() throws StaleTape.
    void backward(Var loss);

    void reset();

    size_t n_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // rows == 0 until touched
        int p0 = -1, p1 = -1;
        BackwardFn back;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Elementwise / structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var mul_const(Var a, const Tensor& c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_rowvec(Var x, Var v);              // v is 1 x c
Var add_colvec(Var x, Var u);              // u is r x 1
Var outer_add(Var u, Var v);               // (r x 1, c x 1) -> r x c of u_i + v_j
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
Var exp(Var x);
Var sqrt_clamped(Var x);                   // sqrt(max(x, 1e-30)); zero grad at the clamp
Var sum_all(Var x);
Var sum_sq(Var x);
Var slice_rows(Var x, std::vector<int> ids);
Var concat_cols(Var a, Var b);
Var scale_rows(Var x, std::vector<double> s);
Var scale_cols(Var x, std::vector<double> s);
// Softmax within each row over mask's nonzero entries; all-zero rows stay zero.
Var masked_softmax_rows(Var scores, Tensor mask);
Var logsumexp_rows(Var m);                 // (r, c) -> (r, 1)
Var logsumexp_cols(Var m);                 // (r, c) -> (c, 1)

enum class Activation { Relu, LeakyRelu, Sigmoid };
Var activation(Var x, Activation kind, double slope = 0.01);

// Central-difference oracle: perturbs every entry of every param, re-evaluates
// loss_fn (which must read the params through the given pointers), and returns
// the max relative deviation from the supplied analytic gradients.
double finite_diff_check(const std::vector<Tensor*>& params,
                         const std::vector<Tensor>& analytic_grads,
                         const std::function<double()>& loss_fn, double h);

}  // namespace hypersci
