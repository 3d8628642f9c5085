#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "sogr/tensor.hpp"

namespace sogr {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Gradients keyed by node handle, as returned by backward().
using GradMap = std::unordered_map<const Node*, Tensor>;

/// Fills out[i] with the gradient flowing to parents[i], for every i with
/// need[i] set. Entries with need[i] unset are left undefined.
using BackpropFn =
    std::function<void(const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out)>;

/// One vertex of the define-by-run graph: a value, an optional gradient slot,
/// and the record of the producing operation. Graphs are rebuilt every
/// forward pass; nodes are immutable once created except for the grad slot.
struct Node {
    Tensor value;
    std::optional<Tensor> grad;  // filled by backward() when requires_grad
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    BackpropFn backprop;  // empty for leaves/constants
    const char* op = "leaf";
};

NodePtr leaf(Tensor value, bool requires_grad = false);
NodePtr constant(Tensor value);
NodePtr scalar_node(float v);

/// Stops gradient flow: same value, no parents, requires_grad = false.
NodePtr detach(const NodePtr& x);

// Elementwise arithmetic with numpy-style right-aligned broadcasting over
// singleton dims. Shape mismatches raise ShapeError naming both shapes.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);

inline NodePtr operator+(const NodePtr& a, const NodePtr& b) { return add(a, b); }
inline NodePtr operator-(const NodePtr& a, const NodePtr& b) { return sub(a, b); }
inline NodePtr operator*(const NodePtr& a, const NodePtr& b) { return mul(a, b); }

// Reductions. Sums accumulate in 64-bit before rounding to storage precision.
NodePtr sum_all(const NodePtr& a);
NodePtr mean_all(const NodePtr& a);
NodePtr sum_axis(const NodePtr& a, int axis);
NodePtr mean_axis(const NodePtr& a, int axis);

/// 2-D matrix product. Backward: gA = g.B^T, gB = A^T.g.
NodePtr matmul(const NodePtr& a, const NodePtr& b);

// Unary math.
NodePtr abs(const NodePtr& a);

/// log(max(x, floor)); gradient is zero on the clamped region.
NodePtr log_clamped(const NodePtr& a, float floor = 1e-8f);

// Activations.
NodePtr relu(const NodePtr& a);
NodePtr leaky_relu(const NodePtr& a, float slope);
NodePtr tanh(const NodePtr& a);
NodePtr sigmoid(const NodePtr& a);

/// Reverse-mode sweep from a scalar root (all dims must be 1). Every
/// requires_grad ancestor gets its accumulated gradient written to its grad
/// slot and an entry in the returned map. Fan-out gradients are summed;
/// repeated calls overwrite grad slots.
GradMap backward(const NodePtr& root);

/// Central-difference check of f at x: returns
/// max_i |autodiff_i - centraldiff_i| / max(|autodiff_i|, |centraldiff_i|, 1e-8).
/// Forward passes stay in 32-bit storage, but the quotient is formed in
/// 64-bit: the step is the one actually realized after rounding, and a
/// sum/mean root is re-reduced in 64-bit. f(x) must be scalar-valued, and
/// callers must keep inputs at least eps away from activation kinks.
double grad_check(const std::function<NodePtr(const NodePtr&)>& f, const Tensor& x, double eps);

}  // namespace sogr
