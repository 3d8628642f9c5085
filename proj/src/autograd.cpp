#include "sogr/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>
#include <unordered_set>

#include "sogr/errors.hpp"

namespace sogr {

NodePtr leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

NodePtr constant(Tensor value) { return leaf(std::move(value), false); }

NodePtr scalar_node(float v) { return constant(Tensor::scalar(v)); }

NodePtr detach(const NodePtr& x) {
    auto n = std::make_shared<Node>();
    n->value = x->value;
    n->requires_grad = false;
    n->op = "detach";
    return n;
}

namespace {

NodePtr make_op(const char* name, Tensor value, std::vector<NodePtr> parents, BackpropFn fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    n->backprop = std::move(fn);
    n->op = name;
    return n;
}

// ---- broadcasting ---------------------------------------------------------

// Right-aligned broadcast plan: per result dim, the element stride into each
// operand (0 where that operand's dim is 1).
struct BcastPlan {
    std::vector<int> rshape;
    std::vector<int64_t> stride_a, stride_b;
    int64_t n = 0;
};

BcastPlan make_plan(const char* opname, const std::vector<int>& sa, const std::vector<int>& sb) {
    const int ra = static_cast<int>(sa.size()), rb = static_cast<int>(sb.size());
    const int r = std::max(ra, rb);
    BcastPlan plan;
    plan.rshape.resize(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const int da = (i >= r - ra) ? sa[static_cast<size_t>(i - (r - ra))] : 1;
        const int db = (i >= r - rb) ? sb[static_cast<size_t>(i - (r - rb))] : 1;
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(opname) + ": shapes " + shape_str(sa) + " and " +
                             shape_str(sb) + " are not broadcast-compatible");
        }
        plan.rshape[static_cast<size_t>(i)] = std::max(da, db);
    }
    plan.n = shape_numel(plan.rshape);
    // row-major strides with 0 on broadcast dims
    auto strides_for = [&](const std::vector<int>& s) {
        std::vector<int64_t> out(static_cast<size_t>(r), 0);
        int64_t acc = 1;
        const int rs = static_cast<int>(s.size());
        for (int i = rs - 1; i >= 0; --i) {
            const int ri = i + (r - rs);
            out[static_cast<size_t>(ri)] = (s[static_cast<size_t>(i)] == 1) ? 0 : acc;
            acc *= s[static_cast<size_t>(i)];
        }
        return out;
    };
    plan.stride_a = strides_for(sa);
    plan.stride_b = strides_for(sb);
    return plan;
}

// Calls fn(result_index, offset_a, offset_b) for every result element in
// row-major order.
template <class Fn>
void for_each_bcast(const BcastPlan& plan, Fn&& fn) {
    const int r = static_cast<int>(plan.rshape.size());
    std::vector<int> idx(static_cast<size_t>(r), 0);
    int64_t oa = 0, ob = 0;
    for (int64_t i = 0; i < plan.n; ++i) {
        fn(i, oa, ob);
        for (int d = r - 1; d >= 0; --d) {
            idx[static_cast<size_t>(d)]++;
            oa += plan.stride_a[static_cast<size_t>(d)];
            ob += plan.stride_b[static_cast<size_t>(d)];
            if (idx[static_cast<size_t>(d)] < plan.rshape[static_cast<size_t>(d)]) break;
            oa -= plan.stride_a[static_cast<size_t>(d)] * plan.rshape[static_cast<size_t>(d)];
            ob -= plan.stride_b[static_cast<size_t>(d)] * plan.rshape[static_cast<size_t>(d)];
            idx[static_cast<size_t>(d)] = 0;
        }
    }
}

enum class BinOp { add, sub, mul };

float apply_bin(BinOp op, float a, float b) {
    switch (op) {
        case BinOp::add: return a + b;
        case BinOp::sub: return a - b;
        default: return a * b;
    }
}

NodePtr binary_op(BinOp op, const char* name, const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    Tensor out;
    bool same = av.same_shape(bv);
    BcastPlan plan;
    if (same) {
        out = Tensor(av.shape());
        const float* pa = av.data();
        const float* pb = bv.data();
        float* po = out.data();
        const int64_t n = av.numel();
        switch (op) {
            case BinOp::add:
                for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
                break;
            case BinOp::sub:
                for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
                break;
            case BinOp::mul:
                for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
                break;
        }
    } else {
        plan = make_plan(name, av.shape(), bv.shape());
        out = Tensor(plan.rshape);
        const float* pa = av.data();
        const float* pb = bv.data();
        float* po = out.data();
        for_each_bcast(plan, [&](int64_t i, int64_t oa, int64_t ob) {
            po[i] = apply_bin(op, pa[oa], pb[ob]);
        });
    }

    Tensor a_val = (op == BinOp::mul) ? av : Tensor();
    Tensor b_val = (op == BinOp::mul) ? bv : Tensor();
    std::vector<int> a_shape = av.shape(), b_shape = bv.shape();

    BackpropFn fn = [op, same, plan, a_val = std::move(a_val), b_val = std::move(b_val),
                     a_shape = std::move(a_shape), b_shape = std::move(b_shape)](
                        const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out_g) {
        if (same) {
            const int64_t n = g.numel();
            if (need[0]) {
                Tensor ga(a_shape);
                for (int64_t i = 0; i < n; ++i)
                    ga[i] = (op == BinOp::mul) ? g[i] * b_val[i] : g[i];
                out_g[0] = std::move(ga);
            }
            if (need[1]) {
                Tensor gb(b_shape);
                switch (op) {
                    case BinOp::add:
                        for (int64_t i = 0; i < n; ++i) gb[i] = g[i];
                        break;
                    case BinOp::sub:
                        for (int64_t i = 0; i < n; ++i) gb[i] = -g[i];
                        break;
                    case BinOp::mul:
                        for (int64_t i = 0; i < n; ++i) gb[i] = g[i] * a_val[i];
                        break;
                }
                out_g[1] = std::move(gb);
            }
            return;
        }
        // broadcast case: accumulate into 64-bit buffers, then round
        std::vector<double> acc_a, acc_b;
        if (need[0]) acc_a.assign(static_cast<size_t>(shape_numel(a_shape)), 0.0);
        if (need[1]) acc_b.assign(static_cast<size_t>(shape_numel(b_shape)), 0.0);
        for_each_bcast(plan, [&](int64_t i, int64_t oa, int64_t ob) {
            const double gi = g[i];
            if (need[0]) {
                const double da = (op == BinOp::mul) ? gi * b_val[ob] : gi;
                acc_a[static_cast<size_t>(oa)] += da;
            }
            if (need[1]) {
                double db;
                switch (op) {
                    case BinOp::add: db = gi; break;
                    case BinOp::sub: db = -gi; break;
                    default: db = gi * a_val[oa]; break;
                }
                acc_b[static_cast<size_t>(ob)] += db;
            }
        });
        if (need[0]) {
            Tensor ga(a_shape);
            for (size_t i = 0; i < acc_a.size(); ++i) ga[static_cast<int64_t>(i)] = static_cast<float>(acc_a[i]);
            out_g[0] = std::move(ga);
        }
        if (need[1]) {
            Tensor gb(b_shape);
            for (size_t i = 0; i < acc_b.size(); ++i) gb[static_cast<int64_t>(i)] = static_cast<float>(acc_b[i]);
            out_g[1] = std::move(gb);
        }
    };
    return make_op(name, std::move(out), {a, b}, std::move(fn));
}

NodePtr unary_op(const char* name, const NodePtr& a, float (*fwd)(float, float),
                 float (*dfdx)(float, float, float), float param) {
    const Tensor& av = a->value;
    Tensor out(av.shape());
    const int64_t n = av.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], param);

    Tensor x_saved = av;
    Tensor y_saved = out;
    BackpropFn fn = [x_saved = std::move(x_saved), y_saved = std::move(y_saved), dfdx, param](
                        const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out_g) {
        if (!need[0]) return;
        const int64_t n = g.numel();
        Tensor gx(x_saved.shape());
        for (int64_t i = 0; i < n; ++i) gx[i] = g[i] * dfdx(x_saved[i], y_saved[i], param);
        out_g[0] = std::move(gx);
    };
    return make_op(name, std::move(out), {a}, std::move(fn));
}

}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) { return binary_op(BinOp::add, "add", a, b); }
NodePtr sub(const NodePtr& a, const NodePtr& b) { return binary_op(BinOp::sub, "sub", a, b); }
NodePtr mul(const NodePtr& a, const NodePtr& b) { return binary_op(BinOp::mul, "mul", a, b); }

NodePtr sum_all(const NodePtr& a) {
    const Tensor& av = a->value;
    double acc = 0.0;
    for (int64_t i = 0; i < av.numel(); ++i) acc += av[i];
    std::vector<int> in_shape = av.shape();
    BackpropFn fn = [in_shape](const Tensor& g, const std::vector<char>& need,
                               std::vector<Tensor>& out_g) {
        if (!need[0]) return;
        out_g[0] = Tensor::full(in_shape, g[0]);
    };
    return make_op("sum", Tensor::scalar(static_cast<float>(acc)), {a}, std::move(fn));
}

NodePtr mean_all(const NodePtr& a) {
    const Tensor& av = a->value;
    const int64_t n = av.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += av[i];
    std::vector<int> in_shape = av.shape();
    BackpropFn fn = [in_shape, n](const Tensor& g, const std::vector<char>& need,
                                  std::vector<Tensor>& out_g) {
        if (!need[0]) return;
        out_g[0] = Tensor::full(in_shape, g[0] / static_cast<float>(n));
    };
    return make_op("mean", Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))), {a},
                   std::move(fn));
}

namespace {

NodePtr reduce_axis(const char* name, const NodePtr& a, int axis, bool is_mean) {
    const Tensor& av = a->value;
    const int r = av.rank();
    if (axis < 0 || axis >= r) {
        throw ShapeError(std::string(name) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(r));
    }
    const auto& s = av.shape();
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; ++i) inner *= s[static_cast<size_t>(i)];
    const int64_t nd = s[static_cast<size_t>(axis)];

    std::vector<int> out_shape;
    for (int i = 0; i < r; ++i)
        if (i != axis) out_shape.push_back(s[static_cast<size_t>(i)]);
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor out(out_shape);
    std::vector<double> acc(static_cast<size_t>(inner));
    for (int64_t o = 0; o < outer; ++o) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* base = av.data() + o * nd * inner;
        for (int64_t d = 0; d < nd; ++d)
            for (int64_t i = 0; i < inner; ++i) acc[static_cast<size_t>(i)] += base[d * inner + i];
        float* obase = out.data() + o * inner;
        const double scale = is_mean ? 1.0 / static_cast<double>(nd) : 1.0;
        for (int64_t i = 0; i < inner; ++i)
            obase[i] = static_cast<float>(acc[static_cast<size_t>(i)] * scale);
    }

    std::vector<int> in_shape = s;
    BackpropFn fn = [in_shape, outer, inner, nd, is_mean](const Tensor& g,
                                                          const std::vector<char>& need,
                                                          std::vector<Tensor>& out_g) {
        if (!need[0]) return;
        Tensor gx(in_shape);
        const float scale = is_mean ? 1.0f / static_cast<float>(nd) : 1.0f;
        for (int64_t o = 0; o < outer; ++o) {
            const float* gbase = g.data() + o * inner;
            float* xbase = gx.data() + o * nd * inner;
            for (int64_t d = 0; d < nd; ++d)
                for (int64_t i = 0; i < inner; ++i) xbase[d * inner + i] = gbase[i] * scale;
        }
        out_g[0] = std::move(gx);
    };
    return make_op(name, std::move(out), {a}, std::move(fn));
}

}  // namespace

NodePtr sum_axis(const NodePtr& a, int axis) { return reduce_axis("sum_axis", a, axis, false); }
NodePtr mean_axis(const NodePtr& a, int axis) { return reduce_axis("mean_axis", a, axis, true); }

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.rank() != 2 || bv.rank() != 2) {
        throw ShapeError("matmul: expects 2-D operands, got " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
    }
    const int m = av.dim(0), k = av.dim(1), k2 = bv.dim(0), n = bv.dim(1);
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
    }
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t)
                acc += static_cast<double>(av[i * k + t]) * static_cast<double>(bv[t * n + j]);
            out[i * n + j] = static_cast<float>(acc);
        }
    }
    Tensor a_saved = av, b_saved = bv;
    BackpropFn fn = [a_saved = std::move(a_saved), b_saved = std::move(b_saved), m, k, n](
                        const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out_g) {
        if (need[0]) {  // gA = g . B^T
            Tensor ga({m, k});
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j)
                        acc += static_cast<double>(g[i * n + j]) * static_cast<double>(b_saved[t * n + j]);
                    ga[i * k + t] = static_cast<float>(acc);
                }
            out_g[0] = std::move(ga);
        }
        if (need[1]) {  // gB = A^T . g
            Tensor gb({k, n});
            for (int t = 0; t < k; ++t)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i)
                        acc += static_cast<double>(a_saved[i * k + t]) * static_cast<double>(g[i * n + j]);
                    gb[t * n + j] = static_cast<float>(acc);
                }
            out_g[1] = std::move(gb);
        }
    };
    return make_op("matmul", std::move(out), {a, b}, std::move(fn));
}

NodePtr abs(const NodePtr& a) {
    return unary_op(
        "abs", a, [](float x, float) { return std::fabs(x); },
        [](float x, float, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); }, 0.0f);
}

NodePtr log_clamped(const NodePtr& a, float floor) {
    return unary_op(
        "log_clamped", a,
        [](float x, float fl) { return std::log(x < fl ? fl : x); },
        [](float x, float, float fl) { return x >= fl ? 1.0f / x : 0.0f; }, floor);
}

NodePtr relu(const NodePtr& a) {
    return unary_op(
        "relu", a, [](float x, float) { return x > 0.0f ? x : 0.0f; },
        [](float x, float, float) { return x > 0.0f ? 1.0f : 0.0f; }, 0.0f);
}

NodePtr leaky_relu(const NodePtr& a, float slope) {
    return unary_op(
        "leaky_relu", a, [](float x, float s) { return x > 0.0f ? x : s * x; },
        [](float x, float, float s) { return x > 0.0f ? 1.0f : s; }, slope);
}

NodePtr tanh(const NodePtr& a) {
    return unary_op(
        "tanh", a, [](float x, float) { return std::tanh(x); },
        [](float, float y, float) { return 1.0f - y * y; }, 0.0f);
}

NodePtr sigmoid(const NodePtr& a) {
    return unary_op(
        "sigmoid", a,
        [](float x, float) {
            if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
            const float e = std::exp(x);
            return e / (1.0f + e);
        },
        [](float, float y, float) { return y * (1.0f - y); }, 0.0f);
}

GradMap backward(const NodePtr& root) {
    if (!root) throw ContractError("backward: null root");
    if (root->value.numel() != 1) {
        throw ContractError("backward: root must be scalar, got shape " +
                            shape_str(root->value.shape()));
    }
    GradMap result;
    if (!root->requires_grad) return result;

    // reverse post-order DFS over the requires_grad subgraph = topological
    // order with consumers before producers
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    std::unordered_map<Node*, Tensor> acc;
    acc[root.get()] = Tensor::ones(root->value.shape());

    std::vector<Tensor> partials;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        auto git = acc.find(node);
        if (git == acc.end()) continue;  // unreachable along grad edges
        const Tensor& g = git->second;
        if (!node->backprop) continue;  // leaf

        const size_t np = node->parents.size();
        std::vector<char> need(np, 0);
        bool any = false;
        for (size_t i = 0; i < np; ++i) {
            need[i] = node->parents[i]->requires_grad ? 1 : 0;
            any = any || need[i];
        }
        if (!any) continue;
        partials.assign(np, Tensor());
        node->backprop(g, need, partials);
        for (size_t i = 0; i < np; ++i) {
            if (!need[i]) continue;
            Node* p = node->parents[i].get();
            Tensor& pg = partials[i];
            if (!pg.defined()) continue;
            if (!pg.same_shape(p->value)) {
                throw ShapeError(std::string("backward: op '") + node->op +
                                 "' produced gradient of shape " + shape_str(pg.shape()) +
                                 " for parent of shape " + shape_str(p->value.shape()));
            }
            auto ait = acc.find(p);
            if (ait == acc.end()) {
                acc.emplace(p, std::move(pg));
            } else {
                Tensor& dst = ait->second;
                for (int64_t j = 0; j < dst.numel(); ++j) dst[j] += pg[j];
            }
        }
    }

    for (Node* node : order) {
        auto it = acc.find(node);
        if (it == acc.end()) continue;
        node->grad = it->second;
        result.emplace(node, std::move(it->second));
    }
    return result;
}

namespace {

// Reads the root scalar for the finite-difference oracle. When the root is a
// plain sum/mean reduction, the reduction is redone in 64-bit over its (still
// 32-bit) input so the quotient is not dominated by the final rounding.
double oracle_scalar(const NodePtr& y) {
    const std::string_view op = y->op;
    if ((op == "sum" || op == "mean") && y->parents.size() == 1) {
        const Tensor& in = y->parents[0]->value;
        double acc = 0.0;
        for (int64_t i = 0; i < in.numel(); ++i) acc += in[i];
        return op == "mean" ? acc / static_cast<double>(in.numel()) : acc;
    }
    return y->value[0];
}

}  // namespace

double grad_check(const std::function<NodePtr(const NodePtr&)>& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");
    auto xn = leaf(x, true);
    NodePtr y = f(xn);
    if (y->value.numel() != 1) {
        throw ContractError("grad_check: f(x) must be scalar, got shape " +
                            shape_str(y->value.shape()));
    }
    GradMap gm = backward(y);
    Tensor ad = Tensor::zeros(x.shape());
    if (auto it = gm.find(xn.get()); it != gm.end()) ad = it->second;

    Tensor xp = x;
    double max_err = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const float orig = xp[i];
        const float hi = orig + static_cast<float>(eps);
        const float lo = orig - static_cast<float>(eps);
        xp[i] = hi;
        const double f_hi = oracle_scalar(f(constant(xp)));
        xp[i] = lo;
        const double f_lo = oracle_scalar(f(constant(xp)));
        xp[i] = orig;
        // divide by the step actually realized in 32-bit storage
        const double cd = (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
        const double a = ad[i];
        const double err = std::fabs(a - cd) / std::max({std::fabs(a), std::fabs(cd), 1e-8});
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace sogr
