#include "sogr/layers.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "sogr/errors.hpp"

namespace sogr {

ConvSpec ConvSpec::make(int in_channels, int out_channels, int kernel, int stride, int pad) {
    ConvSpec s{in_channels, out_channels, kernel, stride, pad, pad};
    s.validate();
    return s;
}

ConvSpec ConvSpec::same_k4(int in_channels, int out_channels) {
    ConvSpec s{in_channels, out_channels, 4, 1, 1, 2};
    s.validate();
    return s;
}

void ConvSpec::validate() const {
    if (in_channels < 1 || out_channels < 1)
        throw ContractError("ConvSpec: channel counts must be positive");
    if (kernel < 1) throw ContractError("ConvSpec: kernel must be positive");
    if (stride < 1) throw ContractError("ConvSpec: stride must be positive");
    if (pad_lo < 0 || pad_hi < 0) throw ContractError("ConvSpec: padding must be non-negative");
}

int ConvSpec::out_size(int in) const {
    const int span = in + pad_lo + pad_hi - kernel;
    if (span < 0)
        throw ShapeError("ConvSpec: input edge " + std::to_string(in) +
                         " too small for kernel " + std::to_string(kernel));
    return span / stride + 1;
}

int ConvSpec::transpose_out_size(int in) const {
    const int out = (in - 1) * stride - (pad_lo + pad_hi) + kernel;
    if (out < 1)
        throw ShapeError("ConvSpec: transpose output edge would be " + std::to_string(out));
    return out;
}

namespace {

NodePtr make_op(const char* name, Tensor value, std::vector<NodePtr> parents, BackpropFn fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p && p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    n->backprop = std::move(fn);
    n->op = name;
    return n;
}

// C[m, n] += sum_k A[m, k] * B[k, n]
void gemm_acc(const float* A, const float* B, float* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        float* crow = C + static_cast<int64_t>(m) * N;
        const float* arow = A + static_cast<int64_t>(m) * K;
        for (int k = 0; k < K; ++k) {
            const float a = arow[k];
            if (a == 0.0f) continue;
            const float* brow = B + static_cast<int64_t>(k) * N;
            for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

// C[m, n] += sum_k A[k, m] * B[k, n]
void gemm_at_acc(const float* A, const float* B, float* C, int M, int K, int N) {
    for (int k = 0; k < K; ++k) {
        const float* arow = A + static_cast<int64_t>(k) * M;
        const float* brow = B + static_cast<int64_t>(k) * N;
        for (int m = 0; m < M; ++m) {
            const float a = arow[m];
            if (a == 0.0f) continue;
            float* crow = C + static_cast<int64_t>(m) * N;
            for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

// C[m, n] += sum_k A[m, k] * B[n, k]
void gemm_bt_acc(const float* A, const float* B, float* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const float* arow = A + static_cast<int64_t>(m) * K;
        float* crow = C + static_cast<int64_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            const float* brow = B + static_cast<int64_t>(n) * K;
            float acc = 0.0f;
            for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
            crow[n] += acc;
        }
    }
}

struct ConvGeom {
    int C, H, W;    // image being unfolded
    int K, S, PL;   // kernel, stride, low pad
    int OH, OW;     // unfolded grid
};

// x [C, H, W] -> cols [C*K*K, OH*OW]
void im2col(const float* x, float* cols, const ConvGeom& g) {
    const int64_t plane = static_cast<int64_t>(g.OH) * g.OW;
    for (int c = 0; c < g.C; ++c) {
        const float* xc = x + static_cast<int64_t>(c) * g.H * g.W;
        for (int ki = 0; ki < g.K; ++ki) {
            for (int kj = 0; kj < g.K; ++kj) {
                float* row = cols + (static_cast<int64_t>(c) * g.K * g.K + ki * g.K + kj) * plane;
                for (int oh = 0; oh < g.OH; ++oh) {
                    const int ih = oh * g.S - g.PL + ki;
                    float* dst = row + static_cast<int64_t>(oh) * g.OW;
                    if (ih < 0 || ih >= g.H) {
                        std::memset(dst, 0, sizeof(float) * static_cast<size_t>(g.OW));
                        continue;
                    }
                    const float* src = xc + static_cast<int64_t>(ih) * g.W;
                    for (int ow = 0; ow < g.OW; ++ow) {
                        const int iw = ow * g.S - g.PL + kj;
                        dst[ow] = (iw >= 0 && iw < g.W) ? src[iw] : 0.0f;
                    }
                }
            }
        }
    }
}

// cols [C*K*K, OH*OW] scatter-added back into x [C, H, W]
void col2im_acc(const float* cols, float* x, const ConvGeom& g) {
    const int64_t plane = static_cast<int64_t>(g.OH) * g.OW;
    for (int c = 0; c < g.C; ++c) {
        float* xc = x + static_cast<int64_t>(c) * g.H * g.W;
        for (int ki = 0; ki < g.K; ++ki) {
            for (int kj = 0; kj < g.K; ++kj) {
                const float* row = cols + (static_cast<int64_t>(c) * g.K * g.K + ki * g.K + kj) * plane;
                for (int oh = 0; oh < g.OH; ++oh) {
                    const int ih = oh * g.S - g.PL + ki;
                    if (ih < 0 || ih >= g.H) continue;
                    const float* src = row + static_cast<int64_t>(oh) * g.OW;
                    float* dst = xc + static_cast<int64_t>(ih) * g.W;
                    for (int ow = 0; ow < g.OW; ++ow) {
                        const int iw = ow * g.S - g.PL + kj;
                        if (iw >= 0 && iw < g.W) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

void check_image(const char* op, const Tensor& x) {
    if (x.rank() != 4)
        throw ShapeError(std::string(op) + ": expected [N, C, H, W] input, got " +
                         shape_str(x.shape()));
}

void check_bias(const char* op, const NodePtr& b, int oc) {
    if (!b) return;
    if (b->value.rank() != 1 || b->value.dim(0) != oc)
        throw ShapeError(std::string(op) + ": bias shape " + shape_str(b->value.shape()) +
                         " does not match " + std::to_string(oc) + " output channels");
}

}  // namespace

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, const ConvSpec& spec) {
    spec.validate();
    check_image("conv2d", x->value);
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (C != spec.in_channels)
        throw ShapeError("conv2d: input has " + std::to_string(C) + " channels, spec expects " +
                         std::to_string(spec.in_channels));
    const int OC = spec.out_channels, K = spec.kernel;
    if (wv.rank() != 4 || wv.dim(0) != OC || wv.dim(1) != C || wv.dim(2) != K || wv.dim(3) != K)
        throw ShapeError("conv2d: weight shape " + shape_str(wv.shape()) + " does not match spec [" +
                         std::to_string(OC) + ", " + std::to_string(C) + ", " + std::to_string(K) +
                         ", " + std::to_string(K) + "]");
    check_bias("conv2d", b, OC);
    const int OH = spec.out_size(H), OW = spec.out_size(W);
    if (OH < 1 || OW < 1) throw ShapeError("conv2d: empty output for input " + shape_str(xv.shape()));

    const ConvGeom geom{C, H, W, K, spec.stride, spec.pad_lo, OH, OW};
    const int CKK = C * K * K;
    const int64_t plane = static_cast<int64_t>(OH) * OW;
    Tensor out({N, OC, OH, OW});
    std::vector<float> cols(static_cast<size_t>(CKK) * plane);
    for (int n = 0; n < N; ++n) {
        im2col(xv.data() + static_cast<int64_t>(n) * C * H * W, cols.data(), geom);
        float* obase = out.data() + static_cast<int64_t>(n) * OC * plane;
        gemm_acc(wv.data(), cols.data(), obase, OC, CKK, static_cast<int>(plane));
        if (b) {
            const Tensor& bv = b->value;
            for (int oc = 0; oc < OC; ++oc) {
                const float bias = bv[oc];
                float* ochan = obase + static_cast<int64_t>(oc) * plane;
                for (int64_t i = 0; i < plane; ++i) ochan[i] += bias;
            }
        }
    }

    const bool has_bias = static_cast<bool>(b);
    BackpropFn fn = [xp = x, wp = w, geom, OC, CKK, plane, N, has_bias](
                        const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out_g) {
        const Tensor& xv = xp->value;
        const Tensor& wv = wp->value;
        const bool need_x = need[0], need_w = need[1];
        const bool need_b = has_bias && need[2];
        Tensor gx, gw, gb;
        if (need_x) gx = Tensor::zeros(xv.shape());
        if (need_w) gw = Tensor::zeros(wv.shape());
        if (need_b) gb = Tensor::zeros({OC});
        std::vector<float> cols(static_cast<size_t>(CKK) * plane);
        std::vector<float> gcols;
        if (need_x) gcols.resize(static_cast<size_t>(CKK) * plane);
        const int64_t xstride = static_cast<int64_t>(geom.C) * geom.H * geom.W;
        for (int n = 0; n < N; ++n) {
            const float* gbase = g.data() + static_cast<int64_t>(n) * OC * plane;
            if (need_w || need_x) {
                if (need_w) im2col(xv.data() + n * xstride, cols.data(), geom);
                if (need_w)
                    gemm_bt_acc(gbase, cols.data(), gw.data(), OC, static_cast<int>(plane), CKK);
                if (need_x) {
                    std::fill(gcols.begin(), gcols.end(), 0.0f);
                    gemm_at_acc(wv.data(), gbase, gcols.data(), CKK, OC, static_cast<int>(plane));
                    col2im_acc(gcols.data(), gx.data() + n * xstride, geom);
                }
            }
            if (need_b) {
                for (int oc = 0; oc < OC; ++oc) {
                    const float* gchan = gbase + static_cast<int64_t>(oc) * plane;
                    double acc = 0.0;
                    for (int64_t i = 0; i < plane; ++i) acc += gchan[i];
                    gb[oc] += static_cast<float>(acc);
                }
            }
        }
        if (need_x) out_g[0] = std::move(gx);
        if (need_w) out_g[1] = std::move(gw);
        if (need_b) out_g[2] = std::move(gb);
    };

    std::vector<NodePtr> parents{x, w};
    if (b) parents.push_back(b);
    return make_op("conv2d", std::move(out), std::move(parents), std::move(fn));
}

NodePtr conv2d_transpose(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                         const ConvSpec& spec) {
    spec.validate();
    check_image("conv2d_transpose", x->value);
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    const int N = xv.dim(0), IC = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (IC != spec.in_channels)
        throw ShapeError("conv2d_transpose: input has " + std::to_string(IC) +
                         " channels, spec expects " + std::to_string(spec.in_channels));
    const int OC = spec.out_channels, K = spec.kernel;
    if (wv.rank() != 4 || wv.dim(0) != IC || wv.dim(1) != OC || wv.dim(2) != K || wv.dim(3) != K)
        throw ShapeError("conv2d_transpose: weight shape " + shape_str(wv.shape()) +
                         " does not match spec [" + std::to_string(IC) + ", " + std::to_string(OC) +
                         ", " + std::to_string(K) + ", " + std::to_string(K) + "]");
    check_bias("conv2d_transpose", b, OC);
    const int OH = spec.transpose_out_size(H), OW = spec.transpose_out_size(W);
    // geometry of the adjoint convolution: it maps [OC, OH, OW] down to [IC, H, W]
    const ConvGeom geom{OC, OH, OW, K, spec.stride, spec.pad_lo, H, W};
    const int OCKK = OC * K * K;
    const int64_t plane = static_cast<int64_t>(H) * W;       // unfolded grid of the adjoint
    const int64_t oplane = static_cast<int64_t>(OH) * OW;

    Tensor out = Tensor::zeros({N, OC, OH, OW});
    std::vector<float> gcols(static_cast<size_t>(OCKK) * plane);
    for (int n = 0; n < N; ++n) {
        std::fill(gcols.begin(), gcols.end(), 0.0f);
        // cols-space image of x through W^T, then fold into the output canvas
        gemm_at_acc(wv.data(), xv.data() + static_cast<int64_t>(n) * IC * plane, gcols.data(),
                    OCKK, IC, static_cast<int>(plane));
        col2im_acc(gcols.data(), out.data() + static_cast<int64_t>(n) * OC * oplane, geom);
    }
    if (b) {
        const Tensor& bv = b->value;
        for (int n = 0; n < N; ++n) {
            float* obase = out.data() + static_cast<int64_t>(n) * OC * oplane;
            for (int oc = 0; oc < OC; ++oc) {
                const float bias = bv[oc];
                float* ochan = obase + static_cast<int64_t>(oc) * oplane;
                for (int64_t i = 0; i < oplane; ++i) ochan[i] += bias;
            }
        }
    }

    const bool has_bias = static_cast<bool>(b);
    BackpropFn fn = [xp = x, wp = w, geom, IC, OC, OCKK, plane, oplane, N, has_bias](
                        const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out_g) {
        const Tensor& xv = xp->value;
        const Tensor& wv = wp->value;
        const bool need_x = need[0], need_w = need[1];
        const bool need_b = has_bias && need[2];
        Tensor gx, gw, gb;
        if (need_x) gx = Tensor::zeros(xv.shape());
        if (need_w) gw = Tensor::zeros(wv.shape());
        if (need_b) gb = Tensor::zeros({OC});
        std::vector<float> cols(static_cast<size_t>(OCKK) * plane);
        for (int n = 0; n < N; ++n) {
            const float* gbase = g.data() + static_cast<int64_t>(n) * OC * oplane;
            if (need_x || need_w) {
                im2col(gbase, cols.data(), geom);
                if (need_x)  // adjoint of the adjoint: a plain convolution of g
                    gemm_acc(wv.data(), cols.data(), gx.data() + static_cast<int64_t>(n) * IC * plane,
                             IC, OCKK, static_cast<int>(plane));
                if (need_w)
                    gemm_bt_acc(xv.data() + static_cast<int64_t>(n) * IC * plane, cols.data(),
                                gw.data(), IC, static_cast<int>(plane), OCKK);
            }
            if (need_b) {
                for (int oc = 0; oc < OC; ++oc) {
                    const float* gchan = gbase + static_cast<int64_t>(oc) * oplane;
                    double acc = 0.0;
                    for (int64_t i = 0; i < oplane; ++i) acc += gchan[i];
                    gb[oc] += static_cast<float>(acc);
                }
            }
        }
        if (need_x) out_g[0] = std::move(gx);
        if (need_w) out_g[1] = std::move(gw);
        if (need_b) out_g[2] = std::move(gb);
    };

    std::vector<NodePtr> parents{x, w};
    if (b) parents.push_back(b);
    return make_op("conv2d_transpose", std::move(out), std::move(parents), std::move(fn));
}

NodePtr instance_norm(const NodePtr& x, const NodePtr& scale, const NodePtr& shift, float eps) {
    check_image("instance_norm", x->value);
    const Tensor& xv = x->value;
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int64_t HW = static_cast<int64_t>(H) * W;
    if (HW < 2)
        throw ContractError("instance_norm: needs at least 2 spatial elements, got " +
                            shape_str(xv.shape()));
    const Tensor& sv = scale->value;
    const Tensor& bv = shift->value;
    if (sv.rank() != 1 || sv.dim(0) != C || bv.rank() != 1 || bv.dim(0) != C)
        throw ShapeError("instance_norm: scale/shift must be [" + std::to_string(C) + "], got " +
                         shape_str(sv.shape()) + " and " + shape_str(bv.shape()));
    if (eps <= 0.0f) throw ContractError("instance_norm: eps must be positive");

    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    std::vector<float> inv_std(static_cast<size_t>(N) * C);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const int64_t off = (static_cast<int64_t>(n) * C + c) * HW;
            const float* xp = xv.data() + off;
            double sum = 0.0;
            for (int64_t i = 0; i < HW; ++i) sum += xp[i];
            const double mean = sum / static_cast<double>(HW);
            double var = 0.0;
            for (int64_t i = 0; i < HW; ++i) {
                const double d = xp[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(HW);
            const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
            inv_std[static_cast<size_t>(n) * C + c] = static_cast<float>(inv);
            const float gamma = sv[c], beta = bv[c];
            float* hp = xhat.data() + off;
            float* op = out.data() + off;
            for (int64_t i = 0; i < HW; ++i) {
                const float h = static_cast<float>((xp[i] - mean) * inv);
                hp[i] = h;
                op[i] = gamma * h + beta;
            }
        }
    }

    BackpropFn fn = [sp = scale, xhat = std::move(xhat), inv_std = std::move(inv_std), N, C, HW](
                        const Tensor& g, const std::vector<char>& need, std::vector<Tensor>& out_g) {
        const Tensor& sv = sp->value;
        Tensor gx, gs, gb;
        if (need[0]) gx = Tensor(xhat.shape());
        std::vector<double> acc_s, acc_b;
        if (need[1]) acc_s.assign(static_cast<size_t>(C), 0.0);
        if (need[2]) acc_b.assign(static_cast<size_t>(C), 0.0);
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                const int64_t off = (static_cast<int64_t>(n) * C + c) * HW;
                const float* gp = g.data() + off;
                const float* hp = xhat.data() + off;
                double sum_g = 0.0, sum_gh = 0.0;
                for (int64_t i = 0; i < HW; ++i) {
                    sum_g += gp[i];
                    sum_gh += static_cast<double>(gp[i]) * hp[i];
                }
                if (need[1]) acc_s[static_cast<size_t>(c)] += sum_gh;
                if (need[2]) acc_b[static_cast<size_t>(c)] += sum_g;
                if (need[0]) {
                    const float mg = static_cast<float>(sum_g / static_cast<double>(HW));
                    const float mgh = static_cast<float>(sum_gh / static_cast<double>(HW));
                    const float k = sv[c] * inv_std[static_cast<size_t>(n) * C + c];
                    float* xp = gx.data() + off;
                    for (int64_t i = 0; i < HW; ++i) xp[i] = k * (gp[i] - mg - hp[i] * mgh);
                }
            }
        }
        if (need[0]) out_g[0] = std::move(gx);
        if (need[1]) {
            gs = Tensor({C});
            for (int c = 0; c < C; ++c) gs[c] = static_cast<float>(acc_s[static_cast<size_t>(c)]);
            out_g[1] = std::move(gs);
        }
        if (need[2]) {
            gb = Tensor({C});
            for (int c = 0; c < C; ++c) gb[c] = static_cast<float>(acc_b[static_cast<size_t>(c)]);
            out_g[2] = std::move(gb);
        }
    };
    return make_op("instance_norm", std::move(out), {x, scale, shift}, std::move(fn));
}

NodePtr avg_pool_downsample(const NodePtr& x, int factor) {
    check_image("avg_pool_downsample", x->value);
    if (factor < 1) throw ContractError("avg_pool_downsample: factor must be positive");
    const Tensor& xv = x->value;
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (H % factor != 0 || W % factor != 0)
        throw ShapeError("avg_pool_downsample: " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by factor " + std::to_string(factor));
    const int OH = H / factor, OW = W / factor;
    Tensor out({N, C, OH, OW});
    const double inv_area = 1.0 / (static_cast<double>(factor) * factor);
    for (int nc = 0; nc < N * C; ++nc) {
        const float* xp = xv.data() + static_cast<int64_t>(nc) * H * W;
        float* op = out.data() + static_cast<int64_t>(nc) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                double acc = 0.0;
                for (int fi = 0; fi < factor; ++fi) {
                    const float* row = xp + static_cast<int64_t>(oh * factor + fi) * W + ow * factor;
                    for (int fj = 0; fj < factor; ++fj) acc += row[fj];
                }
                op[static_cast<int64_t>(oh) * OW + ow] = static_cast<float>(acc * inv_area);
            }
        }
    }

    std::vector<int> in_shape = xv.shape();
    BackpropFn fn = [in_shape, factor, N, C, H, W, OH, OW](const Tensor& g,
                                                           const std::vector<char>& need,
                                                           std::vector<Tensor>& out_g) {
        if (!need[0]) return;
        Tensor gx(in_shape);
        const float inv_area = 1.0f / (static_cast<float>(factor) * factor);
        for (int nc = 0; nc < N * C; ++nc) {
            const float* gp = g.data() + static_cast<int64_t>(nc) * OH * OW;
            float* xp = gx.data() + static_cast<int64_t>(nc) * H * W;
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    const float v = gp[static_cast<int64_t>(oh) * OW + ow] * inv_area;
                    for (int fi = 0; fi < factor; ++fi) {
                        float* row = xp + static_cast<int64_t>(oh * factor + fi) * W + ow * factor;
                        for (int fj = 0; fj < factor; ++fj) row[fj] = v;
                    }
                }
            }
        }
        out_g[0] = std::move(gx);
    };
    return make_op("avg_pool_downsample", std::move(out), {x}, std::move(fn));
}

NodePtr concat_channels(const std::vector<NodePtr>& xs) {
    if (xs.empty()) throw ContractError("concat_channels: no inputs");
    check_image("concat_channels", xs[0]->value);
    const int N = xs[0]->value.dim(0), H = xs[0]->value.dim(2), W = xs[0]->value.dim(3);
    int C = 0;
    std::vector<int> widths;
    for (const auto& x : xs) {
        check_image("concat_channels", x->value);
        const Tensor& v = x->value;
        if (v.dim(0) != N || v.dim(2) != H || v.dim(3) != W)
            throw ShapeError("concat_channels: mismatched shapes " +
                             shape_str(xs[0]->value.shape()) + " and " + shape_str(v.shape()));
        widths.push_back(v.dim(1));
        C += v.dim(1);
    }
    const int64_t HW = static_cast<int64_t>(H) * W;
    Tensor out({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        int64_t coff = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            const Tensor& v = xs[i]->value;
            const int ci = widths[i];
            std::memcpy(out.data() + (static_cast<int64_t>(n) * C + coff) * HW,
                        v.data() + static_cast<int64_t>(n) * ci * HW,
                        sizeof(float) * static_cast<size_t>(ci) * HW);
            coff += ci;
        }
    }

    BackpropFn fn = [widths, N, C, HW](const Tensor& g, const std::vector<char>& need,
                                       std::vector<Tensor>& out_g) {
        int64_t coff = 0;
        for (size_t i = 0; i < widths.size(); ++i) {
            const int ci = widths[i];
            if (need[i]) {
                Tensor gi({N, ci, g.dim(2), g.dim(3)});
                for (int n = 0; n < N; ++n) {
                    std::memcpy(gi.data() + static_cast<int64_t>(n) * ci * HW,
                                g.data() + (static_cast<int64_t>(n) * C + coff) * HW,
                                sizeof(float) * static_cast<size_t>(ci) * HW);
                }
                out_g[i] = std::move(gi);
            }
            coff += ci;
        }
    };
    std::vector<NodePtr> parents(xs.begin(), xs.end());
    return make_op("concat_channels", std::move(out), std::move(parents), std::move(fn));
}

}  // namespace sogr
