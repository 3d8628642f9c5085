#include "sogr/networks.hpp"

#include <algorithm>

#include "sogr/errors.hpp"
#include "sogr/rng.hpp"

namespace sogr {

namespace {

int capped_width(int base, int scale_pow) {
    return base * std::min(1 << scale_pow, 8);
}

}  // namespace

void TranslatorConfig::validate() const {
    if (in_channels < 1 || out_channels < 1)
        throw ConfigError("translator: channel counts must be positive");
    if (ngf < 1) throw ConfigError("translator: ngf must be positive");
    if (depth < 1 || depth > 24) throw ConfigError("translator: depth out of range");
    if (input_size < 1 || input_size % (1 << depth) != 0)
        throw ConfigError("translator: input_size " + std::to_string(input_size) +
                          " not divisible by 2^depth = " + std::to_string(1 << depth));
    if (bottleneck_size() < 2)
        throw ConfigError("translator: bottleneck size " + std::to_string(bottleneck_size()) +
                          " < 2 (shrink depth or grow input_size)");
}

int TranslatorConfig::encoder_width(int j) const { return capped_width(ngf, j); }

int TranslatorConfig::decoder_width(int k) const {
    return k == 0 ? ngf : capped_width(ngf, k - 1);
}

void DiscriminatorConfig::validate() const {
    if (in_channels < 1) throw ConfigError("discriminator: in_channels must be positive");
    if (ndf < 1) throw ConfigError("discriminator: ndf must be positive");
    if (n_stride2 < 1 || n_stride2 > 24) throw ConfigError("discriminator: n_stride2 out of range");
    if (input_size < 1 || input_size % (1 << n_stride2) != 0)
        throw ConfigError("discriminator: input_size " + std::to_string(input_size) +
                          " not divisible by 2^n_stride2 = " + std::to_string(1 << n_stride2));
    if (out_size() < 1) throw ConfigError("discriminator: empty output map");
}

int DiscriminatorConfig::width(int j) const { return capped_width(ndf, j); }

LayerParams init_layer(const std::string& name, const ConvSpec& spec, bool transposed,
                       bool with_bias, bool with_norm, std::uint64_t seed) {
    spec.validate();
    LayerParams p;
    p.name = name;
    const std::vector<int> wshape =
        transposed ? std::vector<int>{spec.in_channels, spec.out_channels, spec.kernel, spec.kernel}
                   : std::vector<int>{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    Rng rng(seed, name + "/weight");
    Tensor w(wshape);
    for (std::int64_t i = 0; i < w.numel(); ++i)
        w[i] = static_cast<float>(rng.normal(0.0, 0.02));
    p.weight = std::move(w);
    if (with_bias) p.bias = Tensor::zeros({spec.out_channels});
    if (with_norm) {
        p.norm_scale = Tensor::ones({spec.out_channels});
        p.norm_shift = Tensor::zeros({spec.out_channels});
    }
    return p;
}

LayerParams& NetworkParams::at(std::string_view name) {
    for (auto& l : layers)
        if (l.name == name) return l;
    throw ContractError("no layer named '" + std::string(name) + "'");
}

const LayerParams& NetworkParams::at(std::string_view name) const {
    for (const auto& l : layers)
        if (l.name == name) return l;
    throw ContractError("no layer named '" + std::string(name) + "'");
}

std::int64_t NetworkParams::param_count() const {
    std::int64_t n = 0;
    for_each_tensor([&](const std::string&, const Tensor& t) { n += t.numel(); });
    return n;
}

const BoundLayer& BoundNet::at(std::string_view name) const {
    for (const auto& l : layers)
        if (l.name == name) return l;
    throw ContractError("no bound layer named '" + std::string(name) + "'");
}

BoundNet bind_params(const NetworkParams& params, bool requires_grad) {
    BoundNet net;
    net.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        BoundLayer b;
        b.name = l.name;
        b.weight = leaf(l.weight, requires_grad);
        if (l.bias) b.bias = leaf(*l.bias, requires_grad);
        if (l.norm_scale) b.norm_scale = leaf(*l.norm_scale, requires_grad);
        if (l.norm_shift) b.norm_shift = leaf(*l.norm_shift, requires_grad);
        net.layers.push_back(std::move(b));
    }
    return net;
}

namespace {

struct LayerPlan {
    std::string name;
    bool transposed = false;
    ConvSpec spec;
    bool bias = false;
    bool norm = false;
};

std::vector<LayerPlan> translator_plan(const TranslatorConfig& cfg) {
    cfg.validate();
    std::vector<LayerPlan> plan;
    for (int j = 0; j < cfg.depth; ++j) {
        const int in = (j == 0) ? cfg.in_channels : cfg.encoder_width(j - 1);
        plan.push_back({"enc" + std::to_string(j), false,
                        ConvSpec::make(in, cfg.encoder_width(j), 4, 2, 1), j == 0, j != 0});
    }
    for (int k = cfg.depth; k >= 1; --k) {
        int in = cfg.decoder_width(k) + cfg.in_channels;
        if (k < cfg.depth) in += cfg.encoder_width(k - 1);
        plan.push_back({"dec" + std::to_string(k), true,
                        ConvSpec::make(in, cfg.decoder_width(k - 1), 4, 2, 1), false, true});
    }
    plan.push_back(
        {"out", false, ConvSpec::make(cfg.ngf, cfg.out_channels, 3, 1, 1), true, false});
    return plan;
}

std::vector<LayerPlan> discriminator_plan(const DiscriminatorConfig& cfg) {
    cfg.validate();
    std::vector<LayerPlan> plan;
    for (int j = 0; j < cfg.n_stride2; ++j) {
        const int in = (j == 0) ? cfg.in_channels : cfg.width(j - 1);
        plan.push_back({"c" + std::to_string(j), false,
                        ConvSpec::make(in, cfg.width(j), 4, 2, 1), j == 0, j != 0});
    }
    plan.push_back({"c" + std::to_string(cfg.n_stride2), false,
                    ConvSpec::same_k4(cfg.width(cfg.n_stride2 - 1), cfg.width(cfg.n_stride2)),
                    false, true});
    plan.push_back({"out", false, ConvSpec::same_k4(cfg.width(cfg.n_stride2), 1), true, false});
    return plan;
}

NetworkParams build_from_plan(const std::vector<LayerPlan>& plan, std::uint64_t seed) {
    NetworkParams net;
    net.layers.reserve(plan.size());
    for (const auto& pl : plan)
        net.layers.push_back(init_layer(pl.name, pl.spec, pl.transposed, pl.bias, pl.norm, seed));
    return net;
}

NetworkParams shapes_from_plan(const std::vector<LayerPlan>& plan) {
    NetworkParams net;
    net.layers.reserve(plan.size());
    for (const auto& pl : plan) {
        LayerParams p;
        p.name = pl.name;
        const int ic = pl.spec.in_channels, oc = pl.spec.out_channels, k = pl.spec.kernel;
        p.weight = pl.transposed ? Tensor::zeros({ic, oc, k, k}) : Tensor::zeros({oc, ic, k, k});
        if (pl.bias) p.bias = Tensor::zeros({oc});
        if (pl.norm) {
            p.norm_scale = Tensor::zeros({oc});
            p.norm_shift = Tensor::zeros({oc});
        }
        net.layers.push_back(std::move(p));
    }
    return net;
}

void check_input(const char* what, const Tensor& x, int channels, int size) {
    if (x.rank() != 4 || x.dim(1) != channels || x.dim(2) != size || x.dim(3) != size)
        throw ShapeError(std::string(what) + ": input " + shape_str(x.shape()) +
                         " does not match configured [N, " + std::to_string(channels) + ", " +
                         std::to_string(size) + ", " + std::to_string(size) + "]");
}

}  // namespace

NetworkParams build_translator(const TranslatorConfig& cfg, std::uint64_t seed) {
    return build_from_plan(translator_plan(cfg), seed);
}

NetworkParams build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
    return build_from_plan(discriminator_plan(cfg), seed);
}

NetworkParams translator_param_shapes(const TranslatorConfig& cfg) {
    return shapes_from_plan(translator_plan(cfg));
}

NetworkParams discriminator_param_shapes(const DiscriminatorConfig& cfg) {
    return shapes_from_plan(discriminator_plan(cfg));
}

NodePtr translator_forward(const TranslatorConfig& cfg, const BoundNet& net, const NodePtr& x) {
    check_input("translator_forward", x->value, cfg.in_channels, cfg.input_size);
    const auto plan = translator_plan(cfg);
    size_t li = 0;

    std::vector<NodePtr> enc;
    enc.reserve(static_cast<size_t>(cfg.depth));
    NodePtr h = x;
    for (int j = 0; j < cfg.depth; ++j, ++li) {
        const auto& pl = plan[li];
        const auto& L = net.at(pl.name);
        h = conv2d(h, L.weight, pl.bias ? L.bias : nullptr, pl.spec);
        if (pl.norm) h = instance_norm(h, L.norm_scale, L.norm_shift);
        h = leaky_relu(h, 0.2f);
        enc.push_back(h);
    }

    NodePtr stream = enc.back();
    for (int k = cfg.depth; k >= 1; --k, ++li) {
        const auto& pl = plan[li];
        const auto& L = net.at(pl.name);
        std::vector<NodePtr> parts{stream};
        if (k < cfg.depth) parts.push_back(enc[static_cast<size_t>(k - 1)]);
        parts.push_back(avg_pool_downsample(x, 1 << k));
        stream = conv2d_transpose(concat_channels(parts), L.weight, nullptr, pl.spec);
        stream = instance_norm(stream, L.norm_scale, L.norm_shift);
        stream = relu(stream);
    }

    const auto& pl = plan[li];
    const auto& L = net.at(pl.name);
    return tanh(conv2d(stream, L.weight, L.bias, pl.spec));
}

NodePtr discriminator_forward(const DiscriminatorConfig& cfg, const BoundNet& net,
                              const NodePtr& x) {
    check_input("discriminator_forward", x->value, cfg.in_channels, cfg.input_size);
    const auto plan = discriminator_plan(cfg);
    NodePtr h = x;
    for (size_t li = 0; li + 1 < plan.size(); ++li) {
        const auto& pl = plan[li];
        const auto& L = net.at(pl.name);
        h = conv2d(h, L.weight, pl.bias ? L.bias : nullptr, pl.spec);
        if (pl.norm) h = instance_norm(h, L.norm_scale, L.norm_shift);
        h = leaky_relu(h, 0.2f);
    }
    const auto& pl = plan.back();
    const auto& L = net.at(pl.name);
    return sigmoid(conv2d(h, L.weight, L.bias, pl.spec));
}

Tensor translator_apply(const TranslatorConfig& cfg, const NetworkParams& params,
                        const Tensor& x) {
    BoundNet net = bind_params(params, false);
    return translator_forward(cfg, net, constant(x))->value;
}

}  // namespace sogr
