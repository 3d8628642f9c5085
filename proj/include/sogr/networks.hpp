#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sogr/layers.hpp"

namespace sogr {

// Encoder-decoder translator. Encoder scale j (0-based) has width
// ngf*min(2^j, 8); the decoder mirrors it with latent skip concatenations and
// a box-averaged copy of the input injected at every scale.
struct TranslatorConfig {
    int in_channels = 1;
    int out_channels = 3;
    int ngf = 50;
    int depth = 6;
    int input_size = 256;

    void validate() const;
    int bottleneck_size() const { return input_size >> depth; }
    int encoder_width(int j) const;  // j in [0, depth)
    int decoder_width(int k) const;  // stream width entering scale k, k in [0, depth]
};

// Patch-map discriminator: n_stride2 halving convs, one stride-1 widening
// conv, then a 1-channel probability head.
struct DiscriminatorConfig {
    int in_channels = 3;
    int ndf = 64;
    int n_stride2 = 3;
    int input_size = 256;

    void validate() const;
    int out_size() const { return input_size >> n_stride2; }
    int width(int j) const;  // j in [0, n_stride2]
};

struct LayerParams {
    std::string name;
    Tensor weight;
    std::optional<Tensor> bias;
    std::optional<Tensor> norm_scale;
    std::optional<Tensor> norm_shift;
};

// Weight draws come from a generator stream named "<name>/weight" under the
// given seed; biases start at zero, norm scales at one, shifts at zero.
LayerParams init_layer(const std::string& name, const ConvSpec& spec, bool transposed,
                       bool with_bias, bool with_norm, std::uint64_t seed);

struct NetworkParams {
    std::vector<LayerParams> layers;

    LayerParams& at(std::string_view name);
    const LayerParams& at(std::string_view name) const;
    std::int64_t param_count() const;

    // Visits every tensor as (path, tensor) in deterministic order:
    // layer order, then weight / bias / norm_scale / norm_shift.
    template <class Fn>
    void for_each_tensor(Fn&& fn) {
        for (auto& l : layers) {
            fn(l.name + "/weight", l.weight);
            if (l.bias) fn(l.name + "/bias", *l.bias);
            if (l.norm_scale) fn(l.name + "/norm_scale", *l.norm_scale);
            if (l.norm_shift) fn(l.name + "/norm_shift", *l.norm_shift);
        }
    }
    template <class Fn>
    void for_each_tensor(Fn&& fn) const {
        for (const auto& l : layers) {
            fn(l.name + "/weight", l.weight);
            if (l.bias) fn(l.name + "/bias", *l.bias);
            if (l.norm_scale) fn(l.name + "/norm_scale", *l.norm_scale);
            if (l.norm_shift) fn(l.name + "/norm_shift", *l.norm_shift);
        }
    }
};

// Graph-node view of a parameter set for one forward/backward pass.
struct BoundLayer {
    std::string name;
    NodePtr weight;
    NodePtr bias;        // null when absent
    NodePtr norm_scale;  // null when absent
    NodePtr norm_shift;  // null when absent
};

struct BoundNet {
    std::vector<BoundLayer> layers;
    const BoundLayer& at(std::string_view name) const;
};

BoundNet bind_params(const NetworkParams& params, bool requires_grad);

NetworkParams build_translator(const TranslatorConfig& cfg, std::uint64_t seed);
NetworkParams build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

// Same layer/tensor layout as the builders but zero-filled — allocation
// targets for checkpoint loading.
NetworkParams translator_param_shapes(const TranslatorConfig& cfg);
NetworkParams discriminator_param_shapes(const DiscriminatorConfig& cfg);

// x: [N, in_channels, S, S] -> [N, out_channels, S, S], values in (-1, 1)
NodePtr translator_forward(const TranslatorConfig& cfg, const BoundNet& net, const NodePtr& x);
// x: [N, in_channels, S, S] -> [N, 1, S/2^n_stride2, same], values in (0, 1)
NodePtr discriminator_forward(const DiscriminatorConfig& cfg, const BoundNet& net,
                              const NodePtr& x);

// Inference helper: bind without gradients, run, return the value.
Tensor translator_apply(const TranslatorConfig& cfg, const NetworkParams& params, const Tensor& x);

}  // namespace sogr
