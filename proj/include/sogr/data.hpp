#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sogr/image.hpp"
#include "sogr/tensor.hpp"

namespace sogr {

// One co-registered SAR/optical pair. The two sides always share H and W.
struct ImagePair {
    std::string id;
    ImageU8 sar;      // 1 or 3 channels
    ImageU8 optical;  // always RGB
};

struct Dataset {
    std::vector<ImagePair> pairs;  // sorted by id
    int sar_channels = 1;
};

// Layout: root/A/*.png (SAR) + root/B/*.png (optical) with matched filenames;
// ids are the filename stems, sorted lexicographically.
Dataset load_dataset(const std::filesystem::path& root);

// Aligned patch grid at offsets {0, stride, 2*stride, ...} on both sides;
// partial border patches are dropped. Patch ids are "{id}_{row}_{col}".
std::vector<ImagePair> cut_patches(const ImagePair& pair, int patch_size, int stride);

// u8 [H,W,C] -> float [C,H,W] in [-1,1] via x/127.5 - 1.
Tensor normalize(const ImageU8& img);
// Inverse: rounds half away from zero and clamps to 0..255.
ImageU8 denormalize(const Tensor& chw);

// Stacks same-shaped images into one normalized [N,C,H,W] tensor.
Tensor stack_normalized(const std::vector<const ImageU8*>& imgs);

struct SynthConfig {
    std::uint64_t seed = 0;
    int n_pairs = 1;
    int size = 64;
    int sar_channels = 1;
    bool speckle = true;
    int looks = 4;  // exponential draws averaged per speckle sample
};

// Procedural co-registered pairs: optical scenes of colored rectangles and
// ellipses on a background, SAR = per-class gain applied to luminance, then
// optional multiplicative speckle.
Dataset synth_dataset(const SynthConfig& cfg);

// The speckle-free SAR image for an optical scene — the oracle that
// convergence and degenerate-config tests compare against.
ImageU8 clean_sar(const ImageU8& optical, int sar_channels);

// Mean-1 multiplicative speckle samples: each is the mean of `looks`
// exponential(1) draws from the stream (seed, "speckle/<id>").
std::vector<double> speckle_field(std::uint64_t seed, const std::string& id, std::int64_t n,
                                  int looks);

// Permutation of [0, n) as a pure function of (seed, epoch).
std::vector<size_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, size_t n);

// Pair indices making up one training batch; pure in (seed, step). Trailing
// pairs that do not fill a batch are dropped from each epoch.
std::vector<size_t> batch_indices(std::uint64_t seed, std::int64_t step, size_t n, int batch_size);

// Writes the A/ + B/ PNG layout plus manifest.json under root.
void export_dataset(const Dataset& ds, const std::filesystem::path& root);

}  // namespace sogr
