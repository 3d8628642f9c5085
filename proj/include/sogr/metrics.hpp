#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sogr/image.hpp"

namespace sogr {

// Mean |a - b| over all pixels and channels on the 0-255 scale.
double l1_metric(const ImageU8& a, const ImageU8& b);

// 10*log10(255^2 / MSE); nullopt is the infinite sentinel (identical images).
std::optional<double> psnr(const ImageU8& a, const ImageU8& b);

// Mean structural similarity: 11x11 Gaussian window sigma 1.5, K1=0.01,
// K2=0.03, L=255, valid-mode windows, channels averaged.
double ssim(const ImageU8& a, const ImageU8& b);

struct FeatureStats {
    std::vector<double> mean;  // length d
    std::vector<double> cov;   // d x d row-major, symmetric
    int n = 0;
    int d = 0;
};

// Row-wise mean and 1/(N-1) covariance, symmetrized.
FeatureStats compute_stats(const std::vector<std::vector<double>>& features);

// Principal square root of a symmetric PSD matrix (d x d row-major).
// Eigenvalues in [-1e-6, 0) scaled by the matrix magnitude clamp to zero;
// anything more negative is an error.
std::vector<double> sqrtm_spd(const std::vector<double>& m, int d);

// ||m1 - m2||^2 + Tr(C1 + C2 - 2 (C1 C2)^{1/2}), evaluated through the
// symmetric form Tr((C1^{1/2} C2 C1^{1/2})^{1/2}), computed as the sum of
// singular values of C2^{1/2} C1^{1/2} for stability on rank-deficient input.
double frechet_distance(const FeatureStats& s1, const FeatureStats& s2);

struct FeatureExtractor {
    enum class Kind { pixel8, randconv };
    Kind kind = Kind::pixel8;
    std::uint64_t seed = 0;
    int d = 64;

    std::string describe() const;
};

FeatureExtractor parse_extractor(const std::string& name, std::uint64_t seed, int d);

// Deterministic feature vector for one image. pixel8: luminance box-averaged
// onto an 8x8 grid (d = 64). randconv: a fixed-seed 3-layer stride-2 conv
// stack, global mean pooled to d channels.
std::vector<double> extract_features(const ImageU8& img, const FeatureExtractor& ex);

struct MetricReport {
    double l1 = 0.0;
    std::optional<double> psnr_db;  // nullopt serializes as "inf"
    double ssim = 0.0;
    double fid = 0.0;
    int n_pairs = 0;
    std::string extractor;
    bool shrunk = false;  // covariance shrinkage applied (n_pairs <= d)

    std::string to_json() const;
};

// pairs: (translated, true). Per-pair l1/ssim averaged; psnr pooled over all
// pixels so it stays consistent with l1; FID between the two feature
// distributions with shrinkage fallback when n_pairs <= d.
MetricReport evaluate_pairs(const std::vector<std::pair<const ImageU8*, const ImageU8*>>& pairs,
                            const FeatureExtractor& ex);

}  // namespace sogr
