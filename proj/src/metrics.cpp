#include "sogr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <utility>

#include <Eigen/Dense>
#include <json.hpp>

#include "sogr/autograd.hpp"
#include "sogr/data.hpp"
#include "sogr/errors.hpp"
#include "sogr/layers.hpp"
#include "sogr/rng.hpp"
#include "sogr/tensor.hpp"

namespace sogr {

namespace {

void check_same_shape(const ImageU8& a, const ImageU8& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": image shapes differ (" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + "x" +
                         std::to_string(a.channels) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width) + "x" + std::to_string(b.channels) + ")");
    }
}

double mse(const ImageU8& a, const ImageU8& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = double(a.pixels[i]) - double(b.pixels[i]);
        acc += d * d;
    }
    return acc / double(a.pixels.size());
}

double psnr_from_mse(double m) { return 10.0 * std::log10(255.0 * 255.0 / m); }

}  // namespace

double l1_metric(const ImageU8& a, const ImageU8& b) {
    check_same_shape(a, b, "l1");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        acc += std::abs(double(a.pixels[i]) - double(b.pixels[i]));
    return acc / double(a.pixels.size());
}

std::optional<double> psnr(const ImageU8& a, const ImageU8& b) {
    check_same_shape(a, b, "psnr");
    const double m = mse(a, b);
    if (m == 0.0) return std::nullopt;
    return psnr_from_mse(m);
}

namespace {

constexpr int kSsimWindow = 11;

std::array<double, kSsimWindow * kSsimWindow> ssim_window() {
    std::array<double, kSsimWindow * kSsimWindow> w{};
    const double sigma = 1.5;
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int y = 0; y < kSsimWindow; ++y) {
        for (int x = 0; x < kSsimWindow; ++x) {
            const double dy = y - half;
            const double dx = x - half;
            w[std::size_t(y * kSsimWindow + x)] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            sum += w[std::size_t(y * kSsimWindow + x)];
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const ImageU8& a, const ImageU8& b) {
    check_same_shape(a, b, "ssim");
    if (a.height < kSsimWindow || a.width < kSsimWindow) {
        throw ShapeError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " is smaller than the 11x11 window");
    }
    static const auto window = ssim_window();
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    const int oh = a.height - kSsimWindow + 1;
    const int ow = a.width - kSsimWindow + 1;

    double channel_acc = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        double map_acc = 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double m1 = 0.0, m2 = 0.0, q1 = 0.0, q2 = 0.0, q12 = 0.0;
                for (int wy = 0; wy < kSsimWindow; ++wy) {
                    for (int wx = 0; wx < kSsimWindow; ++wx) {
                        const double wgt = window[std::size_t(wy * kSsimWindow + wx)];
                        const double pa = a.at(y + wy, x + wx, c);
                        const double pb = b.at(y + wy, x + wx, c);
                        m1 += wgt * pa;
                        m2 += wgt * pb;
                        q1 += wgt * pa * pa;
                        q2 += wgt * pb * pb;
                        q12 += wgt * pa * pb;
                    }
                }
                const double v1 = q1 - m1 * m1;
                const double v2 = q2 - m2 * m2;
                const double cov = q12 - m1 * m2;
                const double num = (2.0 * m1 * m2 + c1) * (2.0 * cov + c2);
                const double den = (m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2);
                map_acc += num / den;
            }
        }
        channel_acc += map_acc / double(oh * ow);
    }
    return channel_acc / double(a.channels);
}

FeatureStats compute_stats(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw ContractError("compute_stats: need at least 2 samples");
    const int n = int(features.size());
    const int d = int(features[0].size());
    if (d < 1) throw ContractError("compute_stats: empty feature vectors");
    for (const auto& row : features) {
        if (int(row.size()) != d)
            throw ShapeError("compute_stats: inconsistent feature length " +
                             std::to_string(row.size()) + " vs " + std::to_string(d));
    }

    FeatureStats s;
    s.n = n;
    s.d = d;
    s.mean.assign(std::size_t(d), 0.0);
    for (const auto& row : features)
        for (int j = 0; j < d; ++j) s.mean[std::size_t(j)] += row[std::size_t(j)];
    for (int j = 0; j < d; ++j) s.mean[std::size_t(j)] /= double(n);

    s.cov.assign(std::size_t(d) * std::size_t(d), 0.0);
    std::vector<double> delta(std::size_t(d), 0.0);
    for (const auto& row : features) {
        for (int j = 0; j < d; ++j) delta[std::size_t(j)] = row[std::size_t(j)] - s.mean[std::size_t(j)];
        for (int i = 0; i < d; ++i) {
            const double di = delta[std::size_t(i)];
            if (di == 0.0) continue;
            double* out = s.cov.data() + std::size_t(i) * std::size_t(d);
            for (int j = 0; j < d; ++j) out[j] += di * delta[std::size_t(j)];
        }
    }
    const double scale = 1.0 / double(n - 1);
    for (double& v : s.cov) v *= scale;
    // Symmetrize against accumulation-order noise.
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double avg = 0.5 * (s.cov[std::size_t(i) * std::size_t(d) + std::size_t(j)] +
                                      s.cov[std::size_t(j) * std::size_t(d) + std::size_t(i)]);
            s.cov[std::size_t(i) * std::size_t(d) + std::size_t(j)] = avg;
            s.cov[std::size_t(j) * std::size_t(d) + std::size_t(i)] = avg;
        }
    }
    return s;
}

std::vector<double> sqrtm_spd(const std::vector<double>& m, int d) {
    if (d < 1) throw ContractError("sqrtm: dimension must be positive");
    if (m.size() != std::size_t(d) * std::size_t(d))
        throw ShapeError("sqrtm: expected " + std::to_string(d) + "x" + std::to_string(d) +
                         " matrix, got " + std::to_string(m.size()) + " entries");

    double max_abs = 0.0;
    for (double v : m) max_abs = std::max(max_abs, std::abs(v));
    const double scale = std::max(1.0, max_abs);
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double diff = std::abs(m[std::size_t(i) * std::size_t(d) + std::size_t(j)] -
                                         m[std::size_t(j) * std::size_t(d) + std::size_t(i)]);
            if (diff > 1e-6 * scale)
                throw ContractError("sqrtm: input is not symmetric (entry " + std::to_string(i) +
                                    "," + std::to_string(j) + " off by " + std::to_string(diff) + ")");
        }
    }

    Eigen::Map<const Eigen::MatrixXd> mat(m.data(), d, d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mat);
    if (solver.info() != Eigen::Success) throw NumericError("sqrtm: eigendecomposition failed");

    Eigen::VectorXd lambda = solver.eigenvalues();
    for (int i = 0; i < d; ++i) {
        if (lambda[i] < -1e-6 * scale)
            throw NumericError("sqrtm: eigenvalue " + std::to_string(lambda[i]) +
                               " is negative beyond tolerance");
        lambda[i] = lambda[i] > 0.0 ? std::sqrt(lambda[i]) : 0.0;
    }
    const Eigen::MatrixXd root =
        solver.eigenvectors() * lambda.asDiagonal() * solver.eigenvectors().transpose();

    std::vector<double> out(std::size_t(d) * std::size_t(d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            out[std::size_t(i) * std::size_t(d) + std::size_t(j)] = root(i, j);
    // The eigenvector product is symmetric only up to rounding; make it exact.
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double avg = 0.5 * (out[std::size_t(i) * std::size_t(d) + std::size_t(j)] +
                                      out[std::size_t(j) * std::size_t(d) + std::size_t(i)]);
            out[std::size_t(i) * std::size_t(d) + std::size_t(j)] = avg;
            out[std::size_t(j) * std::size_t(d) + std::size_t(i)] = avg;
        }
    }
    return out;
}

namespace {

// C = A * B for d x d row-major doubles.
std::vector<double> matmul_sq(const std::vector<double>& a, const std::vector<double>& b, int d) {
    std::vector<double> c(std::size_t(d) * std::size_t(d), 0.0);
    for (int i = 0; i < d; ++i) {
        const double* arow = a.data() + std::size_t(i) * std::size_t(d);
        double* crow = c.data() + std::size_t(i) * std::size_t(d);
        for (int k = 0; k < d; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.data() + std::size_t(k) * std::size_t(d);
            for (int j = 0; j < d; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

double trace(const std::vector<double>& m, int d) {
    double t = 0.0;
    for (int i = 0; i < d; ++i) t += m[std::size_t(i) * std::size_t(d) + std::size_t(i)];
    return t;
}

}  // namespace

double frechet_distance(const FeatureStats& s1, const FeatureStats& s2) {
    if (s1.d != s2.d)
        throw ShapeError("frechet: feature dimensions differ (" + std::to_string(s1.d) + " vs " +
                         std::to_string(s2.d) + ")");
    const int d = s1.d;
    if (d < 1) throw ContractError("frechet: empty statistics");

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = s1.mean[std::size_t(i)] - s2.mean[std::size_t(i)];
        mean_term += diff * diff;
    }

    // Tr((C1^{1/2} C2 C1^{1/2})^{1/2}) is the nuclear norm of R2*R1: the SPD
    // argument equals (R2 R1)^T (R2 R1), so its eigenvalues are the squared
    // singular values of R2 R1. Summing singular values keeps the error of
    // each term at O(eps * ||C||); square-rooting the explicit product would
    // instead turn eigensolver noise on near-zero eigenvalues into sqrt(noise),
    // which is what dominates when the covariances are rank-deficient.
    const std::vector<double> r1 = sqrtm_spd(s1.cov, d);
    const std::vector<double> r2 = sqrtm_spd(s2.cov, d);
    const std::vector<double> prod = matmul_sq(r2, r1, d);
    Eigen::MatrixXd p(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p(i, j) = prod[std::size_t(i) * std::size_t(d) + std::size_t(j)];
    Eigen::BDCSVD<Eigen::MatrixXd> svd(p);
    const double cross_trace = svd.singularValues().sum();

    double fid = mean_term + trace(s1.cov, d) + trace(s2.cov, d) - 2.0 * cross_trace;
    if (fid < 0.0) {
        if (fid < -1e-6)
            throw NumericError("frechet: distance " + std::to_string(fid) +
                               " is negative beyond tolerance");
        fid = 0.0;
    }
    return fid;
}

std::string FeatureExtractor::describe() const {
    if (kind == Kind::pixel8) return "pixel8(d=64)";
    return "randconv(seed=" + std::to_string(seed) + ",d=" + std::to_string(d) + ")";
}

FeatureExtractor parse_extractor(const std::string& name, std::uint64_t seed, int d) {
    FeatureExtractor ex;
    ex.seed = seed;
    if (name == "pixel8") {
        ex.kind = FeatureExtractor::Kind::pixel8;
        ex.d = 64;
        if (d != 0 && d != 64)
            throw ConfigError("extractor pixel8 has a fixed dimension of 64, got " + std::to_string(d));
        return ex;
    }
    if (name == "randconv") {
        ex.kind = FeatureExtractor::Kind::randconv;
        ex.d = d == 0 ? 64 : d;
        if (ex.d < 1) throw ConfigError("extractor dimension must be positive, got " + std::to_string(d));
        return ex;
    }
    throw ConfigError("unknown extractor '" + name + "' (expected pixel8 or randconv)");
}

namespace {

std::vector<double> pixel8_features(const ImageU8& img) {
    if (img.height < 8 || img.width < 8)
        throw ShapeError("pixel8 extractor needs images of at least 8x8, got " +
                         std::to_string(img.height) + "x" + std::to_string(img.width));
    std::vector<double> feat(64, 0.0);
    for (int by = 0; by < 8; ++by) {
        const int y0 = by * img.height / 8;
        const int y1 = (by + 1) * img.height / 8;
        for (int bx = 0; bx < 8; ++bx) {
            const int x0 = bx * img.width / 8;
            const int x1 = (bx + 1) * img.width / 8;
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    if (img.channels == 1) {
                        acc += double(img.at(y, x, 0));
                    } else {
                        acc += luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
                    }
                }
            }
            feat[std::size_t(by * 8 + bx)] = acc / double((y1 - y0) * (x1 - x0));
        }
    }
    return feat;
}

Tensor randconv_weight(std::uint64_t seed, const std::string& name, int oc, int ic) {
    Tensor w({oc, ic, 3, 3});
    Rng rng(seed, name);
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = float(rng.normal(0.0, 0.2));
    return w;
}

std::vector<double> randconv_features(const ImageU8& img, const FeatureExtractor& ex) {
    if (img.height < 8 || img.width < 8)
        throw ShapeError("randconv extractor needs images of at least 8x8, got " +
                         std::to_string(img.height) + "x" + std::to_string(img.width));
    const int c = img.channels;
    const std::string prefix = "randconv/c" + std::to_string(c) + "/";
    const std::array<int, 4> widths = {c, 16, 32, ex.d};

    Tensor chw = normalize(img);
    Tensor x({1, c, img.height, img.width}, chw.vec());
    NodePtr h = constant(x);
    for (int layer = 0; layer < 3; ++layer) {
        const ConvSpec spec = ConvSpec::make(widths[std::size_t(layer)], widths[std::size_t(layer) + 1],
                                             3, 2, 1);
        const Tensor w = randconv_weight(ex.seed, prefix + "w" + std::to_string(layer),
                                         spec.out_channels, spec.in_channels);
        h = conv2d(h, constant(w), nullptr, spec);
        if (layer < 2) h = leaky_relu(h, 0.2f);
    }

    const Tensor& out = h->value;
    const int plane = out.dim(2) * out.dim(3);
    std::vector<double> feat(std::size_t(ex.d), 0.0);
    for (int ch = 0; ch < ex.d; ++ch) {
        double acc = 0.0;
        const float* p = out.data() + std::int64_t(ch) * plane;
        for (int i = 0; i < plane; ++i) acc += double(p[i]);
        feat[std::size_t(ch)] = acc / double(plane);
    }
    return feat;
}

}  // namespace

std::vector<double> extract_features(const ImageU8& img, const FeatureExtractor& ex) {
    if (ex.kind == FeatureExtractor::Kind::pixel8) return pixel8_features(img);
    if (ex.d < 1) throw ConfigError("extractor dimension must be positive");
    return randconv_features(img, ex);
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["l1"] = l1;
    if (psnr_db.has_value()) {
        j["psnr_db"] = *psnr_db;
    } else {
        j["psnr_db"] = "inf";
    }
    j["ssim"] = ssim;
    j["fid"] = fid;
    j["n_pairs"] = n_pairs;
    j["extractor"] = extractor;
    j["shrunk"] = shrunk;
    return j.dump(2);
}

namespace {

void shrink_cov(FeatureStats& s) {
    const double lambda = 1e-6 * trace(s.cov, s.d) / double(s.d);
    for (int i = 0; i < s.d; ++i) s.cov[std::size_t(i) * std::size_t(s.d) + std::size_t(i)] += lambda;
}

}  // namespace

MetricReport evaluate_pairs(const std::vector<std::pair<const ImageU8*, const ImageU8*>>& pairs,
                            const FeatureExtractor& ex) {
    if (pairs.size() < 2) throw DataError("evaluate: need at least 2 image pairs, got " +
                                          std::to_string(pairs.size()));

    MetricReport report;
    report.n_pairs = int(pairs.size());
    report.extractor = ex.describe();

    double l1_acc = 0.0;
    double ssim_acc = 0.0;
    double sq_acc = 0.0;
    std::size_t px_count = 0;
    std::vector<std::vector<double>> fake_feats, real_feats;
    fake_feats.reserve(pairs.size());
    real_feats.reserve(pairs.size());

    for (const auto& [fake, real] : pairs) {
        if (fake == nullptr || real == nullptr) throw ContractError("evaluate: null image pointer");
        l1_acc += l1_metric(*fake, *real);
        ssim_acc += ssim(*fake, *real);
        sq_acc += mse(*fake, *real) * double(fake->pixels.size());
        px_count += fake->pixels.size();
        fake_feats.push_back(extract_features(*fake, ex));
        real_feats.push_back(extract_features(*real, ex));
    }

    report.l1 = l1_acc / double(pairs.size());
    report.ssim = ssim_acc / double(pairs.size());
    const double pooled_mse = sq_acc / double(px_count);
    report.psnr_db = pooled_mse == 0.0 ? std::optional<double>() : psnr_from_mse(pooled_mse);

    FeatureStats fake_stats = compute_stats(fake_feats);
    FeatureStats real_stats = compute_stats(real_feats);
    if (fake_stats.n <= fake_stats.d) {
        shrink_cov(fake_stats);
        shrink_cov(real_stats);
        report.shrunk = true;
    }
    report.fid = frechet_distance(fake_stats, real_stats);
    return report;
}

}  // namespace sogr
