#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sogr/errors.hpp"
#include "sogr/image.hpp"
#include "sogr/metrics.hpp"
#include "sogr/rng.hpp"

using namespace sogr;

namespace {

ImageU8 random_image(uint64_t seed, int h, int w, int c) {
    Rng rng(seed, "img");
    ImageU8 img(h, w, c);
    for (auto& p : img.pixels) p = uint8_t(rng.uniform_int(256));
    return img;
}

ImageU8 constant_image(int h, int w, int c, uint8_t v) {
    ImageU8 img(h, w, c);
    std::fill(img.pixels.begin(), img.pixels.end(), v);
    return img;
}

std::vector<double> matmul_naive(const std::vector<double>& a, const std::vector<double>& b,
                                 int d) {
    std::vector<double> out(size_t(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            const double aik = a[size_t(i) * d + k];
            for (int j = 0; j < d; ++j) out[size_t(i) * d + j] += aik * b[size_t(k) * d + j];
        }
    return out;
}

std::vector<double> random_spd(uint64_t seed, int d) {
    Rng rng(seed, "spd");
    std::vector<double> b(size_t(d) * d);
    for (auto& x : b) x = rng.normal();
    // B^T B / d + 0.1 I: symmetric positive definite by construction
    std::vector<double> m(size_t(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += b[size_t(k) * d + i] * b[size_t(k) * d + j];
            m[size_t(i) * d + j] = acc / d + (i == j ? 0.1 : 0.0);
        }
    return m;
}

double rel_frobenius(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

FeatureStats diag_stats(const std::vector<double>& mean, const std::vector<double>& var) {
    FeatureStats s;
    s.d = int(mean.size());
    s.n = 1000;
    s.mean = mean;
    s.cov.assign(size_t(s.d) * s.d, 0.0);
    for (int i = 0; i < s.d; ++i) s.cov[size_t(i) * s.d + i] = var[size_t(i)];
    return s;
}

}  // namespace

TEST_CASE("l1_metric") {
    ImageU8 a = random_image(1, 13, 17, 3);
    CHECK(l1_metric(a, a) == 0.0);

    // uniform +3 without clipping
    ImageU8 lo = constant_image(12, 12, 3, 100);
    ImageU8 hi = constant_image(12, 12, 3, 103);
    CHECK(l1_metric(lo, hi) == doctest::Approx(3.0).epsilon(1e-12));

    ImageU8 b = random_image(2, 13, 17, 3);
    double naive = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i)
        naive += std::fabs(double(a.pixels[i]) - double(b.pixels[i]));
    naive /= double(a.pixels.size());
    CHECK(l1_metric(a, b) == doctest::Approx(naive).epsilon(1e-9));
    CHECK(l1_metric(a, b) == l1_metric(b, a));

    CHECK_THROWS_AS(l1_metric(a, random_image(3, 13, 18, 3)), ShapeError);
    CHECK_THROWS_AS(l1_metric(a, random_image(3, 13, 17, 1)), ShapeError);
}

TEST_CASE("psnr") {
    // |a - b| = 1 everywhere: MSE = 1, psnr = 20 log10(255)
    ImageU8 a = constant_image(16, 16, 3, 90);
    ImageU8 b = constant_image(16, 16, 3, 91);
    auto v = psnr(a, b);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
    CHECK(*v == doctest::Approx(48.1308).epsilon(1e-5));

    // identical images hit the infinite sentinel
    CHECK(!psnr(a, a).has_value());

    // maximum contrast: MSE = 255^2, psnr = 0
    ImageU8 black = constant_image(8, 8, 1, 0);
    ImageU8 white = constant_image(8, 8, 1, 255);
    auto zero = psnr(black, white);
    REQUIRE(zero.has_value());
    CHECK(*zero == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(a, black), ShapeError);
}

TEST_CASE("psnr and l1 agree about perfect reconstructions") {
    for (uint64_t s = 0; s < 6; ++s) {
        ImageU8 a = random_image(s, 12, 12, 3);
        ImageU8 b = (s % 2 == 0) ? a : random_image(s + 100, 12, 12, 3);
        const bool zero_l1 = l1_metric(a, b) == 0.0;
        CHECK(zero_l1 == !psnr(a, b).has_value());
    }
}

TEST_CASE("ssim") {
    ImageU8 a = random_image(4, 24, 31, 3);
    CHECK(ssim(a, a) == 1.0);  // exact

    ImageU8 b = random_image(5, 24, 31, 3);
    CHECK(std::fabs(ssim(a, b) - ssim(b, a)) < 1e-9);
    CHECK(ssim(a, b) >= -1.0);
    CHECK(ssim(a, b) <= 1.0);

    // constant images: variance terms vanish and only luminance survives
    ImageU8 c1 = constant_image(16, 20, 1, 100);
    ImageU8 c2 = constant_image(16, 20, 1, 120);
    const double C1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double lum = (2.0 * 100.0 * 120.0 + C1) / (100.0 * 100.0 + 120.0 * 120.0 + C1);
    CHECK(ssim(c1, c2) == doctest::Approx(lum).epsilon(1e-9));

    // a single valid window is enough
    ImageU8 tiny = random_image(6, 11, 11, 1);
    CHECK(ssim(tiny, tiny) == 1.0);

    CHECK_THROWS_AS(ssim(random_image(7, 10, 16, 1), random_image(7, 10, 16, 1)), ShapeError);
    CHECK_THROWS_AS(ssim(random_image(8, 16, 10, 1), random_image(8, 16, 10, 1)), ShapeError);
    CHECK_THROWS_AS(ssim(a, random_image(9, 24, 30, 3)), ShapeError);
}

TEST_CASE("compute_stats hand examples") {
    FeatureStats s = compute_stats({{0.0, 0.0}, {2.0, 2.0}});
    CHECK(s.n == 2);
    CHECK(s.d == 2);
    CHECK(s.mean == std::vector<double>{1.0, 1.0});
    CHECK(s.cov == std::vector<double>{2.0, 2.0, 2.0, 2.0});

    FeatureStats z = compute_stats({{1.5, -2.0, 3.0}, {1.5, -2.0, 3.0}, {1.5, -2.0, 3.0}});
    CHECK(z.mean == std::vector<double>{1.5, -2.0, 3.0});
    for (double c : z.cov) CHECK(c == 0.0);

    CHECK_THROWS_AS(compute_stats({}), ContractError);
    CHECK_THROWS_AS(compute_stats({{1.0, 2.0}}), ContractError);
    CHECK_THROWS_AS(compute_stats({{1.0, 2.0}, {1.0}}), ShapeError);
}

TEST_CASE("compute_stats recovers seeded Gaussian moments") {
    // x = 2 z1 + 1, y = z1 + z2 - 1:
    // mean (1, -1), var (4, 2), cov(x, y) = 2
    Rng rng(10, "mc");
    const int n = 50000;
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double z1 = rng.normal(), z2 = rng.normal();
        rows.push_back({2.0 * z1 + 1.0, z1 + z2 - 1.0});
    }
    FeatureStats s = compute_stats(rows);
    CHECK(s.mean[0] == doctest::Approx(1.0).epsilon(0.05));
    CHECK(s.mean[1] == doctest::Approx(-1.0).epsilon(0.05));
    CHECK(s.cov[0] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(s.cov[3] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(s.cov[1] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(s.cov[1] == s.cov[2]);
}

TEST_CASE("sqrtm_spd analytic cases") {
    std::vector<double> eye = {1.0, 0.0, 0.0, 1.0};
    CHECK(rel_frobenius(sqrtm_spd(eye, 2), eye) < 1e-12);

    std::vector<double> r = sqrtm_spd({4.0, 0.0, 0.0, 9.0}, 2);
    CHECK(r[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r[3] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(std::fabs(r[1]) < 1e-9);
    CHECK(std::fabs(r[2]) < 1e-9);

    CHECK_THROWS_AS(sqrtm_spd({1.0, 0.5, -0.5, 1.0}, 2), ContractError);  // asymmetric
    CHECK_THROWS_AS(sqrtm_spd({1.0, 0.0, 0.0, -1.0}, 2), NumericError);   // indefinite
    CHECK_THROWS_AS(sqrtm_spd({1.0, 2.0, 3.0}, 2), ShapeError);
    CHECK_THROWS_AS(sqrtm_spd({}, 0), ContractError);
}

TEST_CASE("sqrtm_spd reconstructs random SPD matrices") {
    for (int d : {2, 5, 16, 64, 128}) {
        std::vector<double> m = random_spd(uint64_t(d), d);
        std::vector<double> r = sqrtm_spd(m, d);
        CHECK(rel_frobenius(matmul_naive(r, r, d), m) < 1e-6);
        // the principal root is itself symmetric
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < i; ++j)
                CHECK(r[size_t(i) * d + j] == doctest::Approx(r[size_t(j) * d + i]).epsilon(1e-9));
    }
}

TEST_CASE("frechet_distance analytic cases") {
    FeatureStats s = diag_stats({0.3, -0.7, 1.1}, {1.0, 2.0, 0.5});
    CHECK(frechet_distance(s, s) < 1e-6);

    // unit mean shift, identity covariances
    FeatureStats a = diag_stats({0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0});
    FeatureStats b = diag_stats({1.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0});
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-6));

    // equal means, C1 = 4 I_8, C2 = I_8: Tr(4I + I - 2*2I) = 8
    std::vector<double> zeros(8, 0.0);
    FeatureStats c1 = diag_stats(zeros, std::vector<double>(8, 4.0));
    FeatureStats c2 = diag_stats(zeros, std::vector<double>(8, 1.0));
    CHECK(frechet_distance(c1, c2) == doctest::Approx(8.0).epsilon(1e-6));

    CHECK_THROWS_AS(frechet_distance(a, s), ShapeError);
}

TEST_CASE("frechet_distance is symmetric and non-negative") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed, "fstats");
        const int d = 6;
        auto random_stats = [&] {
            FeatureStats s;
            s.d = d;
            s.n = 500;
            for (int i = 0; i < d; ++i) s.mean.push_back(rng.uniform(-2.0, 2.0));
            s.cov = random_spd(rng.uniform_int(1 << 30), d);
            return s;
        };
        FeatureStats s1 = random_stats();
        FeatureStats s2 = random_stats();
        const double fwd = frechet_distance(s1, s2);
        const double rev = frechet_distance(s2, s1);
        CHECK(fwd >= 0.0);
        CHECK(std::fabs(fwd - rev) < 1e-6);
    }
}

TEST_CASE("frechet_distance matches the closed form on sampled Gaussians") {
    // two diagonal Gaussians in d=4:
    //   mu1 = 0,              sigma1 = (1, 1, 2, 0.5)
    //   mu2 = (1,.5,-.5,0),   sigma2 = (1.5, 1, 1, 1)
    // closed form: sum (dmu)^2 + sum (sigma1 - sigma2)^2 = 1.5 + 1.5 = 3
    const std::vector<double> mu2 = {1.0, 0.5, -0.5, 0.0};
    const std::vector<double> sd1 = {1.0, 1.0, 2.0, 0.5};
    const std::vector<double> sd2 = {1.5, 1.0, 1.0, 1.0};
    Rng rng(77, "gauss");
    const int n = 20000;
    std::vector<std::vector<double>> f1, f2;
    for (int i = 0; i < n; ++i) {
        std::vector<double> r1(4), r2(4);
        for (int j = 0; j < 4; ++j) {
            r1[size_t(j)] = sd1[size_t(j)] * rng.normal();
            r2[size_t(j)] = mu2[size_t(j)] + sd2[size_t(j)] * rng.normal();
        }
        f1.push_back(std::move(r1));
        f2.push_back(std::move(r2));
    }
    const double fid = frechet_distance(compute_stats(f1), compute_stats(f2));
    CHECK(fid == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("pixel8 extractor") {
    FeatureExtractor ex;  // defaults: pixel8, d = 64
    CHECK(ex.describe() == "pixel8(d=64)");

    // block-constant 16x16 gray image: every 2x2 cell averages to its value
    ImageU8 img(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(y, x, 0) = uint8_t((y / 2) * 8 + (x / 2));
    std::vector<double> f = extract_features(img, ex);
    REQUIRE(f.size() == 64);
    for (int i = 0; i < 64; ++i) CHECK(f[size_t(i)] == doctest::Approx(double(i)).epsilon(1e-12));

    // constant RGB image: every feature equals the BT.601 luminance
    ImageU8 rgb = constant_image(32, 32, 3, 0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            rgb.at(y, x, 0) = 200;
            rgb.at(y, x, 1) = 100;
            rgb.at(y, x, 2) = 50;
        }
    const double lum = luminance(200, 100, 50);
    for (double v : extract_features(rgb, ex))
        CHECK(v == doctest::Approx(lum).epsilon(1e-9));

    // determinism and shape independence of content
    ImageU8 r1 = random_image(20, 30, 41, 3);
    CHECK(extract_features(r1, ex) == extract_features(r1, ex));
    CHECK(extract_features(r1, ex).size() == 64);

    CHECK_THROWS_AS(extract_features(random_image(21, 7, 16, 1), ex), ShapeError);
}

TEST_CASE("randconv extractor") {
    FeatureExtractor ex = parse_extractor("randconv", 7, 16);
    CHECK(ex.describe() == "randconv(seed=7,d=16)");

    ImageU8 img = random_image(22, 24, 24, 3);
    std::vector<double> f = extract_features(img, ex);
    REQUIRE(f.size() == 16);
    for (double v : f) CHECK(std::isfinite(v));
    CHECK(extract_features(img, ex) == f);

    // seed changes the random filters, so features move
    FeatureExtractor other = parse_extractor("randconv", 8, 16);
    CHECK(extract_features(img, other) != f);

    // gray input works too
    CHECK(extract_features(random_image(23, 16, 16, 1), ex).size() == 16);

    CHECK_THROWS_AS(extract_features(random_image(24, 6, 6, 1), ex), ShapeError);
}

TEST_CASE("parse_extractor") {
    FeatureExtractor p = parse_extractor("pixel8", 0, 64);
    CHECK(p.kind == FeatureExtractor::Kind::pixel8);
    CHECK(p.d == 64);

    FeatureExtractor r = parse_extractor("randconv", 3, 32);
    CHECK(r.kind == FeatureExtractor::Kind::randconv);
    CHECK(r.seed == 3);
    CHECK(r.d == 32);

    // d = 0 means "use the extractor's default"
    CHECK(parse_extractor("randconv", 0, 0).d == 64);
    CHECK(parse_extractor("pixel8", 0, 0).d == 64);

    CHECK_THROWS_AS(parse_extractor("pixel8", 0, 32), ConfigError);
    CHECK_THROWS_AS(parse_extractor("randconv", 0, -3), ConfigError);
    CHECK_THROWS_AS(parse_extractor("inception", 0, 2048), ConfigError);
}

TEST_CASE("evaluate_pairs on a folder against itself") {
    std::vector<ImageU8> imgs;
    for (uint64_t s = 0; s < 4; ++s) imgs.push_back(random_image(40 + s, 32, 32, 3));
    std::vector<std::pair<const ImageU8*, const ImageU8*>> pairs;
    for (const auto& img : imgs) pairs.emplace_back(&img, &img);

    FeatureExtractor ex;
    MetricReport rep = evaluate_pairs(pairs, ex);
    CHECK(rep.l1 == 0.0);
    CHECK(rep.ssim == 1.0);
    CHECK(!rep.psnr_db.has_value());
    CHECK(rep.fid < 1e-6);
    CHECK(rep.n_pairs == 4);
    CHECK(rep.extractor == "pixel8(d=64)");
    CHECK(rep.shrunk);  // 4 samples <= d = 64
}

TEST_CASE("evaluate_pairs report and ordering invariance") {
    std::vector<ImageU8> fake, real;
    for (uint64_t s = 0; s < 5; ++s) {
        fake.push_back(random_image(50 + s, 24, 24, 3));
        real.push_back(random_image(70 + s, 24, 24, 3));
    }
    std::vector<std::pair<const ImageU8*, const ImageU8*>> pairs;
    for (size_t i = 0; i < fake.size(); ++i) pairs.emplace_back(&fake[i], &real[i]);

    FeatureExtractor ex;
    MetricReport rep = evaluate_pairs(pairs, ex);
    REQUIRE(rep.psnr_db.has_value());
    CHECK(rep.l1 > 0.0);
    CHECK(rep.fid >= 0.0);

    std::vector<std::pair<const ImageU8*, const ImageU8*>> shuffled = {
        pairs[3], pairs[0], pairs[4], pairs[2], pairs[1]};
    MetricReport rep2 = evaluate_pairs(shuffled, ex);
    CHECK(rep2.l1 == doctest::Approx(rep.l1).epsilon(1e-9));
    CHECK(rep2.ssim == doctest::Approx(rep.ssim).epsilon(1e-9));
    CHECK(*rep2.psnr_db == doctest::Approx(*rep.psnr_db).epsilon(1e-9));
    CHECK(rep2.fid == doctest::Approx(rep.fid).epsilon(1e-6));

    CHECK_THROWS_AS(evaluate_pairs({pairs[0]}, ex), DataError);
    std::vector<std::pair<const ImageU8*, const ImageU8*>> with_null = pairs;
    with_null[1].second = nullptr;
    CHECK_THROWS_AS(evaluate_pairs(with_null, ex), ContractError);
}

TEST_CASE("metric report serializes to the documented JSON shape") {
    std::vector<ImageU8> imgs;
    for (uint64_t s = 0; s < 3; ++s) imgs.push_back(random_image(90 + s, 16, 16, 3));

    std::vector<std::pair<const ImageU8*, const ImageU8*>> self;
    for (const auto& img : imgs) self.emplace_back(&img, &img);
    FeatureExtractor ex;
    auto j = nlohmann::json::parse(evaluate_pairs(self, ex).to_json());
    CHECK(j.at("l1").get<double>() == 0.0);
    CHECK(j.at("psnr_db").get<std::string>() == "inf");
    CHECK(j.at("ssim").get<double>() == 1.0);
    CHECK(j.at("fid").get<double>() < 1e-6);
    CHECK(j.at("n_pairs").get<int>() == 3);
    CHECK(j.at("extractor").get<std::string>() == "pixel8(d=64)");
    CHECK(j.at("shrunk").get<bool>());

    std::vector<std::pair<const ImageU8*, const ImageU8*>> mixed = {
        {&imgs[0], &imgs[1]}, {&imgs[1], &imgs[2]}};
    auto j2 = nlohmann::json::parse(evaluate_pairs(mixed, ex).to_json());
    CHECK(j2.at("psnr_db").is_number());
    CHECK(j2.at("psnr_db").get<double>() > 0.0);
}
