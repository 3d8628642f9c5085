#include "sogr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "sogr/errors.hpp"
#include "sogr/rng.hpp"

namespace sogr {

namespace fs = std::filesystem;

Dataset load_dataset(const fs::path& root) {
    const fs::path a = root / "A", b = root / "B";
    if (!fs::is_directory(a) || !fs::is_directory(b))
        throw DataError("dataset root '" + root.string() + "' must contain A/ and B/ directories");

    auto stems = [](const fs::path& dir) {
        std::set<std::string> out;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".png")
                out.insert(e.path().stem().string());
        }
        return out;
    };
    const std::set<std::string> sa = stems(a), sb = stems(b);
    for (const auto& id : sa)
        if (!sb.count(id)) throw DataError("pair '" + id + "' has no optical counterpart in B/");
    for (const auto& id : sb)
        if (!sa.count(id)) throw DataError("pair '" + id + "' has no SAR counterpart in A/");
    if (sa.empty()) throw DataError("dataset '" + root.string() + "' contains no PNG pairs");

    Dataset ds;
    for (const auto& id : sa) {  // set iteration = sorted ids
        ImagePair p;
        p.id = id;
        p.sar = read_png(a / (id + ".png"));
        p.optical = read_png(b / (id + ".png"));
        if (p.optical.channels != 3)
            throw DataError("optical image '" + id + "' must be RGB, got " +
                            std::to_string(p.optical.channels) + " channel(s)");
        if (p.sar.height != p.optical.height || p.sar.width != p.optical.width)
            throw DataError("pair '" + id + "': SAR is " + std::to_string(p.sar.height) + "x" +
                            std::to_string(p.sar.width) + " but optical is " +
                            std::to_string(p.optical.height) + "x" +
                            std::to_string(p.optical.width));
        if (!ds.pairs.empty() && p.sar.channels != ds.sar_channels)
            throw DataError("pair '" + id + "': SAR channel count differs from the rest of the dataset");
        ds.sar_channels = p.sar.channels;
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

namespace {

ImageU8 crop(const ImageU8& img, int y0, int x0, int size) {
    ImageU8 out(size, size, img.channels);
    const size_t row_bytes = static_cast<size_t>(size) * static_cast<size_t>(img.channels);
    for (int y = 0; y < size; ++y) {
        const std::uint8_t* src = &img.pixels[static_cast<size_t>(
            (static_cast<std::int64_t>(y0 + y) * img.width + x0) * img.channels)];
        std::copy(src, src + row_bytes,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(static_cast<size_t>(y) * row_bytes));
    }
    return out;
}

}  // namespace

std::vector<ImagePair> cut_patches(const ImagePair& pair, int patch_size, int stride) {
    if (patch_size < 1) throw ContractError("cut_patches: patch_size must be positive");
    if (stride < 1) throw ContractError("cut_patches: stride must be positive");
    const int H = pair.sar.height, W = pair.sar.width;
    if (H < patch_size || W < patch_size)
        throw DataError("pair '" + pair.id + "' (" + std::to_string(H) + "x" + std::to_string(W) +
                        ") is smaller than patch size " + std::to_string(patch_size));
    std::vector<ImagePair> out;
    int row = 0;
    for (int y = 0; y + patch_size <= H; y += stride, ++row) {
        int col = 0;
        for (int x = 0; x + patch_size <= W; x += stride, ++col) {
            ImagePair p;
            p.id = pair.id + "_" + std::to_string(row) + "_" + std::to_string(col);
            p.sar = crop(pair.sar, y, x, patch_size);
            p.optical = crop(pair.optical, y, x, patch_size);
            out.push_back(std::move(p));
        }
    }
    return out;
}

Tensor normalize(const ImageU8& img) {
    Tensor t({img.channels, img.height, img.width});
    const std::int64_t HW = static_cast<std::int64_t>(img.height) * img.width;
    for (int c = 0; c < img.channels; ++c) {
        float* dst = t.data() + c * HW;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                dst[static_cast<std::int64_t>(y) * img.width + x] =
                    static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
    }
    return t;
}

ImageU8 denormalize(const Tensor& chw) {
    if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3))
        throw ShapeError("denormalize: expected [1|3, H, W], got " + shape_str(chw.shape()));
    ImageU8 img(chw.dim(1), chw.dim(2), chw.dim(0));
    const std::int64_t HW = static_cast<std::int64_t>(img.height) * img.width;
    for (int c = 0; c < img.channels; ++c) {
        const float* src = chw.data() + c * HW;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double v =
                    (static_cast<double>(src[static_cast<std::int64_t>(y) * img.width + x]) + 1.0) *
                    127.5;
                const double r = std::round(v);  // half away from zero
                img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
            }
    }
    return img;
}

Tensor stack_normalized(const std::vector<const ImageU8*>& imgs) {
    if (imgs.empty()) throw ContractError("stack_normalized: no images");
    const ImageU8& first = *imgs[0];
    Tensor out({static_cast<int>(imgs.size()), first.channels, first.height, first.width});
    const std::int64_t per = static_cast<std::int64_t>(first.channels) * first.height * first.width;
    for (size_t i = 0; i < imgs.size(); ++i) {
        if (!imgs[i]->same_shape(first))
            throw ShapeError("stack_normalized: image " + std::to_string(i) +
                             " has a different shape");
        const Tensor t = normalize(*imgs[i]);
        std::copy(t.data(), t.data() + per, out.data() + static_cast<std::int64_t>(i) * per);
    }
    return out;
}

namespace {

constexpr int kBgBase[3] = {62, 104, 58};
constexpr int kRectBase[3] = {176, 64, 52};
constexpr int kEllipseBase[3] = {58, 86, 178};
// class order: background, rectangle, ellipse
constexpr double kGainGray[3] = {0.50, 1.45, 0.22};
constexpr double kGainRgb[3][3] = {
    {0.50, 0.62, 0.38},
    {1.45, 1.10, 0.80},
    {0.22, 0.35, 0.90},
};

int jitter_channel(Rng& rng, int base, int amp) {
    return std::clamp(base + static_cast<int>(rng.uniform_int(2 * amp + 1)) - amp, 0, 255);
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

ImagePair make_scene(const SynthConfig& cfg, const std::string& id) {
    const int S = cfg.size;
    Rng rng(cfg.seed, "scene/" + id);
    ImageU8 opt(S, S, 3);

    int bg[3];
    for (int c = 0; c < 3; ++c) bg[c] = jitter_channel(rng, kBgBase[c], 10);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
            for (int c = 0; c < 3; ++c) opt.at(y, x, c) = static_cast<std::uint8_t>(bg[c]);

    const int n_rect = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_rect; ++i) {
        const int w = S / 8 + static_cast<int>(rng.uniform_int(S / 4 - S / 8 + 1));
        const int h = S / 8 + static_cast<int>(rng.uniform_int(S / 4 - S / 8 + 1));
        const int x0 = static_cast<int>(rng.uniform_int(S - w + 1));
        const int y0 = static_cast<int>(rng.uniform_int(S - h + 1));
        int col[3];
        for (int c = 0; c < 3; ++c) col[c] = jitter_channel(rng, kRectBase[c], 12);
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x)
                for (int c = 0; c < 3; ++c) opt.at(y, x, c) = static_cast<std::uint8_t>(col[c]);
    }

    const int n_ell = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_ell; ++i) {
        const int ax = S / 10 + static_cast<int>(rng.uniform_int(S / 5 - S / 10 + 1));
        const int ay = S / 10 + static_cast<int>(rng.uniform_int(S / 5 - S / 10 + 1));
        const int cx = ax + static_cast<int>(rng.uniform_int(S - 2 * ax));
        const int cy = ay + static_cast<int>(rng.uniform_int(S - 2 * ay));
        int col[3];
        for (int c = 0; c < 3; ++c) col[c] = jitter_channel(rng, kEllipseBase[c], 12);
        for (int y = cy - ay; y <= cy + ay; ++y)
            for (int x = cx - ax; x <= cx + ax; ++x) {
                const double dx = static_cast<double>(x - cx) / ax;
                const double dy = static_cast<double>(y - cy) / ay;
                if (dx * dx + dy * dy <= 1.0)
                    for (int c = 0; c < 3; ++c) opt.at(y, x, c) = static_cast<std::uint8_t>(col[c]);
            }
    }

    // per-pixel texture noise, small enough to keep classes separable
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
            for (int c = 0; c < 3; ++c)
                opt.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(
                    static_cast<int>(opt.at(y, x, c)) + static_cast<int>(rng.uniform_int(7)) - 3, 0,
                    255));

    ImagePair p;
    p.id = id;
    p.optical = opt;
    p.sar = clean_sar(opt, cfg.sar_channels);
    if (cfg.speckle) {
        const auto field = speckle_field(cfg.seed, id,
                                         static_cast<std::int64_t>(p.sar.pixels.size()), cfg.looks);
        for (size_t i = 0; i < p.sar.pixels.size(); ++i)
            p.sar.pixels[i] = quantize(p.sar.pixels[i] * field[i]);
    }
    return p;
}

}  // namespace

ImageU8 clean_sar(const ImageU8& optical, int sar_channels) {
    if (optical.channels != 3) throw ShapeError("clean_sar: optical image must be RGB");
    if (sar_channels != 1 && sar_channels != 3)
        throw ContractError("clean_sar: sar_channels must be 1 or 3");
    ImageU8 sar(optical.height, optical.width, sar_channels);
    for (int y = 0; y < optical.height; ++y) {
        for (int x = 0; x < optical.width; ++x) {
            const int r = optical.at(y, x, 0), g = optical.at(y, x, 1), b = optical.at(y, x, 2);
            const int* bases[3] = {kBgBase, kRectBase, kEllipseBase};
            int cls = 0;
            std::int64_t best = -1;
            for (int k = 0; k < 3; ++k) {
                const std::int64_t dr = r - bases[k][0], dg = g - bases[k][1], db = b - bases[k][2];
                const std::int64_t d = dr * dr + dg * dg + db * db;
                if (best < 0 || d < best) {
                    best = d;
                    cls = k;
                }
            }
            const double lum = luminance(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                         static_cast<std::uint8_t>(b));
            if (sar_channels == 1) {
                sar.at(y, x, 0) = quantize(lum * kGainGray[cls]);
            } else {
                for (int c = 0; c < 3; ++c) sar.at(y, x, c) = quantize(lum * kGainRgb[cls][c]);
            }
        }
    }
    return sar;
}

Dataset synth_dataset(const SynthConfig& cfg) {
    if (cfg.n_pairs < 1) throw ConfigError("synth: n_pairs must be >= 1");
    if (cfg.size < 16) throw ConfigError("synth: size must be >= 16");
    if (cfg.sar_channels != 1 && cfg.sar_channels != 3)
        throw ConfigError("synth: sar_channels must be 1 or 3");
    if (cfg.looks < 1) throw ConfigError("synth: looks must be >= 1");
    Dataset ds;
    ds.sar_channels = cfg.sar_channels;
    ds.pairs.reserve(static_cast<size_t>(cfg.n_pairs));
    for (int i = 0; i < cfg.n_pairs; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d", i);
        ds.pairs.push_back(make_scene(cfg, buf));
    }
    return ds;
}

std::vector<double> speckle_field(std::uint64_t seed, const std::string& id, std::int64_t n,
                                  int looks) {
    if (n < 0) throw ContractError("speckle_field: negative sample count");
    if (looks < 1) throw ContractError("speckle_field: looks must be >= 1");
    Rng rng(seed, "speckle/" + id);
    std::vector<double> out(static_cast<size_t>(n));
    for (auto& v : out) {
        double acc = 0.0;
        for (int k = 0; k < looks; ++k) acc += rng.exponential();
        v = acc / looks;
    }
    return out;
}

std::vector<size_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, size_t n) {
    std::vector<size_t> v(n);
    std::iota(v.begin(), v.end(), size_t{0});
    Rng rng(seed, "perm/" + std::to_string(epoch));
    shuffle_indices(v, rng);
    return v;
}

std::vector<size_t> batch_indices(std::uint64_t seed, std::int64_t step, size_t n, int batch_size) {
    if (n == 0) throw DataError("batch_indices: empty dataset");
    if (batch_size < 1) throw ContractError("batch_indices: batch_size must be positive");
    if (static_cast<size_t>(batch_size) > n)
        throw DataError("batch_indices: batch size " + std::to_string(batch_size) +
                        " exceeds dataset size " + std::to_string(n));
    if (step < 0) throw ContractError("batch_indices: negative step");
    const size_t per_epoch = n / static_cast<size_t>(batch_size);
    const std::int64_t epoch = step / static_cast<std::int64_t>(per_epoch);
    const size_t k = static_cast<size_t>(step % static_cast<std::int64_t>(per_epoch));
    const std::vector<size_t> perm = epoch_permutation(seed, epoch, n);
    const auto begin = perm.begin() + static_cast<std::ptrdiff_t>(k * static_cast<size_t>(batch_size));
    return std::vector<size_t>(begin, begin + batch_size);
}

void export_dataset(const Dataset& ds, const fs::path& root) {
    try {
        fs::create_directories(root / "A");
        fs::create_directories(root / "B");
    } catch (const fs::filesystem_error& e) {
        throw DataError("cannot create dataset directories under '" + root.string() +
                        "': " + e.what());
    }
    nlohmann::json manifest;
    manifest["ids"] = nlohmann::json::array();
    for (const auto& p : ds.pairs) {
        write_png(p.sar, root / "A" / (p.id + ".png"));
        write_png(p.optical, root / "B" / (p.id + ".png"));
        manifest["ids"].push_back(p.id);
    }
    manifest["n"] = ds.pairs.size();
    manifest["sar_channels"] = ds.sar_channels;
    if (!ds.pairs.empty()) {
        manifest["height"] = ds.pairs.front().optical.height;
        manifest["width"] = ds.pairs.front().optical.width;
    }
    std::ofstream f(root / "manifest.json", std::ios::trunc);
    if (!f) throw DataError("cannot write manifest under '" + root.string() + "'");
    f << manifest.dump(2) << "\n";
    if (!f.flush()) throw DataError("manifest write failed under '" + root.string() + "'");
}

}  // namespace sogr
