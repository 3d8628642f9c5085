#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sogr/autograd.hpp"
#include "sogr/checkpoint.hpp"
#include "sogr/errors.hpp"
#include "sogr/rng.hpp"
#include "sogr/training.hpp"

using namespace sogr;
namespace fs = std::filesystem;

namespace {

NetConfig tiny_net() {
    NetConfig nc;
    nc.size = 16;
    nc.depth = 2;
    nc.ngf = 4;
    nc.ndf = 4;
    nc.sar_channels = 1;
    nc.n_stride2 = 2;
    return nc;
}

Batch tiny_batch(uint64_t seed) {
    Rng rng(seed, "batch");
    Batch b{Tensor({2, 1, 16, 16}), Tensor({2, 3, 16, 16})};
    for (int64_t i = 0; i < b.sar.numel(); ++i) b.sar[i] = float(rng.uniform(-0.9, 0.9));
    for (int64_t i = 0; i < b.optical.numel(); ++i) b.optical[i] = float(rng.uniform(-0.9, 0.9));
    return b;
}

std::vector<Tensor> snapshot(const NetworkParams& p) {
    std::vector<Tensor> out;
    p.for_each_tensor([&](const std::string&, const Tensor& t) { out.push_back(t); });
    return out;
}

bool identical(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].vec() != b[i].vec()) return false;
    return true;
}

void require_models_identical(const ReciprocalModel& a, const ReciprocalModel& b) {
    CHECK(a.step == b.step);
    CHECK(identical(snapshot(a.t_s2o), snapshot(b.t_s2o)));
    CHECK(identical(snapshot(a.t_o2s), snapshot(b.t_o2s)));
    CHECK(identical(snapshot(a.d_opt), snapshot(b.d_opt)));
    CHECK(identical(snapshot(a.d_sar), snapshot(b.d_sar)));
    REQUIRE(a.adam.size() == b.adam.size());
    auto it_b = b.adam.begin();
    for (const auto& [path, st] : a.adam) {
        CHECK(path == it_b->first);
        CHECK(st.m.vec() == it_b->second.m.vec());
        CHECK(st.v.vec() == it_b->second.v.vec());
        ++it_b;
    }
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    REQUIRE(out.good());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) : path(fs::temp_directory_path() / tag) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("discriminator_loss analytic values") {
    auto map_of = [](float v) { return leaf(Tensor::full({1, 1, 2, 2}, v)); };

    // perfect discriminator
    float perfect = discriminator_loss(map_of(1.0f - 1e-8f), map_of(1e-8f))->value[0];
    CHECK(std::fabs(perfect) < 1e-5);

    // coin-flip discriminator
    float half = discriminator_loss(map_of(0.5f), map_of(0.5f))->value[0];
    CHECK(std::fabs(half - 2.0 * std::log(2.0)) < 1e-6);

    CHECK_THROWS_AS(discriminator_loss(map_of(1.5f), map_of(0.5f)), ContractError);
    CHECK_THROWS_AS(discriminator_loss(map_of(0.5f), map_of(-0.1f)), ContractError);
}

TEST_CASE("discriminator_loss drives a scalar logit to the right answers") {
    float a = 0.0f, b = 0.0f;  // logits for d_real and d_fake
    for (int i = 0; i < 300; ++i) {
        auto an = leaf(Tensor::scalar(a), true);
        auto bn = leaf(Tensor::scalar(b), true);
        auto loss = discriminator_loss(sigmoid(an), sigmoid(bn));
        auto g = backward(loss);
        a -= 1.0f * g.at(an.get())[0];
        b -= 1.0f * g.at(bn.get())[0];
    }
    CHECK(1.0 / (1.0 + std::exp(-a)) > 0.99);
    CHECK(1.0 / (1.0 + std::exp(-b)) < 0.01);
}

TEST_CASE("translator_gan_loss values and per-element gradient") {
    auto map_of = [](float v, bool rg = false) {
        return leaf(Tensor::full({1, 1, 2, 2}, v), rg);
    };
    CHECK(std::fabs(translator_gan_loss(map_of(1.0f - 1e-8f), map_of(1.0f - 1e-8f))->value[0]) <
          1e-5);
    CHECK(std::fabs(translator_gan_loss(map_of(0.5f), map_of(0.5f))->value[0] -
                    2.0 * std::log(2.0)) < 1e-6);

    auto m1 = map_of(0.5f, true);
    auto m2 = map_of(0.25f, true);
    auto g = backward(translator_gan_loss(m1, m2));
    // d/dx of -mean(log x) at x = v over M elements: -1/(v*M)
    for (int64_t i = 0; i < 4; ++i) {
        CHECK(g.at(m1.get())[i] == doctest::Approx(-1.0 / (0.5 * 4)));
        CHECK(g.at(m2.get())[i] == doctest::Approx(-1.0 / (0.25 * 4)));
    }
}

TEST_CASE("l1_loss") {
    Rng rng(3);
    Tensor opt({1, 3, 4, 4}), sar({1, 1, 4, 4});
    for (int64_t i = 0; i < opt.numel(); ++i) opt[i] = float(rng.uniform(-1, 1));
    for (int64_t i = 0; i < sar.numel(); ++i) sar[i] = float(rng.uniform(-1, 1));

    // perfect translation in both directions
    CHECK(l1_loss(leaf(opt), leaf(opt), leaf(sar), leaf(sar))->value[0] == 0.0f);

    // constant offset 0.5 in one direction only
    Tensor shifted = opt;
    for (int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += 0.5f;
    float v = l1_loss(leaf(shifted), leaf(opt), leaf(sar), leaf(sar))->value[0];
    CHECK(v == doctest::Approx(0.5).epsilon(1e-6));

    // symmetric in (fake, real)
    float fwd = l1_loss(leaf(shifted), leaf(opt), leaf(sar), leaf(sar))->value[0];
    float rev = l1_loss(leaf(opt), leaf(shifted), leaf(sar), leaf(sar))->value[0];
    CHECK(fwd == rev);

    CHECK_THROWS_AS(l1_loss(leaf(opt), leaf(Tensor({1, 3, 4, 5})), leaf(sar), leaf(sar)),
                    ShapeError);
}

TEST_CASE("translator_loss arithmetic") {
    auto gan = leaf(Tensor::scalar(1.0f));
    auto l1 = leaf(Tensor::scalar(0.1f));
    CHECK(translator_loss(gan, l1, 20.0f)->value[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(translator_loss(gan, l1, 0.0f)->value[0] == 1.0f);
    CHECK_THROWS_AS(translator_loss(leaf(Tensor::ones({2})), l1, 20.0f), ContractError);
}

TEST_CASE("train_step reports finite losses satisfying the loss identity") {
    NetConfig nc = tiny_net();
    TrainConfig tc;
    tc.batch_size = 2;
    tc.total_steps = 10;
    tc.seed = 5;
    ReciprocalModel model = build_model(nc, tc.seed);
    Batch batch = tiny_batch(1);

    for (int step = 0; step < 10; ++step) {
        StepReport r = train_step(model, batch, tc);
        for (double v : {r.d_opt_loss, r.d_sar_loss, r.gan_loss, r.l1_loss, r.t_loss})
            CHECK(std::isfinite(v));
        CHECK(std::fabs(r.t_loss - (r.gan_loss + 20.0 * r.l1_loss)) <= 1e-6);
    }
    CHECK(model.step == 10);

    // beta = 0 collapses the translator objective to the GAN term
    TrainConfig pure = tc;
    pure.beta = 0.0f;
    StepReport r = train_step(model, batch, pure);
    CHECK(r.t_loss == r.gan_loss);
}

TEST_CASE("sub-steps do not touch the other side's parameters") {
    NetConfig nc = tiny_net();
    TrainConfig tc;
    tc.batch_size = 2;
    ReciprocalModel model = build_model(nc, 7);
    Batch batch = tiny_batch(2);

    auto t1 = snapshot(model.t_s2o), t2 = snapshot(model.t_o2s);
    update_discriminator(model, Domain::optical, batch, tc);
    update_discriminator(model, Domain::sar, batch, tc);
    CHECK(identical(t1, snapshot(model.t_s2o)));
    CHECK(identical(t2, snapshot(model.t_o2s)));

    auto d1 = snapshot(model.d_opt), d2 = snapshot(model.d_sar);
    update_translators(model, batch, tc);
    CHECK(identical(d1, snapshot(model.d_opt)));
    CHECK(identical(d2, snapshot(model.d_sar)));
    CHECK(!identical(t1, snapshot(model.t_s2o)));
}

TEST_CASE("sgd sub-steps descend on a fixed batch") {
    NetConfig nc = tiny_net();
    TrainConfig tc;
    tc.optimizer = TrainConfig::Optimizer::sgd;
    tc.learning_rate = 1e-4f;
    tc.batch_size = 2;
    ReciprocalModel model = build_model(nc, 11);
    Batch batch = tiny_batch(3);

    for (int step = 0; step < 5; ++step) {
        double before = update_discriminator(model, Domain::optical, batch, tc);
        double after = eval_losses(model, batch, tc.beta).d_opt_loss;
        CHECK(after <= before + 1e-6);

        before = update_discriminator(model, Domain::sar, batch, tc);
        after = eval_losses(model, batch, tc.beta).d_sar_loss;
        CHECK(after <= before + 1e-6);

        TranslatorUpdate u = update_translators(model, batch, tc);
        after = eval_losses(model, batch, tc.beta).t_loss;
        CHECK(after <= u.total + 1e-6);
        model.step += 1;
    }
}

TEST_CASE("sgd update scales linearly with the learning rate") {
    NetConfig nc = tiny_net();
    Batch batch = tiny_batch(4);
    ReciprocalModel base = build_model(nc, 13);

    TrainConfig slow;
    slow.optimizer = TrainConfig::Optimizer::sgd;
    slow.learning_rate = 0.05f;
    TrainConfig fast = slow;
    fast.learning_rate = 0.10f;

    ReciprocalModel a = base;
    ReciprocalModel b = base;
    update_discriminator(a, Domain::optical, batch, slow);
    update_discriminator(b, Domain::optical, batch, fast);

    auto p0 = snapshot(base.d_opt);
    auto pa = snapshot(a.d_opt);
    auto pb = snapshot(b.d_opt);
    double max_dev = 0.0;
    bool moved = false;
    for (size_t t = 0; t < p0.size(); ++t) {
        for (int64_t i = 0; i < p0[t].numel(); ++i) {
            const double da = double(pa[t][i]) - p0[t][i];
            const double db = double(pb[t][i]) - p0[t][i];
            if (da != 0.0) moved = true;
            max_dev = std::max(max_dev, std::fabs(db - 2.0 * da));
        }
    }
    CHECK(moved);
    CHECK(max_dev < 1e-6);
}

TEST_CASE("adam first step moves parameters by about the learning rate") {
    NetConfig nc = tiny_net();
    TrainConfig tc;  // adam defaults, lr 2e-4
    tc.batch_size = 2;
    ReciprocalModel model = build_model(nc, 17);
    Batch batch = tiny_batch(5);

    auto before = snapshot(model.t_s2o);
    update_translators(model, batch, tc);
    auto after = snapshot(model.t_s2o);

    double max_step = 0.0;
    for (size_t t = 0; t < before.size(); ++t)
        for (int64_t i = 0; i < before[t].numel(); ++i)
            max_step = std::max(max_step, std::fabs(double(after[t][i]) - before[t][i]));
    // bias-corrected first step: |delta| = lr * |g| / (|g| + eps), up to f32 rounding
    CHECK(max_step <= 2e-4 * 1.001);
    CHECK(max_step >= 2e-4 * 0.999);
}

TEST_CASE("training is deterministic across runs") {
    NetConfig nc = tiny_net();
    TrainConfig tc;
    tc.batch_size = 2;
    auto run = [&] {
        ReciprocalModel m = build_model(nc, 23);
        Batch batch = tiny_batch(6);
        for (int i = 0; i < 10; ++i) train_step(m, batch, tc);
        return m;
    };
    ReciprocalModel m1 = run();
    ReciprocalModel m2 = run();
    require_models_identical(m1, m2);
}

TEST_CASE("nan parameters abort the step with a diagnostic") {
    NetConfig nc = tiny_net();
    TrainConfig tc;
    ReciprocalModel model = build_model(nc, 29);
    // A poisoned discriminator produces a nan probability map; the loss
    // rejects it before any parameter moves. (Translator nans would be
    // absorbed by decoder relus instead of reaching the loss.)
    model.d_opt.layers[0].weight[0] = std::nanf("");
    Batch batch = tiny_batch(7);
    auto before = snapshot(model.t_s2o);
    CHECK_THROWS_WITH_AS(train_step(model, batch, tc),
                         doctest::Contains("discriminator_loss"), Error);
    // the abort happened before any sub-step committed an update
    CHECK(identical(before, snapshot(model.t_s2o)));
    CHECK(model.step == 0);
}

TEST_CASE("checkpoint round trip is bit exact") {
    TempDir dir("sogr_ckpt_test");
    NetConfig nc = tiny_net();
    TrainConfig tc;
    tc.batch_size = 2;
    tc.total_steps = 2;
    tc.seed = 31;
    ReciprocalModel model = build_model(nc, tc.seed);
    Batch batch = tiny_batch(8);
    train_step(model, batch, tc);
    train_step(model, batch, tc);

    const fs::path p1 = dir.path / "a.bin";
    const fs::path p2 = dir.path / "b.bin";
    save_checkpoint(model, tc, p1);

    LoadedCheckpoint loaded = load_checkpoint(p1);
    require_models_identical(model, loaded.model);
    CHECK(loaded.config.beta == tc.beta);
    CHECK(loaded.config.learning_rate == tc.learning_rate);
    CHECK(loaded.config.batch_size == tc.batch_size);
    CHECK(loaded.config.seed == tc.seed);
    CHECK(loaded.model.net.size == nc.size);
    CHECK(loaded.model.net.depth == nc.depth);

    save_checkpoint(loaded.model, loaded.config, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint rejects corrupted files with distinct kinds") {
    TempDir dir("sogr_ckpt_err_test");
    NetConfig nc = tiny_net();
    TrainConfig tc;
    ReciprocalModel model = build_model(nc, 37);
    Batch batch = tiny_batch(9);
    train_step(model, batch, tc);  // populate adam state
    const fs::path good = dir.path / "good.bin";
    save_checkpoint(model, tc, good);
    const std::vector<char> bytes = slurp(good);

    auto kind_of = [&](const std::vector<char>& data) {
        const fs::path p = dir.path / "bad.bin";
        spit(p, data);
        try {
            load_checkpoint(p);
        } catch (const CheckpointError& e) {
            return e.kind();
        }
        FAIL("expected a checkpoint error");
        return CheckpointError::Kind::malformed;
    };

    {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK(kind_of(bad) == CheckpointError::Kind::bad_magic);
    }
    {
        auto bad = bytes;
        bad[4] = 99;  // version field
        CHECK(kind_of(bad) == CheckpointError::Kind::bad_version);
    }
    {
        auto bad = bytes;
        bad.resize(bytes.size() / 2);
        CHECK(kind_of(bad) == CheckpointError::Kind::truncated);
    }
    {
        auto bad = bytes;
        bad.resize(7);  // inside the header
        CHECK(kind_of(bad) == CheckpointError::Kind::truncated);
    }
    {
        // flip a declared dimension of the first tensor record
        auto bad = bytes;
        uint32_t config_len = 0;
        std::memcpy(&config_len, bytes.data() + 8, 4);
        size_t pos = 12 + config_len + 4;  // tensor count
        uint16_t name_len = 0;
        std::memcpy(&name_len, bytes.data() + pos, 2);
        size_t dim_pos = pos + 2 + name_len + 1;  // u16 len + name + u8 rank
        bad[dim_pos] = char(bad[dim_pos] + 1);
        CHECK(kind_of(bad) == CheckpointError::Kind::shape_mismatch);
    }
    {
        // corrupt the stored config so it no longer validates
        auto bad = bytes;
        const std::string needle = "batch_size=1";
        auto it = std::search(bad.begin(), bad.end(), needle.begin(), needle.end());
        REQUIRE(it != bad.end());
        *(it + std::streamoff(needle.size()) - 1) = '0';
        CHECK(kind_of(bad) == CheckpointError::Kind::malformed);
    }

    CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.bin"), DataError);
}

TEST_CASE("resuming from a checkpoint equals uninterrupted training") {
    TempDir dir("sogr_resume_test");
    NetConfig nc = tiny_net();
    TrainConfig tc;
    tc.batch_size = 2;
    tc.seed = 41;
    Batch batch = tiny_batch(10);

    ReciprocalModel straight = build_model(nc, tc.seed);
    for (int i = 0; i < 5; ++i) train_step(straight, batch, tc);

    ReciprocalModel interrupted = build_model(nc, tc.seed);
    for (int i = 0; i < 3; ++i) train_step(interrupted, batch, tc);
    const fs::path p = dir.path / "mid.bin";
    save_checkpoint(interrupted, tc, p);

    LoadedCheckpoint resumed = load_checkpoint(p);
    for (int i = 0; i < 2; ++i) train_step(resumed.model, batch, resumed.config);
    require_models_identical(straight, resumed.model);
}
