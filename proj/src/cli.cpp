#include "sogr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sogr/checkpoint.hpp"
#include "sogr/data.hpp"
#include "sogr/errors.hpp"
#include "sogr/metrics.hpp"
#include "sogr/networks.hpp"
#include "sogr/training.hpp"

namespace sogr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::string> png_names(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

// ---------------------------------------------------------------- train ----

struct TrainOpts {
    std::string data;
    std::string out = "run";
    bool synth = false;
    int synth_pairs = 256;
    bool speckle = true;
    int looks = 4;
    std::string resume;
    int save_every = 0;
    std::string optimizer = "adam";
    TrainConfig train;
    NetConfig net;
};

json train_effective_config(const TrainOpts& o, const TrainConfig& tc, const NetConfig& nc) {
    json j;
    j["command"] = "train";
    j["data"] = o.data;
    j["out"] = o.out;
    j["synth"] = o.synth;
    j["synth_pairs"] = o.synth_pairs;
    j["speckle"] = o.speckle;
    j["looks"] = o.looks;
    j["resume"] = o.resume;
    j["save_every"] = o.save_every;
    j["beta"] = tc.beta;
    j["learning_rate"] = tc.learning_rate;
    j["adam_beta1"] = tc.adam_beta1;
    j["adam_beta2"] = tc.adam_beta2;
    j["adam_eps"] = tc.adam_eps;
    j["batch_size"] = tc.batch_size;
    j["total_steps"] = tc.total_steps;
    j["seed"] = tc.seed;
    j["optimizer"] = optimizer_name(tc.optimizer);
    j["size"] = nc.size;
    j["depth"] = nc.depth;
    j["ngf"] = nc.ngf;
    j["ndf"] = nc.ndf;
    j["sar_channels"] = nc.sar_channels;
    j["n_stride2"] = nc.n_stride2;
    return j;
}

Batch make_batch(const Dataset& ds, const std::vector<size_t>& idx) {
    std::vector<const ImageU8*> sar, opt;
    sar.reserve(idx.size());
    opt.reserve(idx.size());
    for (size_t i : idx) {
        sar.push_back(&ds.pairs[i].sar);
        opt.push_back(&ds.pairs[i].optical);
    }
    return Batch{stack_normalized(sar), stack_normalized(opt)};
}

int cmd_train(const TrainOpts& o) {
    ReciprocalModel model;
    TrainConfig tc;
    if (!o.resume.empty()) {
        LoadedCheckpoint loaded = load_checkpoint(o.resume);
        model = std::move(loaded.model);
        tc = loaded.config;
        tc.total_steps = o.train.total_steps;  // --steps sets the new target
        tc.validate();
    } else {
        tc = o.train;
        tc.optimizer = optimizer_from_name(o.optimizer);
        tc.validate();
        o.net.validate();
        model = build_model(o.net, tc.seed);
    }

    Dataset ds;
    if (o.synth) {
        SynthConfig sc;
        sc.seed = tc.seed;
        sc.n_pairs = o.synth_pairs;
        sc.size = model.net.size;
        sc.sar_channels = model.net.sar_channels;
        sc.speckle = o.speckle;
        sc.looks = o.looks;
        ds = synth_dataset(sc);
    } else if (!o.data.empty()) {
        ds = load_dataset(o.data);
    } else {
        throw ConfigError("train: provide --data or --synth");
    }

    fs::create_directories(o.out);
    const fs::path out_dir(o.out);
    write_json_file(out_dir / "effective_config.json", train_effective_config(o, tc, model.net));

    const fs::path ckpt_path = out_dir / "checkpoint.bin";
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError("cannot write " + (out_dir / "train_log.jsonl").string());

    while (model.step < tc.total_steps) {
        const auto idx = batch_indices(tc.seed, model.step, ds.pairs.size(), tc.batch_size);
        const Batch batch = make_batch(ds, idx);
        const StepReport r = train_step(model, batch, tc);
        json line;
        line["step"] = model.step;  // completed steps so far
        line["d_opt_loss"] = r.d_opt_loss;
        line["d_sar_loss"] = r.d_sar_loss;
        line["gan_loss"] = r.gan_loss;
        line["l1_loss"] = r.l1_loss;
        line["t_loss"] = r.t_loss;
        const std::string text = line.dump();
        std::printf("%s\n", text.c_str());
        log << text << "\n";
        if (o.save_every > 0 && model.step % o.save_every == 0)
            save_checkpoint(model, tc, ckpt_path);
    }
    save_checkpoint(model, tc, ckpt_path);
    log.flush();
    if (!log) throw DataError("failed writing train log");
    return 0;
}

// ------------------------------------------------------------ translate ----

struct TranslateOpts {
    std::string checkpoint;
    std::string in;
    std::string out;
    std::string direction = "s2o";
};

int cmd_translate(const TranslateOpts& o) {
    if (o.direction != "s2o" && o.direction != "o2s")
        throw ConfigError("translate: --direction must be s2o or o2s, got '" + o.direction + "'");
    const bool s2o = o.direction == "s2o";

    LoadedCheckpoint loaded = load_checkpoint(o.checkpoint);
    const NetConfig& nc = loaded.model.net;
    const TranslatorConfig tcfg = s2o ? nc.t_s2o_config() : nc.t_o2s_config();
    const NetworkParams& params = s2o ? loaded.model.t_s2o : loaded.model.t_o2s;
    const int want_c = tcfg.in_channels;

    const fs::path src = fs::path(o.in) / (s2o ? "A" : "B");
    const auto names = png_names(src);
    if (names.empty()) throw DataError("translate: no .png files in " + src.string());

    fs::create_directories(o.out);
    for (const auto& name : names) {
        const ImageU8 img = read_png(src / name);
        if (img.channels != want_c || img.height != nc.size || img.width != nc.size) {
            throw ShapeError("translate: input " + name + " is " + std::to_string(img.height) +
                             "x" + std::to_string(img.width) + "x" + std::to_string(img.channels) +
                             " but the checkpoint expects " + std::to_string(nc.size) + "x" +
                             std::to_string(nc.size) + "x" + std::to_string(want_c));
        }
        const Tensor chw = normalize(img);
        const Tensor x({1, want_c, nc.size, nc.size}, chw.vec());
        const Tensor y = translator_apply(tcfg, params, x);
        const Tensor out_chw({y.dim(1), y.dim(2), y.dim(3)}, y.vec());
        write_png(denormalize(out_chw), fs::path(o.out) / name);
    }

    json cfg;
    cfg["command"] = "translate";
    cfg["checkpoint"] = o.checkpoint;
    cfg["in"] = o.in;
    cfg["out"] = o.out;
    cfg["direction"] = o.direction;
    cfg["size"] = nc.size;
    cfg["in_channels"] = want_c;
    cfg["out_channels"] = tcfg.out_channels;
    cfg["n_images"] = names.size();
    write_json_file(fs::path(o.out) / "effective_config.json", cfg);
    return 0;
}

// ------------------------------------------------------------- evaluate ----

struct EvalOpts {
    std::string fake;
    std::string real;
    std::string out = "metric_report.json";
    std::string extractor = "pixel8";
    std::uint64_t extractor_seed = 0;
    int extractor_dim = 0;
};

int cmd_evaluate(const EvalOpts& o) {
    const FeatureExtractor ex = parse_extractor(o.extractor, o.extractor_seed, o.extractor_dim);
    const auto fake_names = png_names(o.fake);
    const auto real_names = png_names(o.real);
    {
        std::set<std::string> fset(fake_names.begin(), fake_names.end());
        std::set<std::string> rset(real_names.begin(), real_names.end());
        for (const auto& n : fake_names)
            if (!rset.count(n))
                throw DataError("evaluate: " + n + " present in " + o.fake + " but missing from " +
                                o.real);
        for (const auto& n : real_names)
            if (!fset.count(n))
                throw DataError("evaluate: " + n + " present in " + o.real + " but missing from " +
                                o.fake);
    }
    if (fake_names.empty()) throw DataError("evaluate: no .png files in " + o.fake);

    std::vector<ImageU8> fakes, reals;
    fakes.reserve(fake_names.size());
    reals.reserve(fake_names.size());
    for (const auto& n : fake_names) {
        fakes.push_back(read_png(fs::path(o.fake) / n));
        reals.push_back(read_png(fs::path(o.real) / n));
    }
    std::vector<std::pair<const ImageU8*, const ImageU8*>> pairs;
    pairs.reserve(fakes.size());
    for (std::size_t i = 0; i < fakes.size(); ++i) pairs.emplace_back(&fakes[i], &reals[i]);

    const MetricReport report = evaluate_pairs(pairs, ex);
    const std::string text = report.to_json();
    std::printf("%s\n", text.c_str());

    const fs::path out_path(o.out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path.string());
    out << text << "\n";

    json cfg;
    cfg["command"] = "evaluate";
    cfg["fake"] = o.fake;
    cfg["real"] = o.real;
    cfg["out"] = o.out;
    cfg["extractor"] = ex.describe();
    const fs::path cfg_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    write_json_file(cfg_dir / "effective_config.json", cfg);
    return 0;
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
    std::string out;
    SynthConfig cfg;
};

int cmd_synth(const SynthOpts& o) {
    const Dataset ds = synth_dataset(o.cfg);
    export_dataset(ds, o.out);

    json cfg;
    cfg["command"] = "synth";
    cfg["out"] = o.out;
    cfg["seed"] = o.cfg.seed;
    cfg["n"] = o.cfg.n_pairs;
    cfg["size"] = o.cfg.size;
    cfg["sar_channels"] = o.cfg.sar_channels;
    cfg["speckle"] = o.cfg.speckle;
    cfg["looks"] = o.cfg.looks;
    write_json_file(fs::path(o.out) / "effective_config.json", cfg);
    return 0;
}

void apply_desk_preset(const std::string& preset, CLI::Option* size_opt, CLI::Option* depth_opt,
                       CLI::Option* ngf_opt, CLI::Option* ndf_opt, NetConfig& net) {
    if (preset.empty()) return;
    if (preset != "desk") throw ConfigError("unknown preset '" + preset + "' (expected desk)");
    if (size_opt->count() == 0) net.size = 64;
    if (depth_opt->count() == 0) net.depth = 4;
    if (ngf_opt->count() == 0) net.ngf = 8;
    if (ndf_opt->count() == 0) net.ndf = 8;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Reciprocal SAR <-> optical image translation"};
    app.require_subcommand(1);

    TrainOpts train;
    std::string train_preset;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the reciprocal translation model");
    train_cmd->add_option("--data", train.data, "Dataset root containing A/ and B/");
    train_cmd->add_flag("--synth", train.synth, "Train on a generated synthetic dataset");
    train_cmd->add_option("--n", train.synth_pairs, "Synthetic pair count")
        ->capture_default_str();
    train_cmd->add_option("--speckle", train.speckle, "Apply speckle to synthetic SAR images")
        ->capture_default_str();
    train_cmd->add_option("--looks", train.looks, "Speckle looks")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();
    train_cmd->add_option("--steps", train.train.total_steps, "Total training steps")
        ->capture_default_str();
    train_cmd->add_option("--batch-size", train.train.batch_size, "Batch size")
        ->capture_default_str();
    train_cmd->add_option("--lr", train.train.learning_rate, "Learning rate")
        ->capture_default_str();
    train_cmd->add_option("--beta", train.train.beta, "L1 weight in the translator loss")
        ->capture_default_str();
    train_cmd->add_option("--adam-beta1", train.train.adam_beta1, "Adam beta1")
        ->capture_default_str();
    train_cmd->add_option("--adam-beta2", train.train.adam_beta2, "Adam beta2")
        ->capture_default_str();
    train_cmd->add_option("--adam-eps", train.train.adam_eps, "Adam epsilon")
        ->capture_default_str();
    train_cmd->add_option("--optimizer", train.optimizer, "adam or sgd")->capture_default_str();
    train_cmd->add_option("--seed", train.train.seed, "Seed for init, data order and synthesis")
        ->capture_default_str();
    CLI::Option* size_opt =
        train_cmd->add_option("--size", train.net.size, "Image size")->capture_default_str();
    CLI::Option* depth_opt =
        train_cmd->add_option("--depth", train.net.depth, "Encoder depth")->capture_default_str();
    CLI::Option* ngf_opt =
        train_cmd->add_option("--ngf", train.net.ngf, "Translator base width")->capture_default_str();
    CLI::Option* ndf_opt = train_cmd->add_option("--ndf", train.net.ndf, "Discriminator base width")
                               ->capture_default_str();
    train_cmd->add_option("--sar-channels", train.net.sar_channels, "SAR channels (1 or 3)")
        ->capture_default_str();
    train_cmd->add_option("--n-stride2", train.net.n_stride2, "Discriminator stride-2 layers")
        ->capture_default_str();
    train_cmd->add_option("--save-every", train.save_every, "Checkpoint every N steps (0 = at exit)")
        ->capture_default_str();
    train_cmd->add_option("--resume", train.resume, "Checkpoint to resume from");
    train_cmd->add_option("--preset", train_preset, "Configuration preset (desk)");

    TranslateOpts translate;
    CLI::App* translate_cmd = app.add_subcommand("translate", "Translate a directory of images");
    translate_cmd->add_option("--checkpoint", translate.checkpoint, "Trained checkpoint")
        ->required();
    translate_cmd->add_option("--in", translate.in, "Dataset root containing A/ (or B/ for o2s)")
        ->required();
    translate_cmd->add_option("--out", translate.out, "Directory for translated PNGs")->required();
    translate_cmd->add_option("--direction", translate.direction, "s2o or o2s")
        ->capture_default_str();

    EvalOpts evaluate;
    std::string eval_preset;
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Compare translated images to truth");
    evaluate_cmd->add_option("fake", evaluate.fake, "Directory of translated images")->required();
    evaluate_cmd->add_option("real", evaluate.real, "Directory of true images")->required();
    evaluate_cmd->add_option("--out", evaluate.out, "Report file")->capture_default_str();
    evaluate_cmd->add_option("--extractor", evaluate.extractor, "pixel8 or randconv")
        ->capture_default_str();
    evaluate_cmd->add_option("--extractor-seed", evaluate.extractor_seed, "Feature extractor seed")
        ->capture_default_str();
    evaluate_cmd->add_option("--extractor-dim", evaluate.extractor_dim,
                             "Feature dimension (randconv only)");
    evaluate_cmd->add_option("--preset", eval_preset, "Configuration preset (desk)");

    SynthOpts synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic co-registered dataset");
    synth_cmd->add_option("--out", synth.out, "Dataset root to create")->required();
    synth_cmd->add_option("--n", synth.cfg.n_pairs, "Number of pairs")->capture_default_str();
    synth_cmd->add_option("--seed", synth.cfg.seed, "Seed")->capture_default_str();
    synth_cmd->add_option("--size", synth.cfg.size, "Image size")->capture_default_str();
    synth_cmd->add_option("--sar-channels", synth.cfg.sar_channels, "SAR channels (1 or 3)")
        ->capture_default_str();
    synth_cmd->add_option("--speckle", synth.cfg.speckle, "Apply multiplicative speckle")
        ->capture_default_str();
    synth_cmd->add_option("--looks", synth.cfg.looks, "Speckle looks")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train_cmd->parsed()) {
            apply_desk_preset(train_preset, size_opt, depth_opt, ngf_opt, ndf_opt, train.net);
            return cmd_train(train);
        }
        if (translate_cmd->parsed()) return cmd_translate(translate);
        if (evaluate_cmd->parsed()) {
            if (!eval_preset.empty()) {
                if (eval_preset != "desk")
                    throw ConfigError("unknown preset '" + eval_preset + "' (expected desk)");
                if (evaluate_cmd->count("--extractor") == 0) evaluate.extractor = "pixel8";
            }
            return cmd_evaluate(evaluate);
        }
        if (synth_cmd->parsed()) return cmd_synth(synth);
        throw ConfigError("no command given");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace sogr
