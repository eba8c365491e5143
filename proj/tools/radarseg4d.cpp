// radarseg4d: synthesize, compile, train, evaluate, predict and render radar heatmap segmentation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "radarseg4d/config.hpp"
#include "radarseg4d/dataset.hpp"
#include "radarseg4d/image_io.hpp"
#include "radarseg4d/network.hpp"
#include "radarseg4d/pointcloud.hpp"
#include "radarseg4d/synthetic.hpp"
#include "radarseg4d/trainer.hpp"

namespace fs = std::filesystem;
using namespace radarseg4d;

namespace {

/// Bad user input; exits with status 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string dataset, config, out, checkpoint, split, frame, raw, predictions, dump;
    std::optional<std::uint64_t> seed;
    long long frames = -1;
};

AppConfig app_config(const Options& o) {
    if (o.config.empty()) {
        AppConfig c;
        c.dataset.validate();
        return c;
    }
    if (!fs::is_regular_file(o.config)) throw InputError("config file not found: " + o.config);
    return load_app_config(o.config);
}

CompiledDataset open_dataset(const Options& o) {
    if (o.dataset.empty()) throw InputError("--dataset is required");
    if (!fs::is_regular_file(fs::path(o.dataset) / "config.json")) {
        throw InputError("not a compiled dataset: " + o.dataset);
    }
    return CompiledDataset::open(o.dataset);
}

Split split_of(const Options& o, Split fallback) {
    if (o.split.empty()) return fallback;
    const auto s = parse_split(o.split);
    if (!s) throw InputError("unknown split '" + o.split + "' (train, val, test)");
    return *s;
}

Tmva4d<float> load_model(const Options& o, const AppConfig* cfg) {
    if (o.checkpoint.empty()) throw InputError("--checkpoint is required");
    if (!fs::is_regular_file(o.checkpoint)) throw InputError("checkpoint not found: " + o.checkpoint);
    const NetworkConfig net = read_checkpoint_config(o.checkpoint);
    if (cfg && cfg->has_network && !(cfg->network == net)) {
        throw CheckpointError("checkpoint config does not match the network section of " + o.config);
    }
    Tmva4d<float> model(net, 0);
    load_checkpoint(o.checkpoint, model);
    return model;
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void print_summary(const CompileSummary& s) {
    std::printf("sequences %zu (excluded %zu), frames %zu, person-pixel fraction %.6f, non-empty masks %.4f\n",
                s.sequences, s.excluded_sequences, s.frames, s.stats.person_fraction(), s.stats.nonempty_fraction());
    for (const auto& f : s.failures) std::fprintf(stderr, "skipped: %s\n", f.c_str());
}

int cmd_synth(const Options& o) {
    if (o.frames <= 0) throw InputError("frame count must be positive");
    if (o.out.empty()) throw InputError("--out is required");
    AppConfig cfg = app_config(o);
    if (o.seed) {
        cfg.synth.seed = *o.seed;
        cfg.dataset.split_seed = *o.seed;
    }
    cfg.dataset.synth = cfg.synth;
    const auto raw = synthesize_raw(cfg.synth, cfg.dataset.fov, cfg.dataset.bins, static_cast<std::size_t>(o.frames));
    if (!o.raw.empty()) write_raw_directory(raw, o.raw);
    const CompileSummary s = compile_dataset(raw, cfg.dataset, o.out);
    print_summary(s);
    std::printf("implied person-pixel fraction %.6f\n",
                implied_person_fraction(cfg.synth, cfg.dataset.fov, cfg.dataset.bins));
    return 0;
}

int cmd_compile(const Options& o) {
    if (o.raw.empty() || !fs::is_directory(o.raw)) throw InputError("--raw must name a raw recording directory");
    if (o.out.empty()) throw InputError("--out is required");
    AppConfig cfg = app_config(o);
    if (o.seed) cfg.dataset.split_seed = *o.seed;
    print_summary(compile_dataset(fs::path(o.raw), cfg.dataset, o.out));
    return 0;
}

int cmd_stats(const Options& o) {
    const CompiledDataset ds = open_dataset(o);
    nlohmann::ordered_json j;
    nlohmann::ordered_json splits = nlohmann::ordered_json::object();
    for (Split s : kAllSplits) {
        std::size_t seqs = 0, frames = 0;
        for (const auto& rec : ds.sequences()) {
            if (rec.split != s) continue;
            ++seqs;
            frames += rec.frames.size();
        }
        splits[std::string(split_name(s))] = {{"sequences", seqs}, {"frames", frames}};
    }
    j["splits"] = splits;
    const DatasetStats& st = ds.stats();
    j["masks"] = st.masks;
    j["person_fraction"] = st.person_fraction();
    j["nonempty_fraction"] = st.nonempty_fraction();
    const ClassWeights w = class_weights(ds.masks(Split::Train));
    j["train_class_weights"] = {{"background", w.background}, {"person", w.person}};
    nlohmann::ordered_json norm = nlohmann::ordered_json::object();
    for (ViewId v : kAllViews) {
        norm[std::string(view_name(v))] = {{"min", ds.norm_stats()[v].min}, {"max", ds.norm_stats()[v].max}};
    }
    j["normalization"] = norm;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_train(const Options& o) {
    if (o.out.empty()) throw InputError("--out is required");
    const CompiledDataset ds = open_dataset(o);
    AppConfig cfg = app_config(o);
    if (o.seed) cfg.train.seed = *o.seed;
    const TrainResult r = train(ds, cfg.network, cfg.train, o.out);
    std::printf("steps %zu, evaluations %zu, best val mean Dice %.6f\n", r.steps, r.evaluations.size(),
                r.best_mean_dice);
    std::printf("log %s\nbest checkpoint %s\n", r.log_path.c_str(), r.best_checkpoint.c_str());
    return 0;
}

int cmd_eval(const Options& o) {
    const CompiledDataset ds = open_dataset(o);
    const Split split = split_of(o, Split::Test);
    MetricsReport rep;
    if (!o.predictions.empty()) {
        if (!fs::is_directory(o.predictions)) throw InputError("predictions directory not found: " + o.predictions);
        std::size_t frames = o.frames > 0 ? static_cast<std::size_t>(o.frames) : 5;
        if (!o.checkpoint.empty()) frames = load_model(o, nullptr).config().window;
        rep = evaluate_prediction_pngs(ds, split, frames, o.predictions);
    } else {
        const AppConfig cfg = app_config(o);
        Tmva4d<float> model = load_model(o, &cfg);
        EvalOptions opts;
        opts.split = split;
        if (!o.dump.empty()) opts.dump_per_frame = o.dump;
        rep = evaluate(model, ds, opts, class_weights(ds.masks(Split::Train)));
    }
    const auto j = rep.to_json();
    if (!o.out.empty()) write_json_file(o.out, j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_predict(const Options& o) {
    if (o.out.empty()) throw InputError("--out is required");
    const CompiledDataset ds = open_dataset(o);
    const AppConfig cfg = app_config(o);
    Tmva4d<float> model = load_model(o, &cfg);
    if (!o.frame.empty() && !ds.find_frame(o.frame)) throw InputError("frame not found: " + o.frame);
    const std::optional<std::string> frame = o.frame.empty() ? std::nullopt : std::optional<std::string>(o.frame);
    const std::size_t n = predict(model, ds, split_of(o, Split::Test), frame, o.out);
    std::printf("wrote %zu masks to %s\n", n, o.out.c_str());
    return 0;
}

int cmd_render(const Options& o) {
    if (o.out.empty()) throw InputError("--out is required");
    if (o.frame.empty()) throw InputError("--frame <sequence>/<frame_id> is required");
    const CompiledDataset ds = open_dataset(o);
    const auto found = ds.find_frame(o.frame);
    if (!found) throw InputError("frame not found: " + o.frame);
    const auto [s, f] = *found;
    const auto& seq = ds.sequences()[s];
    const std::string stem = seq.name + "_" + seq.frames[f].frame_id;
    fs::create_directories(o.out);
    for (ViewId v : kAllViews) {
        const Matrix m = normalize(ds.load_heatmap(s, f, v), ds.norm_stats()[v]);
        write_png_rgb(fs::path(o.out) / (stem + "_" + std::string(view_name(v)) + ".png"), m.dim(1), m.dim(0),
                      colorize(m));
    }
    const Mask gt = ds.load_mask(s, f);
    write_png_rgb(fs::path(o.out) / (stem + "_gt.png"), gt.dim(1), gt.dim(0), colorize_mask(gt));
    if (!o.checkpoint.empty()) {
        const AppConfig cfg = app_config(o);
        Tmva4d<float> model = load_model(o, &cfg);
        const std::size_t T = model.config().window;
        if (f + 1 < T) throw InputError("frame " + o.frame + " has too few preceding frames for a prediction");
        const Window w = ds.load_window(s, f, T);
        const Mask pred = argmax_classes(model.forward(w.views));
        write_png_rgb(fs::path(o.out) / (stem + "_pred.png"), pred.dim(1), pred.dim(0), colorize_mask(pred));
    }
    std::printf("rendered %s into %s\n", o.frame.c_str(), o.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"4D radar heatmap segmentation pipeline"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;

    auto add_seed = [&](CLI::App* c) { return c->add_option("--seed", seed, "random seed"); };
    auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "JSON config file"); };
    auto add_dataset = [&](CLI::App* c) { c->add_option("--dataset", o.dataset, "compiled dataset directory"); };

    auto* synth = app.add_subcommand("synth", "generate and compile a synthetic dataset");
    synth->add_option("--frames", o.frames, "number of frames")->required();
    synth->add_option("--out", o.out, "output dataset directory")->required();
    synth->add_option("--raw", o.raw, "also write the raw point clouds and masks here");
    add_seed(synth);
    add_config(synth);

    auto* compile = app.add_subcommand("compile", "compile raw recordings into heatmaps");
    compile->add_option("--raw", o.raw, "raw recording directory")->required();
    compile->add_option("--out", o.out, "output dataset directory")->required();
    add_seed(compile);
    add_config(compile);

    auto* stats = app.add_subcommand("stats", "print dataset statistics");
    add_dataset(stats);

    auto* trn = app.add_subcommand("train", "train a model");
    add_dataset(trn);
    add_config(trn);
    add_seed(trn);
    trn->add_option("--out", o.out, "run directory")->required();

    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint or prediction masks");
    add_dataset(evl);
    add_config(evl);
    evl->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    evl->add_option("--split", o.split, "train, val or test (default test)");
    evl->add_option("--out", o.out, "write the report JSON here");
    evl->add_option("--predictions", o.predictions, "evaluate PNG masks from this directory");
    evl->add_option("--frames", o.frames, "window length when evaluating PNG masks without a checkpoint");
    evl->add_option("--dump", o.dump, "per-frame JSONL output");

    auto* pred = app.add_subcommand("predict", "write predicted masks as PNG");
    add_dataset(pred);
    add_config(pred);
    pred->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    pred->add_option("--split", o.split, "train, val or test (default test)");
    pred->add_option("--frame", o.frame, "single frame <sequence>/<frame_id>");
    pred->add_option("--out", o.out, "output directory")->required();

    auto* render = app.add_subcommand("render", "render heatmaps and masks of one frame");
    add_dataset(render);
    add_config(render);
    render->add_option("--frame", o.frame, "<sequence>/<frame_id>")->required();
    render->add_option("--checkpoint", o.checkpoint, "also render the predicted mask");
    render->add_option("--out", o.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (auto* c : {synth, compile, trn}) {
        if (c->parsed() && c->count("--seed")) o.seed = seed;
    }

    try {
        if (synth->parsed()) return cmd_synth(o);
        if (compile->parsed()) return cmd_compile(o);
        if (stats->parsed()) return cmd_stats(o);
        if (trn->parsed()) return cmd_train(o);
        if (evl->parsed()) return cmd_eval(o);
        if (pred->parsed()) return cmd_predict(o);
        if (render->parsed()) return cmd_render(o);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const PcdError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 2;
}
