#include "radarseg4d/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "radarseg4d/image_io.hpp"

namespace fs = std::filesystem;

namespace radarseg4d {

void Hyperparams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("hyperparameters: " + what); };
    if (frames == 0) fail("frames must be positive");
    if (batch_size == 0) fail("batch size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
    if (lr_step_epochs == 0) fail("lr step must be positive");
    if (!(lr_decay > 0.0) || lr_decay > 1.0) fail("lr decay must be in (0, 1]");
    if (loss.wce < 0.0 || loss.sdice < 0.0) fail("loss weights must be non-negative");
    if (!parse_split(val_split)) fail("unknown validation split '" + val_split + "'");
}

double lr_schedule(std::size_t epoch, const Hyperparams& hp) {
    return hp.learning_rate * std::pow(hp.lr_decay, static_cast<double>(epoch / hp.lr_step_epochs));
}

void adam_step(ParameterStore<float>& params, AdamState& state, double lr) {
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), {});
        state.v.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].value.size(), 0.0);
            state.v[i].assign(params[i].value.size(), 0.0);
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (float g : params[i].grad.values()) {
            if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in parameter " + params[i].name);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / c1, vhat = v[j] / c2;
            p.value[j] = static_cast<float>(p.value[j] - lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

namespace {

std::string frame_key(const CompiledDataset& ds, std::size_t s, std::size_t f) {
    return ds.sequences()[s].name + "/" + ds.sequences()[s].frames[f].frame_id;
}

void check_files(const CompiledDataset& ds, const std::vector<WindowRef>& refs, std::size_t frames) {
    std::vector<std::string> missing;
    std::map<std::pair<std::size_t, std::size_t>, bool> seen;
    for (const auto& r : refs) {
        for (std::size_t f = r.t + 1 - frames; f <= r.t; ++f) {
            if (seen.count({r.sequence, f})) continue;
            bool ok = fs::exists(ds.mask_path(r.sequence, f)) || f != r.t;
            for (ViewId v : kAllViews) ok = ok && fs::exists(ds.heatmap_path(r.sequence, f, v));
            seen[{r.sequence, f}] = ok;
            if (!ok) missing.push_back(frame_key(ds, r.sequence, f));
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing files for frames:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }
}

Sample to_sample(Window w) {
    return {std::move(w.sequence), std::move(w.frame_id), std::move(w.views), std::move(w.mask)};
}

}  // namespace

MetricsReport evaluate(Tmva4d<float>& model, const CompiledDataset& ds, const EvalOptions& opts,
                       const ClassWeights& weights) {
    const std::size_t T = model.config().window;
    const auto refs = ds.windows(opts.split, T);
    check_files(ds, refs, T);
    const std::array<double, 2> w{weights.background, weights.person};
    MetricsAccumulator acc(model.config().classes);
    std::ofstream dump;
    if (opts.dump_per_frame) {
        if (opts.dump_per_frame->has_parent_path()) fs::create_directories(opts.dump_per_frame->parent_path());
        dump.open(*opts.dump_per_frame);
        if (!dump) throw std::runtime_error("cannot write " + opts.dump_per_frame->string());
    }
    for (const auto& r : refs) {
        Sample s = to_sample(ds.load_window(r, T));
        const Tensor<float> probs = model.forward(s.views);
        const Mask pred = argmax_classes(probs);
        const Scores fs = acc.add(pred, s.mask);
        if (model.config().classes == 2) acc.add_loss(combined_loss(probs, s.mask, w));
        if (dump) {
            SegmentationCounts c(model.config().classes);
            c.add(pred, s.mask);
            nlohmann::ordered_json rec = {{"sequence", s.sequence}, {"frame_id", s.frame_id}};
            nlohmann::ordered_json counts = nlohmann::ordered_json::object();
            for (std::size_t k = 0; k < c.classes.size(); ++k) {
                counts[class_name(k, c.classes.size())] = {{"intersection", c.classes[k].intersection},
                                                           {"predicted", c.classes[k].predicted},
                                                           {"truth", c.classes[k].truth}};
            }
            rec["counts"] = counts;
            rec["scores"] = scores_to_json(fs);
            dump << rec.dump() << '\n';
        }
    }
    return acc.finish();
}

MetricsReport evaluate_prediction_pngs(const CompiledDataset& ds, Split split, std::size_t frames,
                                       const fs::path& pred_dir) {
    const auto refs = ds.windows(split, frames);
    std::vector<std::string> missing;
    for (const auto& r : refs) {
        const auto& seq = ds.sequences()[r.sequence];
        if (!fs::exists(pred_dir / seq.name / (seq.frames[r.t].frame_id + ".png"))) {
            missing.push_back(frame_key(ds, r.sequence, r.t));
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing prediction masks for frames:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }
    MetricsAccumulator acc(2);
    for (const auto& r : refs) {
        const auto& seq = ds.sequences()[r.sequence];
        acc.add(read_mask_png(pred_dir / seq.name / (seq.frames[r.t].frame_id + ".png")),
                ds.load_mask(r.sequence, r.t));
    }
    return acc.finish();
}

std::size_t predict(Tmva4d<float>& model, const CompiledDataset& ds, Split split,
                    const std::optional<std::string>& frame, const fs::path& out_dir) {
    const std::size_t T = model.config().window;
    std::vector<WindowRef> refs;
    if (frame) {
        const auto found = ds.find_frame(*frame);
        if (!found) throw std::invalid_argument("frame not found: " + *frame);
        if (found->second + 1 < T) {
            throw std::invalid_argument("frame " + *frame + " has fewer than " + std::to_string(T - 1) +
                                        " preceding frames");
        }
        refs.push_back({found->first, found->second});
    } else {
        refs = ds.windows(split, T);
    }
    check_files(ds, refs, T);
    for (const auto& r : refs) {
        Sample s = to_sample(ds.load_window(r, T));
        const Mask pred = argmax_classes(model.forward(s.views));
        const fs::path dir = out_dir / s.sequence;
        fs::create_directories(dir);
        write_mask_png(dir / (s.frame_id + ".png"), pred);
    }
    return refs.size();
}

// ---------------------------------------------------------------------------

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

constexpr std::size_t kWindowCacheBytes = std::size_t{1} << 29;

}  // namespace

TrainResult train(const CompiledDataset& ds, const NetworkConfig& net, const Hyperparams& hp, const fs::path& out_dir,
                  const EvalCallback& on_eval) {
    hp.validate();
    net.validate();
    if (net.window != hp.frames) {
        throw std::invalid_argument("network window (" + std::to_string(net.window) + ") differs from frames (" +
                                    std::to_string(hp.frames) + ")");
    }
    if (net.classes != 2) throw std::invalid_argument("training needs a two-class network");
    const Split val_split = *parse_split(hp.val_split);
    const auto train_refs = ds.windows(Split::Train, hp.frames);
    const auto val_refs = ds.windows(val_split, hp.frames);
    if (train_refs.empty()) throw std::invalid_argument("train split has no windows of " + std::to_string(hp.frames) + " frames");
    if (val_refs.empty()) {
        throw std::invalid_argument(hp.val_split + " split has no windows of " + std::to_string(hp.frames) + " frames");
    }
    if (hp.epochs > 0 && train_refs.size() < hp.batch_size) {
        throw std::invalid_argument("train split has " + std::to_string(train_refs.size()) +
                                    " windows, fewer than one batch of " + std::to_string(hp.batch_size));
    }
    check_files(ds, train_refs, hp.frames);
    check_files(ds, val_refs, hp.frames);

    const ClassWeights cw = class_weights(ds.masks(Split::Train));
    const std::array<double, 2> weights{cw.background, cw.person};

    fs::create_directories(out_dir);
    TrainResult result;
    result.log_path = out_dir / "train_log.jsonl";
    result.best_checkpoint = out_dir / "best.ckpt";
    std::ofstream log(result.log_path);
    if (!log) throw std::runtime_error("cannot write " + result.log_path.string());

    Tmva4d<float> model(net, hp.seed);
    AdamState adam;
    write_file(result.best_checkpoint, serialize_checkpoint(model));

    std::size_t window_bytes = 0;
    for (ViewId v : kAllViews) window_bytes += hp.frames * net.input_dims(v).rows * net.input_dims(v).cols * 4;
    const bool cache = window_bytes * train_refs.size() <= kWindowCacheBytes;
    std::vector<std::optional<Window>> cached(cache ? train_refs.size() : 0);

    std::mt19937_64 order_rng(hp.seed ^ 0x5eedULL);
    std::mt19937_64 aug_rng(hp.seed ^ 0xf11bULL);
    const double inv_batch = 1.0 / static_cast<double>(hp.batch_size);
    const std::size_t batches = train_refs.size() / hp.batch_size;
    std::size_t eval_count = 0;
    bool stop = false;

    auto run_eval = [&](std::size_t epoch) {
        const MetricsReport rep = evaluate(model, ds, {val_split, std::nullopt}, cw);
        EvalRecord rec{eval_count++, epoch, result.steps, rep.aggregate};
        nlohmann::ordered_json j = {{"eval", rec.index}, {"epoch", epoch}, {"step", result.steps}};
        const auto sj = scores_to_json(rep.aggregate);
        j["mean_iou"] = sj["mean_iou"];
        j["mean_dice"] = sj["mean_dice"];
        j["per_class"] = sj["per_class"];
        if (rep.has_loss) j["loss_total"] = rep.loss.total;
        log << j.dump() << '\n';
        if (!result.best_eval || rep.aggregate.mean_dice > result.best_mean_dice) {
            result.best_eval = result.evaluations.size();
            result.best_mean_dice = rep.aggregate.mean_dice;
            write_file(result.best_checkpoint, serialize_checkpoint(model));
        }
        result.evaluations.push_back(rec);
        if (on_eval && !on_eval(rec)) stop = true;
    };

    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_schedule(epoch, hp);
        std::vector<std::size_t> order(train_refs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            model.zero_grad();
            LossComponents batch_loss;
            for (std::size_t i = 0; i < hp.batch_size; ++i) {
                const std::size_t idx = order[b * hp.batch_size + i];
                Window w;
                if (cache) {
                    if (!cached[idx]) cached[idx] = ds.load_window(train_refs[idx], hp.frames);
                    w = *cached[idx];
                } else {
                    w = ds.load_window(train_refs[idx], hp.frames);
                }
                if (hp.augment) augment_flip(w.views, w.mask, aug_rng);
                const Tensor<float> probs = model.forward(w.views);
                Tensor<float> grad;
                const LossComponents l = combined_loss(probs, w.mask, weights, hp.loss, &grad, inv_batch);
                model.backward(grad);
                batch_loss.wce += l.wce * inv_batch;
                batch_loss.sdice += l.sdice * inv_batch;
                batch_loss.total += l.total * inv_batch;
            }
            adam_step(model.params(), adam, lr);
            ++result.steps;
            epoch_loss += batch_loss.total;
            ++done;
            log << nlohmann::ordered_json{{"step", result.steps},
                                          {"epoch", epoch},
                                          {"lr", lr},
                                          {"loss_total", batch_loss.total},
                                          {"loss_wce", batch_loss.wce},
                                          {"loss_sdice", batch_loss.sdice}}
                       .dump()
                << '\n';
            if (hp.eval_interval_steps > 0 && result.steps % hp.eval_interval_steps == 0) run_eval(epoch);
            if (stop) break;
        }
        result.epoch_losses.push_back(done ? epoch_loss / static_cast<double>(done) : 0.0);
        if (hp.eval_interval_steps == 0) run_eval(epoch);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::clog << "epoch " << epoch << " loss " << result.epoch_losses.back() << " best val mDice "
                  << result.best_mean_dice << " (" << secs << " s)\n";
        if (stop) break;
    }
    write_file(out_dir / "last.ckpt", serialize_checkpoint(model));
    return result;
}

}  // namespace radarseg4d
