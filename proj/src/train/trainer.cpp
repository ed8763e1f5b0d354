#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "pimnet/checkpoint.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/metrics.hpp"
#include "pimnet/ops.hpp"
#include "pimnet/rng.hpp"
#include "pimnet/train.hpp"

namespace pimnet::train {

namespace {

Tensor time_slice(const Tensor& t, std::size_t begin, std::size_t end)
{
    const std::size_t C = t.dim(0), N = t.dim(1), L = end - begin;
    Tensor out({C, L});
    for (std::size_t c = 0; c < C; ++c)
        std::copy_n(t.ptr() + c * N + begin, L, out.ptr() + c * L);
    return out;
}

void check_data(const models::ModelSpec& spec, const TrainData& data)
{
    if (data.x.rank() != 2 || data.z.rank() != 2 || data.x.dim(1) != data.z.dim(1))
        throw ShapeError("training data: x and z must be [C, N] on one time axis, got " + shape_str(data.x.shape()) +
                         " and " + shape_str(data.z.shape()));
    if (data.x.dim(0) != spec.input_channels() || data.z.dim(0) != spec.output_channels())
        throw ShapeError("training data: channel counts " + shape_str(data.x.shape()) + " / " +
                         shape_str(data.z.shape()) + " do not match the model (" +
                         std::to_string(spec.input_channels()) + " in, " + std::to_string(spec.output_channels()) +
                         " out)");
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

models::ModelParams copy_params(const models::ModelParams& src)
{
    models::ModelParams out;
    for (const auto& e : src.entries()) out.add(e.name, e.tensor.detached());
    return out;
}

} // namespace

std::string log_csv(const std::vector<LogRow>& rows)
{
    std::string out = "step,lr,loss,grad_norm,clip_scale,eval_depth_db\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step) + ',' + fmt(r.lr) + ',' + fmt(r.loss) + ',' + fmt(r.grad_norm) + ',' +
               fmt(r.clip_scale) + ',';
        if (r.eval_depth_db) out += fmt(*r.eval_depth_db);
        out += '\n';
    }
    return out;
}

TrainState initial_state(const models::ModelSpec& spec, std::uint64_t seed)
{
    TrainState s;
    s.params = models::build(spec, seed);
    s.opt = OptimizerState::for_params(s.params);
    s.best_params = copy_params(s.params);
    return s;
}

HoldoutLayout holdout_layout(std::size_t n_samples, const TrainConfig& cfg)
{
    if (cfg.val_blocks == 0) throw ConfigError("holdout: val_blocks must be >= 1");
    const std::size_t K = cfg.val_blocks;
    const std::size_t stride = n_samples / K;
    const auto held = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n_samples)));
    const std::size_t block = held / K;
    if (stride == 0 || block == 0)
        throw ConfigError("holdout: " + std::to_string(n_samples) + " samples cannot hold " + std::to_string(K) +
                          " validation blocks at val_fraction " + fmt(cfg.val_fraction));
    HoldoutLayout h;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t begin = k * stride;
        const std::size_t end = k + 1 == K ? n_samples : begin + stride;
        h.train.push_back({begin, end - block});
        h.validation.push_back({end - block, end});
    }
    return h;
}

std::vector<double> channel_loss_weights(const TrainData& data, const TrainConfig& cfg)
{
    const std::size_t rows = data.z.dim(0), N = data.z.dim(1);
    std::vector<double> w(rows, 1.0);
    if (!cfg.balance_channels || rows % 2 != 0) return w;
    const std::size_t R = rows / 2;
    std::vector<double> power(R, 0.0);
    std::size_t count = 0;
    for (const auto& g : holdout_layout(N, cfg).train) {
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t n = g.begin; n < g.end; ++n)
                power[r] += data.z.at(2 * r, n) * data.z.at(2 * r, n) + data.z.at(2 * r + 1, n) * data.z.at(2 * r + 1, n);
        count += g.length();
    }
    double mean = 0.0;
    for (double& p : power) mean += (p /= static_cast<double>(count)) / static_cast<double>(R);
    for (std::size_t r = 0; r < R; ++r)
        if (power[r] > 0.0 && std::isfinite(power[r])) w[2 * r] = w[2 * r + 1] = std::sqrt(mean / power[r]);
    return w;
}

ValidationResult validate_held_out(const models::ModelSpec& spec, const models::ModelParams& params,
                                   const TrainData& data, const TrainConfig& cfg)
{
    check_data(spec, data);
    const std::size_t rf = models::receptive_field(spec);
    const auto blocks = holdout_layout(data.x.dim(1), cfg).validation;
    const std::size_t C = data.z.dim(0);
    std::size_t scored = 0;
    for (const auto& b : blocks) {
        if (b.length() < rf)
            throw ConfigError("validation block of " + std::to_string(b.length()) +
                              " samples is shorter than the receptive field " + std::to_string(rf));
        scored += b.length() - rf + 1;
    }
    // Blocks are scored together so depth and mse cover every held-out sample.
    Tensor ref({C, scored}), pred({C, scored});
    std::size_t at = 0;
    for (const auto& b : blocks) {
        const Tensor p = models::predict(params, spec, time_slice(data.x, b.begin, b.end));
        const Tensor z = time_slice(data.z, b.begin + rf - 1, b.end);
        const std::size_t L = p.dim(1);
        for (std::size_t c = 0; c < C; ++c) {
            std::copy_n(p.ptr() + c * L, L, pred.ptr() + c * scored + at);
            std::copy_n(z.ptr() + c * L, L, ref.ptr() + c * scored + at);
        }
        at += L;
    }
    const auto w = channel_loss_weights(data, cfg);
    double se = 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < scored; ++i) {
            const double e = w[c] * (pred.at(c, i) - ref.at(c, i));
            se += e * e;
        }
    ValidationResult r;
    r.mse = se / static_cast<double>(pred.size());
    r.depth_db = eval::mean_depth(eval::cancellation_depth(ref, pred));
    return r;
}

void run_training(const models::ModelSpec& spec, TrainState& state, const TrainData& data, const TrainConfig& cfg,
                  std::vector<LogRow>& log, const TrainOptions& opts)
{
    spec.validate();
    check_data(spec, data);
    const std::size_t rf = models::receptive_field(spec);
    cfg.validate(rf);
    const std::size_t W = cfg.window_len, B = cfg.batch_windows;
    // Window starts are numbered across the training gaps; gaps shorter than W contribute none.
    std::vector<std::pair<std::size_t, std::size_t>> gaps;  // (first start, cumulative start count)
    std::size_t n_starts = 0;
    for (const auto& g : holdout_layout(data.x.dim(1), cfg).train)
        if (g.length() >= W) {
            n_starts += g.length() - W + 1;
            gaps.emplace_back(g.begin, n_starts);
        }
    if (n_starts == 0)
        throw ConfigError("no training gap between validation blocks fits window_len " + std::to_string(W));
    auto window_start = [&](std::size_t u) {
        std::size_t prev = 0;
        for (const auto& [begin, cum] : gaps) {
            if (u < cum) return begin + (u - prev);
            prev = cum;
        }
        throw std::logic_error("window index out of range");
    };
    if (state.opt.m.size() != state.params.size()) state.opt = OptimizerState::for_params(state.params);
    if (state.best_params.size() != state.params.size()) state.best_params = copy_params(state.params);

    // Loss weights broadcast over a window's scored samples.
    const auto weights = channel_loss_weights(data, cfg);
    const std::size_t out_len = W - rf + 1;
    Tensor weight_grid({data.z.dim(0), out_len});
    for (std::size_t c = 0; c < weight_grid.dim(0); ++c)
        for (std::size_t i = 0; i < out_len; ++i) weight_grid.at(c, i) = weights[c];
    const bool weighted = std::any_of(weights.begin(), weights.end(), [](double v) { return v != 1.0; });

    const AdamConfig adam{cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay};
    const std::size_t last = std::min(cfg.steps, opts.stop_at.value_or(cfg.steps));
    state.params.set_requires_grad(true);

    auto checkpoint = [&] {
        if (opts.checkpoint_dir.empty()) return;
        std::filesystem::create_directories(opts.checkpoint_dir);
        const std::filesystem::path dir(opts.checkpoint_dir);
        save_train_checkpoint((dir / "checkpoint.pimm").string(), spec, state);
        models::save_checkpoint((dir / "best.pimm").string(), spec, state.best_params);
    };

    while (state.step < last) {
        const std::size_t step = state.step;
        Rng rng(derive_seed(cfg.seed, step));
        state.params.zero_grad();

        ad::Tape tape;
        std::vector<ad::Var> losses;
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t start = window_start(rng.below(n_starts));
            const ad::Var x = tape.constant(time_slice(data.x, start, start + W));
            ad::Var y = models::forward(tape, state.params, spec, x);
            Tensor target = time_slice(data.z, start + rf - 1, start + W);
            if (weighted) {
                y = ad::mul(y, tape.constant_ref(weight_grid));
                for (std::size_t i = 0; i < target.size(); ++i) target[i] *= weight_grid[i];
            }
            losses.push_back(truncated_mse(y, target, cfg.truncate_margin));
        }
        ad::Var total = losses[0];
        for (std::size_t b = 1; b < B; ++b) total = ad::add(total, losses[b]);
        const ad::Var loss = ad::scale(total, 1.0 / static_cast<double>(B));
        const double loss_value = loss.value().item();
        if (!std::isfinite(loss_value))
            throw TrainingAborted("non-finite loss at step " + std::to_string(step));
        tape.backward(loss);
        if (!state.params.all_finite())
            throw TrainingAborted("non-finite parameters at step " + std::to_string(step));

        const ClipResult clip = clip_gradients(state.params, cfg.clip_tau);
        const double lr = clr_lr(step, cfg);
        try {
            adam_step(state.params, state.opt, lr, adam, "step " + std::to_string(step));
        } catch (const NumericError& e) {
            throw TrainingAborted(e.what());
        }
        ++state.step;

        LogRow row{step, lr, loss_value, clip.norm, clip.scale, std::nullopt};
        if (state.step % cfg.eval_every == 0 || state.step == last) {
            const ValidationResult v = validate_held_out(spec, state.params, data, cfg);
            row.eval_depth_db = v.depth_db;
            if (v.mse < state.best_val_mse) {
                state.best_val_mse = v.mse;
                state.best_params = copy_params(state.params);
            }
            checkpoint();
        }
        log.push_back(row);
        if (opts.on_log) opts.on_log(row);
    }
    state.params.set_requires_grad(false);
}

void save_train_checkpoint(const std::string& path, const models::ModelSpec& spec, const TrainState& state)
{
    models::CheckpointAppendix app;
    nlohmann::json meta{{"step", state.step}, {"t", state.opt.t}};
    if (std::isfinite(state.best_val_mse))
        meta["best_val_mse"] = state.best_val_mse;
    else
        meta["best_val_mse"] = nullptr;
    app.meta_json = meta.dump();
    const auto& entries = state.params.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Shape& shape = entries[i].tensor.shape();
        app.tensors.push_back({"m." + entries[i].name, Tensor(shape, state.opt.m[i])});
        app.tensors.push_back({"v." + entries[i].name, Tensor(shape, state.opt.v[i])});
    }
    for (const auto& e : state.best_params.entries()) app.tensors.push_back({"best." + e.name, e.tensor.detached()});
    models::save_checkpoint(path, spec, state.params, &app);
}

TrainState load_train_checkpoint(const std::string& path, models::ModelSpec* spec)
{
    models::Checkpoint ck = models::load_checkpoint(path);
    if (!ck.appendix) throw IoError(path + ": checkpoint has no optimizer state and cannot be resumed");
    TrainState s;
    s.params = std::move(ck.params);
    s.opt = OptimizerState::for_params(s.params);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ck.appendix->meta_json);
        s.step = meta.at("step").get<std::size_t>();
        s.opt.t = meta.at("t").get<std::uint64_t>();
        const auto& b = meta.at("best_val_mse");
        s.best_val_mse = b.is_null() ? std::numeric_limits<double>::infinity() : b.get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed optimizer metadata: " + e.what());
    }
    std::map<std::string, const Tensor*> extra;
    for (const auto& t : ck.appendix->tensors) extra[t.name] = &t.tensor;
    auto find = [&](const std::string& name, const Shape& shape) -> const Tensor& {
        auto it = extra.find(name);
        if (it == extra.end()) throw IoError(path + ": optimizer tensor '" + name + "' missing");
        if (it->second->shape() != shape)
            throw IoError(path + ": optimizer tensor '" + name + "' has shape " + shape_str(it->second->shape()) +
                          ", expected " + shape_str(shape));
        return *it->second;
    };
    const auto& entries = s.params.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Shape& shape = entries[i].tensor.shape();
        const auto m = find("m." + entries[i].name, shape).data();
        const auto v = find("v." + entries[i].name, shape).data();
        s.opt.m[i].assign(m.begin(), m.end());
        s.opt.v[i].assign(v.begin(), v.end());
        s.best_params.add(entries[i].name, find("best." + entries[i].name, shape).detached());
    }
    if (spec) *spec = ck.spec;
    return s;
}

} // namespace pimnet::train
