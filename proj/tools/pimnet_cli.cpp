#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "pimnet/checkpoint.hpp"
#include "pimnet/dataset.hpp"
#include "pimnet/detail/binary.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/eval.hpp"
#include "pimnet/presets.hpp"
#include "pimnet/train.hpp"

namespace fs = std::filesystem;
using namespace pimnet;

namespace {

struct Options {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string starts;
    std::string lengths;
    std::size_t channel = 0;
    std::string data;
    std::string model;
    bool resume = false;
};

KeyValueConfig load_config(const Options& o)
{
    KeyValueConfig cfg = o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
    std::set<std::string> known{"preset"};
    for (const auto* keys : {&sim::scenario_config_keys(), &sim::dataset_config_keys(), &train::train_config_keys()})
        known.insert(keys->begin(), keys->end());
    cfg.reject_unknown(known);
    return cfg;
}

std::string preset_name(const Options& o, const KeyValueConfig& cfg)
{
    if (!o.preset.empty()) return o.preset;
    return cfg.get_string("preset", "paper-light");
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_file(path.string(), text);
    std::cout << "wrote " << path.string() << "\n";
}

sim::Dataset dataset_for(const Options& o, const KeyValueConfig& cfg)
{
    if (!o.data.empty()) return sim::load_dataset(o.data);
    sim::DatasetSpec spec = sim::dataset_spec_from_config(cfg);
    if (o.seed) spec.seed = *o.seed;
    return sim::synthesize(spec);
}

struct LoadedModel {
    models::ModelSpec spec;
    models::ModelParams params;
};

/// Trained weights from --model, otherwise a freshly initialised preset.
LoadedModel model_for(const Options& o, const KeyValueConfig& cfg, const sim::Dataset& data)
{
    if (!o.model.empty()) {
        models::Checkpoint ck = models::load_checkpoint(o.model);
        return {ck.spec, std::move(ck.params)};
    }
    const auto spec =
        models::preset_spec(preset_name(o, cfg), data.spec.scenario.tx_antennas, data.spec.scenario.rx_antennas);
    return {spec, models::build(spec, o.seed.value_or(1))};
}

void check_channels(const LoadedModel& m, const sim::Dataset& d)
{
    if (m.spec.tx_antennas != d.train.tx.antennas || m.spec.rx_antennas != d.train.pim.antennas)
        throw ConfigError("model is " + std::to_string(m.spec.tx_antennas) + "x" + std::to_string(m.spec.rx_antennas) +
                          " but the data is " + std::to_string(d.train.tx.antennas) + "x" +
                          std::to_string(d.train.pim.antennas));
}

int cmd_generate(const Options& o)
{
    const auto cfg = load_config(o);
    sim::DatasetSpec spec = sim::dataset_spec_from_config(cfg);
    if (o.seed) spec.seed = *o.seed;
    const auto files = sim::make_dataset(spec, o.out);
    for (const auto& p : {files.train_tx, files.train_pim, files.test_tx, files.test_pim, files.train_manifest,
                          files.test_manifest})
        std::cout << "wrote " << p << "\n";
    return 0;
}

int cmd_train(const Options& o)
{
    const auto cfg = load_config(o);
    train::TrainConfig tc = train::train_config_from(cfg);
    if (o.seed) tc.seed = *o.seed;
    const sim::Dataset data = dataset_for(o, cfg);
    const fs::path out(o.out);
    fs::create_directories(out);

    models::ModelSpec spec;
    train::TrainState state;
    std::vector<train::LogRow> log;
    const fs::path ckpt = out / "checkpoint.pimm";
    if (o.resume) {
        state = train::load_train_checkpoint(ckpt.string(), &spec);
        std::cout << "resuming " << ckpt.string() << " at step " << state.step << "\n";
    } else {
        spec = models::preset_spec(preset_name(o, cfg), data.spec.scenario.tx_antennas,
                                   data.spec.scenario.rx_antennas);
        state = train::initial_state(spec, tc.seed);
    }
    check_channels({spec, {}}, data);
    std::cout << "model " << models::param_count(spec) << " parameters, receptive field "
              << models::receptive_field(spec) << "\n";

    const train::TrainData td{data.train.tx.to_channels(), data.train.pim.to_channels()};
    train::TrainOptions opts;
    opts.checkpoint_dir = out.string();
    opts.on_log = [](const train::LogRow& r) {
        if (r.eval_depth_db)
            std::printf("step %zu  lr %.3g  loss %.4g  validation depth %.2f dB\n", r.step + 1, r.lr, r.loss,
                        *r.eval_depth_db);
    };
    // Resumed runs append to the existing log.
    const fs::path metrics = out / "metrics.csv";
    std::string previous;
    if (o.resume && fs::exists(metrics)) {
        previous = detail::read_file(metrics.string());
    }
    train::run_training(spec, state, td, tc, log, opts);

    std::string csv = train::log_csv(log);
    if (!previous.empty()) csv = previous + csv.substr(csv.find('\n') + 1);
    write_text(metrics, csv);
    models::save_checkpoint((out / "model.pimm").string(), spec, state.best_params);
    std::cout << "wrote " << (out / "model.pimm").string() << "\n";
    return 0;
}

int cmd_eval(const Options& o)
{
    const auto cfg = load_config(o);
    const sim::Dataset data = dataset_for(o, cfg);
    const LoadedModel m = model_for(o, cfg, data);
    check_channels(m, data);
    const Tensor x = data.test.tx.to_channels(), z = data.test.pim.to_channels();
    const eval::Aligned a = eval::align_segment(m.params, m.spec, x, z, 0, x.dim(1));
    const eval::ApeReport r = eval::make_report(a.z, a.z_hat);
    if (o.channel >= r.n_channels) throw ConfigError("--channel " + std::to_string(o.channel) + " out of range");
    const fs::path out(o.out);
    write_text(out / "report.json", eval::report_json(r));
    const std::size_t first = models::receptive_field(m.spec) - 1;
    write_text(out / "overlay.csv", eval::overlay_csv(a, o.channel, first));
    const eval::SpectrumReport s = eval::spectrum_report(a, o.channel);
    write_text(out / "spectrum.csv", eval::spectrum_csv(s));

    const std::size_t shown = std::min<std::size_t>(512, a.z.dim(1));
    std::vector<eval::Series> td{{"z (I)", {}}, {"z_hat (I)", {}}};
    for (std::size_t n = 0; n < shown; ++n) {
        td[0].values.push_back(a.z.at(2 * o.channel, n));
        td[1].values.push_back(a.z_hat.at(2 * o.channel, n));
    }
    write_text(out / "overlay.svg", eval::line_svg(td, "Time domain, channel " + std::to_string(o.channel)));
    std::vector<eval::Series> fd{{"truth", {}}, {"prediction", {}}, {"residual", {}}};
    const std::size_t n = s.truth.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + n / 2) % n;
        fd[0].values.push_back(10 * std::log10(s.truth[k]));
        fd[1].values.push_back(10 * std::log10(s.prediction[k]));
        fd[2].values.push_back(10 * std::log10(s.residual[k]));
    }
    write_text(out / "spectrum.svg", eval::line_svg(fd, "Spectrum (dB), channel " + std::to_string(o.channel)));
    std::printf("mean cancellation depth %.4f dB, mean APE %.4f dB over %zu samples\n", r.mean_depth_db,
                r.mean_ape_db, r.n_samples);
    return 0;
}

int cmd_sweep(const Options& o)
{
    const auto cfg = load_config(o);
    const sim::Dataset data = dataset_for(o, cfg);
    const LoadedModel m = model_for(o, cfg, data);
    check_channels(m, data);
    const Tensor x = data.test.tx.to_channels(), z = data.test.pim.to_channels();
    const std::size_t N = x.dim(1);
    const auto starts = eval::parse_range(o.starts.empty() ? "0:" + std::to_string(N - 1000) + ":1000" : o.starts);
    const auto lengths =
        eval::parse_range(o.lengths.empty() ? "1000:" + std::to_string(N) + ":1000" : o.lengths);
    const eval::HeatmapGrid g = eval::heatmap_sweep(m.params, m.spec, x, z, starts, lengths);
    const fs::path out(o.out);
    write_text(out / "heatmap.csv", eval::heatmap_csv(g));
    write_text(out / "heatmap.svg", eval::heatmap_svg(g, "Cancellation depth (dB) by test segment"));
    std::printf("%zu of %zu cells evaluated\n", g.valid_cells(), starts.size() * lengths.size());
    return 0;
}

int cmd_report(const Options& o)
{
    const auto cfg = load_config(o);
    const sim::Dataset data = dataset_for(o, cfg);
    const LoadedModel m = model_for(o, cfg, data);
    check_channels(m, data);
    const Tensor x = data.test.tx.to_channels(), z = data.test.pim.to_channels();
    const eval::Aligned a = eval::align_segment(m.params, m.spec, x, z, 0, x.dim(1));
    const eval::ApeReport r = eval::make_report(a.z, a.z_hat);
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < r.n_channels; ++c) labels.push_back("ch" + std::to_string(c));
    const fs::path out(o.out);
    write_text(out / "channels.csv", eval::channel_bars_csv(r));
    write_text(out / "channels.svg", eval::bar_svg(labels, r.per_channel_pim_power_db,
                                                   r.per_channel_residual_power_db,
                                                   "PIM power before and after cancellation"));
    for (std::size_t c = 0; c < r.n_channels; ++c)
        std::printf("channel %zu: %.2f dB reduction\n", c, r.per_channel_depth_db[c]);
    return 0;
}

int cmd_param_count(const Options& o)
{
    if (!o.preset.empty()) {
        std::cout << models::param_count(models::preset_spec(o.preset)) << "\n";
        return 0;
    }
    std::printf("%-14s %6s %6s %8s %8s\n", "preset", "tx x rx", "rf", "params", "budget");
    for (const auto& p : models::presets())
        std::printf("%-14s %3zux%-3zu %6zu %8zu %8zu\n", p.name.c_str(), p.spec.tx_antennas, p.spec.rx_antennas,
                    models::receptive_field(p.spec), models::param_count(p.spec), p.budget);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Neural PIM cancellation toolkit"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("--preset", o.preset, "model preset name");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) { o.seed = seed; });
        sub->add_option("--out", o.out, "output directory");
    };
    auto data_opts = [&](CLI::App* sub) {
        sub->add_option("--data", o.data, "dataset directory written by 'generate'")->check(CLI::ExistingDirectory);
        sub->add_option("--model", o.model, "model checkpoint (.pimm)")->check(CLI::ExistingFile);
    };

    auto* gen = app.add_subcommand("generate", "synthesize a train/test dataset");
    common(gen);
    auto* tr = app.add_subcommand("train", "train a model");
    common(tr);
    tr->add_option("--data", o.data, "dataset directory written by 'generate'")->check(CLI::ExistingDirectory);
    tr->add_flag("--resume", o.resume, "continue from <out>/checkpoint.pimm");
    auto* ev = app.add_subcommand("eval", "evaluate on the test split");
    common(ev);
    data_opts(ev);
    ev->add_option("--channel", o.channel, "receive channel for the overlay and spectrum");
    auto* sw = app.add_subcommand("sweep", "segment heatmap on the test split");
    common(sw);
    data_opts(sw);
    sw->add_option("--starts", o.starts, "segment starts a:b:step");
    sw->add_option("--lengths", o.lengths, "segment lengths a:b:step");
    auto* rep = app.add_subcommand("report", "per-channel before/after PIM power");
    common(rep);
    data_opts(rep);
    auto* pc = app.add_subcommand("param-count", "parameter totals of the presets");
    pc->add_option("--preset", o.preset, "print only this preset's total");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_generate(o);
        if (*tr) return cmd_train(o);
        if (*ev) return cmd_eval(o);
        if (*sw) return cmd_sweep(o);
        if (*rep) return cmd_report(o);
        if (*pc) return cmd_param_count(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
