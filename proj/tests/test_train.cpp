#include <cmath>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "pimnet/checkpoint.hpp"
#include "pimnet/dataset.hpp"
#include "pimnet/detail/binary.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/ops.hpp"
#include "pimnet/presets.hpp"
#include "pimnet/train.hpp"
#include "support.hpp"

using namespace pimnet;
using namespace pimnet::train;
using testing::random_tensor;

namespace {

models::ModelParams single(const Tensor& value, const Tensor& grad)
{
    models::ModelParams p;
    p.add("theta", value.detached());
    p.set_requires_grad(true);
    auto g = p.get("theta").grad();
    std::copy(grad.data().begin(), grad.data().end(), g.begin());
    return p;
}

TrainData small_data(std::uint64_t seed, std::size_t length = 4000)
{
    sim::DatasetSpec spec;
    spec.plan = sim::default_plan();
    spec.scenario = sim::default_scenario(seed);
    spec.train_length = length;
    spec.test_length = 1024;
    spec.seed = seed;
    const auto d = sim::synthesize(spec);
    return {d.train.tx.to_channels(), d.train.pim.to_channels()};
}

TrainConfig small_config()
{
    TrainConfig c;
    c.window_len = 600;
    c.batch_windows = 2;
    c.truncate_margin = 8;
    c.steps = 200;
    c.eval_every = 50;
    c.cycle_period = 100;
    c.seed = 3;
    c.val_blocks = 2;
    return c;
}

std::string detail_bytes(const std::filesystem::path& p) { return detail::read_file(p.string()); }

bool same_bits(const models::ModelParams& a, const models::ModelParams& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.entries()[i].tensor;
        const auto& y = b.entries()[i].tensor;
        if (x.shape() != y.shape() || std::memcmp(x.ptr(), y.ptr(), x.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

} // namespace

TEST_CASE("triangular learning rate")
{
    TrainConfig c;
    c.lr_min = 1e-4;
    c.lr_max = 2e-3;
    c.cycle_period = 2000;
    CHECK(clr_lr(0, c) == c.lr_min);
    CHECK(clr_lr(1000, c) == c.lr_max);
    CHECK(clr_lr(2000, c) == c.lr_min);
    CHECK(clr_lr(500, c) == doctest::Approx((c.lr_min + c.lr_max) / 2).epsilon(1e-15));
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const std::size_t s = rng.below(1000000);
        CHECK(clr_lr(s, c) == clr_lr(s + c.cycle_period, c));
        CHECK(clr_lr(s, c) >= c.lr_min);
        CHECK(clr_lr(s, c) <= c.lr_max);
    }
}

TEST_CASE("global-norm clipping")
{
    std::vector<double> g{3.0, 4.0};
    auto r = clip_gradients({std::span<double>(g)}, 1.0);
    CHECK(g[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.norm == 5.0);
    CHECK(r.scale == 0.2);

    std::vector<double> small{0.3, 0.4};
    r = clip_gradients({std::span<double>(small)}, 1.0);
    CHECK(r.scale == 1.0);
    CHECK(small == std::vector<double>{0.3, 0.4});

    std::vector<double> zero(4, 0.0);
    CHECK(clip_gradients({std::span<double>(zero)}, 1.0).scale == 1.0);
    CHECK_THROWS_AS(clip_gradients({std::span<double>(zero)}, 0.0), ConfigError);

    Rng rng(2);
    for (int n = 0; n < 50; ++n) {
        std::vector<double> a(7), b(3);
        for (auto* v : {&a, &b})
            for (auto& x : *v) x = rng.normal() * 3;
        const auto a0 = a, b0 = b;
        const double tau = rng.uniform(0.1, 2.0);
        clip_gradients({std::span<double>(a), std::span<double>(b)}, tau);
        double dot = 0, n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < 7; ++i) dot += a[i] * a0[i], n0 += a0[i] * a0[i], n1 += a[i] * a[i];
        for (std::size_t i = 0; i < 3; ++i) dot += b[i] * b0[i], n0 += b0[i] * b0[i], n1 += b[i] * b[i];
        CHECK(std::sqrt(n1) <= tau * (1 + 1e-12));
        CHECK(std::abs(dot / std::sqrt(n0 * n1) - 1.0) < 1e-12);
    }
}

TEST_CASE("adam step against hand-derived updates")
{
    AdamConfig cfg;  // betas 0.9 / 0.999, eps 1e-8, no decay
    auto p = single(Tensor::vector({0.0}), Tensor::vector({1.0}));
    auto state = OptimizerState::for_params(p);
    adam_step(p, state, 0.1, cfg);
    // t = 1: m_hat = 1, v_hat = 1
    CHECK(std::abs(p.get("theta")[0] - (-0.1 / (1.0 + 1e-8))) < 1e-12);
    CHECK(state.t == 1);

    // Second step with g = -2 from the same state.
    p.get("theta").grad()[0] = -2.0;
    adam_step(p, state, 0.05, cfg);
    const double m = 0.9 * 0.1 + 0.1 * -2.0, v = 0.999 * 0.001 + 0.001 * 4.0;
    const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
    const double expect = -0.1 / (1.0 + 1e-8) - 0.05 * (m_hat / (std::sqrt(v_hat) + 1e-8));
    CHECK(std::abs(p.get("theta")[0] - expect) < 1e-12);
    CHECK(state.v[0][0] >= 0.0);
}

TEST_CASE("adam with zero gradient: unchanged without decay, decays geometrically with it")
{
    auto p = single(Tensor::vector({1.5, -2.0}), Tensor::vector({0.0, 0.0}));
    auto state = OptimizerState::for_params(p);
    adam_step(p, state, 0.01, AdamConfig{});
    CHECK(p.get("theta")[0] == 1.5);
    CHECK(p.get("theta")[1] == -2.0);
    AdamConfig decay;
    decay.weight_decay = 0.1;
    for (int i = 0; i < 3; ++i) adam_step(p, state, 0.01, decay);
    CHECK(std::abs(p.get("theta")[0] - 1.5 * std::pow(1 - 0.01 * 0.1, 3)) < 1e-12);
}

TEST_CASE("adam rejects non-finite gradients before touching anything")
{
    models::ModelParams p;
    p.add("a", Tensor::vector({1.0}));
    p.add("b", Tensor::vector({2.0}));
    p.set_requires_grad(true);
    p.get("a").grad()[0] = 0.5;
    p.get("b").grad()[0] = NAN;
    auto state = OptimizerState::for_params(p);
    CHECK_THROWS_WITH_AS(adam_step(p, state, 0.1, AdamConfig{}, "batch 4"), doctest::Contains("'b'"), NumericError);
    CHECK(p.get("a")[0] == 1.0);
    CHECK(state.t == 0);
    CHECK_THROWS_AS(adam_step(p, state, 0.0, AdamConfig{}), ConfigError);
}

TEST_CASE("truncated MSE")
{
    Rng rng(4);
    const Tensor target = random_tensor({4, 30}, rng);
    Tensor pred = random_tensor({4, 30}, rng);
    {
        ad::Tape t(false);
        double oracle = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) oracle += (pred[i] - target[i]) * (pred[i] - target[i]);
        CHECK(std::abs(truncated_mse(t.constant_ref(pred), target, 0).value().item() - oracle / 120) < 1e-12);
        CHECK(truncated_mse(t.constant_ref(target), target, 5).value().item() == 0.0);
    }
    {
        ad::Tape t(false);
        Tensor corrupted = pred;
        for (std::size_t c = 0; c < 4; ++c)
            for (std::size_t i : {0, 1, 2, 27, 28, 29}) corrupted.at(c, i) += 100.0;
        CHECK(truncated_mse(t.constant_ref(corrupted), target, 3).value().item() ==
              truncated_mse(t.constant_ref(pred), target, 3).value().item());
    }
    pred.set_requires_grad(true);
    ad::Tape t;
    t.backward(truncated_mse(t.leaf(pred), target, 3));
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < 30; ++i) {
            const bool kept = i >= 3 && i < 27;
            CHECK((pred.grad()[c * 30 + i] == 0.0) == !kept);
        }
    ad::Tape t2(false);
    CHECK_THROWS_AS(truncated_mse(t2.constant_ref(target), target, 15), ShapeError);
    CHECK_THROWS_AS(truncated_mse(t2.constant_ref(target), Tensor({4, 29}), 1), ShapeError);
}

TEST_CASE("config validation enforces the recipe invariants")
{
    TrainConfig c;
    CHECK_NOTHROW(c.validate(25));
    c.window_len = 512;
    c.batch_windows = 2;
    CHECK_THROWS_WITH_AS(c.validate(25), doctest::Contains("1024"), ConfigError);
    c.batch_windows = 3;
    CHECK_NOTHROW(c.validate(25));
    c = TrainConfig{};
    c.truncate_margin = 11;
    CHECK_THROWS_AS(c.validate(25), ConfigError);
    c.truncate_margin = 12;
    CHECK_NOTHROW(c.validate(25));
    c = TrainConfig{};
    c.cycle_period = 3;
    CHECK_THROWS_AS(c.validate(5), ConfigError);
    c = TrainConfig{};
    c.lr_min = 0.1;
    c.lr_max = 0.01;
    CHECK_THROWS_AS(c.validate(5), ConfigError);

    const auto cfg = KeyValueConfig::parse("window_len = 1024\nbatch_windows = 2\nlr_max = 3e-3\ntrain_seed = 9\n");
    const TrainConfig parsed = train_config_from(cfg);
    CHECK(parsed.window_len == 1024);
    CHECK(parsed.lr_max == 3e-3);
    CHECK(parsed.seed == 9);
    CHECK_THROWS_AS(train_config_from(KeyValueConfig::parse("steps = -1\n")), ConfigError);
}

TEST_CASE("training is deterministic and logs the schedule")
{
    const auto spec = models::preset_spec("desk");
    const TrainData data = small_data(1);
    TrainConfig cfg = small_config();
    cfg.steps = 120;
    auto run = [&] {
        TrainState s = initial_state(spec, cfg.seed);
        std::vector<LogRow> log;
        run_training(spec, s, data, cfg, log);
        return std::make_pair(log_csv(log), s);
    };
    const auto [csv1, s1] = run();
    const auto [csv2, s2] = run();
    CHECK(csv1 == csv2);
    CHECK(same_bits(s1.params, s2.params));
    CHECK(csv1.rfind("step,lr,loss,grad_norm,clip_scale,eval_depth_db\n", 0) == 0);
    CHECK(csv1.find('\r') == std::string::npos);

    TrainState s = initial_state(spec, cfg.seed);
    std::vector<LogRow> log;
    run_training(spec, s, data, cfg, log);
    REQUIRE(log.size() == 120);
    for (const auto& row : log) {
        CHECK(row.lr == clr_lr(row.step, cfg));
        CHECK(row.clip_scale <= 1.0);
        CHECK(row.eval_depth_db.has_value() == ((row.step + 1) % 50 == 0 || row.step + 1 == 120));
    }
    CHECK(s.params.all_finite());
    CHECK(std::isfinite(s.best_val_mse));
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run")
{
    const auto spec = models::preset_spec("desk");
    const TrainData data = small_data(2);
    const TrainConfig cfg = small_config();
    const auto dir = std::filesystem::temp_directory_path() / "pimnet_test_resume";
    std::filesystem::remove_all(dir);

    TrainState full = initial_state(spec, cfg.seed);
    std::vector<LogRow> full_log;
    run_training(spec, full, data, cfg, full_log);

    TrainState first = initial_state(spec, cfg.seed);
    std::vector<LogRow> log;
    TrainOptions opts;
    opts.stop_at = 100;
    opts.checkpoint_dir = dir.string();
    run_training(spec, first, data, cfg, log, opts);
    REQUIRE(first.step == 100);

    models::ModelSpec loaded_spec;
    TrainState resumed = load_train_checkpoint((dir / "checkpoint.pimm").string(), &loaded_spec);
    CHECK(loaded_spec == spec);
    CHECK(resumed.step == 100);
    run_training(spec, resumed, data, cfg, log);
    CHECK(log_csv(log) == log_csv(full_log));
    CHECK(same_bits(resumed.params, full.params));
    CHECK(same_bits(resumed.best_params, full.best_params));
    CHECK(resumed.opt.t == full.opt.t);
    CHECK(std::filesystem::exists(dir / "best.pimm"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("a non-finite loss aborts training and leaves checkpoints alone")
{
    const auto spec = models::preset_spec("desk");
    TrainData data = small_data(3);
    TrainConfig cfg = small_config();
    const auto dir = std::filesystem::temp_directory_path() / "pimnet_test_abort";
    std::filesystem::remove_all(dir);
    TrainState s = initial_state(spec, cfg.seed);
    std::vector<LogRow> log;
    TrainOptions opts;
    opts.checkpoint_dir = dir.string();
    opts.stop_at = 50;
    run_training(spec, s, data, cfg, log, opts);
    const std::string before = detail_bytes(dir / "checkpoint.pimm");

    for (auto& v : data.z.data()) v = NAN;
    opts.stop_at.reset();
    CHECK_THROWS_AS(run_training(spec, s, data, cfg, log, opts), TrainingAborted);
    CHECK(detail_bytes(dir / "checkpoint.pimm") == before);
    std::filesystem::remove_all(dir);
}

TEST_CASE("held-out blocks are evenly spaced and disjoint from training gaps")
{
    TrainConfig cfg;
    const auto h = holdout_layout(30003, cfg);
    REQUIRE(h.validation.size() == 8);
    REQUIRE(h.train.size() == 8);
    std::size_t at = 0;
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(h.train[k].begin == at);
        CHECK(h.validation[k].begin == h.train[k].end);
        CHECK(h.validation[k].length() == 375);
        at = h.validation[k].end;
    }
    CHECK(at == 30003);
    CHECK(h.train[7].length() == 30003 - 7 * 3750 - 375);

    cfg.val_blocks = 1;
    const auto tail = holdout_layout(30000, cfg);
    CHECK(tail.validation == std::vector<Interval>{{27000, 30000}});
    cfg.val_blocks = 0;
    CHECK_THROWS_AS(holdout_layout(30000, cfg), ConfigError);
    cfg.val_blocks = 8;
    CHECK_THROWS_AS(holdout_layout(40, cfg), ConfigError);
}

TEST_CASE("training windows never read held-out samples")
{
    const auto spec = models::preset_spec("desk");
    TrainData data = small_data(5, 8000);
    TrainConfig cfg = small_config();
    cfg.val_blocks = 4;
    for (const auto& b : holdout_layout(data.x.dim(1), cfg).validation)
        for (std::size_t c = 0; c < data.x.dim(0); ++c)
            for (std::size_t n = b.begin; n < b.end; ++n) data.x.at(c, n) = NAN;
    TrainState s = initial_state(spec, cfg.seed);
    std::vector<LogRow> log;
    run_training(spec, s, data, cfg, log);
    CHECK(log.size() == cfg.steps);
    CHECK(s.params.all_finite());
    for (const auto& row : log) CHECK(std::isfinite(row.loss));
}

TEST_CASE("channel loss weights equalise receive-channel power")
{
    TrainConfig cfg;
    cfg.val_blocks = 2;
    Tensor x({2, 1000}), z({4, 1000});
    for (std::size_t n = 0; n < 1000; ++n) {
        z.at(0, n) = 2.0;  // receive channel 0: power 4
        z.at(3, n) = n % 2 ? 1.0 : -1.0;  // receive channel 1: power 1
    }
    const TrainData data{x, z};
    const auto w = channel_loss_weights(data, cfg);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == doctest::Approx(std::sqrt(2.5 / 4.0)).epsilon(1e-14));
    CHECK(w[1] == w[0]);
    CHECK(w[2] == doctest::Approx(std::sqrt(2.5)).epsilon(1e-14));
    CHECK(w[3] == w[2]);
    // weighted powers are equal
    CHECK(4.0 * w[0] * w[0] == doctest::Approx(1.0 * w[2] * w[2]).epsilon(1e-14));

    cfg.balance_channels = false;
    CHECK(channel_loss_weights(data, cfg) == std::vector<double>(4, 1.0));
    cfg.balance_channels = true;
    Tensor silent({4, 1000});
    CHECK(channel_loss_weights({x, silent}, cfg) == std::vector<double>(4, 1.0));
}

TEST_CASE("training rejects mismatched data")
{
    const auto spec = models::preset_spec("desk");
    TrainData data = small_data(4);
    TrainState s = initial_state(spec, 1);
    std::vector<LogRow> log;
    TrainData wrong{data.z, data.z};
    CHECK_THROWS_AS(run_training(spec, s, wrong, small_config(), log), ShapeError);
    TrainData tiny = small_data(4, 1024);
    TrainConfig cfg = small_config();
    cfg.window_len = 1000;
    CHECK_THROWS_AS(run_training(spec, s, tiny, cfg, log), ConfigError);
}

TEST_CASE("loss on a fixed batch falls over the first 100 steps in most seeded runs")
{
    const auto spec = models::preset_spec("desk");
    int improved = 0;
    const int runs = 10;
    for (int r = 0; r < runs; ++r) {
        TrainData data = small_data(10 + r, 1300);
        TrainConfig cfg = small_config();
        // A single window spanning the whole training region: every step sees the same batch.
        cfg.window_len = 1170;
        cfg.val_blocks = 1;
        cfg.batch_windows = 1;
        cfg.steps = 100;
        cfg.cycle_period = 200;
        cfg.seed = r;
        TrainState s = initial_state(spec, r);
        std::vector<LogRow> log;
        run_training(spec, s, data, cfg, log);
        improved += log.back().loss <= log.front().loss;
    }
    CHECK(improved * 10 >= runs * 9);
}
