#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "json.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/eval.hpp"
#include "pimnet/presets.hpp"
#include "support.hpp"

using namespace pimnet;
using namespace pimnet::eval;
using testing::random_tensor;

namespace {

// Trained-looking model: every parameter random so predictions are non-trivial.
models::ModelParams random_model(const models::ModelSpec& s, std::uint64_t seed)
{
    auto p = models::build(s, seed);
    Rng rng(seed);
    for (auto& e : p.entries())
        if (e.name.find("lut") == std::string::npos)
            for (auto& v : e.tensor.data()) v = rng.uniform(-0.4, 0.4);
    return p;
}

} // namespace

TEST_CASE("APE identity, hand case, channel average and symmetry")
{
    Rng rng(1);
    Tensor p({2, 50});
    for (auto& v : p.data()) v = rng.uniform(0.1, 2.0);
    auto same = ape(p, p);
    CHECK(same.mean_linear == 0.0);
    CHECK(same.mean_db == 0.0);

    const auto hand = ape(Tensor::matrix(1, 2, {2, 1}), Tensor::matrix(1, 2, {1, 1}));
    CHECK(hand.mean_db == doctest::Approx(1.5051).epsilon(1e-4));
    CHECK(hand.mean_db == doctest::Approx(5.0 * std::log10(2.0)).epsilon(1e-14));
    CHECK(hand.mean_linear == doctest::Approx(0.5));

    Tensor q({2, 50});
    for (auto& v : q.data()) v = rng.uniform(0.1, 2.0);
    const auto a = ape(p, q), b = ape(q, p);
    CHECK(a.mean_db == doctest::Approx(b.mean_db).epsilon(1e-14));
    CHECK(a.mean_db > 0.0);
    CHECK(a.mean_db == doctest::Approx((a.per_channel_db[0] + a.per_channel_db[1]) / 2).epsilon(1e-14));
    CHECK(a.mean_linear == doctest::Approx((a.per_channel_linear[0] + a.per_channel_linear[1]) / 2).epsilon(1e-14));
}

TEST_CASE("APE excludes and counts non-positive reference samples")
{
    const auto r = ape(Tensor::matrix(1, 3, {1, 2, 4}), Tensor::matrix(1, 3, {1, 0, 2}));
    CHECK(r.exclusions == 1);
    CHECK(r.mean_db == doctest::Approx(10 * std::log10(2.0) / 2).epsilon(1e-14));
    CHECK_THROWS_AS(ape(Tensor({1, 3}), Tensor({1, 4})), ShapeError);
}

TEST_CASE("cancellation depth reference cases")
{
    Rng rng(2);
    const Tensor z = random_tensor({4, 200}, rng);
    const auto null = cancellation_depth(z, Tensor({4, 200}));
    CHECK(null[0] == 0.0);
    CHECK(null[1] == 0.0);
    Tensor half = z;
    for (auto& v : half.data()) v *= 0.5;
    for (double d : cancellation_depth(z, half)) CHECK(d == doctest::Approx(6.0206).epsilon(1e-5));
    for (double d : cancellation_depth(z, z)) CHECK(d == kPerfectDepth);
    CHECK(mean_depth({kPerfectDepth, kPerfectDepth}) == kPerfectDepth);
    CHECK(mean_depth({3.0, kPerfectDepth, 5.0}) == 4.0);

    Tensor worse = z;
    for (auto& v : worse.data()) v *= -1.0;
    for (double d : cancellation_depth(z, worse)) CHECK(d == doctest::Approx(-6.0206).epsilon(1e-5));

    const Tensor guess = random_tensor({4, 200}, rng);
    Tensor zs = z, gs = guess;
    for (auto& v : zs.data()) v *= 7.5;
    for (auto& v : gs.data()) v *= 7.5;
    const auto d1 = cancellation_depth(z, guess), d2 = cancellation_depth(zs, gs);
    for (std::size_t c = 0; c < 2; ++c) CHECK(d1[c] == doctest::Approx(d2[c]).epsilon(1e-12));
    CHECK_THROWS_AS(cancellation_depth(Tensor({3, 5}), Tensor({3, 5})), ShapeError);
}

TEST_CASE("report JSON carries both metrics and flags perfect channels")
{
    Rng rng(3);
    const Tensor z = random_tensor({4, 64}, rng);
    Tensor zh = z;
    for (std::size_t i = 0; i < 64; ++i) zh.at(2, i) = 0.0, zh.at(3, i) = 0.0;
    const auto r = make_report(z, zh);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["n_channels"] == 2);
    CHECK(j["n_samples"] == 64);
    CHECK(j["per_channel_depth_db"][0].is_null());
    CHECK(j["per_channel_depth_db"][1] == 0.0);
    CHECK(j["perfect_channels"] == nlohmann::json::array({0}));
    CHECK(j.contains("mean_ape_db"));
    CHECK(j["ape_exclusions"] == 64);
}

TEST_CASE("spectrum: tone, white noise, Parseval")
{
    Tensor tone({2, 4 * kSpectrumFrame});
    for (std::size_t n = 0; n < tone.dim(1); ++n) {
        const double ph = 2 * std::numbers::pi * 32.0 * static_cast<double>(n) / kSpectrumFrame;
        tone.at(0, n) = std::cos(ph);
        tone.at(1, n) = std::sin(ph);
    }
    const auto p = spectrum(tone, 0);
    REQUIRE(p.size() == kSpectrumFrame);
    for (std::size_t k = 0; k < p.size(); ++k)
        if (k != 32) CHECK(10 * std::log10(p[32] / std::max(p[k], 1e-300)) >= 60.0);

    Rng rng(4);
    Tensor noise({2, 64 * kSpectrumFrame});
    for (auto& v : noise.data()) v = rng.normal();
    const auto w = spectrum(noise, 0);
    double mean = 0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    for (double v : w) CHECK(std::abs(10 * std::log10(v / mean)) <= 3.0);

    // Parseval on a single frame: sum of bins equals time-domain frame energy.
    const Tensor frame = random_tensor({2, kSpectrumFrame}, rng);
    double energy = 0;
    for (double v : frame.data()) energy += v * v;
    double bins = 0;
    for (double v : spectrum(frame, 0)) bins += v;
    CHECK(std::abs(bins - energy) / energy < 1e-9);

    CHECK_THROWS_AS(spectrum(Tensor({2, 1023}), 0), ShapeError);
    CHECK_THROWS_AS(spectrum(tone, 1), ShapeError);
    CHECK(bin_frequency(0) == 0.0);
    CHECK(bin_frequency(512) == -0.5);
    CHECK(bin_frequency(1023) == -1.0 / 1024);
}

TEST_CASE("heatmap cells equal independent segment evaluations")
{
    const auto spec = models::preset_spec("desk");
    const auto params = random_model(spec, 5);
    Rng rng(6);
    const Tensor x = random_tensor({spec.input_channels(), 3000}, rng);
    const Tensor z = random_tensor({spec.output_channels(), 3000}, rng);
    const auto g = heatmap_sweep(params, spec, x, z, parse_range("0:2000:1000"), parse_range("1000:3000:1000"));
    REQUIRE(g.values.size() == 3);
    CHECK(g.valid_cells() == 6);
    CHECK(*g.values[0][2] == evaluate_segment(params, spec, x, z, 0, 3000));
    const auto whole = align_segment(params, spec, x, z, 0, 3000);
    CHECK(*g.values[0][2] == mean_depth(cancellation_depth(whole.z, whole.z_hat)));
    CHECK(*g.values[0][0] == evaluate_segment(params, spec, x, z, 0, 1000));
    CHECK(*g.values[1][0] == evaluate_segment(params, spec, x, z, 1000, 1000));
    CHECK_FALSE(g.values[1][2].has_value());
    CHECK_FALSE(g.values[2][1].has_value());
    CHECK(g.values[2][0].has_value());

    CHECK_THROWS_AS(heatmap_sweep(params, spec, x, z, {2900}, {500}), ConfigError);
    const std::string csv = heatmap_csv(g);
    CHECK(csv.rfind("start,length,depth_db\n", 0) == 0);
    CHECK(csv.find("1000,3000,\n") != std::string::npos);
    CHECK(csv == heatmap_csv(heatmap_sweep(params, spec, x, z, g.starts, g.lengths)));
    const std::string svg = heatmap_svg(g, "t");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("range parsing")
{
    CHECK(parse_range("0:29000:1000").size() == 30);
    CHECK(parse_range("5:5:1") == std::vector<std::size_t>{5});
    CHECK_THROWS_AS(parse_range("1:2"), ConfigError);
    CHECK_THROWS_AS(parse_range("3:1:1"), ConfigError);
    CHECK_THROWS_AS(parse_range("0:10:0"), ConfigError);
    CHECK_THROWS_AS(parse_range("0:10:2x"), ConfigError);
}

TEST_CASE("segment alignment and CSV artifacts")
{
    const auto spec = models::preset_spec("desk");
    const auto params = random_model(spec, 7);
    Rng rng(8);
    const Tensor x = random_tensor({spec.input_channels(), 2048}, rng);
    const Tensor z = random_tensor({spec.output_channels(), 2048}, rng);
    const std::size_t rf = models::receptive_field(spec);
    const auto a = align_segment(params, spec, x, z, 0, 2048);
    CHECK(a.z.dim(1) == 2048 - rf + 1);
    CHECK(a.z.at(0, 0) == z.at(0, rf - 1));
    CHECK_THROWS_AS(align_segment(params, spec, x, z, 100, 2000), ShapeError);
    CHECK_THROWS_AS(align_segment(params, spec, x, z, 0, rf - 1), ShapeError);

    const std::string overlay = overlay_csv(a, 1, rf - 1);
    CHECK(overlay.rfind("sample,z_i,z_q,zhat_i,zhat_q,residual_i,residual_q\n" + std::to_string(rf - 1) + ",", 0) == 0);
    const auto s = spectrum_report(a, 0);
    const std::string sc = spectrum_csv(s);
    CHECK(sc.rfind("freq,truth_db,prediction_db,residual_db\n-0.5,", 0) == 0);
    CHECK(std::count(sc.begin(), sc.end(), '\n') == 1025);
    const auto r = make_report(a.z, a.z_hat);
    CHECK(channel_bars_csv(r).rfind("channel,pim_power_db,residual_power_db,reduction_db\n0,", 0) == 0);
    const std::string bars = bar_svg({"ch0", "ch1"}, r.per_channel_pim_power_db, r.per_channel_residual_power_db, "b");
    CHECK(bars.find("<rect") != std::string::npos);
    CHECK(line_svg({{"a", {1, 2, 3}}}, "l").find("<polyline") != std::string::npos);
}
