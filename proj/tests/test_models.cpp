#include <cmath>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "pimnet/checkpoint.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/gradcheck.hpp"
#include "pimnet/model.hpp"
#include "pimnet/ops.hpp"
#include "pimnet/presets.hpp"
#include "support.hpp"

using namespace pimnet;
using models::ConvBlock;
using models::ModelSpec;
using models::Variant;
using testing::random_tensor;

namespace {

ModelSpec random_spec(Rng& rng, bool allow_static = true)
{
    ModelSpec s;
    const Variant variants[] = {Variant::static_lut, Variant::dynamic_fc3, Variant::lightweight_fc2};
    s.variant = variants[allow_static ? rng.below(3) : 1 + rng.below(2)];
    s.tx_antennas = 1 + rng.below(4);
    s.rx_antennas = 1 + rng.below(3);
    s.widths.clear();
    for (std::size_t i = 0; i < 3 + s.fc_layers(); ++i) s.widths.push_back(1 + rng.below(12));
    for (int i = 0; i < 4; ++i) {
        s.kernel_sizes.push_back(1 + rng.below(5));
        s.dilations.push_back(1 + rng.below(3));
    }
    s.conv_block = rng.below(2) ? ConvBlock::standard : ConvBlock::separable;
    s.lut.q = 4 + rng.below(20);
    s.lut.per_channel = rng.below(2) == 0;
    s.norm.kind = rng.below(3) == 0 ? nn::NormKind::channel : nn::NormKind::none;
    return s;
}

// Separable stage: k*C_in + C_in*C_out weights plus one bias per output of each half.
std::size_t hand_count(const ModelSpec& s)
{
    const auto& w = s.widths;
    const std::size_t nfc = s.fc_layers();
    const std::size_t mid = s.variant == Variant::static_lut ? w[1] : w[1 + nfc];
    const std::size_t ins[4] = {2 * s.tx_antennas, w[0], mid, w.back()};
    const std::size_t outs[4] = {w[0], w[1], w.back(), 2 * s.rx_antennas};
    std::size_t n = 0;
    for (int i = 0; i < 4; ++i) {
        const std::size_t k = s.kernel_sizes[i], ci = ins[i], co = outs[i];
        n += s.conv_block == ConvBlock::separable ? k * ci + ci + ci * co + co : k * ci * co + co;
        if (s.norm.kind == nn::NormKind::channel && i < 3) n += 2 * co;
    }
    for (std::size_t j = 0; j < nfc; ++j) n += w[1 + j] * w[2 + j] + w[2 + j];
    if (s.variant == Variant::static_lut) n += s.lut.q * (s.lut.per_channel ? w[1] : 1);
    return n;
}

// Replaces zero-initialised tensors so every stage contributes.
void randomise(models::ModelParams& p, Rng& rng)
{
    for (auto& e : p.entries())
        if (e.name.find("lut") == std::string::npos && e.name.find("norm.scale") == std::string::npos)
            for (auto& v : e.tensor.data()) v = rng.uniform(-0.5, 0.5);
}

} // namespace

TEST_CASE("parameter counts follow the closed forms on random configurations")
{
    Rng rng(1);
    for (int n = 0; n < 50; ++n) {
        const ModelSpec s = random_spec(rng);
        const auto params = models::build(s, 3);
        CAPTURE(models::spec_to_json(s));
        CHECK(models::param_count(s) == hand_count(s));
        CHECK(params.element_count() == hand_count(s));
    }
}

TEST_CASE("receptive field of a single dilated conv by perturbation")
{
    Rng rng(2);
    for (int n = 0; n < 20; ++n) {
        const std::size_t k = 1 + rng.below(6), r = 1 + rng.below(4);
        nn::ConvSpec s{nn::ConvKind::standard, 1, 1, k, r, nn::Padding::none, false};
        const Tensor w = random_tensor(s.weight_shape(), rng);
        Tensor x = random_tensor({1, 3 * s.receptive_field() + 5}, rng);
        auto run = [&] {
            ad::Tape t(false);
            return nn::conv1d_dilated(t.constant_ref(x), s, t.constant_ref(w)).value();
        };
        const Tensor base = run();
        // Span of outputs that respond to one input sample.
        const std::size_t p = x.dim(1) / 2;
        x[p] += 1.0;
        const Tensor moved = run();
        std::size_t lo = moved.size(), hi = 0;
        for (std::size_t i = 0; i < moved.size(); ++i)
            if (moved[i] != base[i]) lo = std::min(lo, i), hi = std::max(hi, i);
        CAPTURE(k);
        CAPTURE(r);
        CHECK(hi - lo + 1 == k + (k - 1) * (r - 1));
    }
}

TEST_CASE("model receptive field and causal alignment by perturbation")
{
    Rng rng(3);
    for (int n = 0; n < 20; ++n) {
        ModelSpec s = random_spec(rng, false);
        s.norm.kind = nn::NormKind::none;
        auto params = models::build(s, n);
        randomise(params, rng);
        const std::size_t rf = models::receptive_field(s);
        std::size_t expected = 1;
        for (int i = 0; i < 4; ++i) expected += (s.kernel_sizes[i] - 1) * s.dilations[i];
        REQUIRE(rf == expected);

        Tensor x = random_tensor({s.input_channels(), 2 * rf + 10}, rng);
        const Tensor base = models::predict(params, s, x);
        REQUIRE(base.dim(1) == x.dim(1) - rf + 1);
        const std::size_t p = rf + 3;
        for (std::size_t c = 0; c < x.dim(0); ++c) x.at(c, p) += 0.7;
        const Tensor moved = models::predict(params, s, x);
        const std::size_t L = base.dim(1);
        std::size_t lo = L, hi = 0;
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t c = 0; c < base.dim(0); ++c)
                if (moved.at(c, i) != base.at(c, i)) lo = std::min(lo, i), hi = std::max(hi, i);
        CAPTURE(models::spec_to_json(s));
        // Output i covers inputs [i, i + rf - 1]: its last input is i + rf - 1.
        CHECK(lo == p - (rf - 1));
        CHECK(hi == p);
    }
}

TEST_CASE("presets fit their budgets")
{
    for (const auto& p : models::presets()) {
        CAPTURE(p.name);
        CHECK(models::param_count(p.spec) <= p.budget);
        CHECK(models::build(p.spec, 0).element_count() == models::param_count(p.spec));
    }
    CHECK(models::param_count(models::preset_spec("paper-light")) <= 12000);
    const auto large = models::param_count(models::preset_spec("paper-large"));
    CHECK(large >= 25000);
    CHECK(large <= 26000);
    CHECK_THROWS_AS(models::preset_spec("missing"), ConfigError);
    const ModelSpec desk = models::preset_spec("paper-light", 4, 2);
    CHECK(desk.tx_antennas == 4);
    CHECK(desk.widths == models::preset_spec("paper-light").widths);
}

TEST_CASE("an untrained model predicts exactly zero")
{
    const ModelSpec s = models::preset_spec("desk");
    const auto params = models::build(s, 9);
    Rng rng(4);
    const Tensor y = models::predict(params, s, random_tensor({s.input_channels(), 64}, rng));
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("inputs shorter than the receptive field are rejected")
{
    const ModelSpec s = models::preset_spec("desk");
    const auto params = models::build(s, 1);
    const std::size_t rf = models::receptive_field(s);
    CHECK_THROWS_AS(models::predict(params, s, Tensor({s.input_channels(), rf - 1})), ShapeError);
    CHECK_NOTHROW(models::predict(params, s, Tensor({s.input_channels(), rf})));
    CHECK_THROWS_AS(models::predict(params, s, Tensor({s.input_channels() + 1, 40})), ShapeError);
}

TEST_CASE("spec validation names the stage")
{
    ModelSpec s = models::preset_spec("desk");
    s.widths[1] = 0;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("conv2"), ConfigError);
    s = models::preset_spec("desk");
    s.widths.pop_back();
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = models::preset_spec("desk");
    s.kernel_sizes[3] = 0;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("conv4"), ConfigError);
}

TEST_CASE("full desk-scale models pass finite-difference checks")
{
    std::size_t checked = 0, skipped = 0;
    for (std::string name : {"desk-static", "desk-dynamic", "desk"}) {
        for (ConvBlock block : {ConvBlock::separable, ConvBlock::standard}) {
            ModelSpec s = models::preset_spec(name);
            s.conv_block = block;
            Rng rng(derive_seed(17, block == ConvBlock::standard));
            for (int n = 0; n < 20; ++n) {
                auto params = models::build(s, static_cast<std::uint64_t>(n));
                randomise(params, rng);
                params.set_requires_grad(true);
                const std::size_t T = models::receptive_field(s) + 4;
                const Tensor x = random_tensor({s.input_channels(), T}, rng);
                const Tensor target = random_tensor({s.output_channels(), T - models::receptive_field(s) + 1}, rng);
                std::vector<Tensor*> wrt;
                for (auto& e : params.entries()) wrt.push_back(&e.tensor);
                const auto r = ad::finite_diff_check(
                    [&](ad::Tape& t) {
                        auto y = models::forward(t, params, s, t.constant_ref(x));
                        return ad::mean(ad::square(ad::sub(y, t.constant_ref(target))));
                    },
                    wrt, 1e-5, 12);
                CAPTURE(name);
                CAPTURE(n);
                CAPTURE(params.entries()[r.worst_tensor].name);
                CAPTURE(r.worst_analytic);
                CAPTURE(r.worst_numeric);
                CHECK(r.max_rel_error < 1e-4);
                checked += r.coordinates;
                skipped += r.nonsmooth;
            }
        }
    }
    // Kinks (LeakyReLU, ReLU, LUT knots) make a few probes unusable; they must stay rare.
    CHECK(skipped * 20 <= checked);
}

TEST_CASE("spec JSON round trip")
{
    Rng rng(5);
    for (int n = 0; n < 10; ++n) {
        const ModelSpec s = random_spec(rng);
        CHECK(models::spec_from_json(models::spec_to_json(s)) == s);
    }
    CHECK_THROWS(models::spec_from_json("{\"variant\": \"bogus\"}"));
}

TEST_CASE("checkpoints round-trip bit-exactly")
{
    const ModelSpec s = models::preset_spec("desk-dynamic");
    auto params = models::build(s, 4);
    Rng rng(6);
    randomise(params, rng);
    models::CheckpointAppendix app{"{\"step\":3}", {{"m.x", Tensor::vector({1.0, -0.0, 1e-300})}}};
    const std::string bytes = models::encode_checkpoint(s, params, &app);
    const auto ck = models::decode_checkpoint(bytes);
    CHECK(ck.spec == s);
    REQUIRE(ck.params.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& a = params.entries()[i].tensor;
        const auto& b = ck.params.entries()[i].tensor;
        CHECK(std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(double)) == 0);
    }
    REQUIRE(ck.appendix);
    CHECK(ck.appendix->meta_json == "{\"step\":3}");
    CHECK(models::encode_checkpoint(ck.spec, ck.params, &*ck.appendix) == bytes);

    const auto path = (std::filesystem::temp_directory_path() / "pimnet_test_model.pimm").string();
    models::save_checkpoint(path, s, params);
    const auto loaded = models::load_checkpoint(path);
    CHECK(models::encode_checkpoint(loaded.spec, loaded.params) == models::encode_checkpoint(s, params));
    CHECK_FALSE(loaded.appendix);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected")
{
    const ModelSpec s = models::preset_spec("desk");
    const std::string bytes = models::encode_checkpoint(s, models::build(s, 1));
    CHECK_THROWS_AS(models::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(models::decode_checkpoint(bad), IoError);
    std::string version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(models::decode_checkpoint(version), IoError);
    CHECK_THROWS_AS(models::load_checkpoint("/nonexistent/model.pimm"), IoError);
}
