#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "pimnet/autodiff.hpp"
#include "pimnet/detail/binary.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/fft.hpp"
#include "pimnet/gradcheck.hpp"
#include "pimnet/keyvalue.hpp"
#include "pimnet/ops.hpp"
#include "pimnet/rng.hpp"
#include "support.hpp"

using namespace pimnet;
using testing::random_tensor;

TEST_CASE("tensor construction and access")
{
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    t.at(1, 2) = 4.0;
    CHECK(t[5] == 4.0);
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK(Tensor::scalar(3.0).item() == 3.0);
    CHECK_THROWS(t.item());
    CHECK(shape_str({4, 5}) == "[4,5]");
}

TEST_CASE("grad buffer follows requires_grad")
{
    Tensor t({3}, 2.0);
    CHECK(t.grad().empty());
    t.set_requires_grad(true);
    REQUIRE(t.grad().size() == 3);
    t.grad()[1] = 5.0;
    t.zero_grad();
    CHECK(t.grad()[1] == 0.0);
    CHECK_FALSE(t.detached().requires_grad());
}

TEST_CASE("tape accumulates into external leaves and allows one backward pass")
{
    Tensor w = Tensor::vector({1.0, -2.0, 3.0});
    w.set_requires_grad(true);
    ad::Tape tape;
    ad::Var v = tape.leaf(w);
    ad::Var loss = ad::sum(ad::square(v));
    tape.backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(2.0));
    CHECK(w.grad()[1] == doctest::Approx(-4.0));
    CHECK(w.grad()[2] == doctest::Approx(6.0));
    CHECK_THROWS(tape.backward(loss));
}

TEST_CASE("shared leaf gradients add up")
{
    Tensor w = Tensor::vector({2.0});
    w.set_requires_grad(true);
    ad::Tape tape;
    ad::Var v = tape.leaf(w);
    tape.backward(ad::sum(ad::mul(v, v)));
    CHECK(w.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar losses and grad-free tapes")
{
    Tensor w = Tensor::vector({1.0, 2.0});
    w.set_requires_grad(true);
    ad::Tape tape;
    ad::Var v = tape.leaf(w);
    CHECK_THROWS(tape.backward(v));
    ad::Tape off(false);
    ad::Var c = off.constant(Tensor::scalar(1.0));
    CHECK_THROWS(off.backward(c));
}

TEST_CASE("operations match finite differences")
{
    Rng rng(11);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), m = random_tensor({4, 2}, rng);
    Tensor bias = random_tensor({3}, rng), s = random_tensor({1}, rng);
    std::vector<Tensor*> wrt{&a, &b, &m, &bias, &s};
    for (auto* t : wrt) t->set_requires_grad(true);

    auto check = [&](const char* name, const ad::LossBuilder& f) {
        CAPTURE(name);
        CHECK(ad::finite_diff_check(f, wrt).max_rel_error < 1e-6);
    };
    check("add/sub/mul", [&](ad::Tape& t) {
        auto x = t.leaf(a), y = t.leaf(b);
        return ad::sum(ad::mul(ad::add(x, y), ad::sub(x, ad::scale(y, 0.3))));
    });
    check("matmul", [&](ad::Tape& t) { return ad::sum(ad::square(ad::matmul(t.leaf(a), t.leaf(m)))); });
    check("bias/scalar", [&](ad::Tape& t) {
        return ad::mean(ad::square(ad::add_scalar(ad::add_channel_bias(t.leaf(a), t.leaf(bias)), t.leaf(s))));
    });
    check("sigmoids", [&](ad::Tape& t) {
        return ad::dot(ad::sigmoid(t.leaf(a)), ad::centered_sigmoid(t.leaf(b)));
    });
    check("slice", [&](ad::Tape& t) { return ad::sum(ad::square(ad::slice_time(t.leaf(a), 1, 3))); });
}

TEST_CASE("centered sigmoid is odd and zero at the origin")
{
    ad::Tape t(false);
    Tensor x = Tensor::vector({-3.0, -0.5, 0.0, 0.5, 3.0});
    const Tensor& y = ad::centered_sigmoid(t.constant_ref(x)).value();
    CHECK(y[2] == 0.0);
    CHECK(y[0] == doctest::Approx(-y[4]).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(-y[3]).epsilon(1e-15));
    CHECK(y[4] == doctest::Approx(std::tanh(1.5)).epsilon(1e-14));
}

TEST_CASE("shape mismatches raise ShapeError")
{
    ad::Tape t;
    auto a = t.constant(Tensor({2, 3})), b = t.constant(Tensor({3, 2}));
    CHECK_THROWS_AS(ad::add(a, b), ShapeError);
    CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
    CHECK_THROWS_AS(ad::slice_time(a, 2, 5), ShapeError);
}

TEST_CASE("gradient checker detects a wrong backward")
{
    Tensor x = Tensor::vector({0.3, -0.7});
    x.set_requires_grad(true);
    auto broken = [&](ad::Tape& t) {
        ad::Var v = t.leaf(x);
        Tensor out = Tensor::scalar(v.value()[0] * v.value()[0] + v.value()[1]);
        return t.record("broken", std::move(out), {v.id}, [](ad::Tape& tape, std::size_t self) {
            auto g = tape.grad(self)[0];
            auto dx = tape.grad_mut(tape.inputs(self)[0]);
            dx[0] += g * 1.0;  // should be 2 x0
            dx[1] += g;
        });
    };
    CHECK(ad::finite_diff_check(broken, {&x}).max_rel_error > 0.1);
}

TEST_CASE("rng streams are deterministic and distinct")
{
    Rng a(5), b(5), c(6);
    for (int i = 0; i < 10; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(a.next() != c.next());
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));
    Rng r(9);
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / n) < 0.05);
    CHECK(std::abs(s2 / n - 1.0) < 0.05);
    for (int i = 0; i < 100; ++i) CHECK(r.below(7) < 7);
}

TEST_CASE("key-value configuration")
{
    const auto cfg = KeyValueConfig::parse("# comment\nsteps = 12\nlr = 1e-3\nlist = 1, 2,3\nfloor = -inf\n", "t.cfg");
    CHECK(cfg.get_int("steps", 0) == 12);
    CHECK(cfg.get_double("lr", 0) == 1e-3);
    CHECK(cfg.get_ints("list", {}) == std::vector<std::int64_t>{1, 2, 3});
    CHECK(std::isinf(cfg.get_double("floor", 0)));
    CHECK(cfg.get_int("absent", 7) == 7);
    CHECK_THROWS_AS(cfg.reject_unknown({"steps"}), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("n = abc\n").get_int("n", 0), ConfigError);
    const auto flags = KeyValueConfig::parse("a = true\nb = 0\nc = yes\n");
    CHECK(flags.get_bool("a", false));
    CHECK_FALSE(flags.get_bool("b", true));
    CHECK(flags.get_bool("absent", true));
    CHECK_THROWS_AS(flags.get_bool("c", false), ConfigError);
}

TEST_CASE("byte reader detects truncation")
{
    detail::ByteWriter w;
    w.put<std::uint32_t>(0xdeadbeef);
    w.put<double>(-2.5);
    w.u32_string("abc");
    detail::ByteReader r(w.str(), "buf");
    CHECK(r.get<std::uint32_t>() == 0xdeadbeef);
    CHECK(r.get<double>() == -2.5);
    CHECK(r.u32_string() == "abc");
    CHECK(r.at_end());
    detail::ByteReader short_read(std::string_view(w.str()).substr(0, 6), "short");
    short_read.get<std::uint32_t>();
    CHECK_THROWS_AS(short_read.get<double>(), IoError);
}

TEST_CASE("fft matches a direct DFT and inverts")
{
    const std::size_t n = 64;
    Rng rng(3);
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    auto X = x;
    fft_inplace(X);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0;
        for (std::size_t i = 0; i < n; ++i)
            acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * i % n) / double(n));
        CHECK(std::abs(acc - X[k]) < 1e-10);
    }
    fft_inplace(X, true);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(X[i] - x[i]) < 1e-12);
    std::vector<std::complex<double>> bad(12);
    CHECK_THROWS(fft_inplace(bad));
    CHECK(is_power_of_two(1024));
    CHECK_FALSE(is_power_of_two(1000));
}

TEST_CASE("gradient checker skips probes that straddle a kink")
{
    Tensor x = Tensor::vector({2e-6, 0.5, -0.5});
    const auto r = ad::finite_diff_check([&](ad::Tape& t) { return ad::sum(ad::relu(t.leaf(x))); }, {&x});
    CHECK(r.coordinates == 3);
    CHECK(r.nonsmooth == 1);
    CHECK(r.max_rel_error < 1e-9);
}
