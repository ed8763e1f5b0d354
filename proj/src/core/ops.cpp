#include "pimnet/ops.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "pimnet/errors.hpp"

namespace pimnet::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same(const char* op, Var a, Var b)
{
    if (a.tape != b.tape) throw std::logic_error(std::string(op) + ": operands on different tapes");
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// y = f(x) elementwise with dy/dx = df(x, y).
template <class F, class DF>
Var unary(const char* op, Var a, F f, DF df)
{
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    const std::size_t ia = a.id;
    return a.tape->record(op, std::move(y), {ia}, [ia, df](Tape& t, std::size_t self) {
        const auto& xv = t.value(ia);
        const auto& yv = t.value(self);
        auto g = t.grad(self);
        auto ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * df(xv[i], yv[i]);
    });
}

} // namespace

Var add(Var a, Var b)
{
    require_same("add", a, b);
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("add", std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        for (auto in : {ia, ib}) {
            if (!t.requires_grad(in)) continue;
            auto gi = t.grad_mut(in);
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
        }
    });
}

Var sub(Var a, Var b)
{
    require_same("sub", a, b);
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("sub", std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        if (t.requires_grad(ia)) {
            auto ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_mut(ib);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b)
{
    require_same("mul", a, b);
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("mul", std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& xa = t.value(ia);
        const auto& xb = t.value(ib);
        if (t.requires_grad(ia)) {
            auto ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * xb[i];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_mut(ib);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * xa[i];
        }
    });
}

Var scale(Var a, double factor)
{
    return unary(
        "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, Var s)
{
    if (s.value().size() != 1)
        throw ShapeError("add_scalar: second operand must have one element, got " + shape_str(s.shape()));
    const Tensor& x = a.value();
    const double c = s.value()[0];
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + c;
    const std::size_t ia = a.id, is = s.id;
    return a.tape->record("add_scalar", std::move(y), {ia, is}, [ia, is](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        if (t.requires_grad(ia)) {
            auto ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(is)) {
            double acc = 0.0;
            for (double v : g) acc += v;
            t.grad_mut(is)[0] += acc;
        }
    });
}

Var add_channel_bias(Var x, Var bias)
{
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(0))
        throw ShapeError("add_channel_bias: expected x[C,T] and bias[C], got " + shape_str(xv.shape()) + " and " +
                         shape_str(bv.shape()));
    const std::size_t C = xv.dim(0), T = xv.dim(1);
    Tensor y(xv.shape());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < T; ++i) y[c * T + i] = xv[c * T + i] + bv[c];
    const std::size_t ix = x.id, ib = bias.id;
    return x.tape->record("add_channel_bias", std::move(y), {ix, ib}, [ix, ib, C, T](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        if (t.requires_grad(ix)) {
            auto gx = t.grad_mut(ix);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_mut(ib);
            for (std::size_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < T; ++i) acc += g[c * T + i];
                gb[c] += acc;
            }
        }
    });
}

Var matmul(Var a, Var b)
{
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor y({m, n});
    MatMap(y.ptr(), m, n).noalias() = ConstMatMap(av.ptr(), m, k) * ConstMatMap(bv.ptr(), k, n);
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("matmul", std::move(y), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
        ConstMatMap g(t.grad(self).data(), m, n);
        if (t.requires_grad(ia))
            MatMap(t.grad_mut(ia).data(), m, k).noalias() += g * ConstMatMap(t.value(ib).ptr(), k, n).transpose();
        if (t.requires_grad(ib))
            MatMap(t.grad_mut(ib).data(), k, n).noalias() += ConstMatMap(t.value(ia).ptr(), m, k).transpose() * g;
    });
}

Var sum(Var a)
{
    const Tensor& x = a.value();
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const std::size_t ia = a.id;
    return a.tape->record("sum", Tensor::scalar(acc), {ia}, [ia](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (auto& v : t.grad_mut(ia)) v += g;
    });
}

Var mean(Var a)
{
    const Tensor& x = a.value();
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    const std::size_t ia = a.id;
    return a.tape->record("mean", Tensor::scalar(acc * inv), {ia}, [ia, inv](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] * inv;
        for (auto& v : t.grad_mut(ia)) v += g;
    });
}

Var square(Var a)
{
    return unary(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Var a)
{
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope)
{
    return unary(
        "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var a)
{
    return unary(
        "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var centered_sigmoid(Var a)
{
    // 2*sig(x) - 1 = tanh(x/2); derivative (1 - y^2) / 2.
    return unary(
        "centered_sigmoid", a, [](double x) { return std::tanh(0.5 * x); },
        [](double, double y) { return 0.5 * (1.0 - y * y); });
}

Var slice_time(Var x, std::size_t begin, std::size_t end)
{
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || begin >= end || end > xv.dim(1))
        throw ShapeError("slice_time: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + shape_str(xv.shape()));
    const std::size_t C = xv.dim(0), T = xv.dim(1), L = end - begin;
    Tensor y({C, L});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < L; ++i) y[c * L + i] = xv[c * T + begin + i];
    const std::size_t ix = x.id;
    return x.tape->record("slice_time", std::move(y), {ix}, [ix, C, T, L, begin](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        auto gx = t.grad_mut(ix);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < L; ++i) gx[c * T + begin + i] += g[c * L + i];
    });
}

Var dot(Var a, Var b)
{
    require_same("dot", a, b);
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * z[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("dot", Tensor::scalar(acc), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        if (t.requires_grad(ia)) {
            auto ga = t.grad_mut(ia);
            const auto& xb = t.value(ib);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * xb[i];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_mut(ib);
            const auto& xa = t.value(ia);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * xa[i];
        }
    });
}

} // namespace pimnet::ad
