#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "pimnet/errors.hpp"
#include "pimnet/layers.hpp"
#include "pimnet/ops.hpp"

namespace pimnet::nn {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
} // namespace

std::string to_string(Activation act)
{
    switch (act) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::centered_sigmoid: return "centered_sigmoid";
    }
    return "?";
}

Activation activation_from_string(const std::string& s)
{
    for (auto a : {Activation::none, Activation::relu, Activation::leaky_relu, Activation::sigmoid,
                   Activation::centered_sigmoid})
        if (to_string(a) == s) return a;
    throw ConfigError("unknown activation '" + s + "'");
}

Var activate(Var x, Activation act, double leaky_slope)
{
    switch (act) {
    case Activation::none: return x;
    case Activation::relu: return ad::relu(x);
    case Activation::leaky_relu: return ad::leaky_relu(x, leaky_slope);
    case Activation::sigmoid: return ad::sigmoid(x);
    case Activation::centered_sigmoid: return ad::centered_sigmoid(x);
    }
    return x;
}

Var fully_connected(Var x, Var weight, std::optional<Var> bias)
{
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    if (wv.rank() != 2 || xv.rank() < 1 || xv.rank() > 2 || xv.dim(0) != wv.dim(1))
        throw ShapeError("fully_connected: weight " + shape_str(wv.shape()) + " incompatible with input " +
                         shape_str(xv.shape()));
    const std::size_t c_out = wv.dim(0), c_in = wv.dim(1);
    if (bias && bias->value().shape() != Shape{c_out})
        throw ShapeError("fully_connected: bias " + shape_str(bias->value().shape()) + " expected [" +
                         std::to_string(c_out) + "]");
    const std::size_t T = xv.rank() == 2 ? xv.dim(1) : 1;

    Tensor y(xv.rank() == 2 ? Shape{c_out, T} : Shape{c_out});
    MatMap Y(y.ptr(), c_out, T);
    Y.noalias() = ConstMatMap(wv.ptr(), c_out, c_in) * ConstMatMap(xv.ptr(), c_in, T);
    if (bias)
        for (std::size_t o = 0; o < c_out; ++o) Y.row(o).array() += bias->value()[o];

    std::vector<std::size_t> inputs{x.id, weight.id};
    if (bias) inputs.push_back(bias->id);
    const std::size_t ix = x.id, iw = weight.id;
    const std::optional<std::size_t> ib = bias ? std::optional<std::size_t>(bias->id) : std::nullopt;
    return x.tape->record("fully_connected", std::move(y), std::move(inputs),
                          [ix, iw, ib, c_in, c_out, T](ad::Tape& t, std::size_t self) {
                              ConstMatMap G(t.grad(self).data(), c_out, T);
                              if (t.requires_grad(iw))
                                  MatMap(t.grad_mut(iw).data(), c_out, c_in).noalias() +=
                                      G * ConstMatMap(t.value(ix).ptr(), c_in, T).transpose();
                              if (t.requires_grad(ix))
                                  MatMap(t.grad_mut(ix).data(), c_in, T).noalias() +=
                                      ConstMatMap(t.value(iw).ptr(), c_out, c_in).transpose() * G;
                              if (ib && t.requires_grad(*ib)) {
                                  auto gb = t.grad_mut(*ib);
                                  for (std::size_t o = 0; o < c_out; ++o) gb[o] += G.row(o).sum();
                              }
                          });
}

void LutSpec::validate() const
{
    if (q < 2) throw ConfigError("LUT size q must be >= 2, got " + std::to_string(q));
    if (!(range > 0.0) || !std::isfinite(range))
        throw ConfigError("LUT range must be a positive finite number, got " + std::to_string(range));
}

Tensor lut_identity_table(const LutSpec& spec, std::size_t channels)
{
    spec.validate();
    const std::size_t rows = spec.per_channel ? channels : 1;
    Tensor table({rows, spec.q});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < spec.q; ++j)
            table.at(r, j) = -spec.range + 2.0 * spec.range * static_cast<double>(j) / static_cast<double>(spec.q - 1);
    return table;
}

Var lut_forward(Var x, Var table, const LutSpec& spec)
{
    spec.validate();
    const Tensor& xv = x.value();
    const Tensor& tv = table.value();
    if (xv.rank() != 2) throw ShapeError("lut_forward: expected x[C,T], got " + shape_str(xv.shape()));
    const std::size_t C = xv.dim(0), T = xv.dim(1), q = spec.q;
    const Shape expected{spec.per_channel ? C : 1, q};
    if (tv.shape() != expected)
        throw ShapeError("lut_forward: table " + shape_str(tv.shape()) + " expected " + shape_str(expected));

    const double a = spec.range;
    const double to_index = static_cast<double>(q - 1) / (2.0 * a);

    // Per element: left knot index and fractional position, saved for backward.
    std::vector<std::uint32_t> knot(C * T);
    std::vector<double> frac(C * T);
    Tensor y(xv.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double* row = tv.ptr() + (spec.per_channel ? c * q : 0);
        for (std::size_t i = 0; i < T; ++i) {
            const std::size_t e = c * T + i;
            const double xc = std::clamp(xv[e], -a, a);
            const double u = (xc + a) * to_index;
            std::size_t j = static_cast<std::size_t>(std::floor(u));
            if (j > q - 2) j = q - 2;
            const double f = u - static_cast<double>(j);
            knot[e] = static_cast<std::uint32_t>(j);
            frac[e] = f;
            y[e] = row[j] * (1.0 - f) + row[j + 1] * f;
        }
    }

    const std::size_t ix = x.id, it = table.id;
    const bool per_channel = spec.per_channel;
    return x.tape->record(
        "lut", std::move(y), {ix, it},
        [ix, it, C, T, q, a, to_index, per_channel, knot = std::move(knot), frac = std::move(frac)](ad::Tape& t,
                                                                                                   std::size_t self) {
            auto g = t.grad(self);
            const Tensor& xv = t.value(ix);
            const Tensor& tv = t.value(it);
            const bool need_x = t.requires_grad(ix);
            const bool need_t = t.requires_grad(it);
            std::span<double> gx = need_x ? t.grad_mut(ix) : std::span<double>{};
            std::span<double> gt = need_t ? t.grad_mut(it) : std::span<double>{};
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t base = per_channel ? c * q : 0;
                for (std::size_t i = 0; i < T; ++i) {
                    const std::size_t e = c * T + i;
                    const std::size_t j = knot[e];
                    if (need_t) {
                        gt[base + j] += g[e] * (1.0 - frac[e]);
                        gt[base + j + 1] += g[e] * frac[e];
                    }
                    if (need_x && xv[e] > -a && xv[e] < a)
                        gx[e] += g[e] * (tv[base + j + 1] - tv[base + j]) * to_index;
                }
            }
        });
}

void NormSpec::validate() const
{
    if (!(epsilon > 0.0)) throw ConfigError("norm epsilon must be positive");
}

Var channel_norm(Var x, Var scale, Var shift, double epsilon)
{
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("channel_norm: expected x[C,T], got " + shape_str(xv.shape()));
    const std::size_t C = xv.dim(0), T = xv.dim(1);
    if (scale.value().shape() != Shape{C} || shift.value().shape() != Shape{C})
        throw ShapeError("channel_norm: scale/shift must be [" + std::to_string(C) + "]");
    if (!(epsilon > 0.0)) throw ShapeError("channel_norm: epsilon must be positive");

    Tensor xhat(xv.shape());
    std::vector<double> inv_std(C);
    Tensor y(xv.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double* xc = xv.ptr() + c * T;
        double mu = 0.0;
        for (std::size_t i = 0; i < T; ++i) mu += xc[i];
        mu /= static_cast<double>(T);
        double var = 0.0;
        for (std::size_t i = 0; i < T; ++i) var += (xc[i] - mu) * (xc[i] - mu);
        var /= static_cast<double>(T);
        inv_std[c] = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t i = 0; i < T; ++i) {
            xhat[c * T + i] = (xc[i] - mu) * inv_std[c];
            y[c * T + i] = scale.value()[c] * xhat[c * T + i] + shift.value()[c];
        }
    }

    const std::size_t ix = x.id, is = scale.id, ib = shift.id;
    return x.tape->record(
        "channel_norm", std::move(y), {ix, is, ib},
        [ix, is, ib, C, T, xhat = std::move(xhat), inv_std = std::move(inv_std)](ad::Tape& t, std::size_t self) {
            auto g = t.grad(self);
            const Tensor& gamma = t.value(is);
            for (std::size_t c = 0; c < C; ++c) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t i = 0; i < T; ++i) {
                    sum_g += g[c * T + i];
                    sum_gx += g[c * T + i] * xhat[c * T + i];
                }
                if (t.requires_grad(is)) t.grad_mut(is)[c] += sum_gx;
                if (t.requires_grad(ib)) t.grad_mut(ib)[c] += sum_g;
                if (t.requires_grad(ix)) {
                    auto gx = t.grad_mut(ix);
                    const double n = static_cast<double>(T);
                    const double k = gamma[c] * inv_std[c] / n;
                    for (std::size_t i = 0; i < T; ++i) {
                        const std::size_t e = c * T + i;
                        gx[e] += k * (n * g[e] - sum_g - xhat[e] * sum_gx);
                    }
                }
            }
        });
}

} // namespace pimnet::nn
