#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pimnet/errors.hpp"
#include "pimnet/layers.hpp"

namespace pimnet::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;
using View = Eigen::Map<RowMat, 0, Strided>;
using ConstView = Eigen::Map<const RowMat, 0, Strided>;

std::string describe(const ConvSpec& s)
{
    return to_string(s.kind) + "(c_in=" + std::to_string(s.c_in) + ", c_out=" + std::to_string(s.c_out) +
           ", k=" + std::to_string(s.k) + ", r=" + std::to_string(s.dilation) + ")";
}

// Standard-conv tap kk as a contiguous [c_out, c_in] matrix.
RowMat standard_tap(const ConvSpec& s, const double* w, std::size_t kk)
{
    RowMat m(s.c_out, s.c_in);
    for (std::size_t o = 0; o < s.c_out; ++o)
        for (std::size_t i = 0; i < s.c_in; ++i) m(o, i) = w[(o * s.c_in + i) * s.k + kk];
    return m;
}

// Valid (unpadded) convolution of x[c_in, t_in] into y[c_out, t_out].
void forward_valid(const ConvSpec& s, const double* x, std::size_t t_in, const double* w, const double* b, double* y)
{
    const std::size_t t_out = t_in - (s.k - 1) * s.dilation;
    View Y(y, s.c_out, t_out, Strided(t_out));
    Y.setZero();
    switch (s.kind) {
    case ConvKind::standard:
        for (std::size_t kk = 0; kk < s.k; ++kk) {
            ConstView X(x + kk * s.dilation, s.c_in, t_out, Strided(t_in));
            Y.noalias() += standard_tap(s, w, kk) * X;
        }
        break;
    case ConvKind::depthwise:
        for (std::size_t c = 0; c < s.c_in; ++c) {
            double* yc = y + c * t_out;
            const double* xc = x + c * t_in;
            for (std::size_t kk = 0; kk < s.k; ++kk) {
                const double wk = w[c * s.k + kk];
                const double* xs = xc + kk * s.dilation;
                for (std::size_t i = 0; i < t_out; ++i) yc[i] += wk * xs[i];
            }
        }
        break;
    case ConvKind::pointwise: {
        Eigen::Map<const RowMat> W(w, s.c_out, s.c_in);
        ConstView X(x, s.c_in, t_out, Strided(t_in));
        Y.noalias() += W * X;
        break;
    }
    }
    if (b)
        for (std::size_t c = 0; c < s.c_out; ++c) Y.row(c).array() += b[c];
}

// Accumulates gradients of the valid convolution given dy[c_out, t_out].
void backward_valid(const ConvSpec& s, const double* x, std::size_t t_in, const double* w, const double* dy,
                    double* dx, double* dw, double* db)
{
    const std::size_t t_out = t_in - (s.k - 1) * s.dilation;
    ConstView DY(dy, s.c_out, t_out, Strided(t_out));
    if (db)
        for (std::size_t c = 0; c < s.c_out; ++c) db[c] += DY.row(c).sum();
    switch (s.kind) {
    case ConvKind::standard:
        for (std::size_t kk = 0; kk < s.k; ++kk) {
            ConstView X(x + kk * s.dilation, s.c_in, t_out, Strided(t_in));
            if (dw) {
                RowMat g = DY * X.transpose();
                for (std::size_t o = 0; o < s.c_out; ++o)
                    for (std::size_t i = 0; i < s.c_in; ++i) dw[(o * s.c_in + i) * s.k + kk] += g(o, i);
            }
            if (dx) {
                View DX(dx + kk * s.dilation, s.c_in, t_out, Strided(t_in));
                DX.noalias() += standard_tap(s, w, kk).transpose() * DY;
            }
        }
        break;
    case ConvKind::depthwise:
        for (std::size_t c = 0; c < s.c_in; ++c) {
            const double* gc = dy + c * t_out;
            const double* xc = x + c * t_in;
            for (std::size_t kk = 0; kk < s.k; ++kk) {
                const std::size_t off = kk * s.dilation;
                if (dw) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < t_out; ++i) acc += gc[i] * xc[off + i];
                    dw[c * s.k + kk] += acc;
                }
                if (dx) {
                    const double wk = w[c * s.k + kk];
                    double* dxc = dx + c * t_in + off;
                    for (std::size_t i = 0; i < t_out; ++i) dxc[i] += wk * gc[i];
                }
            }
        }
        break;
    case ConvKind::pointwise: {
        ConstView X(x, s.c_in, t_out, Strided(t_in));
        if (dw) Eigen::Map<RowMat>(dw, s.c_out, s.c_in).noalias() += DY * X.transpose();
        if (dx) {
            View DX(dx, s.c_in, t_out, Strided(t_in));
            DX.noalias() += Eigen::Map<const RowMat>(w, s.c_out, s.c_in).transpose() * DY;
        }
        break;
    }
    }
}

std::size_t left_pad(const ConvSpec& s)
{
    return s.padding == Padding::zero_symmetric ? (s.k - 1) * s.dilation / 2 : 0;
}

std::size_t total_pad(const ConvSpec& s) { return s.padding == Padding::zero_symmetric ? (s.k - 1) * s.dilation : 0; }

} // namespace

std::string to_string(ConvKind kind)
{
    switch (kind) {
    case ConvKind::standard: return "standard";
    case ConvKind::depthwise: return "depthwise";
    case ConvKind::pointwise: return "pointwise";
    }
    return "?";
}

ConvKind conv_kind_from_string(const std::string& s)
{
    if (s == "standard") return ConvKind::standard;
    if (s == "depthwise") return ConvKind::depthwise;
    if (s == "pointwise") return ConvKind::pointwise;
    throw ConfigError("unknown convolution kind '" + s + "'");
}

void ConvSpec::validate() const
{
    if (c_in == 0 || c_out == 0 || k == 0 || dilation == 0)
        throw ShapeError("conv spec has a zero dimension: " + describe(*this));
    if (kind == ConvKind::depthwise && c_out != c_in)
        throw ShapeError("depthwise conv requires c_out == c_in: " + describe(*this));
    if (kind == ConvKind::pointwise && (k != 1 || dilation != 1))
        throw ShapeError("pointwise conv requires k == 1 and r == 1: " + describe(*this));
}

Shape ConvSpec::weight_shape() const
{
    switch (kind) {
    case ConvKind::standard: return {c_out, c_in, k};
    case ConvKind::depthwise: return {c_in, k};
    case ConvKind::pointwise: return {c_out, c_in};
    }
    return {};
}

std::size_t ConvSpec::weight_count() const { return shape_numel(weight_shape()); }

std::size_t ConvSpec::output_length(std::size_t input_length) const
{
    if (padding == Padding::zero_symmetric) return input_length;
    const std::size_t span = (k - 1) * dilation;
    if (input_length <= span)
        throw ShapeError("conv input length " + std::to_string(input_length) + " too short for kernel span " +
                         std::to_string(span + 1) + " of " + describe(*this));
    return input_length - span;
}

Var conv1d_dilated(Var x, const ConvSpec& spec, Var weight, std::optional<Var> bias)
{
    spec.validate();
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    if (xv.rank() != 2 || xv.dim(0) != spec.c_in)
        throw ShapeError("conv1d_dilated: input " + shape_str(xv.shape()) + " does not match " + describe(spec));
    if (wv.shape() != spec.weight_shape())
        throw ShapeError("conv1d_dilated: weight " + shape_str(wv.shape()) + " expected " +
                         shape_str(spec.weight_shape()) + " for " + describe(spec));
    if (bias.has_value() != spec.bias)
        throw ShapeError("conv1d_dilated: bias presence does not match " + describe(spec));
    if (bias && bias->value().shape() != Shape{spec.c_out})
        throw ShapeError("conv1d_dilated: bias " + shape_str(bias->value().shape()) + " expected [" +
                         std::to_string(spec.c_out) + "]");

    const std::size_t T = xv.dim(1);
    const std::size_t t_out = spec.output_length(T);
    const std::size_t pad_l = left_pad(spec);
    const std::size_t t_in = T + total_pad(spec);

    // Padded copy only when needed; kept for backward.
    detail::AlignedBuffer padded;
    if (pad_l || t_in != T) {
        padded.assign(spec.c_in * t_in, 0.0);
        for (std::size_t c = 0; c < spec.c_in; ++c)
            std::copy_n(xv.ptr() + c * T, T, padded.data() + c * t_in + pad_l);
    }

    Tensor y({spec.c_out, t_out});
    const double* xin = padded.empty() ? xv.ptr() : padded.data();
    forward_valid(spec, xin, t_in, wv.ptr(), bias ? bias->value().ptr() : nullptr, y.ptr());

    std::vector<std::size_t> inputs{x.id, weight.id};
    if (bias) inputs.push_back(bias->id);
    const std::size_t ix = x.id, iw = weight.id;
    const std::optional<std::size_t> ib = bias ? std::optional<std::size_t>(bias->id) : std::nullopt;
    return x.tape->record(
        "conv1d_dilated", std::move(y), std::move(inputs),
        [spec, ix, iw, ib, T, t_in, pad_l, padded = std::move(padded)](ad::Tape& t, std::size_t self) {
            const double* xin = padded.empty() ? t.value(ix).ptr() : padded.data();
            double* dw = t.requires_grad(iw) ? t.grad_mut(iw).data() : nullptr;
            double* db = (ib && t.requires_grad(*ib)) ? t.grad_mut(*ib).data() : nullptr;
            detail::AlignedBuffer dx_padded;
            double* dx = nullptr;
            if (t.requires_grad(ix)) {
                if (padded.empty()) {
                    dx = t.grad_mut(ix).data();
                } else {
                    dx_padded.assign(spec.c_in * t_in, 0.0);
                    dx = dx_padded.data();
                }
            }
            backward_valid(spec, xin, t_in, t.value(iw).ptr(), t.grad(self).data(), dx, dw, db);
            if (!dx_padded.empty()) {
                auto gx = t.grad_mut(ix);
                for (std::size_t c = 0; c < spec.c_in; ++c)
                    for (std::size_t i = 0; i < T; ++i) gx[c * T + i] += dx_padded[c * t_in + pad_l + i];
            }
        });
}

Var depthwise_separable(Var x, const ConvSpec& dw, Var dw_weight, std::optional<Var> dw_bias, const ConvSpec& pw,
                        Var pw_weight, std::optional<Var> pw_bias, Activation act, double leaky_slope)
{
    if (dw.kind != ConvKind::depthwise || pw.kind != ConvKind::pointwise)
        throw ShapeError("depthwise_separable: expected a depthwise spec followed by a pointwise spec");
    if (x.value().rank() != 2 || x.value().dim(0) != dw.c_in)
        throw ShapeError("depthwise_separable: input channels " + shape_str(x.value().shape()) +
                         " do not match depthwise c_in=" + std::to_string(dw.c_in));
    if (pw.c_in != dw.c_out)
        throw ShapeError("depthwise_separable: pointwise c_in=" + std::to_string(pw.c_in) +
                         " does not match depthwise c_out=" + std::to_string(dw.c_out));
    Var h = conv1d_dilated(x, dw, dw_weight, dw_bias);
    h = activate(h, act, leaky_slope);
    return conv1d_dilated(h, pw, pw_weight, pw_bias);
}

} // namespace pimnet::nn
