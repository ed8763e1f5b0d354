#include "pimnet/metrics.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "pimnet/errors.hpp"
#include "pimnet/fft.hpp"

namespace pimnet::eval {

namespace {

void check_iq(const Tensor& t, const char* what)
{
    if (t.rank() != 2 || t.dim(0) % 2 != 0)
        throw ShapeError(std::string(what) + ": expected interleaved [2C, N], got " + shape_str(t.shape()));
}

double to_db(double ratio) { return 10.0 * std::log10(ratio); }

} // namespace

Tensor channel_power(const Tensor& iq)
{
    check_iq(iq, "channel_power");
    const std::size_t C = iq.dim(0) / 2, N = iq.dim(1);
    Tensor p({C, N});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t n = 0; n < N; ++n) {
            const double re = iq.at(2 * c, n), im = iq.at(2 * c + 1, n);
            p.at(c, n) = re * re + im * im;
        }
    return p;
}

ApeResult ape(const Tensor& meas, const Tensor& ref)
{
    if (meas.shape() != ref.shape() || meas.rank() != 2)
        throw ShapeError("ape: expected equal [C, N] shapes, got " + shape_str(meas.shape()) + " and " +
                         shape_str(ref.shape()));
    const std::size_t C = meas.dim(0), N = meas.dim(1);
    ApeResult r;
    for (std::size_t c = 0; c < C; ++c) {
        double lin = 0.0, db = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double pm = meas.at(c, i), pr = ref.at(c, i);
            lin += std::abs(pm - pr);
            if (pr > 0.0 && pm > 0.0) {
                db += std::abs(to_db(pm / pr));
                ++used;
            } else {
                ++r.exclusions;
            }
        }
        r.per_channel_linear.push_back(lin / static_cast<double>(N));
        r.per_channel_db.push_back(used ? db / static_cast<double>(used) : 0.0);
    }
    for (std::size_t c = 0; c < C; ++c) {
        r.mean_linear += r.per_channel_linear[c];
        r.mean_db += r.per_channel_db[c];
    }
    r.mean_linear /= static_cast<double>(C);
    r.mean_db /= static_cast<double>(C);
    return r;
}

std::vector<double> cancellation_depth(const Tensor& z, const Tensor& z_hat)
{
    check_iq(z, "cancellation_depth");
    if (z.shape() != z_hat.shape())
        throw ShapeError("cancellation_depth: shape mismatch " + shape_str(z.shape()) + " vs " +
                         shape_str(z_hat.shape()));
    const std::size_t C = z.dim(0) / 2, N = z.dim(1);
    std::vector<double> out;
    for (std::size_t c = 0; c < C; ++c) {
        double pz = 0.0, pr = 0.0;
        for (std::size_t row : {2 * c, 2 * c + 1})
            for (std::size_t n = 0; n < N; ++n) {
                const double v = z.at(row, n);
                const double e = v - z_hat.at(row, n);
                pz += v * v;
                pr += e * e;
            }
        out.push_back(pr == 0.0 ? kPerfectDepth : to_db(pz / pr));
    }
    return out;
}

double mean_depth(const std::vector<double>& per_channel)
{
    double acc = 0.0;
    std::size_t n = 0;
    for (double d : per_channel)
        if (std::isfinite(d)) {
            acc += d;
            ++n;
        }
    return n ? acc / static_cast<double>(n) : kPerfectDepth;
}

ApeReport make_report(const Tensor& z, const Tensor& z_hat)
{
    ApeReport r;
    const Tensor pz = channel_power(z);
    const Tensor ph = channel_power(z_hat);
    const ApeResult a = ape(ph, pz);
    r.per_channel_ape_db = a.per_channel_db;
    r.mean_ape_db = a.mean_db;
    r.per_channel_ape_linear = a.per_channel_linear;
    r.mean_ape_linear = a.mean_linear;
    r.ape_exclusions = a.exclusions;
    r.per_channel_depth_db = cancellation_depth(z, z_hat);
    r.mean_depth_db = mean_depth(r.per_channel_depth_db);
    r.n_channels = pz.dim(0);
    r.n_samples = pz.dim(1);
    for (std::size_t c = 0; c < r.n_channels; ++c) {
        double before = 0.0, after = 0.0;
        for (std::size_t row : {2 * c, 2 * c + 1})
            for (std::size_t n = 0; n < r.n_samples; ++n) {
                const double e = z.at(row, n) - z_hat.at(row, n);
                before += z.at(row, n) * z.at(row, n);
                after += e * e;
            }
        const double inv = 1.0 / static_cast<double>(r.n_samples);
        r.per_channel_pim_power_db.push_back(to_db(before * inv));
        r.per_channel_residual_power_db.push_back(to_db(after * inv));
    }
    return r;
}

std::vector<double> spectrum(const Tensor& iq, std::size_t channel)
{
    check_iq(iq, "spectrum");
    if (channel >= iq.dim(0) / 2)
        throw ShapeError("spectrum: channel " + std::to_string(channel) + " out of range");
    const std::size_t N = iq.dim(1);
    if (N < kSpectrumFrame)
        throw ShapeError("spectrum: length " + std::to_string(N) + " is shorter than one " +
                         std::to_string(kSpectrumFrame) + "-sample frame");
    const std::size_t frames = N / kSpectrumFrame;
    std::vector<double> acc(kSpectrumFrame, 0.0);
    std::vector<std::complex<double>> buf(kSpectrumFrame);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t n = 0; n < kSpectrumFrame; ++n)
            buf[n] = {iq.at(2 * channel, f * kSpectrumFrame + n), iq.at(2 * channel + 1, f * kSpectrumFrame + n)};
        fft_inplace(buf);
        for (std::size_t k = 0; k < kSpectrumFrame; ++k) acc[k] += std::norm(buf[k]);
    }
    const double scale = 1.0 / (static_cast<double>(kSpectrumFrame) * static_cast<double>(frames));
    for (auto& v : acc) v *= scale;
    return acc;
}

double bin_frequency(std::size_t k)
{
    const double n = static_cast<double>(kSpectrumFrame);
    return k < kSpectrumFrame / 2 ? static_cast<double>(k) / n : (static_cast<double>(k) - n) / n;
}

} // namespace pimnet::eval
