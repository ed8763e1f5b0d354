#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/eval.hpp"

namespace pimnet::eval {

namespace {

Tensor slice(const Tensor& t, std::size_t begin, std::size_t end)
{
    const std::size_t C = t.dim(0), N = t.dim(1), L = end - begin;
    Tensor out({C, L});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < L; ++i) out.at(c, i) = t[c * N + begin + i];
    return out;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double db(double p) { return 10.0 * std::log10(p); }

nlohmann::json finite_or_null(double v)
{
    if (std::isfinite(v)) return v;
    return nullptr;
}

nlohmann::json list(const std::vector<double>& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (double d : v) out.push_back(finite_or_null(d));
    return out;
}

} // namespace

Aligned align_segment(const models::ModelParams& params, const models::ModelSpec& spec, const Tensor& x,
                      const Tensor& z, std::size_t start, std::size_t length)
{
    if (x.rank() != 2 || z.rank() != 2 || x.dim(1) != z.dim(1))
        throw ShapeError("evaluation: x and z must share the time axis, got " + shape_str(x.shape()) + " and " +
                         shape_str(z.shape()));
    const std::size_t rf = models::receptive_field(spec);
    if (start + length > x.dim(1))
        throw ShapeError("evaluation: segment [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds signal length " + std::to_string(x.dim(1)));
    if (length < rf)
        throw ShapeError("evaluation: segment length " + std::to_string(length) + " is below the receptive field " +
                         std::to_string(rf));
    Aligned a;
    a.z_hat = models::predict(params, spec, slice(x, start, start + length));
    a.z = slice(z, start + rf - 1, start + length);
    return a;
}

double evaluate_segment(const models::ModelParams& params, const models::ModelSpec& spec, const Tensor& x,
                        const Tensor& z, std::size_t start, std::size_t length)
{
    const Aligned a = align_segment(params, spec, x, z, start, length);
    return mean_depth(cancellation_depth(a.z, a.z_hat));
}

std::size_t HeatmapGrid::valid_cells() const
{
    std::size_t n = 0;
    for (const auto& row : values)
        for (const auto& v : row) n += v.has_value();
    return n;
}

std::vector<std::size_t> parse_range(const std::string& text)
{
    long long a = 0, b = 0, step = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lld:%lld:%lld%c", &a, &b, &step, &tail) != 3)
        throw ConfigError("range '" + text + "' is not of the form a:b:step");
    if (a < 0 || b < a || step <= 0)
        throw ConfigError("range '" + text + "' needs 0 <= a <= b and step > 0");
    std::vector<std::size_t> out;
    for (long long v = a; v <= b; v += step) out.push_back(static_cast<std::size_t>(v));
    return out;
}

HeatmapGrid heatmap_sweep(const models::ModelParams& params, const models::ModelSpec& spec, const Tensor& x,
                          const Tensor& z, const std::vector<std::size_t>& starts,
                          const std::vector<std::size_t>& lengths)
{
    const std::size_t N = x.dim(1), rf = models::receptive_field(spec);
    HeatmapGrid g{starts, lengths, {}};
    for (std::size_t s : starts) {
        auto& row = g.values.emplace_back();
        for (std::size_t l : lengths) {
            if (l >= rf && s + l <= N)
                row.emplace_back(evaluate_segment(params, spec, x, z, s, l));
            else
                row.emplace_back(std::nullopt);
        }
    }
    if (g.valid_cells() == 0)
        throw ConfigError("heatmap sweep: no (start, length) cell fits in the " + std::to_string(N) +
                          "-sample test set");
    return g;
}

std::string heatmap_csv(const HeatmapGrid& g)
{
    std::string out = "start,length,depth_db\n";
    for (std::size_t i = 0; i < g.starts.size(); ++i)
        for (std::size_t j = 0; j < g.lengths.size(); ++j) {
            out += std::to_string(g.starts[i]) + ',' + std::to_string(g.lengths[j]) + ',';
            if (g.values[i][j]) out += fmt(*g.values[i][j]);
            out += '\n';
        }
    return out;
}

SpectrumReport spectrum_report(const Aligned& a, std::size_t channel)
{
    Tensor residual = a.z;
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= a.z_hat[i];
    return {channel, spectrum(a.z, channel), spectrum(a.z_hat, channel), spectrum(residual, channel)};
}

std::string spectrum_csv(const SpectrumReport& r)
{
    std::string out = "freq,truth_db,prediction_db,residual_db\n";
    const std::size_t n = r.truth.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + n / 2) % n;  // fftshift
        out += fmt(bin_frequency(k)) + ',' + fmt(db(r.truth[k])) + ',' + fmt(db(r.prediction[k])) + ',' +
               fmt(db(r.residual[k])) + '\n';
    }
    return out;
}

std::string overlay_csv(const Aligned& a, std::size_t channel, std::size_t first_sample)
{
    if (channel >= a.z.dim(0) / 2) throw ConfigError("channel " + std::to_string(channel) + " out of range");
    std::string out = "sample,z_i,z_q,zhat_i,zhat_q,residual_i,residual_q\n";
    const std::size_t I = 2 * channel, Q = I + 1;
    for (std::size_t n = 0; n < a.z.dim(1); ++n) {
        const double zi = a.z.at(I, n), zq = a.z.at(Q, n), hi = a.z_hat.at(I, n), hq = a.z_hat.at(Q, n);
        out += std::to_string(first_sample + n) + ',' + fmt(zi) + ',' + fmt(zq) + ',' + fmt(hi) + ',' + fmt(hq) +
               ',' + fmt(zi - hi) + ',' + fmt(zq - hq) + '\n';
    }
    return out;
}

std::string report_json(const ApeReport& r)
{
    nlohmann::json j{
        {"n_samples", r.n_samples},
        {"n_channels", r.n_channels},
        {"per_channel_ape_db", list(r.per_channel_ape_db)},
        {"mean_ape_db", finite_or_null(r.mean_ape_db)},
        {"per_channel_ape_linear", list(r.per_channel_ape_linear)},
        {"mean_ape_linear", finite_or_null(r.mean_ape_linear)},
        {"ape_exclusions", r.ape_exclusions},
        {"per_channel_depth_db", list(r.per_channel_depth_db)},
        {"mean_depth_db", finite_or_null(r.mean_depth_db)},
        {"perfect_channels", nlohmann::json::array()},
        {"per_channel_pim_power_db", list(r.per_channel_pim_power_db)},
        {"per_channel_residual_power_db", list(r.per_channel_residual_power_db)},
    };
    for (std::size_t c = 0; c < r.per_channel_depth_db.size(); ++c)
        if (std::isinf(r.per_channel_depth_db[c]) && r.per_channel_depth_db[c] > 0) j["perfect_channels"].push_back(c);
    return j.dump(2) + "\n";
}

std::string channel_bars_csv(const ApeReport& r)
{
    std::string out = "channel,pim_power_db,residual_power_db,reduction_db\n";
    for (std::size_t c = 0; c < r.n_channels; ++c)
        out += std::to_string(c) + ',' + fmt(r.per_channel_pim_power_db[c]) + ',' +
               fmt(r.per_channel_residual_power_db[c]) + ',' + fmt(r.per_channel_depth_db[c]) + '\n';
    return out;
}

} // namespace pimnet::eval
