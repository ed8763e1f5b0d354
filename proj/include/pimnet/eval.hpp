#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pimnet/metrics.hpp"
#include "pimnet/model.hpp"

namespace pimnet::eval {

/// Model output and reference on a common time axis.
struct Aligned {
    Tensor z;      ///< reference PIM [2 rx, L - rf + 1]
    Tensor z_hat;  ///< prediction, same shape
};

/// Predicts on x[start, start + length) and pairs output i with
/// z[start + rf - 1 + i]. Only the segment's own samples are read, so the
/// first rf - 1 reference samples of the segment are not scored.
Aligned align_segment(const models::ModelParams& params, const models::ModelSpec& spec, const Tensor& x,
                      const Tensor& z, std::size_t start, std::size_t length);

/// Mean-over-channels cancellation depth on one segment.
double evaluate_segment(const models::ModelParams& params, const models::ModelSpec& spec, const Tensor& x,
                        const Tensor& z, std::size_t start, std::size_t length);

struct HeatmapGrid {
    std::vector<std::size_t> starts;
    std::vector<std::size_t> lengths;
    /// values[i][j] for (starts[i], lengths[j]); empty when the segment does not fit.
    std::vector<std::vector<std::optional<double>>> values;

    std::size_t valid_cells() const;
};

/// Parses "a:b:step" into a, a + step, ... <= b.
std::vector<std::size_t> parse_range(const std::string& text);

HeatmapGrid heatmap_sweep(const models::ModelParams& params, const models::ModelSpec& spec, const Tensor& x,
                          const Tensor& z, const std::vector<std::size_t>& starts,
                          const std::vector<std::size_t>& lengths);

/// Long format: start,length,depth_db (empty depth for absent cells).
std::string heatmap_csv(const HeatmapGrid& grid);

/// Averaged periodograms of truth, prediction and residual for one channel.
struct SpectrumReport {
    std::size_t channel = 0;
    std::vector<double> truth;
    std::vector<double> prediction;
    std::vector<double> residual;
};

SpectrumReport spectrum_report(const Aligned& a, std::size_t channel);
/// Rows in ascending frequency: freq,truth_db,prediction_db,residual_db.
std::string spectrum_csv(const SpectrumReport& r);

/// sample,z_i,z_q,zhat_i,zhat_q,residual_i,residual_q for one channel.
std::string overlay_csv(const Aligned& a, std::size_t channel, std::size_t first_sample);

/// Canonical JSON of an ApeReport.
std::string report_json(const ApeReport& r);

/// channel,pim_power_db,residual_power_db,reduction_db
std::string channel_bars_csv(const ApeReport& r);

/// Minimal SVG renderings.
std::string heatmap_svg(const HeatmapGrid& grid, const std::string& title);
std::string bar_svg(const std::vector<std::string>& labels, const std::vector<double>& before,
                    const std::vector<double>& after, const std::string& title);
struct Series {
    std::string name;
    std::vector<double> values;
};
std::string line_svg(const std::vector<Series>& series, const std::string& title);

} // namespace pimnet::eval
