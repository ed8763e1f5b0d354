#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pimnet/eval.hpp"

namespace pimnet::eval {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string open(double w, double h, const std::string& title)
{
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           "<text x=\"" + num(w / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
           "</text>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle")
{
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(s) +
           "</text>\n";
}

// Blue (low) to yellow (high).
std::string colour(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(40 + 215 * t));
    const int g = static_cast<int>(std::lround(40 + 190 * t));
    const int b = static_cast<int>(std::lround(160 - 120 * t));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

std::string heatmap_svg(const HeatmapGrid& g, const std::string& title)
{
    const double cell = 28, left = 70, top = 40;
    const double w = left + cell * static_cast<double>(g.lengths.size()) + 90;
    const double h = top + cell * static_cast<double>(g.starts.size()) + 50;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& row : g.values)
        for (const auto& v : row)
            if (v && std::isfinite(*v)) {
                lo = std::min(lo, *v);
                hi = std::max(hi, *v);
            }
    const double span = hi > lo ? hi - lo : 1.0;
    std::string s = open(w, h, title);
    for (std::size_t i = 0; i < g.starts.size(); ++i) {
        const double y = top + cell * static_cast<double>(i);
        s += text(left - 6, y + cell * 0.65, std::to_string(g.starts[i]), "end");
        for (std::size_t j = 0; j < g.lengths.size(); ++j) {
            const double x = left + cell * static_cast<double>(j);
            const auto& v = g.values[i][j];
            const std::string fill = !v ? "#dddddd" : std::isfinite(*v) ? colour((*v - lo) / span) : colour(1.0);
            s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
                 "\" fill=\"" + fill + "\"><title>start " + std::to_string(g.starts[i]) + ", length " +
                 std::to_string(g.lengths[j]) + (v ? ": " + num(*v) + " dB" : ": n/a") + "</title></rect>\n";
        }
    }
    const double base = top + cell * static_cast<double>(g.starts.size());
    for (std::size_t j = 0; j < g.lengths.size(); ++j)
        s += text(left + cell * (static_cast<double>(j) + 0.5), base + 14, std::to_string(g.lengths[j]));
    s += text(left + cell * static_cast<double>(g.lengths.size()) / 2, base + 32, "segment length");
    s += text(14, top - 8, "start", "start");
    if (std::isfinite(lo)) {
        const double lx = left + cell * static_cast<double>(g.lengths.size()) + 20;
        s += "<rect x=\"" + num(lx) + "\" y=\"" + num(top) + "\" width=\"14\" height=\"14\" fill=\"" + colour(1) +
             "\"/>\n" + text(lx + 18, top + 11, num(hi) + " dB", "start");
        s += "<rect x=\"" + num(lx) + "\" y=\"" + num(top + 20) + "\" width=\"14\" height=\"14\" fill=\"" +
             colour(0) + "\"/>\n" + text(lx + 18, top + 31, num(lo) + " dB", "start");
    }
    return s + "</svg>\n";
}

std::string bar_svg(const std::vector<std::string>& labels, const std::vector<double>& before,
                    const std::vector<double>& after, const std::string& title)
{
    const double group = 40, left = 60, top = 40, plot_h = 220;
    const double w = left + group * static_cast<double>(labels.size()) + 130, h = top + plot_h + 40;
    double lo = 0.0, hi = 0.0;
    for (const auto* v : {&before, &after})
        for (double d : *v)
            if (std::isfinite(d)) {
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
    const double span = hi > lo ? hi - lo : 1.0;
    auto y_of = [&](double v) { return top + plot_h * (hi - v) / span; };
    std::string s = open(w, h, title);
    s += "<line x1=\"" + num(left) + "\" x2=\"" + num(w - 130) + "\" y1=\"" + num(y_of(0)) + "\" y2=\"" +
         num(y_of(0)) + "\" stroke=\"black\"/>\n";
    s += text(left - 6, top + 4, num(hi), "end") + text(left - 6, top + plot_h, num(lo), "end");
    auto bar = [&](double x, double v, const char* fill) {
        if (!std::isfinite(v)) return std::string();
        const double y0 = y_of(0), y1 = y_of(v);
        return "<rect x=\"" + num(x) + "\" y=\"" + num(std::min(y0, y1)) + "\" width=\"14\" height=\"" +
               num(std::abs(y1 - y0)) + "\" fill=\"" + fill + "\"/>\n";
    };
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double x = left + group * static_cast<double>(i) + 5;
        s += bar(x, i < before.size() ? before[i] : NAN, "#4060c0");
        s += bar(x + 15, i < after.size() ? after[i] : NAN, "#e08030");
        s += text(x + 15, top + plot_h + 16, labels[i]);
    }
    const double lx = w - 120;
    s += "<rect x=\"" + num(lx) + "\" y=\"" + num(top) + "\" width=\"12\" height=\"12\" fill=\"#4060c0\"/>\n" +
         text(lx + 16, top + 10, "before (dB)", "start");
    s += "<rect x=\"" + num(lx) + "\" y=\"" + num(top + 18) + "\" width=\"12\" height=\"12\" fill=\"#e08030\"/>\n" +
         text(lx + 16, top + 28, "after (dB)", "start");
    return s + "</svg>\n";
}

std::string line_svg(const std::vector<Series>& series, const std::string& title)
{
    static const char* palette[] = {"#4060c0", "#e08030", "#30a050", "#c03040"};
    const double left = 60, top = 40, plot_w = 640, plot_h = 240;
    std::string s = open(left + plot_w + 140, top + plot_h + 40, title);
    double lo = INFINITY, hi = -INFINITY;
    std::size_t n = 0;
    for (const auto& sr : series) {
        n = std::max(n, sr.values.size());
        for (double v : sr.values)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    const double span = hi > lo ? hi - lo : 1.0;
    s += text(left - 6, top + 4, num(hi), "end") + text(left - 6, top + plot_h, num(lo), "end");
    s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
         num(plot_h) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& v = series[k].values;
        const char* c = palette[k % 4];
        std::string pts;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) continue;
            const double x = left + plot_w * (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
            const double y = top + plot_h * (hi - v[i]) / span;
            pts += num(x) + ',' + num(y) + ' ';
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1\" points=\"" + pts +
             "\"/>\n";
        const double ly = top + 10 + 18 * static_cast<double>(k);
        s += "<rect x=\"" + num(left + plot_w + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"3\" fill=\"" +
             c + "\"/>\n" + text(left + plot_w + 30, ly - 4, series[k].name, "start");
    }
    return s + "</svg>\n";
}

} // namespace pimnet::eval
