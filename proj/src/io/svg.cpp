#include "lcps/io/svg.hpp"

#include <algorithm>
#include <cstdio>

namespace lcps {

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

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

} // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series)
{
    const double w = 640, h = 400, left = 60, right = 180, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    std::size_t points = 1;
    for (const auto& s : series)
        points = std::max(points, s.y.size());
    auto sx = [&](std::size_t k) { return left + (points == 1 ? pw / 2 : pw * static_cast<double>(k) / (points - 1)); };
    auto sy = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

    std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h)
                    + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + num(w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = t / 5.0;
        o += "<line x1=\"" + num(left) + "\" x2=\"" + num(left + pw) + "\" y1=\"" + num(sy(v)) + "\" y2=\"" + num(sy(v))
             + "\" stroke=\"#ddd\"/>\n";
        o += "<text x=\"" + num(left - 6) + "\" y=\"" + num(sy(v) + 4) + "\" text-anchor=\"end\">" + num(v)
             + "</text>\n";
    }
    for (std::size_t k = 0; k < points; ++k)
        o += "<text x=\"" + num(sx(k)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">"
             + std::to_string(k + 1) + "</text>\n";
    o += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph)
         + "\" fill=\"none\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(h - 10) + "\" text-anchor=\"middle\">" + escape(x_label)
         + "</text>\n";
    o += "<text transform=\"translate(16," + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">"
         + escape(y_label) + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const std::string colour = kPalette[i % std::size(kPalette)];
        std::string pts;
        for (std::size_t k = 0; k < s.y.size(); ++k)
            pts += (k ? " " : "") + num(sx(k)) + "," + num(sy(s.y[k]));
        if (s.y.size() > 1)
            o += "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        for (std::size_t k = 0; k < s.y.size(); ++k)
            o += "<circle cx=\"" + num(sx(k)) + "\" cy=\"" + num(sy(s.y[k])) + "\" r=\"3\" fill=\"" + colour + "\"/>\n";
        const double ly = top + 10 + 18 * static_cast<double>(i);
        o += "<line x1=\"" + num(left + pw + 12) + "\" x2=\"" + num(left + pw + 32) + "\" y1=\"" + num(ly) + "\" y2=\""
             + num(ly) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
        o += "<text x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.label) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

} // namespace lcps
