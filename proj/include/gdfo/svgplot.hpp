#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gdfo/errors.hpp"

namespace gdfo {

// Minimal SVG charts for the experiment harness: grouped bars with error
// whiskers, and a line with error whiskers. No dependencies, fixed geometry.
namespace svg {

struct Frame {
    double width = 640, height = 420;
    double left = 70, right = 20, top = 44, bottom = 52;
    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

inline std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline void begin(std::ostringstream& os, const Frame& f, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
       << f.height << "\" viewBox=\"0 0 " << f.width << " " << f.height << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << f.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"15\">"
       << title << "</text>\n";
}

inline void axes(std::ostringstream& os, const Frame& f, double y_lo, double y_hi,
                 const std::string& y_label) {
    os << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
       << f.top + f.plot_h() << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << f.left << "\" y1=\"" << f.top + f.plot_h() << "\" x2=\""
       << f.left + f.plot_w() << "\" y2=\"" << f.top + f.plot_h() << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double frac = i / 4.0;
        const double v = y_lo + frac * (y_hi - y_lo);
        const double y = f.top + f.plot_h() * (1.0 - frac);
        os << "<line x1=\"" << f.left - 4 << "\" y1=\"" << y << "\" x2=\"" << f.left << "\" y2=\""
           << y << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << f.left - 8 << "\" y=\"" << y + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(v)
           << "</text>\n";
    }
    os << "<text x=\"16\" y=\"" << f.top + f.plot_h() / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
          "transform=\"rotate(-90 16 "
       << f.top + f.plot_h() / 2 << ")\">" << y_label << "</text>\n";
}

}  // namespace svg

inline void write_bar_chart_svg(const std::string& path, const std::string& title,
                                const std::vector<std::string>& labels,
                                const std::vector<double>& means,
                                const std::vector<double>& stds, const std::string& y_label) {
    if (labels.size() != means.size() || means.size() != stds.size())
        throw ContractError("bar chart: label/mean/std sizes differ");
    svg::Frame f;
    double hi = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) hi = std::max(hi, means[i] + stds[i]);
    hi = std::max(hi * 1.05, 1e-9);
    std::ostringstream os;
    svg::begin(os, f, title);
    svg::axes(os, f, 0.0, hi, y_label);
    const double slot = f.plot_w() / static_cast<double>(labels.size());
    const double bar_w = slot * 0.6;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double cx = f.left + slot * (static_cast<double>(i) + 0.5);
        const double h = f.plot_h() * means[i] / hi;
        const double y0 = f.top + f.plot_h() - h;
        os << "<rect x=\"" << cx - bar_w / 2 << "\" y=\"" << y0 << "\" width=\"" << bar_w
           << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
        const double e_top = f.top + f.plot_h() * (1.0 - std::min(1.0, (means[i] + stds[i]) / hi));
        const double e_bot = f.top + f.plot_h() * (1.0 - std::max(0.0, (means[i] - stds[i]) / hi));
        os << "<line x1=\"" << cx << "\" y1=\"" << e_top << "\" x2=\"" << cx << "\" y2=\"" << e_bot
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << cx << "\" y=\"" << f.top + f.plot_h() + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << labels[i]
           << "</text>\n";
    }
    os << "</svg>\n";
    std::ofstream out(path);
    if (!out) throw ServiceError("cannot write plot '" + path + "'");
    out << os.str();
}

inline void write_line_chart_svg(const std::string& path, const std::string& title,
                                 const std::vector<double>& xs, const std::vector<double>& means,
                                 const std::vector<double>& stds, const std::string& x_label,
                                 const std::string& y_label) {
    if (xs.size() != means.size() || means.size() != stds.size())
        throw ContractError("line chart: x/mean/std sizes differ");
    if (xs.empty()) throw ContractError("line chart: no points");
    svg::Frame f;
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < means.size(); ++i) {
        lo = std::min(lo, means[i] - stds[i]);
        hi = std::max(hi, means[i] + stds[i]);
    }
    const double pad = std::max(1e-9, (hi - lo) * 0.1);
    lo -= pad;
    hi += pad;
    const double x_lo = xs.front(), x_hi = xs.back();
    auto px = [&](double x) {
        return f.left + f.plot_w() * (x_hi == x_lo ? 0.5 : (x - x_lo) / (x_hi - x_lo));
    };
    auto py = [&](double y) { return f.top + f.plot_h() * (1.0 - (y - lo) / (hi - lo)); };
    std::ostringstream os;
    svg::begin(os, f, title);
    svg::axes(os, f, lo, hi, y_label);
    os << "<polyline fill=\"none\" stroke=\"#4878a8\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << svg::num(px(xs[i])) << "," << svg::num(py(means[i])) << " ";
    os << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        os << "<line x1=\"" << px(xs[i]) << "\" y1=\"" << py(means[i] - stds[i]) << "\" x2=\""
           << px(xs[i]) << "\" y2=\"" << py(means[i] + stds[i]) << "\" stroke=\"black\"/>\n";
        os << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(means[i])
           << "\" r=\"3\" fill=\"#4878a8\"/>\n";
        os << "<text x=\"" << px(xs[i]) << "\" y=\"" << f.top + f.plot_h() + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << svg::num(xs[i]) << "</text>\n";
    }
    os << "<text x=\"" << f.left + f.plot_w() / 2 << "\" y=\"" << f.height - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
       << "</text>\n</svg>\n";
    std::ofstream out(path);
    if (!out) throw ServiceError("cannot write plot '" + path + "'");
    out << os.str();
}

}  // namespace gdfo
