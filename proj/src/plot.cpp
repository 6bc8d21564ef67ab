#include "nlps/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nlps::plot {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::size_t common_length(const std::vector<NamedCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("plot: no curves");
  const std::size_t len = curves.front().curve.mean.size();
  for (const auto& c : curves) {
    if (c.curve.mean.size() != len || c.curve.lower.size() != len || c.curve.upper.size() != len)
      throw std::invalid_argument("plot: curves differ in length");
    if (c.label.find_first_of(",\n\r\"") != std::string::npos)
      throw std::invalid_argument("plot: label '" + c.label + "' contains CSV metacharacters");
  }
  return len;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string to_csv(const std::vector<NamedCurve>& curves) {
  const std::size_t len = common_length(curves);
  std::string out = "step";
  for (const auto& c : curves) out += "," + c.label + "_mean," + c.label + "_lo," + c.label + "_hi";
  out += '\n';
  for (std::size_t i = 0; i < len; ++i) {
    out += std::to_string(i + 2);
    for (const auto& c : curves) {
      out += ',' + fmt(c.curve.mean[i]);
      out += ',' + fmt(c.curve.lower[i]);
      out += ',' + fmt(c.curve.upper[i]);
    }
    out += '\n';
  }
  return out;
}

std::string to_svg(const std::vector<NamedCurve>& curves, const std::string& title) {
  const std::size_t len = common_length(curves);
  const double width = 720, height = 440, left = 70, right = 170, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;

  double ymax = 0.0;
  for (const auto& c : curves)
    for (double v : c.curve.upper)
      if (std::isfinite(v)) ymax = std::max(ymax, v);
  if (ymax <= 0.0) ymax = 1.0;
  const double xmax = static_cast<double>(std::max<std::size_t>(len, 2) - 1);

  auto px = [&](std::size_t i) { return left + pw * static_cast<double>(i) / xmax; };
  auto py = [&](double v) { return top + ph * (1.0 - v / ymax); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width) + "\" height=\"" +
       fixed(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(left) + "\" y=\"24\" font-size=\"15\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(top + ph) + "\" x2=\"" + fixed(left + pw) +
       "\" y2=\"" + fixed(top + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(top) + "\" x2=\"" + fixed(left) +
       "\" y2=\"" + fixed(top + ph) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    s += "<text x=\"" + fixed(left - 6) + "\" y=\"" + fixed(py(v) + 4) +
         "\" text-anchor=\"end\">" + fixed(v) + "</text>\n";
    const std::size_t i = static_cast<std::size_t>(std::llround(xmax * k / 4.0));
    s += "<text x=\"" + fixed(px(i)) + "\" y=\"" + fixed(top + ph + 18) +
         "\" text-anchor=\"middle\">" + std::to_string(i + 2) + "</text>\n";
  }
  s += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(height - 10) +
       "\" text-anchor=\"middle\">time step</text>\n";
  s += "<text transform=\"translate(16," + fixed(top + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">cumulative regret</text>\n";

  // Thin long curves to at most ~600 points.
  const std::size_t stride = std::max<std::size_t>(1, len / 600);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < len; i += stride) idx.push_back(i);
  if (idx.empty() || idx.back() != len - 1) idx.push_back(len - 1);

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& cv = curves[c].curve;
    const char* color = kPalette[c % std::size(kPalette)];
    std::string band, line;
    for (std::size_t i : idx) band += fixed(px(i)) + "," + fixed(py(cv.upper[i])) + " ";
    for (auto it = idx.rbegin(); it != idx.rend(); ++it)
      band += fixed(px(*it)) + "," + fixed(py(cv.lower[*it])) + " ";
    for (std::size_t i : idx) line += fixed(px(i)) + "," + fixed(py(cv.mean[i])) + " ";
    s += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(c) + 8;
    s += "<line x1=\"" + fixed(left + pw + 12) + "\" y1=\"" + fixed(ly) + "\" x2=\"" +
         fixed(left + pw + 32) + "\" y2=\"" + fixed(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"3\"/>\n";
    s += "<text class=\"legend\" x=\"" + fixed(left + pw + 38) + "\" y=\"" + fixed(ly + 4) + "\">" +
         escape(curves[c].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void write_plot(const std::filesystem::path& prefix, const std::vector<NamedCurve>& curves,
                const std::string& title) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
  };
  std::filesystem::path csv = prefix, svg = prefix;
  csv += ".csv";
  svg += ".svg";
  write(csv, to_csv(curves));
  write(svg, to_svg(curves, title));
}

}  // namespace nlps::plot
