#include "nounprobe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace nounprobe {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (lo == hi) lo -= 0.5, hi += 0.5;
    const double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void open_svg(std::ostream& out, double w, double h, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(w / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
}

void scatter_box(std::ostream& out, double x0, double y0, double w, double h, const std::vector<double>& xs,
                 const std::vector<double>& ys, const std::optional<std::pair<double, double>>& fit, bool ticks) {
  Range rx, ry;
  for (double v : xs) rx.add(v);
  for (double v : ys) ry.add(v);
  rx.finish();
  ry.finish();
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    out << "<circle cx=\"" << num(rx.map(xs[i], x0, x0 + w)) << "\" cy=\"" << num(ry.map(ys[i], y0 + h, y0))
        << "\" r=\"2\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
  }
  if (fit) {
    const auto [slope, icept] = *fit;
    const double ya = slope * rx.lo + icept;
    const double yb = slope * rx.hi + icept;
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(std::clamp(ry.map(ya, y0 + h, y0), y0, y0 + h))
        << "\" x2=\"" << num(x0 + w) << "\" y2=\"" << num(std::clamp(ry.map(yb, y0 + h, y0), y0, y0 + h))
        << "\" stroke=\"#d62728\"/>\n";
  }
  if (ticks) {
    out << "<text x=\"" << num(x0) << "\" y=\"" << num(y0 + h + 11) << "\">" << num(rx.lo) << "</text>\n"
        << "<text x=\"" << num(x0 + w) << "\" y=\"" << num(y0 + h + 11) << "\" text-anchor=\"end\">" << num(rx.hi)
        << "</text>\n"
        << "<text x=\"" << num(x0 - 3) << "\" y=\"" << num(y0 + h) << "\" text-anchor=\"end\">" << num(ry.lo)
        << "</text>\n"
        << "<text x=\"" << num(x0 - 3) << "\" y=\"" << num(y0 + 8) << "\" text-anchor=\"end\">" << num(ry.hi)
        << "</text>\n";
  }
}

// Blue below zero, red above, white at zero; saturates at |v| = scale.
std::string diverging(double v, double scale) {
  const double t = std::clamp(v / scale, -1.0, 1.0);
  const auto mix = [&](int full) { return static_cast<int>(std::lround(255 + (full - 255) * std::abs(t))); };
  char buf[16];
  if (t >= 0) {
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(214), mix(39), mix(40));
  } else {
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(31), mix(119), mix(180));
  }
  return buf;
}

}  // namespace

void write_scatter_svg(std::ostream& out, const std::string& title, const std::vector<ScatterPanel>& panels,
                       std::size_t columns) {
  columns = std::max<std::size_t>(1, std::min(columns, std::max<std::size_t>(1, panels.size())));
  const double cell_w = 220, cell_h = 200, pad_l = 50, pad_t = 40;
  const std::size_t nrows = (panels.size() + columns - 1) / columns;
  open_svg(out, pad_l + static_cast<double>(columns) * cell_w, pad_t + static_cast<double>(nrows) * cell_h, title);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const auto& p = panels[i];
    const double x0 = pad_l + static_cast<double>(i % columns) * cell_w;
    const double y0 = pad_t + static_cast<double>(i / columns) * cell_h;
    out << "<text x=\"" << num(x0 + 80) << "\" y=\"" << num(y0 + 4) << "\" text-anchor=\"middle\">"
        << escape(p.title) << "</text>\n";
    scatter_box(out, x0, y0 + 10, 160, 140, p.x, p.y, p.fit, true);
    out << "<text x=\"" << num(x0 + 80) << "\" y=\"" << num(y0 + 175) << "\" text-anchor=\"middle\">"
        << escape(p.x_label) << "</text>\n"
        << "<text x=\"" << num(x0 - 35) << "\" y=\"" << num(y0 + 80) << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
        << num(x0 - 35) << ' ' << num(y0 + 80) << ")\">" << escape(p.y_label) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_pairplot_svg(std::ostream& out, const std::string& title, const std::vector<std::string>& names,
                        const std::vector<std::vector<std::optional<double>>>& rows) {
  const std::size_t k = names.size();
  const double cell = 90, pad = 40;
  open_svg(out, pad + static_cast<double>(k) * cell + 10, pad + static_cast<double>(k) * cell + 10, title);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      const double x0 = pad + static_cast<double>(b) * cell;
      const double y0 = pad + static_cast<double>(a) * cell;
      if (a == b) {
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(cell - 6) << "\" height=\""
            << num(cell - 6) << "\" fill=\"#f4f4f4\" stroke=\"#444\"/>\n"
            << "<text x=\"" << num(x0 + (cell - 6) / 2) << "\" y=\"" << num(y0 + cell / 2)
            << "\" text-anchor=\"middle\" font-size=\"8\">" << escape(names[a]) << "</text>\n";
        continue;
      }
      std::vector<double> xs, ys;
      for (const auto& row : rows) {
        if (b < row.size() && a < row.size() && row[b] && row[a]) {
          xs.push_back(*row[b]);
          ys.push_back(*row[a]);
        }
      }
      scatter_box(out, x0, y0, cell - 6, cell - 6, xs, ys, std::nullopt, false);
    }
  }
  out << "</svg>\n";
}

void write_heat_grid_svg(std::ostream& out, const std::string& title, const std::vector<std::string>& row_labels,
                         const std::vector<std::string>& col_labels,
                         const std::vector<std::vector<std::optional<double>>>& values) {
  const double cw = 80, ch = 24, left = 170, top = 110;
  double scale = 0;
  for (const auto& row : values) {
    for (const auto& v : row) {
      if (v && std::isfinite(*v)) scale = std::max(scale, std::abs(*v));
    }
  }
  if (scale == 0) scale = 1;
  open_svg(out, left + static_cast<double>(col_labels.size()) * cw + 10,
           top + static_cast<double>(row_labels.size()) * ch + 10, title);
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    const double x = left + (static_cast<double>(c) + 0.5) * cw;
    out << "<text x=\"" << num(x) << "\" y=\"" << num(top - 6) << "\" transform=\"rotate(-45 " << num(x) << ' '
        << num(top - 6) << ")\">" << escape(col_labels[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    const double y = top + static_cast<double>(r) * ch;
    out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + ch * 0.65) << "\" text-anchor=\"end\">"
        << escape(row_labels[r]) << "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const double x = left + static_cast<double>(c) * cw;
      const auto& v = r < values.size() && c < values[r].size() ? values[r][c] : std::optional<double>{};
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cw) << "\" height=\"" << num(ch)
          << "\" stroke=\"white\" fill=\"" << (v ? diverging(*v, scale) : std::string("#cccccc")) << "\"/>\n"
          << "<text x=\"" << num(x + cw / 2) << "\" y=\"" << num(y + ch * 0.65) << "\" text-anchor=\"middle\">"
          << (v ? num(*v) : std::string("NA")) << "</text>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace nounprobe
