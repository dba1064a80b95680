#pragma once

// Output formats: CSV tables, self-contained SVG plots and plain-text reports.
// Every file starts with a header comment carrying the library version and the
// hash of the configuration that produced it.

#include "qgrad/common.hpp"
#include "qgrad/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace qgrad::io {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

/// Locale-independent, 17 significant digits.
inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string header_line(std::uint64_t config_hash) {
  return std::string("qgrad ") + kVersion + " config=" + hex64(config_hash);
}

/// Row-oriented CSV builder. Text cells containing a comma or quote are quoted.
class CsvWriter {
 public:
  /// `notes` become further comment lines between the header and the column row.
  CsvWriter(std::uint64_t config_hash, std::vector<std::string> columns, const std::vector<std::string>& notes = {})
      : columns_(std::move(columns)) {
    out_ << "# " << header_line(config_hash) << '\n';
    for (const auto& n : notes) out_ << "# " << n << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
    out_ << '\n';
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(w) {}
    Row& operator<<(double v) { return cell(number(v)); }
    Row& operator<<(int v) { return cell(std::to_string(v)); }
    Row& operator<<(long v) { return cell(std::to_string(v)); }
    Row& operator<<(unsigned long v) { return cell(std::to_string(v)); }
    Row& operator<<(unsigned long long v) { return cell(std::to_string(v)); }
    Row& operator<<(const std::string& s) { return cell(quote(s)); }
    Row& operator<<(const char* s) { return cell(quote(s)); }
    ~Row() noexcept(false) { w_.end_row(cells_); }

   private:
    Row& cell(std::string s) {
      cells_.push_back(std::move(s));
      return *this;
    }
    static std::string quote(const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + '"';
    }
    CsvWriter& w_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }
  std::string str() const { return out_.str(); }
  std::size_t rows() const { return rows_; }

 private:
  void end_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
      throw std::logic_error("CsvWriter: row has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(columns_.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    ++rows_;
  }
  std::vector<std::string> columns_;
  std::ostringstream out_;
  std::size_t rows_ = 0;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << content;
  if (!f) throw Error("write to '" + path.string() + "' failed");
}

/// Node coordinates and one field: x,u in 1D, x,y,u in 2D.
inline std::string field_csv(const Mesh& mesh, const Field& u, std::uint64_t config_hash,
                             const std::string& name = "u") {
  std::vector<std::string> cols{"x"};
  if (mesh.dimension() == 2) cols.push_back("y");
  cols.push_back(name);
  CsvWriter w(config_hash, cols);
  for (int k = 0; k < mesh.size(); ++k) {
    const Point p = mesh.node(k);
    auto r = w.row();
    r << p.x;
    if (mesh.dimension() == 2) r << p.y;
    r << u[k];
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f4e99";
  bool line = true;            // polyline, otherwise markers only
  std::string label;
};

struct Marker {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Marker> markers;   // drawn as red rings with a label
  bool log_y = false;
  int width = 720;
  int height = 480;
};

namespace detail {

inline std::string escape_xml(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

/// Coordinates in SVG are printed with 6 significant digits; enough for pixels
/// and still deterministic.
inline std::string px(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

inline std::vector<double> ticks(double lo, double hi, int target = 6) {
  std::vector<double> t;
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

}  // namespace detail

inline std::string svg_plot(const PlotSpec& spec, std::uint64_t config_hash) {
  using detail::px;
  const double L = 70, R = 20, T = 40, B = 55;
  const double W = spec.width - L - R, H = spec.height - T - B;
  auto ty = [&](double y) { return spec.log_y ? std::log10(std::max(y, 1e-300)) : y; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y) || (spec.log_y && y <= 0)) return;
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, ty(y));
    y1 = std::max(y1, ty(y));
  };
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) grow(s.x[i], s.y[i]);
  for (const auto& m : spec.markers) grow(m.x, m.y);
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
  const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * W; };
  auto sy = [&](double y) { return T + H - (ty(y) - y0) / (y1 - y0) * H; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<!-- " << header_line(config_hash) << " -->\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << px(L + W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::escape_xml(spec.title) << "</text>\n";
  o << "<rect x=\"" << px(L) << "\" y=\"" << px(T) << "\" width=\"" << px(W) << "\" height=\"" << px(H)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double v : detail::ticks(x0, x1)) {
    o << "<line x1=\"" << px(sx(v)) << "\" y1=\"" << px(T + H) << "\" x2=\"" << px(sx(v)) << "\" y2=\"" << px(T + H + 5)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << px(sx(v)) << "\" y=\"" << px(T + H + 18) << "\" text-anchor=\"middle\">" << px(v)
      << "</text>\n";
  }
  for (double v : detail::ticks(y0, y1)) {
    const double yy = T + H - (v - y0) / (y1 - y0) * H;
    const double shown = spec.log_y ? std::pow(10.0, v) : v;
    o << "<line x1=\"" << px(L - 5) << "\" y1=\"" << px(yy) << "\" x2=\"" << px(L) << "\" y2=\"" << px(yy)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << px(L - 8) << "\" y=\"" << px(yy + 4) << "\" text-anchor=\"end\">" << px(shown) << "</text>\n";
  }
  o << "<text x=\"" << px(L + W / 2) << "\" y=\"" << px(spec.height - 12.0) << "\" text-anchor=\"middle\">"
    << detail::escape_xml(spec.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << px(T + H / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << px(T + H / 2)
    << ")\">" << detail::escape_xml(spec.y_label) << "</text>\n";

  int legend = 0;
  for (const auto& s : spec.series) {
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0)) continue;
        o << (first ? "" : " ") << px(sx(s.x[i])) << ',' << px(sy(s.y[i]));
        first = false;
      }
      o << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0)) continue;
        o << "<circle cx=\"" << px(sx(s.x[i])) << "\" cy=\"" << px(sy(s.y[i])) << "\" r=\"2.5\" fill=\"" << s.color
          << "\" fill-opacity=\"0.6\"/>\n";
      }
    }
    if (!s.label.empty()) {
      const double ly = T + 16 + 16 * legend++;
      o << "<rect x=\"" << px(L + W - 150) << "\" y=\"" << px(ly - 9) << "\" width=\"10\" height=\"10\" fill=\"" << s.color
        << "\"/><text x=\"" << px(L + W - 134) << "\" y=\"" << px(ly) << "\">" << detail::escape_xml(s.label)
        << "</text>\n";
    }
  }
  for (const auto& m : spec.markers) {
    o << "<circle cx=\"" << px(sx(m.x)) << "\" cy=\"" << px(sy(m.y)) << "\" r=\"6\" fill=\"none\" stroke=\"#c0392b\" "
      << "stroke-width=\"2\"/>";
    const bool right = sx(m.x) > L + 0.6 * W;  // keep the label inside the frame
    o << "<text x=\"" << px(sx(m.x) + (right ? -9 : 9)) << "\" y=\"" << px(sy(m.y) - 8) << "\" text-anchor=\""
      << (right ? "end" : "start") << "\" fill=\"#c0392b\">"
      << detail::escape_xml(m.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace qgrad::io
