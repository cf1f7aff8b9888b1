#include "lidsn/model/viz.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lidsn/error.hpp"

namespace lidsn::model {

namespace {

constexpr int kCell = 8;

void require_matrix(const Tensor& m, const char* what) {
  if (m.rank() != 2) {
    throw DimensionError(std::string(what) + ": expects a 2-D tensor, got " + shape_str(m.shape()));
  }
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Endpoints (34,38,94) and (253,231,37).
std::string ramp(double t) {
  auto lerp = [t](int a, int b) { return static_cast<int>(a + (b - a) * t + 0.5); };
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", lerp(34, 253), lerp(38, 231), lerp(94, 37));
  return buf;
}

}  // namespace

std::string matrix_csv(const Tensor& m) {
  require_matrix(m, "matrix_csv");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::ostringstream out;
  out << "row";
  for (std::size_t j = 0; j < cols; ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    out << i;
    for (std::size_t j = 0; j < cols; ++j) out << ',' << number(m.at(i, j));
    out << '\n';
  }
  return out.str();
}

std::string heatmap_svg(const Tensor& m) {
  require_matrix(m, "heatmap_svg");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const auto values = m.data();
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = values.empty() ? 0.0 : *lo_it;
  const double span = values.empty() ? 0.0 : *hi_it - lo;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * kCell << "\" height=\""
      << rows * kCell << "\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double t = span > 0.0 ? (m.at(i, j) - lo) / span : 0.0;
      out << "<rect x=\"" << j * kCell << "\" y=\"" << i * kCell << "\" width=\"" << kCell
          << "\" height=\"" << kCell << "\" fill=\"" << ramp(t) << "\"/>\n";
    }
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw FormatError(FormatErrc::io_failure, "write failed for " + path.string());
}

}  // namespace lidsn::model
