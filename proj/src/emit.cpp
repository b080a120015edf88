#include "fibersem/emit.hpp"

#include <algorithm>
#include <cstdio>

#include "fibersem/error.hpp"

namespace fibersem {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

void write_csv(std::ostream& out, const ExtensionSet& set, std::vector<std::string> axes) {
  const std::size_t d = set.grid.dim();
  if (axes.empty()) {
    for (std::size_t i = 0; i < d; ++i) axes.push_back("c" + std::to_string(i + 1));
  }
  if (axes.size() != d) throw Error("one axis name per coordinate is required");
  for (const auto& a : axes) out << a << ',';
  out << "member,path_id\n";
  for (std::size_t row = 0; row < set.member.size(); ++row) {
    for (double v : set.grid.point(row)) out << fmt("%.10g", v == 0.0 ? 0.0 : v) << ',';
    out << (set.member[row] ? 1 : 0) << ',' << set.parent[row] << '\n';
  }
}

void write_svg(std::ostream& out, const ExtensionSet& set, const std::string& title) {
  const std::size_t d = set.grid.dim();
  if (d < 1 || d > 2) throw Error("SVG scatter needs a 1- or 2-dimensional set");
  constexpr double size = 800.0;
  constexpr double margin = 40.0;
  const double span = size - 2.0 * margin;

  double lo[2] = {0.0, 0.0};
  double hi[2] = {1.0, 1.0};
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = set.grid.anchor[i] + static_cast<double>(set.grid.lo[i]) * set.grid.step;
    hi[i] = set.grid.anchor[i] + static_cast<double>(set.grid.lo[i] + set.grid.count[i] - 1) * set.grid.step;
    if (hi[i] == lo[i]) hi[i] = lo[i] + 1.0;
  }
  const std::size_t per_axis = static_cast<std::size_t>(set.grid.count[0]);
  const double radius = std::max(1.0, std::min(4.0, 0.4 * span / static_cast<double>(per_axis)));

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 800\" width=\"800\" height=\"800\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"white\"/>\n";
  out << "<rect x=\"40\" y=\"40\" width=\"720\" height=\"720\" fill=\"none\" stroke=\"black\"/>\n";
  if (!title.empty()) {
    out << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape_xml(title) << "</text>\n";
  }
  out << "<text x=\"40\" y=\"780\" font-family=\"sans-serif\" font-size=\"12\">" << fmt("%.4g", lo[0]) << "</text>\n";
  out << "<text x=\"760\" y=\"780\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
      << fmt("%.4g", hi[0]) << "</text>\n";
  if (d == 2) {
    out << "<text x=\"36\" y=\"760\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt("%.4g", lo[1]) << "</text>\n";
    out << "<text x=\"36\" y=\"48\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt("%.4g", hi[1]) << "</text>\n";
  }
  for (std::size_t row = 0; row < set.member.size(); ++row) {
    const auto p = set.grid.point(row);
    const double px = margin + span * (p[0] - lo[0]) / (hi[0] - lo[0]);
    const double py = d == 2 ? margin + span * (1.0 - (p[1] - lo[1]) / (hi[1] - lo[1])) : size / 2.0;
    out << "<circle cx=\"" << fmt("%.2f", px) << "\" cy=\"" << fmt("%.2f", py) << "\" r=\"" << fmt("%.2f", radius)
        << "\" fill=\"" << (set.member[row] ? "black" : "#dddddd") << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace fibersem
