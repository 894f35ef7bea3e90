#include "stackcast/report.hpp"

#include "stackcast/dataset.hpp"
#include "stackcast/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace stackcast {

namespace {

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) fail(ErrorCode::io, "error writing '" + path.string() + "'");
}

}  // namespace

std::string result_to_csv(const ExperimentResult& result) {
  std::string out(kResultCsvHeader);
  out += '\n';
  for (const auto& r : result.rows) {
    out += to_string(r.family);
    out += ',' + r.prior_family;
    out += ',' + std::to_string(r.n);
    out += ',' + real(r.r2);
    out += ',' + std::to_string(r.replications);
    out += ',' + real(r.ratio);
    out += ',' + real(r.mc_se);
    out += ',' + real(r.mean_stacked_loss);
    out += ',' + real(r.mean_best_loss);
    out += ',' + real(r.wall_seconds);
    out += '\n';
  }
  return out;
}

ExperimentResult result_from_csv(std::string_view text) {
  ExperimentResult result;
  std::size_t start = 0;
  bool header = true;
  int line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kResultCsvHeader) fail(ErrorCode::parse, "unexpected result CSV header");
      header = false;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 10) fail(ErrorCode::parse, "result CSV line " + std::to_string(line_no) + ": expected 10 fields");
    try {
      ExperimentRow row;
      row.family = family_from_string(f[0]);
      row.prior_family = f[1];
      row.n = std::stoi(f[2]);
      row.r2 = std::stod(f[3]);
      row.replications = std::stoi(f[4]);
      row.ratio = std::stod(f[5]);
      row.mc_se = std::stod(f[6]);
      row.mean_stacked_loss = std::stod(f[7]);
      row.mean_best_loss = std::stod(f[8]);
      row.wall_seconds = std::stod(f[9]);
      result.rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      fail(ErrorCode::parse, "result CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  if (header) fail(ErrorCode::parse, "result CSV is empty");
  return result;
}

void emit_csv(const ExperimentResult& result, const std::filesystem::path& path) {
  write_file(path, result_to_csv(result));
}

// ---- SVG ---------------------------------------------------------------------

namespace {

constexpr double kPanelWidth = 520.0;
constexpr double kPanelHeight = 380.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 110.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 52.0;

struct Axis {
  double lo;
  double hi;
  double pixel_lo;
  double pixel_hi;

  double map(double v) const {
    if (hi == lo) return 0.5 * (pixel_lo + pixel_hi);
    return pixel_lo + (v - lo) / (hi - lo) * (pixel_hi - pixel_lo);
  }
};

std::string escape(std::string_view s) {
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

}  // namespace

std::string result_to_svg(const ExperimentResult& result) {
  require(!result.rows.empty(), "cannot plot an empty result");

  std::map<std::pair<std::string, std::string>, std::vector<const ExperimentRow*>> panels;
  for (const auto& row : result.rows) panels[{to_string(row.family), row.prior_family}].push_back(&row);

  const double width = kPanelWidth * static_cast<double>(panels.size());
  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width, 0) + "\" height=\"" +
         fixed(kPanelHeight, 0) + "\" viewBox=\"0 0 " + fixed(width, 0) + " " + fixed(kPanelHeight, 0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double offset = 0.0;
  for (const auto& [key, rows] : panels) {
    double x_lo = rows.front()->r2, x_hi = x_lo, y_lo = 1.0, y_hi = 1.0;
    std::set<int> ns;
    for (const auto* r : rows) {
      x_lo = std::min(x_lo, r->r2);
      x_hi = std::max(x_hi, r->r2);
      y_lo = std::min(y_lo, r->ratio);
      y_hi = std::max(y_hi, r->ratio);
      ns.insert(r->n);
    }
    if (x_hi == x_lo) {
      x_lo -= 0.05;
      x_hi += 0.05;
    }
    const double pad = y_hi > y_lo ? 0.1 * (y_hi - y_lo) : 0.05;
    y_lo -= pad;
    y_hi += pad;

    const Axis xa{x_lo, x_hi, offset + kLeft, offset + kPanelWidth - kRight};
    const Axis ya{y_lo, y_hi, kPanelHeight - kBottom, kTop};

    svg += "<g class=\"panel\" data-family=\"" + escape(key.first) + "\" data-prior=\"" + escape(key.second) + "\">\n";
    svg += "<text x=\"" + fixed(offset + kPanelWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(key.first) + " stack, " + escape(key.second) + " prior</text>\n";
    // axes
    svg += "<line class=\"axis\" x1=\"" + fixed(xa.pixel_lo) + "\" y1=\"" + fixed(ya.pixel_lo) + "\" x2=\"" +
           fixed(xa.pixel_hi) + "\" y2=\"" + fixed(ya.pixel_lo) + "\" stroke=\"black\"/>\n";
    svg += "<line class=\"axis\" x1=\"" + fixed(xa.pixel_lo) + "\" y1=\"" + fixed(ya.pixel_lo) + "\" x2=\"" +
           fixed(xa.pixel_lo) + "\" y2=\"" + fixed(ya.pixel_hi) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
      const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
      svg += "<text x=\"" + fixed(xa.map(xv)) + "\" y=\"" + fixed(ya.pixel_lo + 18) + "\" text-anchor=\"middle\">" +
             real(std::round(xv * 1000) / 1000) + "</text>\n";
      svg += "<text x=\"" + fixed(xa.pixel_lo - 6) + "\" y=\"" + fixed(ya.map(yv) + 4) + "\" text-anchor=\"end\">" +
             real(std::round(yv * 1000) / 1000) + "</text>\n";
    }
    svg += "<text x=\"" + fixed((xa.pixel_lo + xa.pixel_hi) / 2) + "\" y=\"" + fixed(kPanelHeight - 12) +
           "\" text-anchor=\"middle\">R²</text>\n";
    svg += "<text x=\"" + fixed(offset + 16) + "\" y=\"" + fixed((ya.pixel_lo + ya.pixel_hi) / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 " + fixed(offset + 16) + " " +
           fixed((ya.pixel_lo + ya.pixel_hi) / 2) + ")\">ratio</text>\n";

    const double ref_y = ya.map(1.0);
    svg += "<line class=\"reference\" x1=\"" + fixed(xa.pixel_lo) + "\" y1=\"" + fixed(ref_y) + "\" x2=\"" +
           fixed(xa.pixel_hi) + "\" y2=\"" + fixed(ref_y) + "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n";

    const int smallest_n = *ns.begin();
    int legend_row = 0;
    for (int n : ns) {
      std::vector<const ExperimentRow*> series;
      for (const auto* r : rows)
        if (r->n == n) series.push_back(r);
      std::sort(series.begin(), series.end(), [](const auto* a, const auto* b) { return a->r2 < b->r2; });
      const bool solid = n == smallest_n;
      const std::string dash = solid ? "" : " stroke-dasharray=\"6,4\"";
      std::string points;
      for (const auto* r : series) {
        if (!points.empty()) points += ' ';
        points += fixed(xa.map(r->r2)) + "," + fixed(ya.map(r->ratio));
      }
      svg += "<polyline class=\"series " + std::string(solid ? "solid" : "dashed") + "\" data-n=\"" +
             std::to_string(n) + "\" points=\"" + points + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"" +
             dash + "/>\n";
      for (const auto* r : series) {
        svg += "<circle class=\"marker\" cx=\"" + fixed(xa.map(r->r2)) + "\" cy=\"" + fixed(ya.map(r->ratio)) +
               "\" r=\"3\" fill=\"black\"/>\n";
      }
      const double ly = kTop + 10 + 20.0 * legend_row++;
      const double lx = xa.pixel_hi + 12;
      svg += "<line class=\"legend\" x1=\"" + fixed(lx) + "\" y1=\"" + fixed(ly) + "\" x2=\"" + fixed(lx + 26) +
             "\" y2=\"" + fixed(ly) + "\" stroke=\"black\" stroke-width=\"1.5\"" + dash + "/>\n";
      svg += "<text x=\"" + fixed(lx + 32) + "\" y=\"" + fixed(ly + 4) + "\">n = " + std::to_string(n) + "</text>\n";
    }
    svg += "</g>\n";
    offset += kPanelWidth;
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(const ExperimentResult& result, const std::filesystem::path& path) {
  write_file(path, result_to_svg(result));
}

}  // namespace stackcast
