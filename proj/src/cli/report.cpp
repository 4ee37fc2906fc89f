/*
 * Copyright 2026 The fewshot-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fewshot/cli/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "fewshot/error.hpp"

namespace fewshot::cli {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf.data(), end);
}

std::string provenance_line(std::string_view hash, std::uint64_t seed) {
  return "# config_hash=" + std::string(hash) + " seed=" + std::to_string(seed) + "\n";
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(std::string_view in) {
  std::string out;
  for (char c : in) {
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

}  // namespace

CsvWriter::CsvWriter(std::string_view hash, std::uint64_t seed, std::vector<std::string> header)
    : width_(0), text_(provenance_line(hash, seed)) {
  row(header);
  width_ = header.size();
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (width_ != 0 && fields.size() != width_) throw ShapeError("csv row has the wrong number of fields");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_ += ',';
    text_ += csv_field(fields[i]);
  }
  text_ += '\n';
}

std::string aligned_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  std::string out;
  auto emit = [&](const std::vector<std::string>& r) {
    std::string line;
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      line += cell;
      if (i + 1 < width.size()) line += std::string(width[i] - cell.size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  out += std::string(total > 2 ? total - 2 : 0, '-') + "\n";
  for (const auto& r : rows) emit(r);
  return out;
}

std::string scatter_svg(const ad::Tensor& points, const std::vector<std::size_t>& classes,
                        const std::vector<std::string>& class_names, std::string_view title) {
  if (points.rank() != 2 || points.cols() < 2 || points.rows() != classes.size())
    throw ShapeError("scatter_svg expects [n x 2] points and n class ids");
  static constexpr std::array<const char*, 10> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                       "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double size = 480.0, margin = 40.0;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (points.rows() > 0) {
    xlo = xhi = points(0, 0);
    ylo = yhi = points(0, 1);
    for (std::size_t i = 0; i < points.rows(); ++i) {
      xlo = std::min(xlo, points(i, 0));
      xhi = std::max(xhi, points(i, 0));
      ylo = std::min(ylo, points(i, 1));
      yhi = std::max(yhi, points(i, 1));
    }
  }
  if (xhi == xlo) xhi = xlo + 1;
  if (yhi == ylo) yhi = ylo + 1;
  auto px = [&](double x) { return margin + (x - xlo) / (xhi - xlo) * (size - 2 * margin); };
  auto py = [&](double y) { return size - margin - (y - ylo) / (yhi - ylo) * (size - 2 * margin); };

  std::ostringstream s;
  s.precision(2);
  s << std::fixed;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 140 << "\" height=\"" << size
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << margin << "\" y=\"20\" font-size=\"13\">" << xml_escape(title) << "</text>\n";
  s << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size - 2 * margin << "\" height=\""
    << size - 2 * margin << "\" fill=\"none\" stroke=\"#999\"/>\n";
  for (std::size_t i = 0; i < points.rows(); ++i) {
    s << "<circle cx=\"" << px(points(i, 0)) << "\" cy=\"" << py(points(i, 1)) << "\" r=\"2.5\" fill=\""
      << palette[classes[i] % palette.size()] << "\" fill-opacity=\"0.7\"/>\n";
  }
  std::vector<std::size_t> seen(classes);
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  double y = margin + 10;
  for (std::size_t c : seen) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    s << "<circle cx=\"" << size + 5 << "\" cy=\"" << y - 4 << "\" r=\"4\" fill=\"" << palette[c % palette.size()]
      << "\"/><text x=\"" << size + 14 << "\" y=\"" << y << "\">" << xml_escape(name) << "</text>\n";
    y += 16;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace fewshot::cli
