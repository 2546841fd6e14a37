#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "otmm/errors.hpp"

namespace otmm {

// CSV files carry a schema line first (`# otmm-csv-v1 kind=<kind>`), then the
// header, then numeric rows; trailing `# key=value` lines hold summary
// metadata (e.g. a rate fit). Values are written with 17 significant digits
// so they parse back to the same doubles.

struct CsvTable {
  std::string kind;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::string> meta;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ConfigError("csv: no column named " + name);
  }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
  os << "# otmm-csv-v1 kind=" << t.kind << "\n";
  for (size_t i = 0; i < t.header.size(); ++i)
    os << t.header[i] << (i + 1 == t.header.size() ? "" : ",");
  os << "\n";
  char buf[40];
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      os << buf << (i + 1 == row.size() ? "" : ",");
    }
    os << "\n";
  }
  for (const auto& [k, v] : t.meta) os << "# " << k << "=" << v << "\n";
}

inline void write_csv_file(const std::string& path, const CsvTable& t) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write csv: " + path);
  write_csv(os, t);
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# otmm-csv-v1 kind=", 0) != 0)
    throw ConfigError("csv: missing schema line");
  t.kind = line.substr(std::string("# otmm-csv-v1 kind=").size());
  if (!std::getline(is, line)) throw ConfigError("csv: missing header");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.erase(body.begin());
      const size_t eq = body.find('=');
      if (eq != std::string::npos) t.meta[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != t.header.size()) throw ConfigError("csv: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open csv: " + path);
  return read_csv(is);
}

// ---- SVG line charts (convenience output; the CSV is the contract) --------

struct SvgSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

inline void svg_line_chart(const std::string& path, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel,
                           const std::vector<SvgSeries>& series, bool loglog) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b"};
  const double w = 640, h = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  auto tx = [&](double v) { return loglog ? std::log10(v) : v; };
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, tx(y));
      ymax = std::max(ymax, tx(y));
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (tx(x) - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (tx(y) - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write svg: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
     << "</text>\n";
  os << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
     << "' stroke='black'/>\n";
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double gx = ml + (w - ml - mr) * i / 4.0;
    const double gy = h - mb - (h - mt - mb) * i / 4.0;
    std::snprintf(buf, sizeof buf, loglog ? "1e%.2g" : "%.3g", fx);
    os << "<text x='" << gx << "' y='" << h - mb + 18 << "' text-anchor='middle' font-size='11'>"
       << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, loglog ? "1e%.2g" : "%.3g", fy);
    os << "<text x='" << ml - 8 << "' y='" << gy + 4 << "' text-anchor='end' font-size='11'>"
       << buf << "</text>\n";
  }
  os << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 10
     << "' text-anchor='middle' font-size='13'>" << xlabel << "</text>\n";
  os << "<text x='16' y='" << (mt + h - mb) / 2 << "' font-size='13' transform='rotate(-90 16 "
     << (mt + h - mb) / 2 << ")' text-anchor='middle'>" << ylabel << "</text>\n";
  int ci = 0;
  for (const auto& s : series) {
    const char* color = palette[ci % 6];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (const auto& [x, y] : s.points) os << px(x) << "," << py(y) << " ";
    os << "'/>\n";
    for (const auto& [x, y] : s.points)
      os << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='2.5' fill='" << color
         << "'/>\n";
    os << "<text x='" << w - mr - 8 << "' y='" << mt + 16 * ci
       << "' text-anchor='end' font-size='12' fill='" << color << "'>" << s.name << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
}

}  // namespace otmm
