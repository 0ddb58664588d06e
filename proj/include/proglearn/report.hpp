#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace proglearn {

struct ResultCell {
  std::string task;
  int n = 0;
  std::string method;
  std::string status;  // ok | failed | skipped
  double accuracy = 0.0;
  std::string detail;
  double wall_seconds = 0.0;
};

struct ResultTable {
  std::vector<ResultCell> cells;
};

namespace detail {

inline std::string fmt_double(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::vector<ResultCell> sorted_cells(const ResultTable& table) {
  auto cells = table.cells;
  std::sort(cells.begin(), cells.end(), [](const ResultCell& a, const ResultCell& b) {
    if (a.task != b.task) return a.task < b.task;
    if (a.n != b.n) return a.n < b.n;
    return a.method < b.method;
  });
  return cells;
}

}  // namespace detail

inline std::string render_table_text(const ResultTable& table) {
  auto cells = detail::sorted_cells(table);
  std::ostringstream out;
  out << "task                 n    method   status  accuracy  detail\n";
  out << "-------------------- ---- -------- ------- --------- ------\n";
  char line[512];
  for (const auto& c : cells) {
    std::string acc = c.status == "ok" ? detail::fmt_double(c.accuracy) : "-";
    std::snprintf(line, sizeof(line), "%-20s %-4d %-8s %-7s %-9s %s\n", c.task.c_str(), c.n,
                  c.method.c_str(), c.status.c_str(), acc.c_str(), c.detail.c_str());
    out << line;
  }
  return out.str();
}

inline std::string render_table_csv(const ResultTable& table) {
  auto cells = detail::sorted_cells(table);
  std::ostringstream out;
  out << "task,n,method,status,accuracy,wall_seconds,detail\n";
  for (const auto& c : cells) {
    out << detail::csv_escape(c.task) << "," << c.n << "," << detail::csv_escape(c.method) << ","
        << c.status << "," << (c.status == "ok" ? detail::fmt_double(c.accuracy, 6) : "") << ","
        << detail::fmt_double(c.wall_seconds, 3) << "," << detail::csv_escape(c.detail) << "\n";
  }
  return out.str();
}

// Accuracy-versus-length curves for one task, one polyline per method. Pure text
// output with fixed formatting, so the same table always produces the same bytes.
inline std::string render_accuracy_svg(const ResultTable& table, const std::string& task) {
  constexpr double kW = 720, kH = 480, kL = 70, kR = 40, kT = 40, kB = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::map<std::string, std::map<int, double>> series;
  std::set<int> lengths;
  for (const auto& c : table.cells) {
    if (c.task != task || c.status != "ok") continue;
    series[c.method][c.n] = c.accuracy;
    lengths.insert(c.n);
  }
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
         "viewBox=\"0 0 720 480\">\n";
  out << "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  out << "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << task << ": test accuracy vs input length</text>\n";
  if (lengths.empty()) {
    out << "<text x=\"360\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">no data</text>\n</svg>\n";
    return out.str();
  }
  double n_lo = *lengths.begin(), n_hi = *lengths.rbegin();
  if (n_hi == n_lo) n_hi = n_lo + 1;
  auto sx = [&](double n) { return kL + (n - n_lo) / (n_hi - n_lo) * (kW - kL - kR); };
  auto sy = [&](double a) { return kH - kB - a * (kH - kT - kB); };

  for (int i = 0; i <= 10; i += 2) {
    double a = i / 10.0;
    out << "<line x1=\"" << detail::fmt_double(kL, 1) << "\" y1=\"" << detail::fmt_double(sy(a), 1)
        << "\" x2=\"" << detail::fmt_double(kW - kR, 1) << "\" y2=\""
        << detail::fmt_double(sy(a), 1) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << detail::fmt_double(kL - 8, 1) << "\" y=\""
        << detail::fmt_double(sy(a) + 4, 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::fmt_double(a, 1) << "</text>\n";
  }
  for (int n : lengths) {
    out << "<text x=\"" << detail::fmt_double(sx(n), 1) << "\" y=\""
        << detail::fmt_double(kH - kB + 18, 1)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << n
        << "</text>\n";
  }
  out << "<line x1=\"" << detail::fmt_double(kL, 1) << "\" y1=\"" << detail::fmt_double(kT, 1)
      << "\" x2=\"" << detail::fmt_double(kL, 1) << "\" y2=\"" << detail::fmt_double(kH - kB, 1)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << detail::fmt_double(kL, 1) << "\" y1=\"" << detail::fmt_double(kH - kB, 1)
      << "\" x2=\"" << detail::fmt_double(kW - kR, 1) << "\" y2=\""
      << detail::fmt_double(kH - kB, 1) << "\" stroke=\"black\"/>\n";

  int color_index = 0;
  for (const auto& [method, points] : series) {
    const char* color = kColors[color_index % 5];
    std::ostringstream path;
    for (const auto& [n, acc] : points) {
      path << detail::fmt_double(sx(n), 1) << "," << detail::fmt_double(sy(acc), 1) << " ";
      out << "<circle cx=\"" << detail::fmt_double(sx(n), 1) << "\" cy=\""
          << detail::fmt_double(sy(acc), 1) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    out << "<polyline points=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << detail::fmt_double(kW - kR - 140, 1) << "\" y=\""
        << detail::fmt_double(kT + 16 * (color_index + 1), 1)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << method
        << "</text>\n";
    ++color_index;
  }
  out << "</svg>\n";
  return out.str();
}

// Writes table.txt, table.csv, and one plot per task. An empty table produces an
// explicit no-data notice instead of empty files.
inline void emit_report(const ResultTable& table, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  if (table.cells.empty()) {
    std::ofstream note(fs::path(out_dir) / "table.txt", std::ios::binary);
    note << "no data: the result table is empty\n";
    return;
  }
  {
    std::ofstream txt(fs::path(out_dir) / "table.txt", std::ios::binary);
    txt << render_table_text(table);
  }
  {
    std::ofstream csv(fs::path(out_dir) / "table.csv", std::ios::binary);
    csv << render_table_csv(table);
  }
  std::set<std::string> tasks;
  for (const auto& c : table.cells) tasks.insert(c.task);
  for (const auto& task : tasks) {
    std::ofstream svg(fs::path(out_dir) / ("plot_" + task + ".svg"), std::ios::binary);
    svg << render_accuracy_svg(table, task);
  }
}

}  // namespace proglearn
