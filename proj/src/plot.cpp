#include "can/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "can/checks.hpp"

namespace can {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable parse_csv(const std::string& path) {
  std::ifstream in(path);
  check_arg(static_cast<bool>(in), "csv: cannot open " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    check_arg(cells.size() == table.header.size(),
              "csv: " + path + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(table.header.size()) + " fields, got " +
                  std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  check_arg(!table.header.empty(), "csv: " + path + " is empty");
  check_arg(!table.rows.empty(), "csv: " + path + " has no data rows");
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::trunc);
  check_run(static_cast<bool>(out), "csv: cannot write " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << table.header[i] << (i + 1 < table.header.size() ? "," : "\n");
  for (const auto& row : table.rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
}

namespace {

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    check_arg(used == s.size(), context);
    return v;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(context + ": not a number: '" + s + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void svg_line_chart(const std::string& path, const std::vector<Series>& series,
                    const std::string& x_label, const std::string& y_label,
                    const std::string& title, bool log_x) {
  check_arg(!series.empty(), "plot: no series to draw");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    check_arg(!s.x.empty() && s.x.size() == s.y.size(), "plot: empty or ragged series");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double x = log_x ? std::log10(std::max(s.x[i], 1e-30)) : s.x[i];
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  const double pad_y = 0.05 * (ymax - ymin);
  ymin -= pad_y;
  ymax += pad_y;

  const int width = 720, height = 480;
  const int ml = 70, mr = 20, mt = 40, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double x) {
    const double v = log_x ? std::log10(std::max(x, 1e-30)) : x;
    return ml + (v - xmin) / (xmax - xmin) * pw;
  };
  auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\" "
        "font-family=\"sans-serif\">"
     << title << "</text>\n";

  // axes
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
     << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 5.0;
    const double vx = log_x ? std::pow(10.0, fx) : fx;
    const double X = ml + pw * i / 5.0;
    os << "<line x1=\"" << X << "\" y1=\"" << mt + ph << "\" x2=\"" << X << "\" y2=\""
       << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << X << "\" y=\"" << mt + ph + 20
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(vx)
       << "</text>\n";
    const double fy = ymin + (ymax - ymin) * i / 5.0;
    const double Y = py(fy);
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << Y << "\" x2=\"" << ml << "\" y2=\"" << Y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << Y + 4
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(fy)
       << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        "transform=\"rotate(-90 18 "
     << mt + ph / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      os << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    os << "\"/>\n";
    const double ly = mt + 16 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw - 125
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
       << "\" font-size=\"12\" font-family=\"sans-serif\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  check_run(static_cast<bool>(out), "plot: cannot write " + path);
  out << os.str();
}

void plot_loss_curves(const std::vector<std::string>& metrics_csvs, const std::string& out_svg) {
  check_arg(!metrics_csvs.empty(), "plot: no metrics files");
  std::vector<Series> series;
  if (metrics_csvs.size() == 1) {
    const CsvTable t = parse_csv(metrics_csvs[0]);
    const int step = t.column("step");
    check_arg(step >= 0, "plot: metrics file lacks a 'step' column");
    for (const char* col : {"l_infonce", "l_rec", "l_denoise", "l_total"}) {
      const int c = t.column(col);
      if (c < 0) continue;
      Series s;
      s.label = col;
      for (const auto& row : t.rows) {
        s.x.push_back(parse_number(row[static_cast<std::size_t>(step)], "plot: step"));
        s.y.push_back(parse_number(row[static_cast<std::size_t>(c)], "plot: loss"));
      }
      series.push_back(std::move(s));
    }
  } else {
    for (const auto& path : metrics_csvs) {
      const CsvTable t = parse_csv(path);
      const int step = t.column("step");
      const int c = t.column("l_total");
      check_arg(step >= 0 && c >= 0, "plot: metrics file lacks step/l_total columns");
      Series s;
      s.label = std::filesystem::path(path).stem().string();
      for (const auto& row : t.rows) {
        s.x.push_back(parse_number(row[static_cast<std::size_t>(step)], "plot: step"));
        s.y.push_back(parse_number(row[static_cast<std::size_t>(c)], "plot: loss"));
      }
      series.push_back(std::move(s));
    }
  }
  svg_line_chart(out_svg, series, "step", "training loss", "loss vs step");
}

namespace {

std::vector<Series> per_method_series(const CsvTable& t, int method_col, int x_col, int y_col,
                                      const std::string& context) {
  std::map<std::string, Series> by_method;
  std::vector<std::string> order;
  for (const auto& row : t.rows) {
    const std::string& m = row[static_cast<std::size_t>(method_col)];
    if (!by_method.count(m)) {
      by_method[m].label = m;
      order.push_back(m);
    }
    by_method[m].x.push_back(parse_number(row[static_cast<std::size_t>(x_col)], context));
    by_method[m].y.push_back(parse_number(row[static_cast<std::size_t>(y_col)], context));
  }
  std::vector<Series> series;
  for (const auto& m : order) {
    Series s = by_method[m];
    std::vector<std::size_t> idx(s.x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    Series sorted;
    sorted.label = s.label;
    for (std::size_t i : idx) {
      sorted.x.push_back(s.x[i]);
      sorted.y.push_back(s.y[i]);
    }
    series.push_back(std::move(sorted));
  }
  return series;
}

}  // namespace

void plot_mask_rate_sweep(const std::string& csv_path, const std::string& out_svg) {
  const CsvTable t = parse_csv(csv_path);
  const int m = t.column("method"), x = t.column("mask_rate"), y = t.column("accuracy");
  check_arg(m >= 0 && x >= 0 && y >= 0,
            "plot: sweep csv needs method, mask_rate, accuracy columns");
  svg_line_chart(out_svg, per_method_series(t, m, x, y, "plot: sweep"), "masking rate",
                 "linear probe top-1", "accuracy vs masking rate");
}

void plot_flops_frontier(const std::string& csv_path, const std::string& out_svg) {
  const CsvTable t = parse_csv(csv_path);
  const int m = t.column("method");
  int x = t.column("flops");
  if (x < 0) x = t.column("total");
  const int y = t.column("accuracy");
  check_arg(m >= 0 && x >= 0 && y >= 0,
            "plot: frontier csv needs method, flops (or total), accuracy columns");
  svg_line_chart(out_svg, per_method_series(t, m, x, y, "plot: frontier"), "forward FLOPs",
                 "linear probe top-1", "accuracy vs compute", /*log_x=*/true);
}

}  // namespace can
