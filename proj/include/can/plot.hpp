#pragma once

#include <string>
#include <vector>

namespace can {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// Rejects malformed input with the offending line number; a header-only file
// is an error (nothing to plot).
CsvTable parse_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

struct Series {
  std::string label;
  std::vector<double> x, y;
};

// Minimal standalone SVG line chart: axes, ticks, legend, one polyline per
// series.
void svg_line_chart(const std::string& path, const std::vector<Series>& series,
                    const std::string& x_label, const std::string& y_label,
                    const std::string& title, bool log_x = false);

// Loss curves from trainer metrics CSVs. A single input plots every loss
// column; several inputs plot l_total per run.
void plot_loss_curves(const std::vector<std::string>& metrics_csvs, const std::string& out_svg);

// Accuracy vs masking rate, one curve per method.
// Expects columns: method, mask_rate, accuracy.
void plot_mask_rate_sweep(const std::string& csv_path, const std::string& out_svg);

// Accuracy vs forward FLOPs, one curve per method.
// Expects columns: method, flops (or total), accuracy.
void plot_flops_frontier(const std::string& csv_path, const std::string& out_svg);

}  // namespace can
