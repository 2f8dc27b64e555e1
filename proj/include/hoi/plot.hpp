#pragma once

#include <string>
#include <vector>

#include "hoi/common.hpp"

namespace hoi::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal deterministic SVG line chart; the rendering is a pure function of
// its inputs, so re-rendering from the same tidy CSV is byte-identical.
std::string render_line_chart(const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series);

// Long-format tidy table {x, series, value} used as the single source for
// every chart.
struct TidyTable {
  std::string x_name;
  std::vector<std::string> rows;  // "x,series,value" lines, pre-formatted

  void save(const std::string& path) const;
};

TidyTable tidy_from_series(const std::string& x_name,
                           const std::vector<Series>& series);
std::vector<Series> series_from_tidy_csv(const std::string& path);

// Renders a chart from an emitted tidy CSV (the replot path used by tests).
void plot_from_tidy(const std::string& tidy_csv, const std::string& svg_path,
                    const std::string& title, const std::string& x_label,
                    const std::string& y_label);

struct PlotOutputs {
  std::vector<std::string> tidy_csvs;
  std::vector<std::string> svgs;
  std::vector<std::string> warnings;
};

// Emits normalized-error training curves and weight-adaptation curves for a
// run directory; missing logs skip their plot with a warning.
PlotOutputs plot_run(const std::string& run_dir, const std::string& out_dir);

// Overlays normalized-error curves of several runs, labeled by each run's
// outer.delta (a delta-sweep comparison figure).
PlotOutputs plot_sweep(const std::vector<std::string>& run_dirs,
                       const std::string& out_dir);

}  // namespace hoi::plot
