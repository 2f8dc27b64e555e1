#include "hoi/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "hoi/config.hpp"
#include "hoi/harness.hpp"

namespace hoi::plot {

namespace fs = std::filesystem;

namespace {

constexpr int kWidth = 860;
constexpr int kHeight = 480;
constexpr int kMarginL = 70, kMarginR = 170, kMarginT = 40, kMarginB = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22", "#17becf"};

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_line_chart(const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series) {
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_min = x_max = s.x[i];
        y_min = y_max = s.y[i];
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double plot_w = kWidth - kMarginL - kMarginR;
  const double plot_h = kHeight - kMarginT - kMarginB;
  auto px = [&](double x) { return kMarginL + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return kMarginT + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
         "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " +
         std::to_string(kHeight) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(kWidth / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + title + "</text>\n";

  // axes
  svg += "<line x1=\"" + fmt_px(kMarginL) + "\" y1=\"" + fmt_px(kMarginT) +
         "\" x2=\"" + fmt_px(kMarginL) + "\" y2=\"" +
         fmt_px(kMarginT + plot_h) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt_px(kMarginL) + "\" y1=\"" +
         fmt_px(kMarginT + plot_h) + "\" x2=\"" + fmt_px(kMarginL + plot_w) +
         "\" y2=\"" + fmt_px(kMarginT + plot_h) + "\" stroke=\"black\"/>\n";

  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    double xv = x_min + (x_max - x_min) * i / ticks;
    double yv = y_min + (y_max - y_min) * i / ticks;
    svg += "<line x1=\"" + fmt_px(px(xv)) + "\" y1=\"" + fmt_px(kMarginT + plot_h) +
           "\" x2=\"" + fmt_px(px(xv)) + "\" y2=\"" +
           fmt_px(kMarginT + plot_h + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_px(px(xv)) + "\" y=\"" +
           fmt_px(kMarginT + plot_h + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" + fmt_tick(xv) + "</text>\n";
    svg += "<line x1=\"" + fmt_px(kMarginL - 5) + "\" y1=\"" + fmt_px(py(yv)) +
           "\" x2=\"" + fmt_px(kMarginL) + "\" y2=\"" + fmt_px(py(yv)) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_px(kMarginL - 9) + "\" y=\"" +
           fmt_px(py(yv) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" + fmt_tick(yv) + "</text>\n";
  }
  svg += "<text x=\"" + fmt_px(kMarginL + plot_w / 2) + "\" y=\"" +
         fmt_px(kHeight - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" + x_label + "</text>\n";
  svg += "<text x=\"18\" y=\"" + fmt_px(kMarginT + plot_h / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 " +
         fmt_px(kMarginT + plot_h / 2) + ")\">" + y_label + "</text>\n";

  int color = 0;
  for (const Series& s : series) {
    const char* stroke = kPalette[color % 10];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) points += " ";
      points += fmt_px(px(s.x[i])) + "," + fmt_px(py(s.y[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    double ly = kMarginT + 14 + 18 * color;
    svg += "<line x1=\"" + fmt_px(kWidth - kMarginR + 12) + "\" y1=\"" +
           fmt_px(ly - 4) + "\" x2=\"" + fmt_px(kWidth - kMarginR + 36) +
           "\" y2=\"" + fmt_px(ly - 4) + "\" stroke=\"" + stroke +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt_px(kWidth - kMarginR + 42) + "\" y=\"" +
           fmt_px(ly) + "\" font-family=\"sans-serif\" font-size=\"12\">" +
           s.name + "</text>\n";
    ++color;
  }
  svg += "</svg>\n";
  return svg;
}

void TidyTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HoiError("cannot write: " + path);
  out << x_name << ",series,value\n";
  for (const std::string& row : rows) out << row << "\n";
}

TidyTable tidy_from_series(const std::string& x_name,
                           const std::vector<Series>& series) {
  TidyTable t;
  t.x_name = x_name;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      t.rows.push_back(fmt_double(s.x[i]) + "," + s.name + "," +
                       fmt_double(s.y[i]));
  return t;
}

std::vector<Series> series_from_tidy_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.columns.size() != 3 || table.columns[1] != "series" ||
      table.columns[2] != "value")
    throw ParseError("tidy CSV must have columns <x>,series,value: " + path);
  std::vector<Series> series;
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    if (row.size() != 3) throw ParseError("malformed tidy row in " + path);
    auto it = index.find(row[1]);
    if (it == index.end()) {
      index.emplace(row[1], series.size());
      series.push_back(Series{row[1], {}, {}});
      it = index.find(row[1]);
    }
    series[it->second].x.push_back(std::stod(row[0]));
    series[it->second].y.push_back(std::stod(row[2]));
  }
  return series;
}

void plot_from_tidy(const std::string& tidy_csv, const std::string& svg_path,
                    const std::string& title, const std::string& x_label,
                    const std::string& y_label) {
  std::vector<Series> series = series_from_tidy_csv(tidy_csv);
  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw HoiError("cannot write: " + svg_path);
  out << render_line_chart(title, x_label, y_label, series);
}

namespace {

// Normalized tracking-error curve of one run: (e_jp+e_op+e_lp) per epoch,
// scaled by its first value.
Series error_curve(const std::string& event_log, const std::string& name,
                   std::vector<std::string>* warnings) {
  Series s;
  s.name = name;
  CsvTable table = read_csv(event_log);
  int c_epoch = table.column_index("epoch");
  int c_jp = table.column_index("e_jp");
  int c_op = table.column_index("e_op");
  int c_lp = table.column_index("e_lp");
  if (c_epoch < 0 || c_jp < 0 || c_op < 0 || c_lp < 0) {
    if (warnings)
      warnings->push_back("event log missing error columns: " + event_log);
    return s;
  }
  double norm = 0.0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    double sum = table.value(r, c_jp) + table.value(r, c_op) + table.value(r, c_lp);
    if (r == 0) norm = sum > 0 ? sum : 1.0;
    s.x.push_back(table.value(r, c_epoch));
    s.y.push_back(sum / norm);
  }
  return s;
}

}  // namespace

PlotOutputs plot_run(const std::string& run_dir, const std::string& out_dir) {
  PlotOutputs outputs;
  fs::create_directories(out_dir);
  harness::RunPaths paths{run_dir};

  if (fs::exists(paths.event_log())) {
    Series err = error_curve(paths.event_log(), "e_sum_norm", &outputs.warnings);
    if (!err.x.empty()) {
      std::string tidy_path = out_dir + "/tidy_training.csv";
      tidy_from_series("epoch", {err}).save(tidy_path);
      std::string svg_path = out_dir + "/training_error.svg";
      plot_from_tidy(tidy_path, svg_path, "normalized tracking error", "epoch",
                     "(e_jp+e_op+e_lp) / initial");
      outputs.tidy_csvs.push_back(tidy_path);
      outputs.svgs.push_back(svg_path);
    }
  } else {
    outputs.warnings.push_back("missing event log: " + paths.event_log());
  }

  if (fs::exists(paths.meta_log())) {
    CsvTable table = read_csv(paths.meta_log());
    int c_subtask = table.column_index("subtask");
    bool ok = c_subtask >= 0;
    std::vector<Series> weights;
    for (int k = 0; k < rewards::kNumTerms && ok; ++k) {
      int c = table.column_index("theta_" + std::to_string(k + 1));
      if (c < 0) {
        ok = false;
        break;
      }
      Series s;
      s.name = std::string("theta_") + rewards::kTermNames[static_cast<std::size_t>(k)];
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        s.x.push_back(table.value(r, c_subtask));
        s.y.push_back(table.value(r, c));
      }
      weights.push_back(std::move(s));
    }
    if (ok && !weights.empty()) {
      std::string tidy_path = out_dir + "/tidy_weights.csv";
      tidy_from_series("subtask", weights).save(tidy_path);
      std::string svg_path = out_dir + "/weight_adaptation.svg";
      plot_from_tidy(tidy_path, svg_path, "reward-weight adaptation",
                     "subtask", "theta");
      outputs.tidy_csvs.push_back(tidy_path);
      outputs.svgs.push_back(svg_path);
    } else {
      outputs.warnings.push_back("meta log missing columns, weight plot skipped");
    }
  } else {
    outputs.warnings.push_back("no meta log (outer loop disabled?); weight "
                               "plot skipped");
  }
  return outputs;
}

PlotOutputs plot_sweep(const std::vector<std::string>& run_dirs,
                       const std::string& out_dir) {
  PlotOutputs outputs;
  fs::create_directories(out_dir);
  std::vector<Series> curves;
  for (const std::string& dir : run_dirs) {
    harness::RunPaths paths{dir};
    std::string label = fs::path(dir).filename().string();
    try {
      harness::RunConfig config = harness::load_config(paths.config());
      label = "delta=" + fmt_double(config.outer.delta);
      if (!config.outer_enabled) label += " (outer off)";
    } catch (const HoiError&) {
      outputs.warnings.push_back("no readable config in " + dir +
                                 ", using directory name as label");
    }
    if (!fs::exists(paths.event_log())) {
      outputs.warnings.push_back("missing event log: " + paths.event_log());
      continue;
    }
    Series s = error_curve(paths.event_log(), label, &outputs.warnings);
    if (!s.x.empty()) curves.push_back(std::move(s));
  }
  if (curves.empty()) {
    outputs.warnings.push_back("sweep plot skipped: no curves");
    return outputs;
  }
  std::string tidy_path = out_dir + "/tidy_sweep.csv";
  tidy_from_series("epoch", curves).save(tidy_path);
  std::string svg_path = out_dir + "/delta_sweep.svg";
  plot_from_tidy(tidy_path, svg_path, "delta sweep: normalized tracking error",
                 "epoch", "(e_jp+e_op+e_lp) / initial");
  outputs.tidy_csvs.push_back(tidy_path);
  outputs.svgs.push_back(svg_path);
  return outputs;
}

}  // namespace hoi::plot
