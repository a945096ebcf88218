#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gazehead/error.hpp"
#include "gazehead/log.hpp"
#include "gazehead/workflow.hpp"

namespace gazehead::workflow {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct MetricColumn {
  const char* key;
  const char* title;
  double metrics::EvalReport::*field;
};

constexpr MetricColumn kColumns[] = {
    {"angular_error_avg", "Angular error, avg (deg)", &metrics::EvalReport::angular_error_avg},
    {"angular_error_best", "Angular error, best of K (deg)", &metrics::EvalReport::angular_error_best},
    {"correlation_pitch_best", "Pitch correlation, best of K", &metrics::EvalReport::correlation_pitch_best},
    {"correlation_yaw_best", "Yaw correlation, best of K", &metrics::EvalReport::correlation_yaw_best},
    {"ave_avg", "AVE, avg (deg^2)", &metrics::EvalReport::ave_avg},
    {"smoothness_avg", "Smoothness, avg (deg/frame^3)", &metrics::EvalReport::smoothness_avg},
    {"apd", "APD (deg)", &metrics::EvalReport::apd},
};

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string escape(const std::string& s) {
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

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << contents;
  out.close();
  require(!out.fail(), ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  const double width = 640, height = 360, left = 60, right = 20, top = 40, bottom = 60;
  double lo = std::min(0.0, *std::min_element(values.begin(), values.end()));
  double hi = std::max(0.0, *std::max_element(values.begin(), values.end()));
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double plot_h = height - top - bottom;
  const double plot_w = width - left - right;
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << y_of(0) << "\" x2=\"" << width - right << "\" y2=\"" << y_of(0)
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\">" << fmt(v, "%.3g")
      << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << y_of(v) << "\" x2=\"" << width - right << "\" y2=\"" << y_of(v)
      << "\" stroke=\"#dddddd\"/>\n";
  }
  const double slot = plot_w / static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = left + slot * (static_cast<double>(i) + 0.15);
    const double y0 = y_of(std::max(0.0, values[i]));
    const double h = std::abs(y_of(values[i]) - y_of(0));
    s << "<rect x=\"" << x << "\" y=\"" << y0 << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
      << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n";
    s << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << y0 - 4 << "\" text-anchor=\"middle\">"
      << fmt(values[i]) << "</text>\n";
    s << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << height - bottom + 18 << "\" text-anchor=\"middle\">"
      << escape(labels[i]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct TrajectoryRow {
  std::string series;
  int sample = 0;
  int frame = 0;
  double pitch = 0.0;
  double yaw = 0.0;
};

std::vector<TrajectoryRow> read_trajectories(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  require(line == "series,sequence_id,sample,frame,pitch_deg,yaw_deg", ErrorCode::Parse,
          "unexpected trajectories header in '" + path.string() + "'");
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == 6, ErrorCode::Parse, "malformed trajectories row in '" + path.string() + "'");
    try {
      rows.push_back({cells[0], std::stoi(cells[2]), std::stoi(cells[3]), std::stod(cells[4]), std::stod(cells[5])});
    } catch (const std::exception& e) {
      fail(ErrorCode::Parse, "trajectories '" + path.string() + "': " + e.what());
    }
  }
  return rows;
}

std::string line_chart(const std::string& title, const std::vector<TrajectoryRow>& rows, bool pitch) {
  const double width = 720, height = 400, left = 60, right = 150, top = 40, bottom = 40;
  // Keyed by (series, sample) in first-appearance order.
  std::vector<std::pair<std::string, int>> keys;
  std::map<std::pair<std::string, int>, std::vector<std::pair<double, double>>> lines;
  double fmax = 1.0, lo = 1e300, hi = -1e300;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.series, r.sample);
    if (!lines.count(key)) keys.push_back(key);
    const double v = pitch ? r.pitch : r.yaw;
    lines[key].emplace_back(r.frame, v);
    fmax = std::max(fmax, static_cast<double>(r.frame));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (keys.empty()) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 1.0, hi += 1.0;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto x_of = [&](double f) { return left + f / fmax * plot_w; };
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << (left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\">" << fmt(v, "%.3g")
      << "</text>\n";
  }
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">frame</text>\n";
  std::map<std::string, std::size_t> colors;
  int legend_row = 0;
  for (const auto& key : keys) {
    const auto [it, added] = colors.try_emplace(key.first, colors.size());
    const char* color = key.first == "real" ? "black" : kPalette[it->second % std::size(kPalette)];
    const char* dash = key.first == "gaze" ? " stroke-dasharray=\"4 3\"" : "";
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << (key.first == "real" ? 2 : 1.2)
      << "\"" << dash << " points=\"";
    for (const auto& [f, v] : lines[key]) s << x_of(f) << ',' << y_of(v) << ' ';
    s << "\"/>\n";
    if (added) {
      const double ly = top + 14.0 * legend_row++;
      s << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 30 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\"" << dash << "/>\n";
      s << "<text x=\"" << width - right + 35 << "\" y=\"" << ly + 4 << "\">" << escape(key.first) << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

void plot(const PlotOptions& o) {
  require(!o.reports.empty(), ErrorCode::Config, "plot needs at least one report");
  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create directory '" + dir.string() + "': " + ec.message());

  std::vector<metrics::EvalReport> rows;
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& path : o.reports) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open report '" + path + "'");
    for (auto& r : metrics::read_report_csv(in)) {
      const int n = seen[r.method]++;
      labels.push_back(n == 0 ? r.method : r.method + "#" + std::to_string(n + 1));
      rows.push_back(std::move(r));
    }
  }
  require(!rows.empty(), ErrorCode::Validation, "reports hold no rows");

  std::ostringstream csv, md;
  csv << "method";
  md << "| method |";
  for (const auto& c : kColumns) {
    csv << ',' << c.key;
    md << ' ' << c.key << " |";
  }
  csv << ",k,num_inputs\n";
  md << " k | num_inputs |\n|---|";
  for (std::size_t i = 0; i < std::size(kColumns) + 2; ++i) md << "---:|";
  md << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << labels[i];
    md << "| " << labels[i] << " |";
    for (const auto& c : kColumns) {
      csv << ',' << fmt(rows[i].*c.field, "%.10g");
      md << ' ' << fmt(rows[i].*c.field, "%.3f") << " |";
    }
    csv << ',' << rows[i].k << ',' << rows[i].num_inputs << '\n';
    md << ' ' << rows[i].k << " | " << rows[i].num_inputs << " |\n";
  }
  write_file(dir / "comparison.csv", csv.str());
  write_file(dir / "comparison.md", md.str());

  for (const auto& c : kColumns) {
    std::vector<double> values;
    for (const auto& r : rows) values.push_back(r.*c.field);
    write_file(dir / (std::string(c.key) + ".svg"), bar_chart(c.title, labels, values));
  }

  // Trajectories from the first report that has them.
  for (const auto& path : o.reports) {
    const fs::path report(path);
    const fs::path traj = report.parent_path() / (report.stem().string() + "_trajectories.csv");
    if (!fs::exists(traj)) continue;
    const auto traj_rows = read_trajectories(traj);
    fs::copy_file(traj, dir / "trajectories.csv", fs::copy_options::overwrite_existing, ec);
    require(!ec, ErrorCode::Io, "cannot copy '" + traj.string() + "': " + ec.message());
    write_file(dir / "trajectories_pitch.svg", line_chart("Pitch vs frame (deg)", traj_rows, true));
    write_file(dir / "trajectories_yaw.svg", line_chart("Yaw vs frame (deg)", traj_rows, false));
    return;
  }
  log::warn("plot: no trajectories file beside the given reports; only metric charts written");
}

}  // namespace gazehead::workflow
