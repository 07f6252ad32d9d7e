#include "comodal/report.hpp"

#include "comodal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace comodal {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b"};

struct Range {
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void svg_header(std::ofstream& out, int w, int h, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h
      << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2
      << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">"
      << title << "</text>\n";
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << table.header[i] << (i + 1 < table.header.size() ? "," : "\n");
  for (const auto& row : table.rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
}

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series) {
  const int W = 640, H = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.pad();
  yr.pad();
  auto px = [&](double v) {
    return ml + (v - xr.lo) / (xr.hi - xr.lo) * (W - ml - mr);
  };
  auto py = [&](double v) {
    return H - mb - (v - yr.lo) / (yr.hi - yr.lo) * (H - mt - mb);
  };
  std::ofstream out = open_out(path);
  svg_header(out, W, H, title);
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xr.lo + k * (xr.hi - xr.lo) / 4;
    const double yv = yr.lo + k * (yr.hi - yr.lo) / 4;
    out << "<text x=\"" << format_double(px(xv)) << "\" y=\"" << H - mb + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << format_double(xv) << "</text>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << format_double(py(yv) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << format_double(yv) << "</text>\n";
  }
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";
  int color = 0;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 6]
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << format_double(px(s.x[i])) << "," << format_double(py(s.y[i]))
          << (i + 1 < s.x.size() ? " " : "");
    out << "\"/>\n";
    out << "<text x=\"" << W - mr - 4 << "\" y=\"" << mt + 14 * (color + 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\""
           " fill=\""
        << kPalette[color % 6] << "\">" << s.label << "</text>\n";
    ++color;
  }
  out << "</svg>\n";
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& categories,
                     const std::vector<BarSeries>& series) {
  const int W = 720, H = 400, ml = 70, mr = 20, mt = 40, mb = 60;
  Range yr;
  yr.add(0.0);
  for (const auto& s : series)
    for (double v : s.values) yr.add(v);
  yr.pad();
  auto py = [&](double v) {
    return H - mb - (v - yr.lo) / (yr.hi - yr.lo) * (H - mt - mb);
  };
  const std::size_t n_cat = categories.size();
  const std::size_t n_ser = series.size();
  const double slot = double(W - ml - mr) / std::max<std::size_t>(1, n_cat);
  const double bar = 0.8 * slot / std::max<std::size_t>(1, n_ser);
  std::ofstream out = open_out(path);
  svg_header(out, W, H, title);
  out << "<line x1=\"" << ml << "\" y1=\"" << format_double(py(0.0))
      << "\" x2=\"" << W - mr << "\" y2=\"" << format_double(py(0.0))
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = yr.lo + k * (yr.hi - yr.lo) / 4;
    out << "<text x=\"" << ml - 6 << "\" y=\"" << format_double(py(yv) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << format_double(yv) << "</text>\n";
  }
  for (std::size_t c = 0; c < n_cat; ++c) {
    const double x0 = ml + c * slot + 0.1 * slot;
    for (std::size_t s = 0; s < n_ser; ++s) {
      const double v = series[s].values[c];
      const double top = py(std::max(v, 0.0));
      const double bottom = py(std::min(v, 0.0));
      out << "<rect x=\"" << format_double(x0 + s * bar) << "\" y=\""
          << format_double(top) << "\" width=\"" << format_double(bar)
          << "\" height=\"" << format_double(std::max(0.5, bottom - top))
          << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
    }
    out << "<text x=\"" << format_double(ml + c * slot + slot / 2)
        << "\" y=\"" << H - mb + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << categories[c] << "</text>\n";
  }
  for (std::size_t s = 0; s < n_ser; ++s)
    out << "<text x=\"" << W - mr - 4 << "\" y=\"" << mt + 14 * (s + 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\""
           " fill=\""
        << kPalette[s % 6] << "\">" << series[s].label << "</text>\n";
  out << "</svg>\n";
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::vector<std::string> emit_reports(const ReportBundle& bundle,
                                      const std::string& outdir,
                                      const std::string& scenario_json,
                                      std::uint64_t seed) {
  if (bundle.sweep.empty())
    throw std::runtime_error("refusing to emit reports for an empty sweep");
  std::filesystem::create_directories(outdir);
  std::vector<std::string> files;
  auto path = [&](const std::string& name) {
    files.push_back(name);
    return outdir + "/" + name;
  };

  CsvTable sweep_csv;
  sweep_csv.header = {"level",         "profit", "drivers",
                      "passenger_rate", "customer_rate", "wage"};
  std::vector<double> levels, profits, drivers, pax;
  for (const auto& row : bundle.sweep) {
    sweep_csv.rows.push_back(
        {format_double(row.level), format_double(row.profit),
         format_double(row.drivers), format_double(row.passenger_rate),
         format_double(row.customer_rate), format_double(row.wage)});
    levels.push_back(row.level);
    profits.push_back(row.profit);
    drivers.push_back(row.drivers);
    pax.push_back(row.passenger_rate);
  }
  write_csv(path("sweep.csv"), sweep_csv);
  write_line_chart(path("profit_vs_level.svg"),
                   "Platform profit vs delivery demand level",
                   "delivery demand level", "profit ($/min)",
                   {{"profit", levels, profits}});
  write_line_chart(path("drivers_vs_level.svg"),
                   "Fleet size vs delivery demand level",
                   "delivery demand level", "drivers",
                   {{"drivers", levels, drivers}});
  write_line_chart(path("passengers_vs_level.svg"),
                   "Passenger arrivals vs delivery demand level",
                   "delivery demand level", "passengers (orders/min)",
                   {{"passengers", levels, pax}});

  if (!bundle.benchmarks.empty()) {
    CsvTable bench_csv;
    bench_csv.header = {"case",          "level",        "profit",
                        "drivers",       "passenger_rate", "delivery_rate",
                        "avg_flex_fare", "avg_od_fare",  "wage",
                        "cycled"};
    for (const auto& row : bundle.benchmarks)
      bench_csv.rows.push_back(
          {row.name, format_double(row.level), format_double(row.profit),
           format_double(row.drivers), format_double(row.passenger_rate),
           format_double(row.delivery_rate), format_double(row.avg_flex_fare),
           format_double(row.avg_od_fare), format_double(row.wage),
           row.cycled ? "1" : "0"});
    write_csv(path("benchmarks.csv"), bench_csv);

    // zonal splits for the integrated case, idle-driver change vs ride-only
    const BenchmarkRow* integrated = nullptr;
    const BenchmarkRow* ride_only = nullptr;
    for (const auto& row : bundle.benchmarks) {
      if (row.name == "integrated") integrated = &row;
      if (row.name == "ride_only") ride_only = &row;
    }
    if (integrated && integrated->zonal_flex.size() > 0) {
      std::vector<std::string> zones;
      std::vector<double> flex, od;
      for (Index i = 0; i < integrated->zonal_flex.size(); ++i) {
        zones.push_back(std::to_string(i + 1));
        flex.push_back(integrated->zonal_flex(i));
        od.push_back(integrated->zonal_od(i));
      }
      write_bar_chart(path("zonal_delivery_split.svg"),
                      "Parcel demand split by origin zone", zones,
                      {{"flexible", flex}, {"on-demand", od}});
      CsvTable zonal;
      zonal.header = {"zone", "flexible_rate", "ondemand_rate"};
      for (std::size_t i = 0; i < zones.size(); ++i)
        zonal.rows.push_back({zones[i], format_double(flex[i]),
                              format_double(od[i])});
      write_csv(path("zonal_delivery_split.csv"), zonal);
      if (ride_only && ride_only->zonal_idle.size() ==
                           integrated->zonal_idle.size()) {
        std::vector<double> delta;
        for (Index i = 0; i < integrated->zonal_idle.size(); ++i)
          delta.push_back(integrated->zonal_idle(i) -
                          ride_only->zonal_idle(i));
        write_bar_chart(path("zonal_idle_change.svg"),
                        "Idle drivers: integrated minus ride-only", zones,
                        {{"idle change", delta}});
      }
    }
  }

  std::ostringstream manifest;
  manifest << "{\n  \"tool\": \"comodal\",\n";
  manifest << "  \"seed\": " << seed << ",\n";
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(scenario_json)));
  manifest << "  \"config_hash\": \"" << hex << "\",\n";
  manifest << "  \"outputs\": [";
  // manifest lists everything written before it
  std::vector<std::string> listed = files;
  for (std::size_t i = 0; i < listed.size(); ++i)
    manifest << "\"" << listed[i] << "\"" << (i + 1 < listed.size() ? ", " : "");
  manifest << "]\n}\n";
  std::ofstream out = open_out(outdir + "/manifest.json");
  out << manifest.str();
  files.push_back("manifest.json");
  return files;
}

}  // namespace comodal
