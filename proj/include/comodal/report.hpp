#pragma once

#include "comodal/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace comodal {

/// Deterministic numeric formatting shared by every emitted file.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series);

struct BarSeries {
  std::string label;
  std::vector<double> values;
};

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& categories,
                     const std::vector<BarSeries>& series);

std::uint64_t fnv1a64(const std::string& text);

/// Everything the report subcommand materializes.
struct ReportBundle {
  std::vector<SweepRow> sweep;
  std::vector<BenchmarkRow> benchmarks;
  double benchmark_level = 0.0;
};

/// Writes the CSV tables, SVG charts and the run manifest; returns the file
/// names. Fails before creating anything when the sweep is empty.
std::vector<std::string> emit_reports(const ReportBundle& bundle,
                                      const std::string& outdir,
                                      const std::string& scenario_json,
                                      std::uint64_t seed);

}  // namespace comodal
