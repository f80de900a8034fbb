#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sparselab {

/// One line of a gnuplot `plot` command. When `filter_column` is non-zero only
/// rows whose column (1-based) equals `filter_value` are drawn.
struct PlotSeries {
  std::string title;
  std::string using_expr = "1:2";
  std::size_t filter_column = 0;
  std::string filter_value;
  std::string style = "lines";
};

struct PlotSpec {
  std::string output;  // png file name, relative to the script
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::string csv;     // data file, relative to the script
  bool logy = false;
  std::vector<PlotSeries> series;
};

/// gnuplot script reading a CSV with a header row.
std::string render_gnuplot(const PlotSpec& spec);
void write_plot(const std::filesystem::path& dir, const std::string& script_name, const PlotSpec& spec);

}  // namespace sparselab
