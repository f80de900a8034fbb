#include "sparselab/plot.hpp"

#include <fmt/format.h>

#include "sparselab/csv.hpp"

namespace sparselab {

std::string render_gnuplot(const PlotSpec& spec) {
  std::string s;
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 900,600\n";
  s += fmt::format("set output '{}'\n", spec.output);
  s += fmt::format("set title '{}'\n", spec.title);
  s += fmt::format("set xlabel '{}'\n", spec.xlabel);
  s += fmt::format("set ylabel '{}'\n", spec.ylabel);
  s += "set key outside right\n";
  if (spec.logy) s += "set logscale y\n";
  s += "plot ";
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const PlotSeries& p = spec.series[i];
    std::string source = fmt::format("'{}'", spec.csv);
    if (p.filter_column > 0) {
      source = fmt::format("\"< awk -F, 'NR>1 && ${}==\\\"{}\\\"' {}\"", p.filter_column, p.filter_value, spec.csv);
    }
    const std::string skip = p.filter_column > 0 ? "" : " every ::1";
    s += fmt::format("{}{}{} using {} with {} title '{}'", i ? ", \\\n     " : "", source, skip, p.using_expr, p.style,
                     p.title);
  }
  s += "\n";
  return s;
}

void write_plot(const std::filesystem::path& dir, const std::string& script_name, const PlotSpec& spec) {
  write_text(dir / script_name, render_gnuplot(spec));
}

}  // namespace sparselab
