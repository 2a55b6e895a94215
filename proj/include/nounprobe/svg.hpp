#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nounprobe {

struct ScatterPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::optional<std::pair<double, double>> fit;  // (slope, intercept) drawn as a line
};

// Panels laid out left to right, `columns` per row.
void write_scatter_svg(std::ostream& out, const std::string& title, const std::vector<ScatterPanel>& panels,
                       std::size_t columns = 4);

// Pair plot of the columns of `rows`: scatter for every off-diagonal pair,
// names on the diagonal. Rows with a missing value in a pair are skipped
// for that pair.
void write_pairplot_svg(std::ostream& out, const std::string& title, const std::vector<std::string>& names,
                        const std::vector<std::vector<std::optional<double>>>& rows);

// Diverging colour grid, centred on zero, with the value printed in each cell.
void write_heat_grid_svg(std::ostream& out, const std::string& title, const std::vector<std::string>& row_labels,
                         const std::vector<std::string>& col_labels,
                         const std::vector<std::vector<std::optional<double>>>& values);

}  // namespace nounprobe
