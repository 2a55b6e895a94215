#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nounprobe/scoring.hpp"

namespace nounprobe {

inline constexpr double kDefaultAlpha = 0.05;

struct CorrelationResult {
  std::string series_a;
  std::string series_b;
  double r = 0.0;
  std::size_t n = 0;
  double p = 1.0;
  bool defined = false;  // false when either series has zero variance or n < 3
  bool significant_raw = false;
  bool significant_bonferroni = false;
};

// Pearson r with a two-sided p-value from t = r*sqrt((n-2)/(1-r^2)) on n-2
// degrees of freedom. Throws AnalysisError on length mismatch or n < 3.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y, std::string series_a = "x",
                          std::string series_b = "y", double alpha = kDefaultAlpha);

// Marks significance at alpha / results.size(). Undefined results are never
// significant but still count towards m.
void bonferroni(std::span<CorrelationResult> results, double alpha = kDefaultAlpha);

// Every pair of tasks of one backend, over nouns with both cells present.
std::vector<CorrelationResult> task_correlations(const ScoreMatrix& m, TargetSplit split = TargetSplit::All,
                                                 double alpha = kDefaultAlpha);

// For every pair of backends and every task they share, correlation over the
// nouns both backends scored. Bonferroni is applied across the whole list.
std::vector<CorrelationResult> cross_model_correlations(std::span<const ScoreMatrix> matrices,
                                                        TargetSplit split = TargetSplit::All,
                                                        double alpha = kDefaultAlpha);

struct PcaResult {
  std::vector<std::string> tasks;
  bool standardized = true;
  std::size_t rows_used = 0;
  std::size_t rows_dropped = 0;
  std::vector<std::vector<double>> covariance;  // tasks x tasks, as decomposed
  std::vector<double> eigenvalues;              // descending, clamped at 0
  std::vector<double> cumulative_explained;
  std::vector<std::vector<double>> loadings;           // [task][component]
  std::vector<std::vector<std::size_t>> top_contributors;  // [component] task indices by |loading|, descending
};

// Rows with any missing cell are dropped. With `standardize` the columns are
// z-scored first, so the decomposed matrix is the correlation matrix.
PcaResult pca(std::span<const std::vector<std::optional<double>>> rows, std::vector<std::string> tasks,
              bool standardize = true);
PcaResult pca(const ScoreMatrix& m, bool standardize = true, TargetSplit split = TargetSplit::All);

void write_correlations_csv(std::ostream& out, std::span<const CorrelationResult> results);
void write_pca_variance_csv(std::ostream& out, const PcaResult& r);
void write_pca_loadings_csv(std::ostream& out, const PcaResult& r);

}  // namespace nounprobe
