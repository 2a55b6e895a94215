#include "nounprobe/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "nounprobe/error.hpp"

namespace nounprobe {

namespace {

std::string series_id(const ScoreMatrix& m, const std::string& task) {
  return m.backend_id().empty() ? task : m.backend_id() + ":" + task;
}

CorrelationResult undefined_result(std::string a, std::string b, std::size_t n) {
  CorrelationResult r;
  r.series_a = std::move(a);
  r.series_b = std::move(b);
  r.n = n;
  r.r = std::nan("");
  r.p = std::nan("");
  return r;
}

}  // namespace

CorrelationResult pearson(std::span<const double> x, std::span<const double> y, std::string series_a,
                          std::string series_b, double alpha) {
  if (x.size() != y.size()) {
    throw AnalysisError("pearson: series " + series_a + " has " + std::to_string(x.size()) + " values, " + series_b +
                        " has " + std::to_string(y.size()));
  }
  const std::size_t n = x.size();
  if (n < 3) throw AnalysisError("pearson: need at least 3 points, got " + std::to_string(n));

  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return undefined_result(std::move(series_a), std::move(series_b), n);

  CorrelationResult res;
  res.series_a = std::move(series_a);
  res.series_b = std::move(series_b);
  res.n = n;
  res.defined = true;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(res.r) >= 1.0) {
    res.p = 0.0;
  } else {
    const double df = static_cast<double>(n - 2);
    const double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    boost::math::students_t dist(df);
    res.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  res.significant_raw = res.p < alpha;
  res.significant_bonferroni = res.significant_raw;
  return res;
}

void bonferroni(std::span<CorrelationResult> results, double alpha) {
  if (results.empty()) throw AnalysisError("bonferroni: no results");
  const double threshold = alpha / static_cast<double>(results.size());
  for (auto& r : results) {
    r.significant_raw = r.defined && r.p < alpha;
    r.significant_bonferroni = r.defined && r.p < threshold;
  }
}

std::vector<CorrelationResult> task_correlations(const ScoreMatrix& m, TargetSplit split, double alpha) {
  const auto grid = m.means(split);
  const auto& tasks = m.tasks();
  std::vector<CorrelationResult> out;
  for (std::size_t a = 0; a < tasks.size(); ++a) {
    for (std::size_t b = a + 1; b < tasks.size(); ++b) {
      std::vector<double> x, y;
      for (const auto& row : grid) {
        if (row[a] && row[b]) {
          x.push_back(*row[a]);
          y.push_back(*row[b]);
        }
      }
      if (x.size() < 3) {
        out.push_back(undefined_result(series_id(m, tasks[a]), series_id(m, tasks[b]), x.size()));
      } else {
        out.push_back(pearson(x, y, series_id(m, tasks[a]), series_id(m, tasks[b]), alpha));
      }
    }
  }
  if (!out.empty()) bonferroni(out, alpha);
  return out;
}

std::vector<CorrelationResult> cross_model_correlations(std::span<const ScoreMatrix> matrices, TargetSplit split,
                                                        double alpha) {
  std::vector<CorrelationResult> out;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    for (std::size_t j = i + 1; j < matrices.size(); ++j) {
      const ScoreMatrix& a = matrices[i];
      const ScoreMatrix& b = matrices[j];
      const auto ga = a.means(split);
      const auto gb = b.means(split);
      for (std::size_t ta = 0; ta < a.tasks().size(); ++ta) {
        const auto tb = b.task_index(a.tasks()[ta]);
        if (!tb) continue;
        std::vector<double> x, y;
        for (std::size_t na = 0; na < a.nouns().size(); ++na) {
          const auto nb = b.noun_index(a.nouns()[na]);
          if (!nb) continue;
          const auto& va = ga[na][ta];
          const auto& vb = gb[*nb][*tb];
          if (va && vb) {
            x.push_back(*va);
            y.push_back(*vb);
          }
        }
        const auto ida = series_id(a, a.tasks()[ta]);
        const auto idb = series_id(b, b.tasks()[*tb]);
        out.push_back(x.size() < 3 ? undefined_result(ida, idb, x.size()) : pearson(x, y, ida, idb, alpha));
      }
    }
  }
  if (!out.empty()) bonferroni(out, alpha);
  return out;
}

PcaResult pca(std::span<const std::vector<std::optional<double>>> rows, std::vector<std::string> tasks,
              bool standardize) {
  const std::size_t k = tasks.size();
  if (k == 0) throw AnalysisError("pca: no tasks");
  PcaResult res;
  res.tasks = std::move(tasks);
  res.standardized = standardize;

  std::vector<const std::vector<std::optional<double>>*> complete;
  for (const auto& row : rows) {
    if (row.size() != k) throw AnalysisError("pca: row width does not match task count");
    if (std::all_of(row.begin(), row.end(), [](const auto& v) { return v.has_value(); })) {
      complete.push_back(&row);
    }
  }
  res.rows_used = complete.size();
  res.rows_dropped = rows.size() - complete.size();
  if (complete.size() < 2) {
    throw AnalysisError("pca: need at least 2 complete rows, have " + std::to_string(complete.size()));
  }

  const auto n = static_cast<Eigen::Index>(complete.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) x(i, static_cast<Eigen::Index>(j)) = *(*complete[static_cast<std::size_t>(i)])[j];
  }
  x.rowwise() -= x.colwise().mean();
  if (standardize) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      const double sd = std::sqrt(x.col(c).squaredNorm() / static_cast<double>(n - 1));
      if (sd == 0.0) throw AnalysisError("pca: task '" + res.tasks[j] + "' has zero variance");
      x.col(c) /= sd;
    }
  }
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw AnalysisError("pca: eigendecomposition failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& evecs = solver.eigenvectors();

  res.covariance.assign(k, std::vector<double>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) res.covariance[a][b] = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  res.loadings.assign(k, std::vector<double>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = static_cast<Eigen::Index>(k - 1 - c);
    res.eigenvalues.push_back(std::max(0.0, evals(src)));
    std::size_t big = 0;
    for (std::size_t t = 1; t < k; ++t) {
      if (std::abs(evecs(static_cast<Eigen::Index>(t), src)) > std::abs(evecs(static_cast<Eigen::Index>(big), src))) big = t;
    }
    const double sign = evecs(static_cast<Eigen::Index>(big), src) < 0 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < k; ++t) res.loadings[t][c] = sign * evecs(static_cast<Eigen::Index>(t), src);
  }

  const double total = std::accumulate(res.eigenvalues.begin(), res.eigenvalues.end(), 0.0);
  if (total <= 0.0) throw AnalysisError("pca: matrix has no variance");
  double running = 0.0;
  for (double ev : res.eigenvalues) {
    running += ev;
    res.cumulative_explained.push_back(std::min(1.0, running / total));
  }

  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(res.loadings[a][c]) > std::abs(res.loadings[b][c]);
    });
    res.top_contributors.push_back(std::move(order));
  }
  return res;
}

PcaResult pca(const ScoreMatrix& m, bool standardize, TargetSplit split) {
  const auto grid = m.means(split);
  return pca(grid, m.tasks(), standardize);
}

void write_correlations_csv(std::ostream& out, std::span<const CorrelationResult> results) {
  out << "series_a,series_b,r,n,p,sig_raw,sig_bonf\n";
  for (const auto& r : results) {
    out << r.series_a << ',' << r.series_b << ',' << (r.defined ? format_double(r.r) : "NA") << ',' << r.n << ','
        << (r.defined ? format_double(r.p) : "NA") << ',' << (r.significant_raw ? "true" : "false") << ','
        << (r.significant_bonferroni ? "true" : "false") << '\n';
  }
}

void write_pca_variance_csv(std::ostream& out, const PcaResult& r) {
  out << "pc,cum_var\n";
  for (std::size_t c = 0; c < r.cumulative_explained.size(); ++c) {
    out << "PC" << c + 1 << ',' << format_double(r.cumulative_explained[c]) << '\n';
  }
}

void write_pca_loadings_csv(std::ostream& out, const PcaResult& r) {
  out << "pc,rank,task,abs_loading\n";
  for (std::size_t c = 0; c < r.top_contributors.size(); ++c) {
    for (std::size_t rank = 0; rank < r.top_contributors[c].size(); ++rank) {
      const std::size_t t = r.top_contributors[c][rank];
      out << "PC" << c + 1 << ',' << rank + 1 << ',' << r.tasks[t] << ',' << format_double(std::abs(r.loadings[t][c]))
          << '\n';
    }
  }
}

}  // namespace nounprobe
