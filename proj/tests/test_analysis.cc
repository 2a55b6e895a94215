#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nounprobe/analysis.hpp"
#include "nounprobe/error.hpp"
#include "nounprobe/rng.hpp"
#include "oracles.hpp"

using namespace nounprobe;

namespace {

double uniform(Rng& rng) { return static_cast<double>(uniform_index(rng, 1u << 30)) / static_cast<double>(1u << 30); }

std::vector<std::vector<std::optional<double>>> as_rows(const oracle::Matrix& m) {
  std::vector<std::vector<std::optional<double>>> out;
  for (const auto& r : m) out.emplace_back(r.begin(), r.end());
  return out;
}

oracle::Matrix random_matrix(Rng& rng, std::size_t n, std::size_t k) {
  oracle::Matrix m(n, std::vector<double>(k));
  for (auto& r : m) {
    for (auto& v : r) v = uniform(rng) * 4 - 2;
  }
  return m;
}

}  // namespace

TEST_CASE("pearson on the five-point example") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 1, 4, 3, 6};
  const auto r = pearson(x, y);
  REQUIRE(r.defined);
  CHECK(r.r == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-14));
  CHECK(r.r == doctest::Approx(0.8219949365).epsilon(1e-9));
  CHECK(r.p == doctest::Approx(0.0877066470).epsilon(1e-8));
  CHECK(r.n == 5);
  CHECK_FALSE(r.significant_raw);
}

TEST_CASE("pearson invariances") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(12), y(12), ax(12), neg(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = uniform(rng);
      y[i] = uniform(rng) + 0.5 * x[i];
      ax[i] = 3.5 * x[i] - 7;
      neg[i] = -y[i];
    }
    const double r = pearson(x, y).r;
    CHECK(std::abs(pearson(ax, y).r - r) < 1e-12);
    CHECK(std::abs(pearson(y, x).r - r) < 1e-12);
    CHECK(std::abs(pearson(x, neg).r + r) < 1e-12);
    CHECK(pearson(x, neg).p == doctest::Approx(pearson(x, y).p).epsilon(1e-12));
  }
}

TEST_CASE("pearson edge cases") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> line = {2, 4, 6, 8};
  const auto perfect = pearson(x, line);
  CHECK(perfect.r == 1.0);
  CHECK(perfect.p == 0.0);
  const std::vector<double> flat = {5, 5, 5, 5};
  const auto undefined = pearson(x, flat);
  CHECK_FALSE(undefined.defined);
  CHECK_FALSE(undefined.significant_raw);
  const std::vector<double> two = {1, 2};
  CHECK_THROWS_AS(pearson(two, two), AnalysisError);
  const std::vector<double> three = {1, 2, 3};
  CHECK_THROWS_AS(pearson(x, three), AnalysisError);
}

TEST_CASE("bonferroni over thirty comparisons") {
  std::vector<CorrelationResult> results(30);
  for (auto& r : results) {
    r.defined = true;
    r.p = 0.5;
  }
  results[0].p = 0.01;
  results[1].p = 0.0001;
  results[2].defined = false;
  results[2].p = 0.0;
  bonferroni(results, 0.05);
  CHECK(results[0].significant_raw);
  CHECK_FALSE(results[0].significant_bonferroni);
  CHECK(results[1].significant_raw);
  CHECK(results[1].significant_bonferroni);
  CHECK_FALSE(results[2].significant_raw);
  CHECK_FALSE(results[3].significant_raw);
}

TEST_CASE("task and cross-model correlation suites") {
  std::vector<std::string> nouns = {"a", "b", "c", "d", "e"};
  ScoreMatrix m1("m1", nouns, {"t1", "t2", "t3"});
  ScoreMatrix m2("m2", nouns, {"t1", "t2"});
  const double t1[] = {1, 2, 3, 4, 5};
  const double t2[] = {2, 1, 4, 3, 6};
  for (std::size_t i = 0; i < 5; ++i) {
    m1.set(i, 0, TargetSplit::All, NounTaskScore{nouns[i], "t1", "m1", t1[i], 10, 0, false});
    m1.set(i, 1, TargetSplit::All, NounTaskScore{nouns[i], "t2", "m1", t2[i], 10, 0, false});
    m1.set(i, 2, TargetSplit::All, NounTaskScore{nouns[i], "t3", "m1", 1.0, 10, 0, false});
    m2.set(i, 0, TargetSplit::All, NounTaskScore{nouns[i], "t1", "m2", t2[i], 10, 0, false});
    if (i < 2) m2.set(i, 1, TargetSplit::All, NounTaskScore{nouns[i], "t2", "m2", t1[i], 10, 0, false});
  }
  const auto tasks = task_correlations(m1);
  REQUIRE(tasks.size() == 3);
  CHECK(tasks[0].series_a == "m1:t1");
  CHECK(tasks[0].series_b == "m1:t2");
  CHECK(tasks[0].r == doctest::Approx(0.8219949365).epsilon(1e-9));
  CHECK_FALSE(tasks[1].defined);  // t3 is constant

  const std::vector<ScoreMatrix> both = {m1, m2};
  const auto cross = cross_model_correlations(both);
  REQUIRE(cross.size() == 2);
  CHECK(cross[0].series_a == "m1:t1");
  CHECK(cross[0].series_b == "m2:t1");
  CHECK(cross[0].r == doctest::Approx(0.8219949365).epsilon(1e-9));
  CHECK_FALSE(cross[1].defined);  // only two shared nouns
  CHECK(cross[1].n == 2);

  std::ostringstream csv;
  write_correlations_csv(csv, cross);
  CHECK(csv.str().find("m1:t2,m2:t2,NA,2,NA,false,false") != std::string::npos);
}

TEST_CASE("pca matches the characteristic-polynomial oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = random_matrix(rng, 6, 4);
    for (bool standardize : {true, false}) {
      const auto res = pca(as_rows(data), {"a", "b", "c", "d"}, standardize);
      const auto cov = oracle::covariance(data, standardize);
      const auto ref = oracle::eigen_psd(cov);
      for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) CHECK(std::abs(res.covariance[a][b] - cov[a][b]) < 1e-12);
      }
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(std::abs(res.eigenvalues[c] - ref.values[c]) < 1e-7);
        for (std::size_t t = 0; t < 4; ++t) CHECK(std::abs(res.loadings[t][c] - ref.vectors[c][t]) < 1e-7);
      }
      if (standardize) {
        double sum = 0;
        for (double ev : res.eigenvalues) sum += ev;
        CHECK(std::abs(sum - 4.0) < 1e-9);
      }
      CHECK(res.cumulative_explained.back() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("pca reconstructs the decomposed matrix") {
  Rng rng(5);
  const auto data = random_matrix(rng, 10, 5);
  const auto res = pca(as_rows(data), {"a", "b", "c", "d", "e"});
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) s += res.loadings[a][c] * res.eigenvalues[c] * res.loadings[b][c];
      CHECK(std::abs(s - res.covariance[a][b]) < 1e-10);
    }
  }
  for (std::size_t c = 1; c < 5; ++c) CHECK(res.eigenvalues[c - 1] >= res.eigenvalues[c]);
}

TEST_CASE("pca on perfectly correlated tasks puts everything on one component") {
  std::vector<std::vector<std::optional<double>>> rows;
  for (int i = 0; i < 8; ++i) rows.push_back({i * 1.0, i * 2.0 + 1, -i * 0.5});
  const auto res = pca(rows, {"a", "b", "c"});
  CHECK(res.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(res.eigenvalues[1] < 1e-12);
  CHECK(res.cumulative_explained[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pca on uncorrelated tasks") {
  // Columns are orthogonal with equal variance: correlation matrix is the identity.
  std::vector<std::vector<std::optional<double>>> rows = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const auto res = pca(rows, {"a", "b"});
  CHECK(res.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.cumulative_explained[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pca drops incomplete rows and rejects constant tasks") {
  std::vector<std::vector<std::optional<double>>> rows = {{1, 2}, {2, 1}, {3, std::nullopt}, {4, 5}};
  const auto res = pca(rows, {"a", "b"});
  CHECK(res.rows_used == 3);
  CHECK(res.rows_dropped == 1);

  std::vector<std::vector<std::optional<double>>> flat = {{1, 2}, {2, 2}, {3, 2}};
  try {
    pca(flat, {"SVA_Simple", "RA_Simple"});
    FAIL("expected an error");
  } catch (const AnalysisError& e) {
    CHECK(std::string(e.what()).find("'RA_Simple'") != std::string::npos);
  }
  std::vector<std::vector<std::optional<double>>> one = {{1, 2}};
  CHECK_THROWS_AS(pca(one, {"a", "b"}), AnalysisError);
}

TEST_CASE("pca csv output") {
  std::vector<std::vector<std::optional<double>>> rows;
  for (int i = 0; i < 8; ++i) rows.push_back({i * 1.0, i * 2.0 + 1, -i * 0.5});
  const auto res = pca(rows, {"a", "b", "c"});
  std::ostringstream var, load;
  write_pca_variance_csv(var, res);
  write_pca_loadings_csv(load, res);
  CHECK(var.str().rfind("pc,cum_var\nPC1,1\n", 0) == 0);
  CHECK(load.str().rfind("pc,rank,task,abs_loading\nPC1,1,", 0) == 0);
  std::size_t lines = 0;
  for (char c : load.str()) lines += c == '\n';
  CHECK(lines == 1 + 9);
}
