#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

// Reference computations written without the library or Eigen, for checking
// the analysis and frequency code.
namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Sample covariance (n-1) of the columns, optionally of z-scored columns.
inline Matrix covariance(const Matrix& rows, bool standardize) {
  const std::size_t n = rows.size(), k = rows[0].size();
  std::vector<std::vector<double>> cols(k, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) cols[j][i] = rows[i][j];
  }
  for (auto& c : cols) {
    const double m = mean(c);
    for (auto& v : c) v -= m;
    if (standardize) {
      double ss = 0;
      for (double v : c) ss += v * v;
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      for (auto& v : c) v /= sd;
    }
  }
  Matrix out(k, std::vector<double>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += cols[a][i] * cols[b][i];
      out[a][b] = s / static_cast<double>(n - 1);
    }
  }
  return out;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b[0].size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      for (std::size_t t = 0; t < b.size(); ++t) out[i][j] += a[i][t] * b[t][j];
    }
  }
  return out;
}

// Coefficients c[0..k] of det(lambda I - A) = sum c[i] lambda^(k-i), by the
// Faddeev-LeVerrier recurrence.
inline std::vector<double> characteristic_polynomial(const Matrix& a) {
  const std::size_t k = a.size();
  std::vector<double> c(k + 1);
  c[0] = 1;
  Matrix m(k, std::vector<double>(k));
  for (std::size_t step = 1; step <= k; ++step) {
    for (std::size_t i = 0; i < k; ++i) m[i][i] += c[step - 1];
    const Matrix am = multiply(a, m);
    double trace = 0;
    for (std::size_t i = 0; i < k; ++i) trace += am[i][i];
    c[step] = -trace / static_cast<double>(step);
    m = am;
  }
  return c;
}

inline double eval_poly(const std::vector<double>& c, double x) {
  double v = 0;
  for (double coef : c) v = v * x + coef;
  return v;
}

// Roots of a polynomial with only real roots in [lo, hi], found by scanning
// for sign changes and bisecting. Descending order.
inline std::vector<double> real_roots(const std::vector<double>& c, double lo, double hi, std::size_t grid = 200000) {
  std::vector<double> roots;
  double prev_x = lo, prev = eval_poly(c, lo);
  for (std::size_t i = 1; i <= grid; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid);
    const double v = eval_poly(c, x);
    if (v == 0.0) {
      roots.push_back(x);
    } else if ((prev < 0) != (v < 0) && prev != 0.0) {
      double a = prev_x, b = x, fa = prev;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = eval_poly(c, mid);
        if ((fm < 0) == (fa < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev = v;
  }
  std::sort(roots.rbegin(), roots.rend());
  return roots;
}

// Solves m x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Matrix m, std::vector<double> b) {
  const std::size_t k = m.size();
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    std::swap(b[col], b[piv]);
    if (m[col][col] == 0.0) m[col][col] = 1e-300;
    for (std::size_t r = col + 1; r < k; ++r) {
      const double f = m[r][col] / m[col][col];
      for (std::size_t j = col; j < k; ++j) m[r][j] -= f * m[col][j];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(k);
  for (std::size_t i = k; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < k; ++j) s -= m[i][j] * x[j];
    x[i] = s / m[i][i];
  }
  return x;
}

// Unit eigenvector for `lambda` by inverse iteration, sign fixed so that the
// largest-magnitude component is positive.
inline std::vector<double> eigenvector(const Matrix& a, double lambda) {
  const std::size_t k = a.size();
  Matrix shifted = a;
  for (std::size_t i = 0; i < k; ++i) shifted[i][i] -= lambda + 1e-10;
  std::vector<double> v(k);
  for (std::size_t i = 0; i < k; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  for (int it = 0; it < 8; ++it) {
    v = solve(shifted, v);
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
  }
  std::size_t big = 0;
  for (std::size_t i = 1; i < k; ++i) {
    if (std::abs(v[i]) > std::abs(v[big])) big = i;
  }
  if (v[big] < 0) {
    for (auto& x : v) x = -x;
  }
  return v;
}

struct Eigen {
  std::vector<double> values;           // descending
  std::vector<std::vector<double>> vectors;  // vectors[c] is the c-th eigenvector
};

// Symmetric positive semi-definite matrices only.
inline Eigen eigen_psd(const Matrix& a) {
  double trace = 0;
  for (std::size_t i = 0; i < a.size(); ++i) trace += a[i][i];
  Eigen out;
  out.values = real_roots(characteristic_polynomial(a), -1e-6, trace + 1e-6);
  if (out.values.size() != a.size()) throw std::runtime_error("oracle: eigenvalues not separated");
  for (double l : out.values) out.vectors.push_back(eigenvector(a, l));
  return out;
}

struct Line {
  double slope, intercept, r_squared;
};

// Least squares via the 2x2 normal equations.
inline Line ols(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  Line l{};
  l.slope = (n * sxy - sx * sy) / det;
  l.intercept = (sxx * sy - sx * sxy) / det;
  double ss_res = 0, ss_tot = 0;
  const double my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (l.intercept + l.slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  l.r_squared = 1.0 - ss_res / ss_tot;
  return l;
}

}  // namespace oracle
