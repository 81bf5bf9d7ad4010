// Copyright 2026 The rpatrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rpatrol/matrix_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "rpatrol/error.hpp"

namespace rpatrol {
namespace {

constexpr double kCostTol = 1e-12;
constexpr double kPivotTol = 1e-9;

void CleanDistribution(std::vector<double>& p) {
  double total = 0.0;
  for (double& v : p) {
    if (v < 0.0) v = 0.0;
    total += v;
  }
  if (total <= 0.0) Fail(ErrorCode::kInternal, "matrix game: empty strategy");
  for (double& v : p) v /= total;
}

}  // namespace

PayoffMatrix::PayoffMatrix(std::size_t rows, std::size_t cols,
                           std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  Require(values_.size() == rows * cols, "payoff matrix: size mismatch");
}

double SubgameEquilibrium::RowGuarantee(const PayoffMatrix& a) const {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) v += pi[i] * a.at(i, j);
    worst = std::min(worst, v);
  }
  return worst;
}

double SubgameEquilibrium::ColumnGuarantee(const PayoffMatrix& a) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) v += a.at(i, j) * sigma[j];
    best = std::max(best, v);
  }
  return best;
}

namespace {

SubgameEquilibrium SolveDistinct(const PayoffMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Require(m >= 1 && n >= 1, "matrix game: empty payoff matrix");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a.values()) {
    Require(std::isfinite(v), "matrix game: non-finite payoff");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double shift = 1.0 - lo;  // shifted payoffs are >= 1

  // Column player's LP: max 1^T y  s.t.  A' y + s = 1, y, s >= 0, with A'
  // the shifted payoffs. Revised simplex: every pivot refactors the basis from
  // the original data, so nearly degenerate matrices do not accumulate drift.
  // Variables 0..n-1 are y, n..n+m-1 the slacks.
  auto column = [&](std::size_t v, Eigen::VectorXd& out) {
    out.setZero(m);
    if (v < n) {
      for (std::size_t i = 0; i < m; ++i) out(i) = a.at(i, v) + shift;
    } else {
      out(v - n) = 1.0;
    }
  };
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

  Eigen::MatrixXd bmat(m, m);
  Eigen::VectorXd cost(m), col(m), xb(m), w(m), dir(m);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  auto factor = [&] {
    for (std::size_t k = 0; k < m; ++k) {
      column(basis[k], col);
      bmat.col(k) = col;
      cost(k) = basis[k] < n ? 1.0 : 0.0;
    }
    lu.compute(bmat);
    xb = lu.solve(Eigen::VectorXd::Ones(m));
    w = lu.transpose().solve(cost);
    if (!xb.allFinite() || !w.allFinite()) Fail(ErrorCode::kNumeric, "matrix game: singular basis");
  };

  const std::size_t max_pivots = 50 * (m + n) + 1000;
  std::vector<char> in_basis(n + m, 0);
  for (std::size_t pivots = 0;; ++pivots) {
    if (pivots > max_pivots) Fail(ErrorCode::kInternal, "matrix game: pivot limit");
    factor();
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (std::size_t v : basis) in_basis[v] = 1;
    // Bland: lowest-index variable with positive reduced cost.
    std::size_t enter = n + m;
    for (std::size_t v = 0; v < n + m && enter == n + m; ++v) {
      if (in_basis[v]) continue;
      double reduced = 0.0;
      if (v < n) {
        column(v, col);
        reduced = 1.0 - w.dot(col);
      } else {
        reduced = -w(v - n);
      }
      if (reduced > kCostTol) enter = v;
    }
    if (enter == n + m) break;
    column(enter, col);
    dir = lu.solve(col);
    const double dir_tol = kPivotTol * std::max(1.0, dir.cwiseAbs().maxCoeff());
    std::size_t leave = m;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (dir(k) <= dir_tol) continue;
      const double ratio = std::max(xb(k), 0.0) / dir(k);
      if (ratio < best_ratio - 1e-15 ||
          (std::abs(ratio - best_ratio) <= 1e-15 && leave < m && basis[k] < basis[leave])) {
        best_ratio = ratio;
        leave = k;
      }
    }
    if (leave == m) Fail(ErrorCode::kInternal, "matrix game: LP unbounded");
    basis[leave] = enter;
  }

  SubgameEquilibrium eq;
  eq.sigma.assign(n, 0.0);
  double total = 0.0;  // = 1 / shifted value
  for (std::size_t k = 0; k < m; ++k) {
    if (basis[k] < n) {
      eq.sigma[basis[k]] = xb(k);
      total += xb(k);
    }
  }
  eq.pi.resize(m);
  for (std::size_t i = 0; i < m; ++i) eq.pi[i] = w(i);
  if (!(total > 0.0)) Fail(ErrorCode::kInternal, "matrix game: degenerate LP");
  CleanDistribution(eq.sigma);
  CleanDistribution(eq.pi);
  eq.value = 1.0 / total - shift;

  return eq;
}

// Indices of the first occurrence of each distinct row (or column).
std::vector<std::size_t> DistinctLines(const PayoffMatrix& a, bool rows) {
  const std::size_t count = rows ? a.rows() : a.cols();
  const std::size_t len = rows ? a.cols() : a.rows();
  auto at = [&](std::size_t line, std::size_t k) { return rows ? a.at(line, k) : a.at(k, line); };
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < count; ++i) {
    bool dup = false;
    for (std::size_t j : keep) {
      bool same = true;
      for (std::size_t k = 0; k < len && same; ++k) same = at(i, k) == at(j, k);
      if (same) {
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }
  return keep;
}

}  // namespace

SubgameEquilibrium SolveMatrixGame(const PayoffMatrix& a) {
  Require(a.rows() >= 1 && a.cols() >= 1, "matrix game: empty payoff matrix");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a.values()) {
    Require(std::isfinite(v), "matrix game: non-finite payoff");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Repeated rows or columns make the basis singular; solve on distinct ones
  // and give the copies zero mass.
  const std::vector<std::size_t> rows = DistinctLines(a, true);
  const std::vector<std::size_t> cols = DistinctLines(a, false);
  SubgameEquilibrium eq;
  if (rows.size() == a.rows() && cols.size() == a.cols()) {
    eq = SolveDistinct(a);
  } else {
    PayoffMatrix reduced(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) reduced.at(i, j) = a.at(rows[i], cols[j]);
    }
    const SubgameEquilibrium r = SolveDistinct(reduced);
    eq.value = r.value;
    eq.pi.assign(a.rows(), 0.0);
    eq.sigma.assign(a.cols(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) eq.pi[rows[i]] = r.pi[i];
    for (std::size_t j = 0; j < cols.size(); ++j) eq.sigma[cols[j]] = r.sigma[j];
  }

  const double tol = 1e-7 * std::max(1.0, hi - lo);
  const double row_g = eq.RowGuarantee(a);
  const double col_g = eq.ColumnGuarantee(a);
  if (row_g < eq.value - tol || col_g > eq.value + tol) {
    Fail(ErrorCode::kNumeric, "matrix game: equilibrium certificate failed (" +
                                  std::to_string(row_g) + ", " + std::to_string(col_g) +
                                  ", value " + std::to_string(eq.value) + ")");
  }
  return eq;
}

}  // namespace rpatrol
