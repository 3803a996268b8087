#include "crosstrack/transition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace crosstrack {

diff::Value build_transition(const diff::Value& scores, TransitionNorm norm) {
  if (scores.cols() < 2) {
    throw std::invalid_argument("build_transition: need >= 2 columns (detections + exit), got " +
                                std::to_string(scores.cols()));
  }
  diff::Value m_row = diff::softmax_rows(scores);
  if (norm == TransitionNorm::kRowOnly) return m_row;
  // The exit column competes in the column softmax like any other: if it
  // did not, sending every track to exit would satisfy any consistency
  // objective built on this matrix.
  diff::Value m_col = diff::softmax_cols(scores);
  return diff::min_elementwise(m_row, m_col);
}

Assignment hungarian(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  Assignment out;
  if (rows == 0 || cols == 0) {
    for (int i = 0; i < rows; ++i) out.unmatched_rows.push_back(i);
    for (int j = 0; j < cols; ++j) out.unmatched_cols.push_back(j);
    return out;
  }
  const int n = std::max(rows, cols);
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double pad = 10.0 * scale;
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, pad);
  a.topLeftCorner(rows, cols) = cost;

  // Kuhn-Munkres with potentials, 1-indexed internals, O(n^3).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> match_row(n), match_col(n);
  for (int j = 0; j < n; ++j) {
    match_row[j] = p[j + 1] - 1;
    match_col[p[j + 1] - 1] = j;
  }

  // Complementary slackness: minimum-cost matchings are exactly the
  // perfect matchings on tight edges (reduced cost ~ 0), so refining
  // within them is free. Scan rows in order and give each the lowest
  // tight real column that leaves the rest matchable; the only free
  // column during a reroute is the scanned row's old one.
  const double tol = 1e-9 * scale;
  auto tight = [&](int i, int j) { return a(i, j) - u[i + 1] - v[j + 1] <= tol; };

  std::vector<char> col_visited(n);
  auto reroute = [&](auto&& self, int row, int free_col, int locked_below) -> bool {
    for (int j = 0; j < n; ++j) {
      if (col_visited[j] || !tight(row, j)) continue;
      col_visited[j] = true;
      if (j == free_col) {
        match_row[j] = row;
        match_col[row] = j;
        return true;
      }
      const int owner = match_row[j];
      if (owner < locked_below) continue;
      if (self(self, owner, free_col, locked_below)) {
        match_row[j] = row;
        match_col[row] = j;
        return true;
      }
    }
    return false;
  };

  for (int i = 0; i < rows; ++i) {
    const int limit = std::min(match_col[i], cols);
    for (int j = 0; j < limit; ++j) {
      if (!tight(i, j)) continue;
      const int owner = match_row[j];
      if (owner < i) continue;  // a fixed row keeps its column
      std::fill(col_visited.begin(), col_visited.end(), 0);
      col_visited[j] = true;
      const int old_col = match_col[i];
      if (reroute(reroute, owner, old_col, i)) {
        match_row[j] = i;
        match_col[i] = j;
        break;
      }
    }
  }

  std::vector<bool> col_used(cols, false);
  for (int i = 0; i < rows; ++i) {
    const int j = match_col[i];
    if (j < cols) {
      out.matches.emplace_back(i, j);
      col_used[j] = true;
    } else {
      out.unmatched_rows.push_back(i);
    }
  }
  for (int j = 0; j < cols; ++j) {
    if (!col_used[j]) out.unmatched_cols.push_back(j);
  }
  return out;
}

Assignment match_frame(const Eigen::MatrixXd& transition, double accept_threshold) {
  const int rows = static_cast<int>(transition.rows());
  const int det_cols = static_cast<int>(transition.cols()) - 1;
  if (det_cols <= 0) {
    Assignment out;
    for (int i = 0; i < rows; ++i) out.unmatched_rows.push_back(i);
    return out;
  }
  Eigen::MatrixXd cost = 1.0 - transition.leftCols(det_cols).array();
  Assignment raw = hungarian(cost);
  Assignment out;
  out.unmatched_rows = raw.unmatched_rows;
  out.unmatched_cols = raw.unmatched_cols;
  for (auto [i, j] : raw.matches) {
    if (transition(i, j) >= accept_threshold) {
      out.matches.emplace_back(i, j);
    } else {
      out.unmatched_rows.push_back(i);
      out.unmatched_cols.push_back(j);
    }
  }
  std::sort(out.unmatched_rows.begin(), out.unmatched_rows.end());
  std::sort(out.unmatched_cols.begin(), out.unmatched_cols.end());
  return out;
}

}  // namespace crosstrack
