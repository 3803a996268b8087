#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "crosstrack/autodiff.hpp"

namespace crosstrack {

struct Assignment {
  std::vector<std::pair<int, int>> matches;  // (row, col), each index at most once
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
};

enum class TransitionNorm {
  kMinRowCol,  // min(row softmax, column softmax), elementwise
  kRowOnly,    // row softmax alone (degenerate-model ablation)
};

/// Turns a score matrix with a trailing exit column into a transition
/// matrix: min(row softmax, column softmax), both over the full matrix.
/// Rows and columns each sum to at most 1, so tracks must claim distinct
/// detections — and cannot all claim the exit column — to score high.
/// Throws std::invalid_argument on fewer than 2 columns.
diff::Value build_transition(const diff::Value& scores,
                             TransitionNorm norm = TransitionNorm::kMinRowCol);

/// Minimum-total-cost matching of size min(R, C) on a finite cost matrix.
/// Rectangular inputs are padded square internally; ties resolve toward
/// low row index, then low column index.
Assignment hungarian(const Eigen::MatrixXd& cost);

/// Hungarian on cost 1 - M over detection columns (exit column excluded),
/// then demotes matched pairs with M below accept_threshold to unmatched.
Assignment match_frame(const Eigen::MatrixXd& transition, double accept_threshold);

}  // namespace crosstrack
