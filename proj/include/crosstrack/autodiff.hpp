#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

namespace crosstrack::diff {

using Matrix = Eigen::MatrixXd;

class Value;

namespace detail {

struct Node {
  Matrix data;
  Matrix grad;  // same shape as data, zero-initialized
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // scatters this->grad into parents
};

Value make_value(std::shared_ptr<Node> node);

}  // namespace detail

/// A dense real matrix tracked on a dynamically built gradient tape.
///
/// Copies are shallow: they alias the same tape node, so a Value can be
/// passed around freely while the graph stays intact. The tape is rebuilt
/// for every example and freed once the last Value referencing it goes out
/// of scope. backward() accumulates d(sum(this))/d(node) into every node
/// of the graph, visiting each node exactly once in reverse topological
/// order; gradients on shared subexpressions therefore add up rather than
/// overwrite.
class Value {
 public:
  Value() = default;
  explicit Value(Matrix data);
  static Value scalar(double v);
  static Value zeros(int rows, int cols);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return static_cast<int>(node_->data.rows()); }
  int cols() const { return static_cast<int>(node_->data.cols()); }

  const Matrix& data() const { return node_->data; }
  Matrix& mutable_data() { return node_->data; }
  const Matrix& grad() const { return node_->grad; }
  double item() const;

  /// Zero this node's gradient accumulator (used on leaves between steps).
  void zero_grad();

  /// A new leaf holding a copy of the current data, cut off from the tape.
  Value detach() const;

  /// Accumulate gradients of sum(this) into every node of the graph.
  void backward();

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  friend Value detail::make_value(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;
};

// Elementwise and matrix arithmetic. Shape mismatches throw
// std::invalid_argument naming both operand shapes.
Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);
Value neg(const Value& a);

/// Adds a column vector b to every column of a.
Value add_col_broadcast(const Value& a, const Value& b);

Value concat_cols(const std::vector<Value>& parts);
Value concat_rows(const std::vector<Value>& parts);
Value slice_cols(const Value& a, int start, int count);

Value relu(const Value& a);
Value tanh(const Value& a);
Value sigmoid(const Value& a);
Value log(const Value& a);

/// Softmax along each row / column, computed with max subtraction so
/// arbitrarily large scores stay finite. Rows (resp. columns) of the
/// result sum to 1.
Value softmax_rows(const Value& a);
Value softmax_cols(const Value& a);

/// Entrywise minimum. The gradient of each entry is routed to the smaller
/// operand; on ties the first operand receives the full gradient.
Value min_elementwise(const Value& a, const Value& b);

/// All-pairs column concatenation: for a (ra x m) and b (rb x n), returns
/// a (ra+rb) x (m*n) matrix whose column i*n+j is [a.col(i); b.col(j)].
Value pair_columns(const Value& a, const Value& b);

/// Row-major reshape (total element count preserved).
Value reshape_rows(const Value& a, int rows, int cols);

/// Replicates a 1x1 value into a rows x cols matrix.
Value broadcast_scalar(const Value& a, int rows, int cols);

Value row_sums(const Value& a);  // R x C -> R x 1
Value sum(const Value& a);       // R x C -> 1 x 1

}  // namespace crosstrack::diff
