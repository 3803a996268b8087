#include "crosstrack/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

namespace crosstrack::diff {

namespace {

using detail::Node;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::shared_ptr<Node> make_node(Matrix data, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->grad = Matrix::Zero(data.rows(), data.cols());
  n->data = std::move(data);
  n->parents = std::move(parents);
  n->backward_fn = std::move(backward_fn);
  return n;
}

Value wrap(std::shared_ptr<Node> n) { return detail::make_value(std::move(n)); }

void require_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.data().rows() != b.data().rows() || a.data().cols() != b.data().cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.data()) +
                                " vs " + shape_str(b.data()));
  }
}

}  // namespace

namespace detail {

Value make_value(std::shared_ptr<Node> node) {
  Value v;
  v.node_ = std::move(node);
  return v;
}

}  // namespace detail

Value::Value(Matrix data) : node_(make_node(std::move(data), {}, nullptr)) {}

Value Value::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Value(std::move(m));
}

Value Value::zeros(int rows, int cols) { return Value(Matrix::Zero(rows, cols)); }

double Value::item() const {
  if (rows() != 1 || cols() != 1) {
    throw std::invalid_argument("item: value is " + shape_str(node_->data) + ", expected 1x1");
  }
  return node_->data(0, 0);
}

void Value::zero_grad() { node_->grad.setZero(); }

Value Value::detach() const { return Value(node_->data); }

void Value::backward() {
  // Iterative post-order DFS; reversing the finish order yields a reverse
  // topological order, so each node is processed after all its consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad.array() += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.data()) + " * " +
                                shape_str(b.data()));
  }
  return wrap(make_node(a.data() * b.data(), {a.node(), b.node()}, [](Node& n) {
    n.parents[0]->grad.noalias() += n.grad * n.parents[1]->data.transpose();
    n.parents[1]->grad.noalias() += n.parents[0]->data.transpose() * n.grad;
  }));
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a, b);
  return wrap(make_node(a.data() + b.data(), {a.node(), b.node()}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad += n.grad;
  }));
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a, b);
  return wrap(make_node(a.data() - b.data(), {a.node(), b.node()}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad -= n.grad;
  }));
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a, b);
  return wrap(make_node(a.data().cwiseProduct(b.data()), {a.node(), b.node()}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad.array() * n.parents[1]->data.array();
    n.parents[1]->grad.array() += n.grad.array() * n.parents[0]->data.array();
  }));
}

Value scale(const Value& a, double s) {
  return wrap(make_node(a.data() * s, {a.node()}, [s](Node& n) { n.parents[0]->grad += n.grad * s; }));
}

Value add_scalar(const Value& a, double s) {
  return wrap(make_node(a.data().array() + s, {a.node()},
                        [](Node& n) { n.parents[0]->grad += n.grad; }));
}

Value neg(const Value& a) { return scale(a, -1.0); }

Value add_col_broadcast(const Value& a, const Value& b) {
  if (b.cols() != 1 || a.rows() != b.rows()) {
    throw std::invalid_argument("add_col_broadcast: shape mismatch " + shape_str(a.data()) +
                                " vs " + shape_str(b.data()));
  }
  return wrap(make_node(a.data().colwise() + b.data().col(0), {a.node(), b.node()}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad.col(0) += n.grad.rowwise().sum();
  }));
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty part list");
  const auto rows = parts[0].rows();
  int cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw std::invalid_argument("concat_cols: row mismatch " + shape_str(parts[0].data()) +
                                  " vs " + shape_str(p.data()));
    }
    cols += p.cols();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  int at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.data();
    at += p.cols();
  }
  return wrap(make_node(std::move(out), std::move(parents), [](Node& n) {
    int at = 0;
    for (auto& p : n.parents) {
      p->grad += n.grad.middleCols(at, p->data.cols());
      at += static_cast<int>(p->data.cols());
    }
  }));
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty part list");
  const auto cols = parts[0].cols();
  int rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw std::invalid_argument("concat_rows: column mismatch " + shape_str(parts[0].data()) +
                                  " vs " + shape_str(p.data()));
    }
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  int at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.data();
    at += p.rows();
  }
  return wrap(make_node(std::move(out), std::move(parents), [](Node& n) {
    int at = 0;
    for (auto& p : n.parents) {
      p->grad += n.grad.middleRows(at, p->data.rows());
      at += static_cast<int>(p->data.rows());
    }
  }));
}

Value slice_cols(const Value& a, int start, int count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::invalid_argument("slice_cols: [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") out of range for " +
                                shape_str(a.data()));
  }
  return wrap(make_node(a.data().middleCols(start, count), {a.node()}, [start, count](Node& n) {
    n.parents[0]->grad.middleCols(start, count) += n.grad;
  }));
}

Value relu(const Value& a) {
  return wrap(make_node(a.data().cwiseMax(0.0), {a.node()}, [](Node& n) {
    n.parents[0]->grad.array() +=
        n.grad.array() * (n.parents[0]->data.array() > 0.0).cast<double>();
  }));
}

Value tanh(const Value& a) {
  return wrap(make_node(a.data().array().tanh(), {a.node()}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad.array() * (1.0 - n.data.array().square());
  }));
}

Value sigmoid(const Value& a) {
  Matrix y = (1.0 / (1.0 + (-a.data().array()).exp())).matrix();
  return wrap(make_node(std::move(y), {a.node()}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad.array() * n.data.array() * (1.0 - n.data.array());
  }));
}

Value log(const Value& a) {
  return wrap(make_node(a.data().array().log(), {a.node()}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad.array() / n.parents[0]->data.array();
  }));
}

Value softmax_rows(const Value& a) {
  Matrix y = a.data();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::ArrayXd row = y.row(i).array() - y.row(i).maxCoeff();
    Eigen::ArrayXd e = row.exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  return wrap(make_node(std::move(y), {a.node()}, [](Node& n) {
    // dx_i = y_i * (g_i - sum_k g_k y_k), per row
    for (Eigen::Index i = 0; i < n.data.rows(); ++i) {
      const double dot = n.grad.row(i).dot(n.data.row(i));
      n.parents[0]->grad.row(i).array() +=
          n.data.row(i).array() * (n.grad.row(i).array() - dot);
    }
  }));
}

Value softmax_cols(const Value& a) {
  Matrix y = a.data();
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    Eigen::ArrayXd col = y.col(j).array() - y.col(j).maxCoeff();
    Eigen::ArrayXd e = col.exp();
    y.col(j) = (e / e.sum()).matrix();
  }
  return wrap(make_node(std::move(y), {a.node()}, [](Node& n) {
    for (Eigen::Index j = 0; j < n.data.cols(); ++j) {
      const double dot = n.grad.col(j).dot(n.data.col(j));
      n.parents[0]->grad.col(j).array() +=
          n.data.col(j).array() * (n.grad.col(j).array() - dot);
    }
  }));
}

Value min_elementwise(const Value& a, const Value& b) {
  require_same_shape("min_elementwise", a, b);
  return wrap(make_node(a.data().cwiseMin(b.data()), {a.node(), b.node()}, [](Node& n) {
    // Ties route the full gradient to the first operand.
    Eigen::ArrayXXd take_a =
        (n.parents[0]->data.array() <= n.parents[1]->data.array()).cast<double>();
    n.parents[0]->grad.array() += n.grad.array() * take_a;
    n.parents[1]->grad.array() += n.grad.array() * (1.0 - take_a);
  }));
}

Value pair_columns(const Value& a, const Value& b) {
  const int ra = a.rows(), rb = b.rows();
  const int m = a.cols(), n_cols = b.cols();
  Matrix out(ra + rb, static_cast<Eigen::Index>(m) * n_cols);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n_cols; ++j) {
      out.block(0, i * n_cols + j, ra, 1) = a.data().col(i);
      out.block(ra, i * n_cols + j, rb, 1) = b.data().col(j);
    }
  }
  return wrap(make_node(std::move(out), {a.node(), b.node()}, [ra, rb, m, n_cols](Node& n) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n_cols; ++j) {
        n.parents[0]->grad.col(i) += n.grad.block(0, i * n_cols + j, ra, 1);
        n.parents[1]->grad.col(j) += n.grad.block(ra, i * n_cols + j, rb, 1);
      }
    }
  }));
}

Value reshape_rows(const Value& a, int rows, int cols) {
  if (static_cast<long long>(rows) * cols != static_cast<long long>(a.rows()) * a.cols()) {
    throw std::invalid_argument("reshape_rows: cannot reshape " + shape_str(a.data()) + " to " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  const int in_cols = a.cols();
  Matrix out(rows, cols);
  for (int idx = 0; idx < rows * cols; ++idx) {
    out(idx / cols, idx % cols) = a.data()(idx / in_cols, idx % in_cols);
  }
  return wrap(make_node(std::move(out), {a.node()}, [rows, cols, in_cols](Node& n) {
    for (int idx = 0; idx < rows * cols; ++idx) {
      n.parents[0]->grad(idx / in_cols, idx % in_cols) += n.grad(idx / cols, idx % cols);
    }
  }));
}

Value broadcast_scalar(const Value& a, int rows, int cols) {
  if (a.rows() != 1 || a.cols() != 1) {
    throw std::invalid_argument("broadcast_scalar: source is " + shape_str(a.data()) +
                                ", expected 1x1");
  }
  return wrap(make_node(Matrix::Constant(rows, cols, a.data()(0, 0)), {a.node()},
                        [](Node& n) { n.parents[0]->grad(0, 0) += n.grad.sum(); }));
}

Value row_sums(const Value& a) {
  return wrap(make_node(a.data().rowwise().sum(), {a.node()}, [](Node& n) {
    n.parents[0]->grad.colwise() += n.grad.col(0);
  }));
}

Value sum(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  return wrap(make_node(std::move(out), {a.node()},
                        [](Node& n) { n.parents[0]->grad.array() += n.grad(0, 0); }));
}

}  // namespace crosstrack::diff
