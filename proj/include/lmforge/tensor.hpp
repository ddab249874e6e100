#pragma once

// Dense f64 tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a graph node. Ops record their parents and
// a backward closure only when some input requires a gradient and no
// NoGradGuard is active; the graph is rebuilt on every forward pass.
//
// Gradient accumulation: backward() adds into the .grad of every leaf that
// requires a gradient. Calling it twice without zero_grad() sums both
// contributions. Optimizer steps zero the gradients they consume.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lmforge {

using Shape = std::vector<std::size_t>;
using TokenId = std::int32_t;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  std::vector<double>& ensure_grad();
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // 2-D accessors. A rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // In-place access for parameter initialisation and optimizer updates.
  // Must not be used on a tensor whose graph is still awaiting backward().
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Deep copy of the values as a fresh leaf.
  Tensor detach(bool requires_grad = false) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Topologically ordered view of the graph below `root`: every node appears
// after all of its parents. Only nodes that require a gradient are included.
using Tape = std::vector<detail::Node*>;
Tape build_tape(const Tensor& root);

// Requires a scalar loss that participates in the graph.
void backward(const Tensor& loss);

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T
// x[m,k] * w[n,k]^T + b[n]; b may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor square(const Tensor& x);
// a * x + b with constants a, b.
Tensor affine(const Tensor& x, double a, double b);
inline Tensor scale(const Tensor& x, double a) { return affine(x, a, 0.0); }

// x[m,n] + bias[n] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Row lookup; backward scatter-adds into table.grad.
Tensor gather_rows(const Tensor& table, std::span<const TokenId> ids);

// Row-wise select: out[r] = mask[r] ? a[r] : b[r].
Tensor select_rows(std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// For x laid out as `groups` consecutive blocks of `seq_len` rows, builds
// every length-`width` window inside each block as one row of
// width*cols values: out has groups*(seq_len-width+1) rows.
Tensor windows(const Tensor& x, std::size_t groups, std::size_t seq_len, std::size_t width);

// Column-wise max over each of `groups` consecutive equal-size row blocks.
Tensor max_pool_groups(const Tensor& x, std::size_t groups);

// Mean NLL over unmasked rows (mask[i] != 0), log-sum-exp with max shift.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                             std::span<const std::uint8_t> mask);

// sum_i weights[i] * (-log softmax(logits[i])[targets[i]]). Rows with zero
// weight are skipped entirely (their target need not be valid).
Tensor weighted_nll(const Tensor& logits, std::span<const TokenId> targets,
                    std::span<const double> weights);

// Mean binary cross-entropy of sigmoid(logits[i]) against labels[i] in {0,1}.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels);

// Row-wise softmax values (no graph).
std::vector<double> softmax_rows(const Tensor& logits, double temperature = 1.0);

// Per-row log-probabilities of the targets (no graph).
std::vector<double> target_log_probs(const Tensor& logits, std::span<const TokenId> targets);

// ---- optimisation ----------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// In-place update of `params` (all must hold gradients), then zeroes grads.
// The parameter list must be passed in the same order on every call.
void optimizer_step(OptimizerState& state, std::span<const Tensor> params);

// Rescales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<const Tensor> params, double max_norm);

void zero_grads(std::span<const Tensor> params);

}  // namespace lmforge
