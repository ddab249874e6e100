#include <algorithm>
#include <cmath>
#include <limits>

#include "lmforge/errors.hpp"
#include "lmforge/kernels.hpp"
#include "lmforge/tensor.hpp"

namespace lmforge {
namespace {

using NodePtr = std::shared_ptr<detail::Node>;

// Wraps freshly computed values into a graph node. The backward closure is
// attached only when some input requires a gradient.
Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<NodePtr> parents, std::function<void(detail::Node&)> bw) {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError(std::string(op) + ": non-finite value produced");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool rg = false;
  if (grad_mode_enabled())
    for (const auto& p : parents) rg = rg || p->requires_grad;
  if (rg) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
}

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result(op, x.shape(), std::move(out), {x.node_ptr()}, [df](detail::Node& self) {
    detail::Node& px = parent(self, 0);
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * df(px.value[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw DimensionError("matmul: inner dimensions differ " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  std::vector<double> c(m * n, 0.0);
  kernels::active().gemm_nn(a.values().data(), b.values().data(), c.data(), m, k, n);
  return make_result("matmul", {m, n}, std::move(c), {a.node_ptr(), b.node_ptr()},
                     [m, k, n](detail::Node& self) {
                       detail::Node& pa = parent(self, 0);
                       detail::Node& pb = parent(self, 1);
                       const auto& kt = kernels::active();
                       if (pa.requires_grad)
                         kt.gemm_nt(self.grad.data(), pb.value.data(), pa.ensure_grad().data(), m, n, k);
                       if (pb.requires_grad)
                         kt.gemm_tn(pa.value.data(), self.grad.data(), pb.ensure_grad().data(), k, m, n);
                     });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2("matmul_nt", a);
  require_rank2("matmul_nt", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k)
    throw DimensionError("matmul_nt: inner dimensions differ " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()) + "^T");
  std::vector<double> c(m * n, 0.0);
  kernels::active().gemm_nt(a.values().data(), b.values().data(), c.data(), m, k, n);
  return make_result("matmul_nt", {m, n}, std::move(c), {a.node_ptr(), b.node_ptr()},
                     [m, k, n](detail::Node& self) {
                       detail::Node& pa = parent(self, 0);
                       detail::Node& pb = parent(self, 1);
                       const auto& kt = kernels::active();
                       if (pa.requires_grad)
                         kt.gemm_nn(self.grad.data(), pb.value.data(), pa.ensure_grad().data(), m, n, k);
                       if (pb.requires_grad)
                         kt.gemm_tn(self.grad.data(), pa.value.data(), pb.ensure_grad().data(), n, m, k);
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul_nt(x, w);
  return b.defined() ? add_row_bias(y, b) : y;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank2("add_row_bias", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.numel() != n || bias.rank() != 1)
    throw DimensionError("add_row_bias: bias " + shape_to_string(bias.shape()) +
                         " does not match columns of " + shape_to_string(x.shape()));
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return make_result("add_row_bias", x.shape(), std::move(out), {x.node_ptr(), bias.node_ptr()},
                     [m, n](detail::Node& self) {
                       detail::Node& px = parent(self, 0);
                       detail::Node& pb = parent(self, 1);
                       if (px.requires_grad) {
                         auto& g = px.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result("add", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [](detail::Node& self) {
                       for (std::size_t p = 0; p < 2; ++p) {
                         detail::Node& pp = parent(self, p);
                         if (!pp.requires_grad) continue;
                         auto& g = pp.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result("sub", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [](detail::Node& self) {
                       for (std::size_t p = 0; p < 2; ++p) {
                         detail::Node& pp = parent(self, p);
                         if (!pp.requires_grad) continue;
                         const double sign = p == 0 ? 1.0 : -1.0;
                         auto& g = pp.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result("mul", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [](detail::Node& self) {
                       detail::Node& pa = parent(self, 0);
                       detail::Node& pb = parent(self, 1);
                       if (pa.requires_grad) {
                         auto& g = pa.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
                       }
                     });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values())
    if (!(v > 0.0)) throw DomainError("log: non-positive operand " + std::to_string(v));
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor affine(const Tensor& x, double a, double b) {
  return unary("affine", x, [a, b](double v) { return a * v + b; }, [a](double, double) { return a; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result("sum", {}, {s}, {x.node_ptr()}, [](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor gather_rows(const Tensor& table, std::span<const TokenId> ids) {
  require_rank2("gather_rows", table);
  const std::size_t vocab = table.rows(), d = table.cols();
  if (ids.empty()) throw DegenerateInputError("gather_rows: empty id list");
  std::vector<double> out(ids.size() * d);
  auto tv = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
      throw IndexError("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    std::copy_n(tv.begin() + ids[r] * d, d, out.begin() + r * d);
  }
  std::vector<TokenId> kept(ids.begin(), ids.end());
  return make_result("gather_rows", {ids.size(), d}, std::move(out), {table.node_ptr()},
                     [kept = std::move(kept), d](detail::Node& self) {
                       auto& g = parent(self, 0).ensure_grad();
                       for (std::size_t r = 0; r < kept.size(); ++r)
                         for (std::size_t j = 0; j < d; ++j) g[kept[r] * d + j] += self.grad[r * d + j];
                     });
}

Tensor select_rows(std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b) {
  require_rank2("select_rows", a);
  require_same_shape("select_rows", a, b);
  const std::size_t m = a.rows(), n = a.cols();
  if (mask.size() != m) throw DimensionError("select_rows: mask length differs from row count");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    auto src = (mask[i] ? a : b).values();
    std::copy_n(src.begin() + i * n, n, out.begin() + i * n);
  }
  std::vector<std::uint8_t> kept(mask.begin(), mask.end());
  return make_result("select_rows", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [kept = std::move(kept), n](detail::Node& self) {
                       for (std::size_t p = 0; p < 2; ++p) {
                         detail::Node& pp = parent(self, p);
                         if (!pp.requires_grad) continue;
                         auto& g = pp.ensure_grad();
                         for (std::size_t i = 0; i < kept.size(); ++i) {
                           if ((kept[i] != 0) != (p == 0)) continue;
                           for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j];
                         }
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DegenerateInputError("concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<NodePtr> parents;
  for (const Tensor& t : parts) {
    require_rank2("concat_rows", t);
    if (t.cols() != n) throw DimensionError("concat_rows: column counts differ");
    m += t.rows();
    parents.push_back(t.node_ptr());
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
  return make_result("concat_rows", {m, n}, std::move(out), std::move(parents),
                     [](detail::Node& self) {
                       std::size_t offset = 0;
                       for (auto& p : self.parents) {
                         const std::size_t sz = p->value.size();
                         if (p->requires_grad) {
                           auto& g = p->ensure_grad();
                           for (std::size_t i = 0; i < sz; ++i) g[i] += self.grad[offset + i];
                         }
                         offset += sz;
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DegenerateInputError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<NodePtr> parents;
  std::vector<std::size_t> widths;
  for (const Tensor& t : parts) {
    require_rank2("concat_cols", t);
    if (t.rows() != m) throw DimensionError("concat_cols: row counts differ");
    n += t.cols();
    widths.push_back(t.cols());
    parents.push_back(t.node_ptr());
  }
  std::vector<double> out(m * n);
  std::size_t col = 0;
  for (const Tensor& t : parts) {
    const std::size_t w = t.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(t.values().begin() + i * w, w, out.begin() + i * n + col);
    col += w;
  }
  return make_result("concat_cols", {m, n}, std::move(out), std::move(parents),
                     [widths = std::move(widths), m, n](detail::Node& self) {
                       std::size_t col0 = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         const std::size_t w = widths[p];
                         detail::Node& pp = *self.parents[p];
                         if (pp.requires_grad) {
                           auto& g = pp.ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * n + col0 + j];
                         }
                         col0 += w;
                       }
                     });
}

Tensor windows(const Tensor& x, std::size_t groups, std::size_t seq_len, std::size_t width) {
  require_rank2("windows", x);
  if (groups * seq_len != x.rows())
    throw DimensionError("windows: rows are not groups * seq_len");
  if (width == 0 || width > seq_len)
    throw DimensionError("windows: width must be in [1, seq_len]");
  const std::size_t d = x.cols();
  const std::size_t per = seq_len - width + 1;
  std::vector<double> out(groups * per * width * d);
  auto xv = x.values();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t s = 0; s < per; ++s)
      std::copy_n(xv.begin() + (g * seq_len + s) * d, width * d,
                  out.begin() + (g * per + s) * width * d);
  return make_result("windows", {groups * per, width * d}, std::move(out), {x.node_ptr()},
                     [groups, seq_len, per, width, d](detail::Node& self) {
                       auto& gx = parent(self, 0).ensure_grad();
                       for (std::size_t g = 0; g < groups; ++g)
                         for (std::size_t s = 0; s < per; ++s) {
                           const double* src = self.grad.data() + (g * per + s) * width * d;
                           double* dst = gx.data() + (g * seq_len + s) * d;
                           for (std::size_t i = 0; i < width * d; ++i) dst[i] += src[i];
                         }
                     });
}

Tensor max_pool_groups(const Tensor& x, std::size_t groups) {
  require_rank2("max_pool_groups", x);
  if (groups == 0 || x.rows() % groups != 0)
    throw DimensionError("max_pool_groups: rows not divisible into groups");
  const std::size_t len = x.rows() / groups, n = x.cols();
  std::vector<double> out(groups * n);
  std::vector<std::size_t> arg(groups * n);
  auto xv = x.values();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = g * len;
      for (std::size_t r = g * len + 1; r < (g + 1) * len; ++r)
        if (xv[r * n + j] > xv[best * n + j]) best = r;
      out[g * n + j] = xv[best * n + j];
      arg[g * n + j] = best * n + j;
    }
  return make_result("max_pool_groups", {groups, n}, std::move(out), {x.node_ptr()},
                     [arg = std::move(arg)](detail::Node& self) {
                       auto& g = parent(self, 0).ensure_grad();
                       for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
                     });
}

Tensor weighted_nll(const Tensor& logits, std::span<const TokenId> targets,
                    std::span<const double> weights) {
  require_rank2("weighted_nll", logits);
  const std::size_t m = logits.rows(), vocab = logits.cols();
  if (targets.size() != m || weights.size() != m)
    throw DimensionError("weighted_nll: targets/weights length differs from row count");
  auto lv = logits.values();
  std::vector<double> lse(m, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (weights[i] == 0.0) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab)
      throw IndexError("weighted_nll: target " + std::to_string(targets[i]) + " outside vocabulary of " +
                       std::to_string(vocab));
    const double* row = lv.data() + i * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double s = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) s += std::exp(row[j] - mx);
    lse[i] = mx + std::log(s);
    loss += weights[i] * (lse[i] - row[targets[i]]);
  }
  std::vector<TokenId> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return make_result("weighted_nll", {}, {loss}, {logits.node_ptr()},
                     [t = std::move(t), w = std::move(w), lse = std::move(lse), vocab](detail::Node& self) {
                       detail::Node& pl = parent(self, 0);
                       auto& g = pl.ensure_grad();
                       const double up = self.grad[0];
                       for (std::size_t i = 0; i < t.size(); ++i) {
                         if (w[i] == 0.0) continue;
                         const double scale = up * w[i];
                         const double* row = pl.value.data() + i * vocab;
                         double* grow = g.data() + i * vocab;
                         for (std::size_t j = 0; j < vocab; ++j) grow[j] += scale * std::exp(row[j] - lse[i]);
                         grow[t[i]] -= scale;
                       }
                     });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                             std::span<const std::uint8_t> mask) {
  if (mask.size() != targets.size())
    throw DimensionError("softmax_cross_entropy: mask length differs from targets");
  std::size_t active = 0;
  for (std::uint8_t m : mask) active += m != 0;
  if (active == 0) throw DegenerateInputError("softmax_cross_entropy: every position is masked");
  std::vector<double> w(mask.size());
  const double inv = 1.0 / static_cast<double>(active);
  for (std::size_t i = 0; i < mask.size(); ++i) w[i] = mask[i] ? inv : 0.0;
  return weighted_nll(logits, targets, w);
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  if (logits.numel() != labels.size())
    throw DimensionError("bce_with_logits: one label per logit required");
  if (labels.empty()) throw DegenerateInputError("bce_with_logits: empty batch");
  const double inv = 1.0 / static_cast<double>(labels.size());
  double loss = 0.0;
  auto xv = logits.values();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = xv[i];
    loss += std::max(x, 0.0) - x * labels[i] + std::log1p(std::exp(-std::abs(x)));
  }
  std::vector<double> y(labels.begin(), labels.end());
  return make_result("bce_with_logits", {}, {loss * inv}, {logits.node_ptr()},
                     [y = std::move(y), inv](detail::Node& self) {
                       detail::Node& pl = parent(self, 0);
                       auto& g = pl.ensure_grad();
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         const double x = pl.value[i];
                         const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                         g[i] += self.grad[0] * inv * (s - y[i]);
                       }
                     });
}

std::vector<double> softmax_rows(const Tensor& logits, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("softmax_rows: temperature must be positive");
  const std::size_t m = logits.rows(), vocab = logits.cols();
  std::vector<double> out(m * vocab);
  auto lv = logits.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = lv.data() + i * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double s = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) s += out[i * vocab + j] = std::exp((row[j] - mx) / temperature);
    for (std::size_t j = 0; j < vocab; ++j) out[i * vocab + j] /= s;
  }
  return out;
}

std::vector<double> target_log_probs(const Tensor& logits, std::span<const TokenId> targets) {
  const std::size_t m = logits.rows(), vocab = logits.cols();
  if (targets.size() != m) throw DimensionError("target_log_probs: one target per row required");
  std::vector<double> out(m);
  auto lv = logits.values();
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab)
      throw IndexError("target_log_probs: target outside vocabulary");
    const double* row = lv.data() + i * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double s = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) s += std::exp(row[j] - mx);
    out[i] = row[targets[i]] - mx - std::log(s);
  }
  return out;
}

}  // namespace lmforge
