#include "seqinfer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqinfer/errors.hpp"

namespace seqinfer {
namespace {

std::vector<double>* input_grad(TensorImpl& out, std::size_t i) {
  auto& in = out.node->inputs[i];
  return in->requires_grad ? &*in->grad : nullptr;
}

const std::vector<double>& input_data(TensorImpl& out, std::size_t i) { return out.node->inputs[i]->data; }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_axis(const char* op, const Tensor& a, std::size_t axis) {
  if (axis >= a.dim())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " + shape_str(a.shape()));
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
  std::vector<double> y(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
  return make_result(op, a.shape(), std::move(y), {a}, [df](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& xin = input_data(out, 0);
    const auto& g = *out.grad;
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * df(xin[i], out.data[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.dim() != 2 || (a.dim() != 1 && a.dim() != 2))
    throw DimensionError("matmul: unsupported ranks " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const bool vec = a.dim() == 1;
  const std::size_t m = vec ? 1 : a.shape()[0];
  const std::size_t k = vec ? a.shape()[0] : a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k)
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> c(m * n, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bd[p * n];
      double* crow = &c[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  Shape shape = vec ? Shape{n} : Shape{m, n};
  return make_result("matmul", std::move(shape), std::move(c), {a, b}, [m, k, n](TensorImpl& out) {
    const auto& g = *out.grad;
    const auto& ad = input_data(out, 0);
    const auto& bd = input_data(out, 1);
    if (auto* ga = input_grad(out, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
          (*ga)[i * k + p] += acc;
        }
    if (auto* gb = input_grad(out, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = ad[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * g[i * n + j];
        }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.dim() != 2) throw DimensionError("transpose: expected 2-D, got " + shape_str(a.shape()));
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> y(r * c);
  auto x = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
  return make_result("transpose", {c, r}, std::move(y), {a}, [r, c](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  std::vector<double> y(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(y), {a}, [](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_result("add", a.shape(), std::move(y), {a, b}, [](TensorImpl& out) {
    const auto& g = *out.grad;
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* gi = input_grad(out, k))
        for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return make_result("sub", a.shape(), std::move(y), {a, b}, [](TensorImpl& out) {
    const auto& g = *out.grad;
    if (auto* ga = input_grad(out, 0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = input_grad(out, 1))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_result("mul", a.shape(), std::move(y), {a, b}, [](TensorImpl& out) {
    const auto& g = *out.grad;
    const auto& ad = input_data(out, 0);
    const auto& bd = input_data(out, 1);
    if (auto* ga = input_grad(out, 0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bd[i];
    if (auto* gb = input_grad(out, 1))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * ad[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * factor;
  return make_result("scale", a.shape(), std::move(y), {a}, [factor](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * factor;
  });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: factor must have one element, got " + shape_str(s.shape()));
  const double f = s[0];
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * f;
  return make_result("scale_by", a.shape(), std::move(y), {a, s}, [](TensorImpl& out) {
    const auto& g = *out.grad;
    const auto& ad = input_data(out, 0);
    const double f = input_data(out, 1)[0];
    if (auto* ga = input_grad(out, 0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * f;
    if (auto* gs = input_grad(out, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * ad[i];
      (*gs)[0] += acc;
    }
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (bias.dim() != 1 || a.shape().back() != bias.numel() || a.dim() > 2)
    throw DimensionError("add_bias: " + shape_str(a.shape()) + " + " + shape_str(bias.shape()));
  const std::size_t d = bias.numel();
  std::vector<double> y(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bias[i % d];
  return make_result("add_bias", a.shape(), std::move(y), {a, bias}, [d](TensorImpl& out) {
    const auto& g = *out.grad;
    if (auto* ga = input_grad(out, 0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = input_grad(out, 1))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % d] += g[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor activate(const Tensor& a, Activation act) {
  switch (act) {
    case Activation::identity: return a;
    case Activation::sigmoid: return sigmoid(a);
    case Activation::tanh: return tanh(a);
    case Activation::relu: return relu(a);
  }
  throw ContractError("unknown activation");
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require_axis("softmax", a, axis);
  const auto s = split_at(a.shape(), axis);
  auto x = a.data();
  std::vector<double> y(a.numel());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, x[base + l * s.inner]);
      if (!std::isfinite(mx)) throw DegenerateSliceError("softmax: slice has no finite entry (fully masked row)");
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(x[base + l * s.inner] - mx);
        y[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) y[base + l * s.inner] /= total;
    }
  return make_result("softmax", a.shape(), std::move(y), {a}, [s](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    const auto& y = out.data;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) dot += y[base + l * s.inner] * g[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t idx = base + l * s.inner;
          (*ga)[idx] += y[idx] * (g[idx] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  require_axis("log_softmax", a, axis);
  const auto s = split_at(a.shape(), axis);
  auto x = a.data();
  std::vector<double> y(a.numel());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, x[base + l * s.inner]);
      if (!std::isfinite(mx)) throw DegenerateSliceError("log_softmax: slice has no finite entry");
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) total += std::exp(x[base + l * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t l = 0; l < s.len; ++l) y[base + l * s.inner] = x[base + l * s.inner] - lse;
    }
  return make_result("log_softmax", a.shape(), std::move(y), {a}, [s](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    const auto& y = out.data;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double total = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) total += g[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t idx = base + l * s.inner;
          (*ga)[idx] += g[idx] - std::exp(y[idx]) * total;
        }
      }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const auto& first = parts.front();
  require_axis("concat", first, axis);
  Shape shape = first.shape();
  std::size_t total_len = 0;
  for (const auto& p : parts) {
    bool ok = p.dim() == first.dim();
    for (std::size_t i = 0; ok && i < p.dim(); ++i)
      if (i != axis && p.shape()[i] != first.shape()[i]) ok = false;
    if (!ok)
      throw DimensionError("concat: incompatible shapes " + shape_str(first.shape()) + " and " + shape_str(p.shape()) +
                           " on axis " + std::to_string(axis));
    total_len += p.shape()[axis];
  }
  shape[axis] = total_len;
  const auto s = split_at(shape, axis);
  std::vector<std::size_t> chunk(parts.size());
  std::vector<double> y;
  y.reserve(shape_numel(shape));
  for (std::size_t k = 0; k < parts.size(); ++k) chunk[k] = parts[k].shape()[axis] * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto d = parts[k].data();
      y.insert(y.end(), d.begin() + o * chunk[k], d.begin() + (o + 1) * chunk[k]);
    }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  const std::size_t outer = s.outer;
  return make_result("concat", std::move(shape), std::move(y), std::move(inputs), [chunk, outer](TensorImpl& out) {
    const auto& g = *out.grad;
    std::size_t pos = 0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < chunk.size(); ++k) {
        if (auto* gk = input_grad(out, k))
          for (std::size_t i = 0; i < chunk[k]; ++i) (*gk)[o * chunk[k] + i] += g[pos + i];
        pos += chunk[k];
      }
  });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

MaxResult max_over_axis(const Tensor& a, std::size_t axis) {
  require_axis("max_over_axis", a, axis);
  const auto s = split_at(a.shape(), axis);
  auto x = a.data();
  std::vector<double> y(s.outer * s.inner);
  std::vector<std::size_t> arg(s.outer * s.inner);
  std::vector<std::size_t> flat(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      std::size_t best = 0;
      for (std::size_t l = 1; l < s.len; ++l)
        if (x[base + l * s.inner] > x[base + best * s.inner]) best = l;
      const std::size_t r = o * s.inner + in;
      y[r] = x[base + best * s.inner];
      arg[r] = best;
      flat[r] = base + best * s.inner;
    }
  Tensor values = make_result("max_over_axis", drop_axis(a.shape(), axis), std::move(y), {a}, [flat](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    for (std::size_t r = 0; r < flat.size(); ++r) (*ga)[flat[r]] += g[r];
  });
  return MaxResult{std::move(values), std::move(arg)};
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result("sum", {1}, {total}, {a}, [](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const double g = (*out.grad)[0];
    for (auto& v : *ga) v += g;
  });
}

Tensor mean_over_axis(const Tensor& a, std::size_t axis) {
  require_axis("mean_over_axis", a, axis);
  const auto s = split_at(a.shape(), axis);
  auto x = a.data();
  std::vector<double> y(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double acc = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) acc += x[base + l * s.inner];
      y[o * s.inner + in] = acc / static_cast<double>(s.len);
    }
  return make_result("mean_over_axis", drop_axis(a.shape(), axis), std::move(y), {a}, [s](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    const double inv = 1.0 / static_cast<double>(s.len);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        const double gv = g[o * s.inner + in] * inv;
        for (std::size_t l = 0; l < s.len; ++l) (*ga)[base + l * s.inner] += gv;
      }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  if (table.dim() != 2) throw DimensionError("gather_rows: expected 2-D table, got " + shape_str(table.shape()));
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  const std::size_t rows = table.shape()[0], d = table.shape()[1];
  std::vector<double> y;
  y.reserve(indices.size() * d);
  auto x = table.data();
  for (auto idx : indices) {
    if (idx >= rows)
      throw DimensionError("gather_rows: index " + std::to_string(idx) + " out of range for " + shape_str(table.shape()));
    y.insert(y.end(), x.begin() + idx * d, x.begin() + (idx + 1) * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result("gather_rows", {idx.size(), d}, std::move(y), {table}, [idx, d](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) (*ga)[idx[r] * d + j] += g[r * d + j];
  });
}

Tensor unfold_windows(const Tensor& x, std::size_t h) {
  if (x.dim() != 2) throw DimensionError("unfold_windows: expected 2-D, got " + shape_str(x.shape()));
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  if (h == 0) throw ContractError("unfold_windows: window width must be >= 1");
  if (n < h)
    throw WindowError("window of width h=" + std::to_string(h) + " does not fit sequence of length n=" +
                      std::to_string(n));
  const std::size_t windows = n - h + 1;
  // Windows are contiguous slices of the row-major buffer.
  std::vector<double> y;
  y.reserve(windows * h * d);
  auto xd = x.data();
  for (std::size_t i = 0; i < windows; ++i) y.insert(y.end(), xd.begin() + i * d, xd.begin() + (i + h) * d);
  return make_result("unfold_windows", {windows, h * d}, std::move(y), {x}, [windows, h, d](TensorImpl& out) {
    auto* ga = input_grad(out, 0);
    if (!ga) return;
    const auto& g = *out.grad;
    const std::size_t w = h * d;
    for (std::size_t i = 0; i < windows; ++i)
      for (std::size_t j = 0; j < w; ++j) (*ga)[i * d + j] += g[i * w + j];
  });
}

Tensor pad_rows(const Tensor& x, std::size_t min_rows) {
  if (x.dim() != 2) throw DimensionError("pad_rows: expected 2-D, got " + shape_str(x.shape()));
  if (x.shape()[0] >= min_rows) return x;
  const auto pad = Tensor::zeros({min_rows - x.shape()[0], x.shape()[1]});
  return concat({x, pad}, 0);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.dim() != 1 && logits.dim() != 2)
    throw DimensionError("cross_entropy: expected 1-D or 2-D logits, got " + shape_str(logits.shape()));
  const std::size_t rows = logits.dim() == 1 ? 1 : logits.shape()[0];
  const std::size_t classes = logits.shape().back();
  if (targets.size() != rows)
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                         " rows");
  auto x = logits.data();
  std::vector<double> probs(x.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= classes) throw ContractError("cross_entropy: target class out of range");
    const double* row = &x[r * classes];
    const double mx = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - lse);
    loss -= row[targets[r]] - lse;
  }
  loss /= static_cast<double>(rows);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result("cross_entropy", {1}, {loss}, {logits},
                     [probs = std::move(probs), tgt, rows, classes](TensorImpl& out) {
                       auto* ga = input_grad(out, 0);
                       if (!ga) return;
                       const double g = (*out.grad)[0] / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < classes; ++c) {
                           const double ind = c == tgt[r] ? 1.0 : 0.0;
                           (*ga)[r * classes + c] += g * (probs[r * classes + c] - ind);
                         }
                     });
}

}  // namespace seqinfer
