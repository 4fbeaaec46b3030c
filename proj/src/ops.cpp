#include "spmat/ops.hpp"

#include "spmat/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace spmat::ops {

namespace {

[[noreturn]] void mismatch(std::string_view op, const Shape &a, const Shape &b) {
  throw Error(ErrorCode::ShapeMismatch,
              fmt::format("{}: {} vs {}", op, shape_string(a), shape_string(b)));
}

void require_rank2(std::string_view op, const Tensor &t) {
  if (t.rank() != 2)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: expected a matrix, got shape {}", op, shape_string(t.shape())));
}

void require_same(std::string_view op, const Var &a, const Var &b) {
  if (a.tape() != b.tape())
    throw Error(ErrorCode::DetachedLoss, fmt::format("{}: operands on different tapes", op));
  if (a.shape() != b.shape())
    mismatch(op, a.shape(), b.shape());
}

// Elementwise unary op given f(x) and df/dx expressed through (x, y).
template <typename F, typename D>
Var unary(std::string_view op, const Var &a, F f, D dfdx) {
  const Tensor &x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i)
    y[i] = f(x[i]);
  Tape *tape = a.tape();
  const auto in = a.id();
  return tape->record(op, std::move(y), {a},
                      [tape, in, dfdx](const Tensor &yv, const Tensor &g, std::span<Tensor *const> gi) {
                        if (!gi[0])
                          return;
                        const Tensor &xv = tape->value(in);
                        auto &ga = *gi[0];
                        for (std::size_t i = 0; i < g.numel(); ++i)
                          ga[i] += g[i] * dfdx(xv[i], yv[i]);
                      });
}

} // namespace

Var matmul(const Var &a, const Var &b) {
  const Tensor &A = a.value();
  const Tensor &B = b.value();
  require_rank2("matmul", A);
  require_rank2("matmul", B);
  if (A.cols() != B.rows())
    mismatch("matmul", A.shape(), B.shape());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double *c = &C[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double *brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j)
        c[j] += aip * brow[j];
    }
  }
  Tape *tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape->record("matmul", std::move(C), {a, b},
                      [tape, ia, ib, m, k, n](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                        const Tensor &A = tape->value(ia);
                        const Tensor &B = tape->value(ib);
                        if (gi[0]) { // dA = G B^T
                          auto &ga = *gi[0];
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t p = 0; p < k; ++p) {
                              double acc = 0.0;
                              const double *grow = &G[i * n];
                              const double *brow = &B[p * n];
                              for (std::size_t j = 0; j < n; ++j)
                                acc += grow[j] * brow[j];
                              ga[i * k + p] += acc;
                            }
                        }
                        if (gi[1]) { // dB = A^T G
                          auto &gb = *gi[1];
                          for (std::size_t i = 0; i < m; ++i) {
                            const double *grow = &G[i * n];
                            for (std::size_t p = 0; p < k; ++p) {
                              const double aip = A[i * k + p];
                              double *gbrow = &gb[p * n];
                              for (std::size_t j = 0; j < n; ++j)
                                gbrow[j] += aip * grow[j];
                            }
                          }
                        }
                      });
}

Var transpose(const Var &a) {
  const Tensor &A = a.value();
  require_rank2("transpose", A);
  const std::size_t m = A.rows(), n = A.cols();
  Tensor T(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      T[j * m + i] = A[i * n + j];
  return a.tape()->record("transpose", std::move(T), {a},
                          [m, n](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (!gi[0])
                              return;
                            auto &ga = *gi[0];
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j)
                                ga[i * n + j] += G[j * m + i];
                          });
}

Var add(const Var &a, const Var &b) {
  require_same("add", a, b);
  Tensor y = a.value();
  const Tensor &B = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i)
    y[i] += B[i];
  return a.tape()->record("add", std::move(y), {a, b},
                          [](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            for (auto *g : gi)
                              if (g)
                                for (std::size_t i = 0; i < G.numel(); ++i)
                                  (*g)[i] += G[i];
                          });
}

Var sub(const Var &a, const Var &b) {
  require_same("sub", a, b);
  Tensor y = a.value();
  const Tensor &B = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i)
    y[i] -= B[i];
  return a.tape()->record("sub", std::move(y), {a, b},
                          [](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (gi[0])
                              for (std::size_t i = 0; i < G.numel(); ++i)
                                (*gi[0])[i] += G[i];
                            if (gi[1])
                              for (std::size_t i = 0; i < G.numel(); ++i)
                                (*gi[1])[i] -= G[i];
                          });
}

Var mul(const Var &a, const Var &b) {
  require_same("mul", a, b);
  Tensor y = a.value();
  const Tensor &B = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i)
    y[i] *= B[i];
  Tape *tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape->record("mul", std::move(y), {a, b},
                      [tape, ia, ib](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                        const Tensor &A = tape->value(ia);
                        const Tensor &B = tape->value(ib);
                        if (gi[0])
                          for (std::size_t i = 0; i < G.numel(); ++i)
                            (*gi[0])[i] += G[i] * B[i];
                        if (gi[1])
                          for (std::size_t i = 0; i < G.numel(); ++i)
                            (*gi[1])[i] += G[i] * A[i];
                      });
}

Var div(const Var &a, const Var &b) {
  require_same("div", a, b);
  Tensor y = a.value();
  const Tensor &B = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i)
    y[i] /= B[i];
  Tape *tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape->record("div", std::move(y), {a, b},
                      [tape, ia, ib](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                        const Tensor &A = tape->value(ia);
                        const Tensor &B = tape->value(ib);
                        if (gi[0])
                          for (std::size_t i = 0; i < G.numel(); ++i)
                            (*gi[0])[i] += G[i] / B[i];
                        if (gi[1])
                          for (std::size_t i = 0; i < G.numel(); ++i)
                            (*gi[1])[i] -= G[i] * A[i] / (B[i] * B[i]);
                      });
}

Var shift(const Var &a, double c) {
  Tensor y = a.value();
  for (auto &v : y.values())
    v += c;
  return a.tape()->record("shift", std::move(y), {a},
                          [](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (gi[0])
                              for (std::size_t i = 0; i < G.numel(); ++i)
                                (*gi[0])[i] += G[i];
                          });
}

Var scale(const Var &a, double c) {
  Tensor y = a.value();
  for (auto &v : y.values())
    v *= c;
  return a.tape()->record("scale", std::move(y), {a},
                          [c](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (gi[0])
                              for (std::size_t i = 0; i < G.numel(); ++i)
                                (*gi[0])[i] += c * G[i];
                          });
}

Var concat_cols(const std::vector<Var> &parts) {
  if (parts.empty())
    throw Error(ErrorCode::ShapeMismatch, "concat_cols: no inputs");
  const std::size_t m = parts.front().value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto &p : parts) {
    require_rank2("concat_cols", p.value());
    if (p.value().rows() != m)
      mismatch("concat_cols", parts.front().shape(), p.shape());
    if (p.tape() != parts.front().tape())
      throw Error(ErrorCode::DetachedLoss, "concat_cols: operands on different tapes");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor y(Shape{m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor &P = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(&P[i * widths[k]], widths[k], &y[i * total + offset]);
    offset += widths[k];
  }
  return parts.front().tape()->record(
      "concat_cols", std::move(y), parts,
      [widths, m, total](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (gi[k])
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j)
                (*gi[k])[i * widths[k] + j] += G[i * total + off + j];
          off += widths[k];
        }
      });
}

namespace {

Var gather_impl(std::string_view op, const Var &a, std::span<const int> index) {
  const Tensor &A = a.value();
  if (A.rank() != 2 && A.rank() != 1)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: expected rank 1 or 2, got {}", op, shape_string(A.shape())));
  const std::size_t rows = A.rows(), n = A.cols();
  for (int r : index)
    if (r < 0 || static_cast<std::size_t>(r) >= rows)
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("{}: row index {} out of range for {} rows", op, r, rows));
  Shape shape = A.rank() == 2 ? Shape{index.size(), n} : Shape{index.size()};
  Tensor y(shape);
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(&A[static_cast<std::size_t>(index[r]) * n], n, &y[r * n]);
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->record(op, std::move(y), {a},
                          [idx = std::move(idx), n](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (!gi[0])
                              return;
                            auto &ga = *gi[0];
                            for (std::size_t r = 0; r < idx.size(); ++r) {
                              const std::size_t src = static_cast<std::size_t>(idx[r]) * n;
                              for (std::size_t j = 0; j < n; ++j)
                                ga[src + j] += G[r * n + j];
                            }
                          });
}

Var segment_impl(std::string_view op, const Var &a, std::span<const int> segment,
                 std::size_t n_segments, bool average) {
  const Tensor &A = a.value();
  if (A.rank() != 2 && A.rank() != 1)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: expected rank 1 or 2, got {}", op, shape_string(A.shape())));
  const std::size_t rows = A.rows(), n = A.cols();
  if (segment.size() != rows)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: {} segment ids for {} rows", op, segment.size(), rows));
  std::vector<double> count(n_segments, 0.0);
  for (int s : segment) {
    if (s < 0 || static_cast<std::size_t>(s) >= n_segments)
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("{}: segment id {} outside [0, {})", op, s, n_segments));
    count[static_cast<std::size_t>(s)] += 1.0;
  }
  if (average)
    for (std::size_t s = 0; s < n_segments; ++s)
      if (count[s] == 0.0)
        throw Error(ErrorCode::EmptySegment, fmt::format("{}: segment {} has no rows", op, s));
  Shape shape = A.rank() == 2 ? Shape{n_segments, n} : Shape{n_segments};
  Tensor y(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t s = static_cast<std::size_t>(segment[r]);
    for (std::size_t j = 0; j < n; ++j)
      y[s * n + j] += A[r * n + j];
  }
  if (average)
    for (std::size_t s = 0; s < n_segments; ++s)
      for (std::size_t j = 0; j < n; ++j)
        y[s * n + j] /= count[s];
  std::vector<int> seg(segment.begin(), segment.end());
  return a.tape()->record(
      op, std::move(y), {a},
      [seg = std::move(seg), count = std::move(count), n, average](const Tensor &, const Tensor &G,
                                                                   std::span<Tensor *const> gi) {
        if (!gi[0])
          return;
        auto &ga = *gi[0];
        for (std::size_t r = 0; r < seg.size(); ++r) {
          const std::size_t s = static_cast<std::size_t>(seg[r]);
          const double w = average ? 1.0 / count[s] : 1.0;
          for (std::size_t j = 0; j < n; ++j)
            ga[r * n + j] += w * G[s * n + j];
        }
      });
}

} // namespace

Var gather_rows(const Var &a, std::span<const int> index) {
  return gather_impl("gather_rows", a, index);
}

Var embedding_lookup(const Var &table, std::span<const int> index) {
  return gather_impl("embedding_lookup", table, index);
}

Var segment_sum(const Var &a, std::span<const int> segment, std::size_t n_segments) {
  return segment_impl("segment_sum", a, segment, n_segments, false);
}

Var segment_mean(const Var &a, std::span<const int> segment, std::size_t n_segments) {
  return segment_impl("segment_mean", a, segment, n_segments, true);
}

Var exp(const Var &a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(const Var &a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var pow(const Var &a, double p) {
  return unary("pow", a, [p](double x) { return std::pow(x, p); },
               [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var sigmoid(const Var &a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0)
          return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var &a) {
  return unary(
      "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        if (x >= 0)
          return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Var relu(const Var &a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sum(const Var &a) {
  double s = 0.0;
  for (double v : a.value().values())
    s += v;
  return a.tape()->record("sum", Tensor::scalar(s), {a},
                          [](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (gi[0])
                              for (auto &v : gi[0]->values())
                                v += G[0];
                          });
}

Var mean(const Var &a) {
  const double n = static_cast<double>(a.value().numel());
  double s = 0.0;
  for (double v : a.value().values())
    s += v;
  return a.tape()->record("mean", Tensor::scalar(s / n), {a},
                          [n](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (gi[0])
                              for (auto &v : gi[0]->values())
                                v += G[0] / n;
                          });
}

namespace {

Var axis_reduce(std::string_view op, const Var &a, int axis, bool average) {
  const Tensor &A = a.value();
  require_rank2(op, A);
  if (axis != 0 && axis != 1)
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{}: axis {} for a matrix", op, axis));
  const std::size_t m = A.rows(), n = A.cols();
  const double w = average ? 1.0 / static_cast<double>(axis == 0 ? m : n) : 1.0;
  Tensor y(axis == 0 ? Shape{1, n} : Shape{m, 1});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      y[axis == 0 ? j : i] += A[i * n + j];
  if (average)
    for (auto &v : y.values())
      v *= w;
  return a.tape()->record(op, std::move(y), {a},
                          [m, n, axis, w](const Tensor &, const Tensor &G, std::span<Tensor *const> gi) {
                            if (!gi[0])
                              return;
                            auto &ga = *gi[0];
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j)
                                ga[i * n + j] += w * G[axis == 0 ? j : i];
                          });
}

} // namespace

Var sum_axis(const Var &a, int axis) { return axis_reduce("sum_axis", a, axis, false); }
Var mean_axis(const Var &a, int axis) { return axis_reduce("mean_axis", a, axis, true); }

Var l2_normalize_rows(const Var &a) {
  const Tensor &A = a.value();
  require_rank2("l2_normalize_rows", A);
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> denom(m);
  std::vector<char> floored(m);
  Tensor y(A.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      s += A[i * n + j] * A[i * n + j];
    const double norm = std::sqrt(s);
    floored[i] = norm < kNormFloor;
    denom[i] = floored[i] ? kNormFloor : norm;
    for (std::size_t j = 0; j < n; ++j)
      y[i * n + j] = A[i * n + j] / denom[i];
  }
  return a.tape()->record(
      "l2_normalize_rows", std::move(y), {a},
      [m, n, denom = std::move(denom), floored = std::move(floored)](
          const Tensor &Y, const Tensor &G, std::span<Tensor *const> gi) {
        if (!gi[0])
          return;
        auto &ga = *gi[0];
        for (std::size_t i = 0; i < m; ++i) {
          double yg = 0.0;
          if (!floored[i])
            for (std::size_t j = 0; j < n; ++j)
              yg += Y[i * n + j] * G[i * n + j];
          for (std::size_t j = 0; j < n; ++j)
            ga[i * n + j] += (G[i * n + j] - Y[i * n + j] * yg) / denom[i];
        }
      });
}

Var standardize_columns(const Var &a) {
  const Tensor &A = a.value();
  require_rank2("standardize_columns", A);
  const std::size_t m = A.rows(), n = A.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> stdev(n);
  Tensor y(A.shape());
  for (std::size_t j = 0; j < n; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      mu += A[i * n + j];
    mu *= inv_m;
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      var += (A[i * n + j] - mu) * (A[i * n + j] - mu);
    var *= inv_m;
    stdev[j] = std::sqrt(var + kStandardizeEps);
    for (std::size_t i = 0; i < m; ++i)
      y[i * n + j] = (A[i * n + j] - mu) / stdev[j];
  }
  return a.tape()->record(
      "standardize_columns", std::move(y), {a},
      [m, n, inv_m, stdev = std::move(stdev)](const Tensor &Y, const Tensor &G,
                                              std::span<Tensor *const> gi) {
        if (!gi[0])
          return;
        auto &ga = *gi[0];
        // dx = (g - mean(g) - y * mean(g * y)) / s
        for (std::size_t j = 0; j < n; ++j) {
          double mg = 0.0, mgy = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            mg += G[i * n + j];
            mgy += G[i * n + j] * Y[i * n + j];
          }
          mg *= inv_m;
          mgy *= inv_m;
          for (std::size_t i = 0; i < m; ++i)
            ga[i * n + j] += (G[i * n + j] - mg - Y[i * n + j] * mgy) / stdev[j];
        }
      });
}

} // namespace spmat::ops
