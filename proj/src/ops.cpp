#include "carl/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace carl::ops {

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMajor<T>> view(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return {t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <typename T>
Eigen::Map<RowMajor<T>> grad_view(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return {t.mutable_grad().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// Applies fn(grad_span) for every input that wants a gradient.
template <typename T, typename Fn>
void accumulate(Tensor<T>& input, Fn&& fn) {
  if (input.requires_grad()) fn(input.mutable_grad());
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor<T> out(Shape{m, n});
  // Coefficient-wise product: each output row depends only on its input row, so
  // results do not change with the batch size.
  Eigen::Map<RowMajor<T>>(out.raw(), m, n).noalias() = view(a, m, k).lazyProduct(view(b, k, n));
  return tape.record("matmul", {a, b}, out, [m, k, n](std::span<Tensor<T>> in, const Tensor<T>& o) {
    Eigen::Map<const RowMajor<T>> g(o.grad().data(), m, n);
    if (in[0].requires_grad()) grad_view(in[0], m, k).noalias() += g * view(in[1], k, n).transpose();
    if (in[1].requires_grad()) grad_view(in[1], k, n).noalias() += view(in[0], m, k).transpose() * g;
  });
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const auto m = a.shape()[0], n = a.shape()[1];
  Tensor<T> out(Shape{n, m});
  Eigen::Map<RowMajor<T>>(out.raw(), n, m) = view(a, m, n).transpose();
  return tape.record("transpose", {a}, out, [m, n](std::span<Tensor<T>> in, const Tensor<T>& o) {
    Eigen::Map<const RowMajor<T>> g(o.grad().data(), n, m);
    if (in[0].requires_grad()) grad_view(in[0], m, n) += g.transpose();
  });
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = a.at(i) + b.at(i);
  return tape.record("add", {a, b}, out, [](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    for (auto& t : in) {
      accumulate(t, [&](std::span<T> d) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
      });
    }
  });
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = a.at(i) - b.at(i);
  return tape.record("sub", {a, b}, out, [](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
    accumulate(in[1], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    });
  });
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = a.at(i) * b.at(i);
  return tape.record("mul", {a, b}, out, [](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * in[1].at(i);
    });
    accumulate(in[1], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * in[0].at(i);
    });
  });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = a.at(i) * factor;
  return tape.record("scale", {a}, out, [factor](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * factor;
    });
  });
}

template <typename T>
Tensor<T> add_scalar(Tape<T>& tape, const Tensor<T>& a, T value) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = a.at(i) + value;
  return tape.record("add_scalar", {a}, out, [](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
  });
}

template <typename T>
Tensor<T> add_row_vector(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& v) {
  require_matrix(x, "add_row_vector");
  const auto m = x.shape()[0], n = x.shape()[1];
  if (v.rank() != 1 || v.numel() != n) {
    throw DimensionError("add_row_vector: " + shape_to_string(x.shape()) + " + " + shape_to_string(v.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(r * n + c) = x.at(r * n + c) + v.at(c);
  return tape.record("add_row_vector", {x, v}, out, [m, n](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
    accumulate(in[1], [&](std::span<T> d) {
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) d[c] += g[r * n + c];
    });
  });
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = x.at(i) > T{0} ? x.at(i) : T{0};
  return tape.record("relu", {x}, out, [](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i)
        if (in[0].at(i) > T{0}) d[i] += g[i];
    });
  });
}

template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& x) {
  require_matrix(x, "softmax_rows");
  require_finite(x, "softmax_rows");
  const auto m = x.shape()[0], k = x.shape()[1];
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = x.raw() + r * k;
    T* dst = out.raw() + r * k;
    const T hi = *std::max_element(row, row + k);
    T total{0};
    for (std::size_t c = 0; c < k; ++c) total += (dst[c] = std::exp(row[c] - hi));
    for (std::size_t c = 0; c < k; ++c) dst[c] /= total;
  }
  return tape.record("softmax_rows", {x}, out, [m, k](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    auto y = o.data();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t r = 0; r < m; ++r) {
        T dot{0};
        for (std::size_t c = 0; c < k; ++c) dot += g[r * k + c] * y[r * k + c];
        for (std::size_t c = 0; c < k; ++c) d[r * k + c] += y[r * k + c] * (g[r * k + c] - dot);
      }
    });
  });
}

template <typename T>
Tensor<T> log_softmax_rows(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::uint8_t>& excluded) {
  require_matrix(x, "log_softmax_rows");
  const auto m = x.shape()[0], k = x.shape()[1];
  if (!excluded.empty() && excluded.size() != x.numel()) {
    throw DimensionError("log_softmax_rows: exclusion mask has " + std::to_string(excluded.size()) +
                         " entries for shape " + shape_to_string(x.shape()));
  }
  auto kept = [&excluded](std::size_t i) { return excluded.empty() || excluded[i] == 0; };
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    T hi = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < k; ++c) {
      const auto i = r * k + c;
      if (!kept(i)) continue;
      if (!std::isfinite(x.at(i))) throw NumericError("log_softmax_rows: non-finite input");
      hi = std::max(hi, x.at(i));
      any = true;
    }
    if (!any) throw ContractError("log_softmax_rows: row " + std::to_string(r) + " excludes every entry");
    T total{0};
    for (std::size_t c = 0; c < k; ++c)
      if (kept(r * k + c)) total += std::exp(x.at(r * k + c) - hi);
    const T lse = hi + std::log(total);
    for (std::size_t c = 0; c < k; ++c) {
      const auto i = r * k + c;
      out.at(i) = kept(i) ? x.at(i) - lse : -std::numeric_limits<T>::infinity();
    }
  }
  return tape.record("log_softmax_rows", {x}, out,
                     [m, k, excluded](std::span<Tensor<T>> in, const Tensor<T>& o) {
                       auto g = o.grad();
                       auto y = o.data();
                       auto kept = [&excluded](std::size_t i) { return excluded.empty() || excluded[i] == 0; };
                       accumulate(in[0], [&](std::span<T> d) {
                         for (std::size_t r = 0; r < m; ++r) {
                           T gsum{0};
                           for (std::size_t c = 0; c < k; ++c)
                             if (kept(r * k + c)) gsum += g[r * k + c];
                           for (std::size_t c = 0; c < k; ++c) {
                             const auto i = r * k + c;
                             if (kept(i)) d[i] += g[i] - std::exp(y[i]) * gsum;
                           }
                         }
                       });
                     });
}

template <typename T>
Tensor<T> l2_normalize_rows(Tape<T>& tape, const Tensor<T>& x, T eps) {
  require_matrix(x, "l2_normalize_rows");
  if (!(eps > T{0})) throw ContractError("l2_normalize_rows: eps must be positive");
  const auto m = x.shape()[0], n = x.shape()[1];
  Tensor<T> out(x.shape());
  std::vector<T> divisor(m);
  std::vector<std::uint8_t> clamped(m, 0);
  for (std::size_t r = 0; r < m; ++r) {
    T sq{0};
    for (std::size_t c = 0; c < n; ++c) sq += x.at(r * n + c) * x.at(r * n + c);
    const T norm = std::sqrt(sq);
    clamped[r] = norm < eps;
    divisor[r] = clamped[r] ? eps : norm;
    for (std::size_t c = 0; c < n; ++c) out.at(r * n + c) = x.at(r * n + c) / divisor[r];
  }
  return tape.record("l2_normalize_rows", {x}, out,
                     [m, n, divisor, clamped](std::span<Tensor<T>> in, const Tensor<T>& o) {
                       auto g = o.grad();
                       auto y = o.data();
                       accumulate(in[0], [&](std::span<T> d) {
                         for (std::size_t r = 0; r < m; ++r) {
                           T yg{0};
                           if (!clamped[r])
                             for (std::size_t c = 0; c < n; ++c) yg += y[r * n + c] * g[r * n + c];
                           for (std::size_t c = 0; c < n; ++c) {
                             const auto i = r * n + c;
                             d[i] += (g[i] - y[i] * yg) / divisor[r];
                           }
                         }
                       });
                     });
}

template <typename T>
Tensor<T> log_clamped(Tape<T>& tape, const Tensor<T>& x, T floor) {
  if (!(floor > T{0})) throw ContractError("log_clamped: floor must be positive");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = std::log(std::max(x.at(i), floor));
  return tape.record("log_clamped", {x}, out, [floor](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i)
        if (in[0].at(i) > floor) d[i] += g[i] / in[0].at(i);
    });
  });
}

template <typename T>
Tensor<T> rowwise_dot(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "rowwise_dot");
  require_same_shape(a, b, "rowwise_dot");
  const auto m = a.shape()[0], n = a.shape()[1];
  Tensor<T> out(Shape{m});
  for (std::size_t r = 0; r < m; ++r) {
    T acc{0};
    for (std::size_t c = 0; c < n; ++c) acc += a.at(r * n + c) * b.at(r * n + c);
    out.at(r) = acc;
  }
  return tape.record("rowwise_dot", {a, b}, out, [m, n](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    for (int side = 0; side < 2; ++side) {
      const auto& other = in[1 - side];
      accumulate(in[side], [&](std::span<T> d) {
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c) d[r * n + c] += g[r] * other.at(r * n + c);
      });
    }
  });
}

template <typename T>
Tensor<T> column_mean(Tape<T>& tape, const Tensor<T>& x) {
  require_matrix(x, "column_mean");
  const auto m = x.shape()[0], n = x.shape()[1];
  Tensor<T> out(Shape{n});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(c) += x.at(r * n + c);
  for (std::size_t c = 0; c < n; ++c) out.at(c) /= static_cast<T>(m);
  return tape.record("column_mean", {x}, out, [m, n](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) d[r * n + c] += g[c] / static_cast<T>(m);
    });
  });
}

template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "concat_rows");
  require_matrix(b, "concat_rows");
  if (a.shape()[1] != b.shape()[1]) {
    throw DimensionError("concat_rows: column counts differ, " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  std::vector<T> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  Tensor<T> out(Shape{a.shape()[0] + b.shape()[0], a.shape()[1]}, std::move(data));
  const auto split = a.numel();
  return tape.record("concat_rows", {a, b}, out, [split](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
    accumulate(in[1], [&](std::span<T> d) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[split + i];
    });
  });
}

template <typename T>
Tensor<T> gather_cols(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& index) {
  require_matrix(x, "gather_cols");
  const auto m = x.shape()[0], n = x.shape()[1];
  if (index.size() != m) {
    throw DimensionError("gather_cols: " + std::to_string(index.size()) + " indices for " + std::to_string(m) +
                         " rows");
  }
  Tensor<T> out(Shape{m});
  for (std::size_t r = 0; r < m; ++r) {
    if (index[r] >= n) throw DimensionError("gather_cols: column index out of range");
    out.at(r) = x.at(r * n + index[r]);
  }
  return tape.record("gather_cols", {x}, out, [n, index](std::span<Tensor<T>> in, const Tensor<T>& o) {
    auto g = o.grad();
    accumulate(in[0], [&](std::span<T> d) {
      for (std::size_t r = 0; r < index.size(); ++r) d[r * n + index[r]] += g[r];
    });
  });
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc{0};
  for (T v : x.data()) acc += v;
  return tape.record("sum", {x}, Tensor<T>::scalar(acc), [](std::span<Tensor<T>> in, const Tensor<T>& o) {
    const T g = o.grad()[0];
    accumulate(in[0], [&](std::span<T> d) {
      for (auto& v : d) v += g;
    });
  });
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  T acc{0};
  for (T v : x.data()) acc += v;
  const T count = static_cast<T>(x.numel());
  return tape.record("mean", {x}, Tensor<T>::scalar(acc / count),
                     [count](std::span<Tensor<T>> in, const Tensor<T>& o) {
                       const T g = o.grad()[0] / count;
                       accumulate(in[0], [&](std::span<T> d) {
                         for (auto& v : d) v += g;
                       });
                     });
}

#define CARL_INSTANTIATE_OPS(T)                                                                        \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                             \
  template Tensor<T> add_scalar(Tape<T>&, const Tensor<T>&, T);                                        \
  template Tensor<T> add_row_vector(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                                 \
  template Tensor<T> softmax_rows(Tape<T>&, const Tensor<T>&);                                         \
  template Tensor<T> log_softmax_rows(Tape<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&);   \
  template Tensor<T> l2_normalize_rows(Tape<T>&, const Tensor<T>&, T);                                 \
  template Tensor<T> log_clamped(Tape<T>&, const Tensor<T>&, T);                                       \
  template Tensor<T> rowwise_dot(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> column_mean(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> concat_rows(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> gather_cols(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);         \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);

CARL_INSTANTIATE_OPS(float)
CARL_INSTANTIATE_OPS(double)

#undef CARL_INSTANTIATE_OPS

}  // namespace carl::ops
