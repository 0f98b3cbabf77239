#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "carl/tape.hpp"
#include "carl/tensor.hpp"

// Differentiable tensor operations. Each op computes its output eagerly and
// appends its local gradient rule to the tape. Matrices are rank-2 row-major;
// "vector" means rank 1.
namespace carl::ops {

/// a[m×k] · b[k×n]. Backward: dA = dOut·Bᵀ, dB = Aᵀ·dOut.
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise (Hadamard) product.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> add_scalar(Tape<T>& tape, const Tensor<T>& a, T value);

/// x[m×n] + v[n] broadcast over rows (bias add).
template <typename T>
Tensor<T> add_row_vector(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& v);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

/// Row-wise softmax with max subtraction. Throws NumericError on non-finite input.
template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& x);

/// Row-wise log-softmax. Entries flagged in `excluded` (row-major, same size as
/// x, nonzero = excluded) are left out of the normalizer and come out as -inf.
template <typename T>
Tensor<T> log_softmax_rows(Tape<T>& tape, const Tensor<T>& x,
                           const std::vector<std::uint8_t>& excluded = {});

/// Each row divided by its Euclidean norm; rows with norm < eps are divided by eps.
template <typename T>
Tensor<T> l2_normalize_rows(Tape<T>& tape, const Tensor<T>& x, T eps = T(1e-8));

/// log(max(x, floor)); the gradient is 1/x above the floor and 0 at or below it.
template <typename T>
Tensor<T> log_clamped(Tape<T>& tape, const Tensor<T>& x, T floor = T(1e-12));

/// out[i] = <a_i, b_i> for matching rows of two m×n matrices.
template <typename T>
Tensor<T> rowwise_dot(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Mean over rows of an m×n matrix, giving a length-n vector.
template <typename T>
Tensor<T> column_mean(Tape<T>& tape, const Tensor<T>& x);

/// Stacks a[m1×n] above b[m2×n].
template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// out[i] = x[i, index[i]].
template <typename T>
Tensor<T> gather_cols(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& index);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

}  // namespace carl::ops
