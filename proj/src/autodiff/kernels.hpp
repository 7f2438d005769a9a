// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels. Products go through Eigen on the calling thread only, so a
// result depends on the operand values and shapes and never on scheduling.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>

namespace conadv::ad::kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

/// C[M,N] (+)= A[M,K] * B[K,N].
inline void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
                    double* C, bool accumulate) {
  const auto m = static_cast<Eigen::Index>(M), n = static_cast<Eigen::Index>(N), k = static_cast<Eigen::Index>(K);
  Map c(C, m, n);
  if (!accumulate) c.setZero();
  if (M == 0 || N == 0 || K == 0) return;
  c.noalias() += ConstMap(A, m, k) * ConstMap(B, k, n);
}

/// C[K,N] += A[M,K]^T * B[M,N].
inline void gemm_tn_acc(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B,
                        double* C) {
  const auto m = static_cast<Eigen::Index>(M), n = static_cast<Eigen::Index>(N), k = static_cast<Eigen::Index>(K);
  if (M == 0 || N == 0 || K == 0) return;
  Map(C, k, n).noalias() += ConstMap(A, m, k).transpose() * ConstMap(B, m, n);
}

/// C[M,N] += A[M,K] * B[N,K]^T.
inline void gemm_nt_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  const auto m = static_cast<Eigen::Index>(M), n = static_cast<Eigen::Index>(N), k = static_cast<Eigen::Index>(K);
  if (M == 0 || N == 0 || K == 0) return;
  Map(C, m, n).noalias() += ConstMap(A, m, k) * ConstMap(B, n, k).transpose();
}

/// C[M,N] = A[K,M]^T * B[K,N].
inline void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  const auto m = static_cast<Eigen::Index>(M), n = static_cast<Eigen::Index>(N), k = static_cast<Eigen::Index>(K);
  Map c(C, m, n);
  c.setZero();
  if (M == 0 || N == 0 || K == 0) return;
  c.noalias() += ConstMap(A, k, m).transpose() * ConstMap(B, k, n);
}

inline void transpose(const double* A, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = A[r * cols + c];
}

}  // namespace conadv::ad::kernels
