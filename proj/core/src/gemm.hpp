#pragma once

#include <algorithm>
#include <cstddef>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define DOPPLERKIT_GEMM_AVX2 1
#endif

namespace dopplerkit::detail {

// Micro-GEMMs for the conv im2col path. Dense row-major buffers, accumulating
// into C. A 4x8 register tile (AVX2+FMA when available, portable loops
// otherwise); results are identical either way: both paths evaluate the same
// sums in the same order.

#ifdef DOPPLERKIT_GEMM_AVX2

/// Horizontal sum in fixed lane order (0+1) + (2+3).
inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

/// 4x8 register tile at origin (i, j): for reduction index t, row r gets
/// C[i+r][j..j+8) += a_value(t, i+r) * B[t*N + j .. +8).
template <typename AValue>
inline void tile4x8(std::size_t T, std::size_t N, const double* B, double* C, std::size_t i,
                    std::size_t j, std::size_t rows, AValue a_value) {
    __m256d acc[4][2];
    for (std::size_t r = 0; r < 4; ++r) {
        acc[r][0] = _mm256_setzero_pd();
        acc[r][1] = _mm256_setzero_pd();
    }
    for (std::size_t t = 0; t < T; ++t) {
        const double* brow = B + t * N + j;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        for (std::size_t r = 0; r < rows; ++r) {
            const __m256d a = _mm256_set1_pd(a_value(t, i + r));
            acc[r][0] = _mm256_fmadd_pd(a, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_pd(a, b1, acc[r][1]);
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double* crow = C + (i + r) * N + j;
        _mm256_storeu_pd(crow, _mm256_add_pd(_mm256_loadu_pd(crow), acc[r][0]));
        _mm256_storeu_pd(crow + 4, _mm256_add_pd(_mm256_loadu_pd(crow + 4), acc[r][1]));
    }
}

#endif  // DOPPLERKIT_GEMM_AVX2

/// Scalar tail shared by both kernels: C[i][j..j+cols) += sum_t a(t,i)*B[t*N+j+c].
template <typename AIndex>
inline void tile_tail(std::size_t T, std::size_t N, const double* B, double* C, std::size_t i,
                      std::size_t j, std::size_t cols, AIndex a_value) {
    double acc[8] = {};
    for (std::size_t t = 0; t < T; ++t) {
        const double a = a_value(t, i);
        const double* brow = B + t * N + j;
        for (std::size_t c = 0; c < cols; ++c) acc[c] += a * brow[c];
    }
    double* crow = C + i * N + j;
    for (std::size_t c = 0; c < cols; ++c) crow[c] += acc[c];
}

/// Generic driver: C[M x N] += "A" * B where element (t, i) of the effective
/// left operand is a_value(t, i) and the reduction runs over t in [0, T).
template <typename AValue>
inline void gemm_driver(std::size_t T, std::size_t M, std::size_t N, const double* B, double* C,
                        AValue a_value) {
    std::size_t j = 0;
    for (; j + 8 <= N; j += 8) {
        std::size_t i = 0;
#ifdef DOPPLERKIT_GEMM_AVX2
        for (; i + 4 <= M; i += 4) tile4x8(T, N, B, C, i, j, 4, a_value);
        if (i < M) tile4x8(T, N, B, C, i, j, M - i, a_value);
        i = M;
#endif
        for (; i < M; ++i) tile_tail(T, N, B, C, i, j, 8, a_value);
    }
    if (j < N)
        for (std::size_t i = 0; i < M; ++i) tile_tail(T, N, B, C, i, j, N - j, a_value);
}

/// C[M x N] += A[M x K] * B[K x N]
inline void gemm_ab(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B,
                    double* C) {
    gemm_driver(K, M, N, B, C,
                [A, K](std::size_t t, std::size_t i) -> double { return A[i * K + t]; });
}

/// C[M x N] += A^T * B where A is [P x M] and B is [P x N] (reduction over P).
inline void gemm_atb(std::size_t P, std::size_t M, std::size_t N, const double* A, const double* B,
                     double* C) {
    gemm_driver(P, M, N, B, C,
                [A, M](std::size_t t, std::size_t i) -> double { return A[t * M + i]; });
}

/// Cache-blocked out-of-place transpose: B[cols x rows] = A[rows x cols]^T.
inline void transpose(std::size_t rows, std::size_t cols, const double* A, double* B) {
    constexpr std::size_t BS = 32;
    for (std::size_t i0 = 0; i0 < rows; i0 += BS)
        for (std::size_t j0 = 0; j0 < cols; j0 += BS) {
            const std::size_t i1 = std::min(rows, i0 + BS);
            const std::size_t j1 = std::min(cols, j0 + BS);
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = j0; j < j1; ++j) B[j * rows + i] = A[i * cols + j];
        }
}

}  // namespace dopplerkit::detail
