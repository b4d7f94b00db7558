#pragma once

#include <cstddef>

namespace diffroll {

// C(MxN) += A(MxK) * B(KxN), all row-major with explicit leading dimensions.
// Results are bitwise deterministic for a given build: tiles are fixed-size,
// each output element is accumulated by a single thread in a fixed k order,
// and the tiling does not depend on the thread count.
void gemm_f32(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
              float* C, int ldc);

void gemm_f64(int M, int N, int K, const double* A, int lda, const double* B, int ldb,
              double* C, int ldc);

template <typename T>
void gemm(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc);

template <>
inline void gemm<float>(int M, int N, int K, const float* A, int lda, const float* B,
                        int ldb, float* C, int ldc) {
    gemm_f32(M, N, K, A, lda, B, ldb, C, ldc);
}

template <>
inline void gemm<double>(int M, int N, int K, const double* A, int lda, const double* B,
                         int ldb, double* C, int ldc) {
    gemm_f64(M, N, K, A, lda, B, ldb, C, ldc);
}

// OUT(cols x rows) = INᵀ for a row-major IN(rows x cols).
template <typename T>
void transpose(const T* in, int rows, int cols, T* out) {
    constexpr int BLK = 32;
    for (int i0 = 0; i0 < rows; i0 += BLK) {
        const int i1 = (i0 + BLK < rows) ? i0 + BLK : rows;
        for (int j0 = 0; j0 < cols; j0 += BLK) {
            const int j1 = (j0 + BLK < cols) ? j0 + BLK : cols;
            for (int i = i0; i < i1; ++i)
                for (int j = j0; j < j1; ++j)
                    out[static_cast<size_t>(j) * rows + i] =
                        in[static_cast<size_t>(i) * cols + j];
        }
    }
}

// Number of worker threads used by gemm_f32 (and the few other parallel loops).
// 0 selects the hardware default. Thread count never changes results.
void set_num_threads(int n);
int num_threads();

}  // namespace diffroll
