#pragma once

// Cache-blocked GEMM driver shared by every instruction-set variant. Each
// translation unit instantiates it with its own micro-kernel and compile
// flags. Transposition is absorbed by the packing routines.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <memory>

namespace mofill::simd::detail {

constexpr int kNc = 4096;

template <typename T>
struct AlignedBuffer {
  struct Free {
    void operator()(T* p) const { std::free(p); }
  };
  std::unique_ptr<T, Free> ptr;
  std::size_t capacity = 0;

  T* get(std::size_t count) {
    if (count > capacity) {
      const std::size_t bytes = ((count * sizeof(T) + 63) / 64) * 64;
      ptr.reset(static_cast<T*>(std::aligned_alloc(64, bytes)));
      capacity = count;
    }
    return ptr.get();
  }
};

template <typename T>
inline void scale_c(int m, int n, T beta, T* c, int ldc) {
  if (beta == T(1)) return;
  for (int i = 0; i < m; ++i) {
    T* row = c + static_cast<std::size_t>(i) * ldc;
    if (beta == T(0)) {
      std::fill(row, row + n, T(0));
    } else {
      for (int j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

// Packs an mc x kc block of alpha*op(A) into MR-row panels, zero-padded.
template <typename T, int MR>
void pack_a(bool trans, const T* a, int lda, int i0, int p0, int mc, int kc, T alpha,
            T* out) {
  for (int ir = 0; ir < mc; ir += MR) {
    const int rows = std::min(MR, mc - ir);
    T* panel = out + static_cast<std::size_t>(ir) * kc;
    for (int p = 0; p < kc; ++p) {
      T* dst = panel + static_cast<std::size_t>(p) * MR;
      if (trans) {
        const T* src = a + static_cast<std::size_t>(p0 + p) * lda + (i0 + ir);
        for (int i = 0; i < rows; ++i) dst[i] = alpha * src[i];
      } else {
        const T* src = a + static_cast<std::size_t>(i0 + ir) * lda + (p0 + p);
        for (int i = 0; i < rows; ++i) dst[i] = alpha * src[static_cast<std::size_t>(i) * lda];
      }
      for (int i = rows; i < MR; ++i) dst[i] = T(0);
    }
  }
}

// Row sources for B. StridedB is an ordinary row-major matrix; RowPtrB
// gives every stored row its own base pointer, which lets convolutions run
// on shifted views of a padded image without materializing im2col.
template <typename T>
struct StridedB {
  const T* b;
  int ldb;
  const T* row(int r) const { return b + static_cast<std::size_t>(r) * ldb; }
};

template <typename T>
struct RowPtrB {
  const T* const* rows;
  const T* row(int r) const { return rows[r]; }
};

// Packs a kc x nc block of op(B) into NR-column panels, zero-padded.
template <typename T, int NR, typename Source>
void pack_b(bool trans, const Source& b, int p0, int j0, int kc, int nc, T* out) {
  for (int jr = 0; jr < nc; jr += NR) {
    const int cols = std::min(NR, nc - jr);
    T* panel = out + static_cast<std::size_t>(jr) * kc;
    if (trans) {
      const T* src[NR];
      for (int j = 0; j < cols; ++j) src[j] = b.row(j0 + jr + j) + p0;
      for (int p = 0; p < kc; ++p) {
        T* dst = panel + static_cast<std::size_t>(p) * NR;
        for (int j = 0; j < cols; ++j) dst[j] = src[j][p];
        for (int j = cols; j < NR; ++j) dst[j] = T(0);
      }
    } else {
      for (int p = 0; p < kc; ++p) {
        T* dst = panel + static_cast<std::size_t>(p) * NR;
        const T* src = b.row(p0 + p) + (j0 + jr);
        for (int j = 0; j < cols; ++j) dst[j] = src[j];
        for (int j = cols; j < NR; ++j) dst[j] = T(0);
      }
    }
  }
}

// MicroKernel: void(int kc, const T* a_panel, const T* b_panel, T* c, int ldc,
//                   int rows, int cols) computing C[rows x cols] += A_panel * B_panel.
template <typename T, int MR, int NR, int MC, int KC, typename Source, typename MicroKernel>
void gemm_packed(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a,
                 int lda, const Source& b, T beta, T* c, int ldc, MicroKernel kernel) {
  scale_c(m, n, beta, c, ldc);
  if (m <= 0 || n <= 0 || k <= 0 || alpha == T(0)) return;

  thread_local AlignedBuffer<T> a_buf;
  thread_local AlignedBuffer<T> b_buf;
  const int nc_max = std::min(kNc, n);
  const int kc_max = std::min(KC, k);
  T* b_pack = b_buf.get(static_cast<std::size_t>((nc_max + NR - 1) / NR) * NR * kc_max);
  T* a_pack = a_buf.get(static_cast<std::size_t>((std::min(MC, m) + MR - 1) / MR) * MR * kc_max);

  for (int jc = 0; jc < n; jc += kNc) {
    const int nc = std::min(kNc, n - jc);
    for (int pc = 0; pc < k; pc += KC) {
      const int kc = std::min(KC, k - pc);
      pack_b<T, NR>(trans_b, b, pc, jc, kc, nc, b_pack);
      for (int ic = 0; ic < m; ic += MC) {
        const int mc = std::min(MC, m - ic);
        pack_a<T, MR>(trans_a, a, lda, ic, pc, mc, kc, alpha, a_pack);
        for (int jr = 0; jr < nc; jr += NR) {
          const int cols = std::min(NR, nc - jr);
          const T* bp = b_pack + static_cast<std::size_t>(jr) * kc;
          for (int ir = 0; ir < mc; ir += MR) {
            const int rows = std::min(MR, mc - ir);
            const T* ap = a_pack + static_cast<std::size_t>(ir) * kc;
            T* cp = c + static_cast<std::size_t>(ic + ir) * ldc + (jc + jr);
            kernel(kc, ap, bp, cp, ldc, rows, cols);
          }
        }
      }
    }
  }
}

// Portable micro-kernel; vectorized by the compiler under the unit's flags.
template <typename T, int MR, int NR>
inline void micro_kernel_generic(int kc, const T* __restrict ap, const T* __restrict bp, T* c,
                                 int ldc, int rows, int cols) {
  T acc[MR][NR] = {};
  for (int p = 0; p < kc; ++p) {
    const T* av = ap + static_cast<std::size_t>(p) * MR;
    const T* bv = bp + static_cast<std::size_t>(p) * NR;
    for (int i = 0; i < MR; ++i) {
      const T ai = av[i];
      for (int j = 0; j < NR; ++j) acc[i][j] += ai * bv[j];
    }
  }
  for (int i = 0; i < rows; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < cols; ++j) crow[j] += acc[i][j];
  }
}

}  // namespace mofill::simd::detail
