#include "rod/kernels.hpp"

#ifdef ROD_HAVE_AVX2_BUILD

#include <immintrin.h>

#include <cmath>
#include <cstring>

// AVX2+FMA lane. Accumulation contracts mirror the scalar reference exactly
// (see kernels.hpp), so outputs are bit-identical to the scalar lane.

namespace rod::kernels {
namespace {

// Row of B fused into a row of C: c += a * b over n entries.
inline void fmadd_row(double a, const double* b, double* c, int n) {
    const __m256d av = _mm256_set1_pd(a);
    int j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(c + j);
        __m256d c1 = _mm256_loadu_pd(c + j + 4);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j + 4), c1);
        _mm256_storeu_pd(c + j, c0);
        _mm256_storeu_pd(c + j + 4, c1);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(c + j);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j), c0);
        _mm256_storeu_pd(c + j, c0);
    }
    for (; j < n; ++j) c[j] = std::fma(a, b[j], c[j]);
}

// Cache blocking: reduction panels keep the streamed operand hot, row blocks
// amortize each panel pass. Every C element still accumulates its fma chain
// in ascending reduction order, so results are bit-identical to the scalar
// lane's plain loops.
constexpr int kPanel = 256;
constexpr int kRowBlock = 8;

void matmul_avx2(const double* A, const double* B, double* C, int m, int k, int n) {
    std::memset(C, 0, sizeof(double) * static_cast<size_t>(m) * n);
    for (int k0 = 0; k0 < k; k0 += kPanel) {
        const int k1 = std::min(k, k0 + kPanel);
        for (int i0 = 0; i0 < m; i0 += kRowBlock) {
            const int i1 = std::min(m, i0 + kRowBlock);
            for (int kk = k0; kk < k1; ++kk) {
                const double* bk = B + static_cast<size_t>(kk) * n;
                for (int i = i0; i < i1; ++i)
                    fmadd_row(A[static_cast<size_t>(i) * k + kk], bk,
                              C + static_cast<size_t>(i) * n, n);
            }
        }
    }
}

double dot_avx2(const double* a, const double* b, int n) {
    __m256d vacc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        vacc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), vacc);
    }
    alignas(32) double acc[4];
    _mm256_store_pd(acc, vacc);
    for (; i < n; ++i) acc[i % 4] = std::fma(a[i], b[i], acc[i % 4]);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void matmul_nt_avx2(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        double* ci = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = dot_avx2(ai, B + static_cast<size_t>(j) * k, k);
    }
}

void matmul_tn_avx2(const double* A, const double* B, double* C, int m, int k, int n) {
    std::memset(C, 0, sizeof(double) * static_cast<size_t>(k) * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        const double* bi = B + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const __m256d av = _mm256_set1_pd(ai[kk]);
            const double a = ai[kk];
            double* ck = C + static_cast<size_t>(kk) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d c0 = _mm256_loadu_pd(ck + j);
                c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bi + j), c0);
                _mm256_storeu_pd(ck + j, c0);
            }
            for (; j < n; ++j) ck[j] = std::fma(a, bi[j], ck[j]);
        }
    }
}

void axpy_avx2(double a, const double* x, double* y, int n) {
    const __m256d av = _mm256_set1_pd(a);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), y0);
        y1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), y1);
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), y0);
        _mm256_storeu_pd(y + i, y0);
    }
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

double sum_avx2(const double* a, int n) {
    __m256d vacc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(a + i));
    alignas(32) double acc[4];
    _mm256_store_pd(acc, vacc);
    for (; i < n; ++i) acc[i % 4] += a[i];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void add_avx2(const double* a, const double* b, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_avx2(const double* a, const double* b, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_avx2(const double* a, const double* b, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void scale_avx2(const double* a, double s, double* out, int n) {
    const __m256d sv = _mm256_set1_pd(s);
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
    for (; i < n; ++i) out[i] = a[i] * s;
}

}  // namespace

const Ops* avx2_ops_impl() {
    static const Ops ops = {
        "avx2",    matmul_avx2, matmul_nt_avx2, matmul_tn_avx2, axpy_avx2, dot_avx2,
        sum_avx2,  add_avx2,    sub_avx2,       mul_avx2,       scale_avx2,
    };
    return &ops;
}

}  // namespace rod::kernels

#endif  // ROD_HAVE_AVX2_BUILD
