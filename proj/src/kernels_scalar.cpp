#include "rod/kernels.hpp"

#include <cmath>
#include <cstring>

// Scalar reference lane. Compiled without target-specific flags; std::fma is
// the portable fused multiply-add, which matches the hardware FMA used by the
// AVX2 lane bit for bit.

namespace rod::kernels {
namespace {

void matmul_scalar(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* ci = C + static_cast<size_t>(i) * n;
        std::memset(ci, 0, sizeof(double) * n);
        const double* ai = A + static_cast<size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double a = ai[kk];
            const double* bk = B + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] = std::fma(a, bk[j], ci[j]);
        }
    }
}

double dot_scalar(const double* a, const double* b, int n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = std::fma(a[i + 0], b[i + 0], acc0);
        acc1 = std::fma(a[i + 1], b[i + 1], acc1);
        acc2 = std::fma(a[i + 2], b[i + 2], acc2);
        acc3 = std::fma(a[i + 3], b[i + 3], acc3);
    }
    double* accs[4] = {&acc0, &acc1, &acc2, &acc3};
    for (; i < n; ++i) *accs[i % 4] = std::fma(a[i], b[i], *accs[i % 4]);
    return (acc0 + acc1) + (acc2 + acc3);
}

void matmul_nt_scalar(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        double* ci = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = dot_scalar(ai, B + static_cast<size_t>(j) * k, k);
    }
}

void matmul_tn_scalar(const double* A, const double* B, double* C, int m, int k, int n) {
    std::memset(C, 0, sizeof(double) * static_cast<size_t>(k) * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        const double* bi = B + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double a = ai[kk];
            double* ck = C + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ck[j] = std::fma(a, bi[j], ck[j]);
        }
    }
}

void axpy_scalar(double a, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

double sum_scalar(const double* a, int n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i + 0];
        acc1 += a[i + 1];
        acc2 += a[i + 2];
        acc3 += a[i + 3];
    }
    double* accs[4] = {&acc0, &acc1, &acc2, &acc3};
    for (; i < n; ++i) *accs[i % 4] += a[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

void add_scalar(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_scalar(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_scalar(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void scale_scalar(const double* a, double s, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * s;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",     matmul_scalar, matmul_nt_scalar, matmul_tn_scalar,
        axpy_scalar,  dot_scalar,    sum_scalar,       add_scalar,
        sub_scalar,   mul_scalar,    scale_scalar,
    };
    return ops;
}

}  // namespace rod::kernels
