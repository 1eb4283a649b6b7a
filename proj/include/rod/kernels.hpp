#pragma once

#include <string_view>

namespace rod::kernels {

/// Dispatch table for the data-parallel inner loops (dense GEMM flavors,
/// fused axpy, reductions, elementwise arithmetic). Two implementations
/// exist: a scalar reference and an AVX2+FMA variant. Both follow the same
/// accumulation contracts, so their outputs are bit-identical:
///
///   - matmul / matmul_tn: each output element is a single fused
///     multiply-add chain in ascending reduction index.
///   - dot / sum (and matmul_nt, which is row-pair dot): four interleaved
///     accumulator chains over indices congruent mod 4, reduced as
///     (acc0 + acc1) + (acc2 + acc3).
///   - axpy and elementwise ops: independent per element, fused multiply-add.
struct Ops {
    const char* name;

    /// C (m x n) = A (m x k) . B (k x n); all row-major, C overwritten.
    void (*matmul)(const double* A, const double* B, double* C, int m, int k, int n);
    /// C (m x n) = A (m x k) . B^T where B is (n x k).
    void (*matmul_nt)(const double* A, const double* B, double* C, int m, int k, int n);
    /// C (k x n) = A^T . B where A is (m x k), B is (m x n).
    void (*matmul_tn)(const double* A, const double* B, double* C, int m, int k, int n);
    /// y += a * x over n entries.
    void (*axpy)(double a, const double* x, double* y, int n);
    double (*dot)(const double* a, const double* b, int n);
    double (*sum)(const double* a, int n);
    void (*add)(const double* a, const double* b, double* out, int n);
    void (*sub)(const double* a, const double* b, double* out, int n);
    void (*mul)(const double* a, const double* b, double* out, int n);
    void (*scale)(const double* a, double s, double* out, int n);
};

/// The currently selected implementation.
const Ops& active();

const Ops& scalar_ops();

/// AVX2 table, or nullptr when unsupported by the build or the CPU.
const Ops* avx2_ops();

/// Select "scalar", "avx2" or "auto" (best available). Returns false if the
/// requested backend is unavailable (selection is left unchanged).
bool select(std::string_view which);

/// Name of the active backend ("scalar" or "avx2").
const char* active_name();

}  // namespace rod::kernels
