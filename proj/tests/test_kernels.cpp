#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rod/kernels.hpp"
#include "rod/rng.hpp"
#include "test_util.hpp"

using namespace rod;
using rodtest::dense_matmul;
using rodtest::random_matrix;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;  // NaN-free inputs by construction
    return true;
}

}  // namespace

TEST_CASE("matmul matches the naive oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        int m = 1 + int(rng.uniform_int(17));
        int k = 1 + int(rng.uniform_int(23));
        int n = 1 + int(rng.uniform_int(19));
        DenseMatrix a = random_matrix(m, k, rng);
        DenseMatrix b = random_matrix(k, n, rng);
        DenseMatrix c(m, n), ref = dense_matmul(a, b);
        kernels::scalar_ops().matmul(a.data.data(), b.data.data(), c.data.data(), m, k, n);
        CHECK(rodtest::max_abs_diff(c, ref) < 1e-12);
    }
}

TEST_CASE("matmul_nt and matmul_tn match transposed oracles") {
    Rng rng(11);
    int m = 9, k = 13, n = 7;
    DenseMatrix a = random_matrix(m, k, rng);
    DenseMatrix bt = random_matrix(n, k, rng);  // b = bt^T
    DenseMatrix b(k, n);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = bt(j, i);

    DenseMatrix c1(m, n);
    kernels::scalar_ops().matmul_nt(a.data.data(), bt.data.data(), c1.data.data(), m, k, n);
    CHECK(rodtest::max_abs_diff(c1, dense_matmul(a, b)) < 1e-12);

    DenseMatrix c = random_matrix(m, n, rng);
    DenseMatrix at(k, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) at(j, i) = a(i, j);
    DenseMatrix r(k, n);
    kernels::scalar_ops().matmul_tn(a.data.data(), c.data.data(), r.data.data(), m, k, n);
    CHECK(rodtest::max_abs_diff(r, dense_matmul(at, c)) < 1e-12);
}

TEST_CASE("reductions agree with plain loops") {
    Rng rng(3);
    for (int n : {1, 2, 3, 4, 5, 7, 8, 64, 129}) {
        DenseMatrix a = random_matrix(1, n, rng), b = random_matrix(1, n, rng);
        double s = 0.0, d = 0.0;
        for (int i = 0; i < n; ++i) {
            s += a.data[i];
            d += a.data[i] * b.data[i];
        }
        CHECK(kernels::scalar_ops().sum(a.data.data(), n) == doctest::Approx(s).epsilon(1e-12));
        CHECK(kernels::scalar_ops().dot(a.data.data(), b.data.data(), n) ==
              doctest::Approx(d).epsilon(1e-12));
    }
}

TEST_CASE("avx2 lane is bit-identical to the scalar reference") {
    const kernels::Ops* simd = kernels::avx2_ops();
    if (!simd) return;  // machine without AVX2: only the scalar lane exists
    const kernels::Ops& ref = kernels::scalar_ops();
    Rng rng(1234);

    for (int trial = 0; trial < 20; ++trial) {
        int m = 1 + int(rng.uniform_int(13));
        int k = 1 + int(rng.uniform_int(31));  // ragged tails included
        int n = 1 + int(rng.uniform_int(27));
        DenseMatrix a = random_matrix(m, k, rng);
        DenseMatrix b = random_matrix(k, n, rng);
        DenseMatrix bt = random_matrix(n, k, rng);
        DenseMatrix g = random_matrix(m, n, rng);

        DenseMatrix c1(m, n), c2(m, n);
        ref.matmul(a.data.data(), b.data.data(), c1.data.data(), m, k, n);
        simd->matmul(a.data.data(), b.data.data(), c2.data.data(), m, k, n);
        CHECK(bits_equal(c1.data, c2.data));

        ref.matmul_nt(a.data.data(), bt.data.data(), c1.data.data(), m, k, n);
        simd->matmul_nt(a.data.data(), bt.data.data(), c2.data.data(), m, k, n);
        CHECK(bits_equal(c1.data, c2.data));

        DenseMatrix t1(k, n), t2(k, n);
        ref.matmul_tn(a.data.data(), g.data.data(), t1.data.data(), m, k, n);
        simd->matmul_tn(a.data.data(), g.data.data(), t2.data.data(), m, k, n);
        CHECK(bits_equal(t1.data, t2.data));

        int len = k;
        DenseMatrix x = random_matrix(1, len, rng), y1 = random_matrix(1, len, rng);
        DenseMatrix y2 = y1;
        ref.axpy(0.37, x.data.data(), y1.data.data(), len);
        simd->axpy(0.37, x.data.data(), y2.data.data(), len);
        CHECK(bits_equal(y1.data, y2.data));

        CHECK(ref.dot(x.data.data(), y1.data.data(), len) ==
              simd->dot(x.data.data(), y1.data.data(), len));
        CHECK(ref.sum(x.data.data(), len) == simd->sum(x.data.data(), len));

        DenseMatrix o1(1, len), o2(1, len);
        ref.add(x.data.data(), y1.data.data(), o1.data.data(), len);
        simd->add(x.data.data(), y1.data.data(), o2.data.data(), len);
        CHECK(bits_equal(o1.data, o2.data));
        ref.sub(x.data.data(), y1.data.data(), o1.data.data(), len);
        simd->sub(x.data.data(), y1.data.data(), o2.data.data(), len);
        CHECK(bits_equal(o1.data, o2.data));
        ref.mul(x.data.data(), y1.data.data(), o1.data.data(), len);
        simd->mul(x.data.data(), y1.data.data(), o2.data.data(), len);
        CHECK(bits_equal(o1.data, o2.data));
        ref.scale(x.data.data(), -1.618, o1.data.data(), len);
        simd->scale(x.data.data(), -1.618, o2.data.data(), len);
        CHECK(bits_equal(o1.data, o2.data));
    }
}

TEST_CASE("backend selection") {
    CHECK(kernels::select("scalar"));
    CHECK(std::string(kernels::active_name()) == "scalar");
    CHECK(kernels::select("auto"));
    if (kernels::avx2_ops()) {
        CHECK(kernels::select("avx2"));
        CHECK(std::string(kernels::active_name()) == "avx2");
    } else {
        CHECK_FALSE(kernels::select("avx2"));
    }
    CHECK_FALSE(kernels::select("mmx"));
    kernels::select("auto");
}
