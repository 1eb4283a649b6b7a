#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rod/model.hpp"
#include "test_util.hpp"

using namespace rod;

namespace {

RodConfig toy_config(Task task, int depth = 2) {
    RodConfig cfg;
    cfg.task = task;
    cfg.depth = depth;
    cfg.hidden = 5;
    cfg.embed = 3;
    cfg.classes = 2;
    cfg.alpha = 0.1;
    cfg.beta = 0.1;
    cfg.dropout = 0.0;
    return cfg;
}

std::vector<Var> constants(Tape& tape, const std::vector<DenseMatrix>& mats) {
    std::vector<Var> out;
    for (const auto& m : mats) out.push_back(tape.constant(m));
    return out;
}

}  // namespace

TEST_CASE("gated_combine") {
    Rng rng(3);
    std::vector<DenseMatrix> props = {rodtest::random_matrix(4, 3, rng),
                                      rodtest::random_matrix(4, 3, rng),
                                      rodtest::random_matrix(4, 3, rng)};
    SUBCASE("zero gate halves the plain sum") {
        GateParams gate;
        for (int k = 0; k < 3; ++k) {
            gate.w.emplace_back(3, 1);
            gate.b.emplace_back(1, 1);
        }
        Tape tape;
        BindingSet binds;
        Var h = gated_combine(tape, constants(tape, props), gate, binds);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) {
                double plain = props[0](i, j) + props[1](i, j) + props[2](i, j);
                CHECK(tape.value(h)(i, j) == doctest::Approx(0.5 * plain).epsilon(1e-12));
            }
    }
    SUBCASE("single-hop case") {
        GateParams gate;
        gate.w.push_back(rodtest::random_matrix(3, 1, rng));
        gate.b.emplace_back(1, 1);
        Tape tape;
        BindingSet binds;
        Var h = gated_combine(tape, {tape.constant(props[0])}, gate, binds);
        CHECK(tape.value(h).rows == 4);
    }
    SUBCASE("saturated gate selects one hop") {
        GateParams gate;
        for (int k = 0; k < 3; ++k) {
            gate.w.emplace_back(3, 1);
            gate.b.emplace_back(1, 1);
            gate.b.back()(0, 0) = k == 0 ? 30.0 : -30.0;
        }
        Tape tape;
        BindingSet binds;
        Var h = gated_combine(tape, constants(tape, props), gate, binds);
        CHECK(rodtest::max_abs_diff(tape.value(h), props[0]) < 1e-10);
    }
    SUBCASE("arity mismatch") {
        GateParams gate;
        gate.w.emplace_back(3, 1);
        gate.b.emplace_back(1, 1);
        Tape tape;
        BindingSet binds;
        CHECK_THROWS_AS(gated_combine(tape, constants(tape, props), gate, binds),
                        std::invalid_argument);
    }
}

TEST_CASE("encode") {
    EncoderParams enc;
    enc.weight = DenseMatrix::from_rows({{1, 0}, {0, 1}});
    enc.bias = DenseMatrix::from_rows({{-0.5, 2.0}});
    enc.dropout = 0.0;
    SUBCASE("zero input leaves relu(bias)") {
        Tape tape;
        BindingSet binds;
        Var out = encode(tape, tape.constant(DenseMatrix(3, 2)), enc, false, Rng(0), binds);
        for (int i = 0; i < 3; ++i) {
            CHECK(tape.value(out)(i, 0) == 0.0);   // relu(-0.5)
            CHECK(tape.value(out)(i, 1) == 2.0);
        }
    }
    SUBCASE("identity weights give relu(h)") {
        enc.bias = DenseMatrix(1, 2);
        Tape tape;
        BindingSet binds;
        DenseMatrix h = DenseMatrix::from_rows({{1.5, -2.0}});
        Var out = encode(tape, tape.constant(h), enc, false, Rng(0), binds);
        CHECK(tape.value(out)(0, 0) == 1.5);
        CHECK(tape.value(out)(0, 1) == 0.0);
    }
    SUBCASE("eval mode is deterministic even with a dropout rate") {
        enc.dropout = 0.7;
        Rng rng(5);
        DenseMatrix h = rodtest::random_matrix(4, 2, rng);
        Tape t1, t2;
        BindingSet b1, b2;
        DenseMatrix o1 = t1.value(encode(t1, t1.constant(h), enc, false, Rng(1), b1));
        DenseMatrix o2 = t2.value(encode(t2, t2.constant(h), enc, false, Rng(2), b2));
        CHECK(o1.data == o2.data);
    }
}

TEST_CASE("student predictions per task") {
    SUBCASE("classify: equal logits give uniform rows") {
        Tape tape;
        Var z = tape.constant(DenseMatrix(3, 4, 0.7));
        DenseMatrix p = tape.value(classify_prediction(tape, z));
        for (double v : p.data) CHECK(v == doctest::Approx(0.25));
    }
    SUBCASE("link: identical embeddings saturate at 1 - eps") {
        Tape tape;
        DenseMatrix z = DenseMatrix::from_rows({{1, 2}, {1, 2}});
        Var p = link_prediction(tape, tape.constant(z), {{0, 1}});
        CHECK(tape.value(p)(0, 0) == doctest::Approx(1.0 - kProbEps));
    }
    SUBCASE("cluster: distance softmax at a centroid") {
        Tape tape;
        DenseMatrix z = DenseMatrix::from_rows({{0.0, 0.0}});
        DenseMatrix centroids = DenseMatrix::from_rows({{0.0, 0.0}, {2.0, 0.0}});
        Var d = centroid_distances(tape, tape.constant(z), centroids);
        DenseMatrix p = tape.value(cluster_prediction(tape, d));
        double e0 = std::exp(-1e-6);  // sqrt floor makes the zero distance 1e-6
        double e2 = std::exp(-2.0);
        CHECK(p(0, 0) == doctest::Approx(e0 / (e0 + e2)).epsilon(1e-4));
        CHECK(p(0, 1) == doctest::Approx(e2 / (e0 + e2)).epsilon(1e-4));
        CHECK(p(0, 0) == doctest::Approx(0.8808).epsilon(1e-3));
    }
}

TEST_CASE("embedding_similarity delegates to cosine") {
    DenseMatrix z = DenseMatrix::from_rows({{1, 0}, {0, 2}});
    SimilarityMatrix s = embedding_similarity(z);
    CHECK(s(0, 0) == 1.0);
    CHECK(s(0, 1) == 0.0);
}

TEST_CASE("teacher_ensemble: distribution tasks") {
    const int n = 4, q = 3;
    Rng rng(9);
    SUBCASE("identical students reproduce the prediction") {
        Tape tape;
        DenseMatrix p(n, q, 1.0 / q);
        std::vector<Var> students = {tape.constant(p), tape.constant(p), tape.constant(p)};
        TeacherGate tg;
        for (int k = 0; k < 3; ++k) {
            tg.v.push_back(rodtest::random_matrix(q, 1, rng));
            tg.c.emplace_back(1, 1);
        }
        BindingSet binds;
        Var t = teacher_ensemble(tape, students, tg, Task::Classify, binds);
        CHECK(rodtest::max_abs_diff(tape.value(t), p) < 1e-12);
    }
    SUBCASE("two opposite one-hot students with zero gates average out") {
        Tape tape;
        DenseMatrix a = DenseMatrix::from_rows({{1.0, 0.0}});
        DenseMatrix b = DenseMatrix::from_rows({{0.0, 1.0}});
        TeacherGate tg;
        for (int k = 0; k < 2; ++k) {
            tg.v.emplace_back(2, 1);
            tg.c.emplace_back(1, 1);
        }
        BindingSet binds;
        Var t = teacher_ensemble(tape, {tape.constant(a), tape.constant(b)}, tg,
                                 Task::Classify, binds);
        CHECK(tape.value(t)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(tape.value(t)(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("saturated gate follows one student; rows stay normalized") {
        Tape tape;
        DenseMatrix p0(n, q);
        DenseMatrix p1(n, q);
        for (int i = 0; i < n; ++i) {
            double z = 0;
            std::vector<double> raw;
            for (int j = 0; j < q; ++j) raw.push_back(0.1 + rng.uniform());
            for (double v : raw) z += v;
            for (int j = 0; j < q; ++j) {
                p0(i, j) = raw[j] / z;
                p1(i, j) = raw[(j + 1) % q] / z;
            }
        }
        TeacherGate tg;
        tg.v.emplace_back(q, 1);
        tg.c.emplace_back(1, 1);
        tg.c.back()(0, 0) = 30.0;
        tg.v.emplace_back(q, 1);
        tg.c.emplace_back(1, 1);
        tg.c.back()(0, 0) = -30.0;
        BindingSet binds;
        Var t = teacher_ensemble(tape, {tape.constant(p0), tape.constant(p1)}, tg,
                                 Task::Classify, binds);
        CHECK(rodtest::max_abs_diff(tape.value(t), p0) < 1e-8);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < q; ++j) {
                s += tape.value(t)(i, j);
                CHECK(tape.value(t)(i, j) > 0.0);
                CHECK(tape.value(t)(i, j) < 1.0);
            }
            CHECK(std::fabs(s - 1.0) < 1e-10);
        }
    }
    SUBCASE("permutation covariance of (students, gates)") {
        Tape tape;
        std::vector<DenseMatrix> ps;
        TeacherGate tg;
        for (int k = 0; k < 3; ++k) {
            DenseMatrix raw = rodtest::random_matrix(n, q, rng, 0.05, 1.0);
            for (int i = 0; i < n; ++i) {
                double s = 0;
                for (int j = 0; j < q; ++j) s += raw(i, j);
                for (int j = 0; j < q; ++j) raw(i, j) /= s;
            }
            ps.push_back(raw);
            tg.v.push_back(rodtest::random_matrix(q, 1, rng));
            tg.c.push_back(rodtest::random_matrix(1, 1, rng));
        }
        BindingSet b1;
        Var t1 = teacher_ensemble(tape, constants(tape, ps), tg, Task::Classify, b1);
        TeacherGate permuted;
        std::vector<DenseMatrix> ps2 = {ps[2], ps[0], ps[1]};
        permuted.v = {tg.v[2], tg.v[0], tg.v[1]};
        permuted.c = {tg.c[2], tg.c[0], tg.c[1]};
        BindingSet b2;
        Var t2 = teacher_ensemble(tape, constants(tape, ps2), permuted, Task::Classify, b2);
        CHECK(rodtest::max_abs_diff(tape.value(t1), tape.value(t2)) < 1e-12);
    }
}

TEST_CASE("teacher_ensemble: link task uses scalar gates") {
    Tape tape;
    DenseMatrix p0(5, 1, 0.9), p1(5, 1, 0.1);
    TeacherGate tg;
    tg.v.emplace_back(1, 1);
    tg.v.emplace_back(1, 1);
    BindingSet binds;
    Var t = teacher_ensemble(tape, {tape.constant(p0), tape.constant(p1)}, tg, Task::Link,
                             binds);
    for (int i = 0; i < 5; ++i) CHECK(tape.value(t)(i, 0) == doctest::Approx(0.5));

    // saturate toward student 0
    tg.v[0](0, 0) = 30.0;
    tg.v[1](0, 0) = -30.0;
    BindingSet b2;
    Var t2 = teacher_ensemble(tape, {tape.constant(p0), tape.constant(p1)}, tg, Task::Link, b2);
    CHECK(rodtest::max_abs_diff(tape.value(t2), p0) < 1e-8);
}

TEST_CASE("init_params") {
    RodConfig cfg = toy_config(Task::Classify);
    RodModel a = init_params(cfg, 7, 99);
    RodModel b = init_params(cfg, 7, 99);
    auto pa = a.named_params();
    auto pb = b.named_params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second->data == pb[i].second->data);
    }
    // biases zero
    for (const auto& bias : a.gate.b) CHECK(bias(0, 0) == 0.0);
    for (double v : a.encoder.bias.data) CHECK(v == 0.0);
    // Glorot bounds
    double lim_enc = std::sqrt(6.0 / (7 + cfg.hidden));
    for (double v : a.encoder.weight.data) CHECK(std::fabs(v) <= lim_enc);
    double lim_head = std::sqrt(6.0 / (cfg.hidden + cfg.classes));
    for (const auto& head : a.heads)
        for (double v : head.weight.data) CHECK(std::fabs(v) <= lim_head);
    CHECK(a.heads.size() == size_t(cfg.depth + 1));

    RodModel c = init_params(cfg, 7, 100);
    CHECK(a.encoder.weight.data != c.encoder.weight.data);
}
