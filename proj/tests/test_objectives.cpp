#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rod/objectives.hpp"
#include "test_util.hpp"

using namespace rod;

TEST_CASE("reception_loss") {
    SUBCASE("identical matrices give zero") {
        Rng rng(4);
        SimilarityMatrix s = rodtest::random_matrix(6, 6, rng);
        CHECK(reception_loss(s, s) == 0.0);
    }
    SUBCASE("identity vs all-ones 2x2 is sqrt(2)") {
        SimilarityMatrix p = DenseMatrix::from_rows({{1, 0}, {0, 1}});
        SimilarityMatrix s(2, 2, 1.0);
        CHECK(reception_loss(p, s) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("masked variant touches only the sampled pairs") {
        SimilarityMatrix p(3, 3);
        SimilarityMatrix s(3, 3);
        p(0, 1) = 0.9;
        s(0, 1) = 0.4;   // residual 0.5
        p(1, 2) = 0.1;
        s(1, 2) = -0.2;  // residual 0.3
        p(0, 2) = 5.0;
        s(0, 2) = -5.0;  // excluded pair, must not contribute
        SampledAdjacency mask;
        mask.pos_pairs = {{0, 1}};
        mask.neg_pairs = {{1, 2}};
        double expect = std::sqrt(0.5 * 0.5 + 0.3 * 0.3);
        CHECK(reception_loss(p, s, &mask) == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("row permutation invariance") {
        Rng rng(8);
        SimilarityMatrix p = rodtest::random_matrix(5, 5, rng);
        SimilarityMatrix s = rodtest::random_matrix(5, 5, rng);
        std::vector<int> perm = {3, 1, 4, 0, 2};
        SimilarityMatrix pp(5, 5), sp(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                pp(i, j) = p(perm[i], perm[j]);
                sp(i, j) = s(perm[i], perm[j]);
            }
        CHECK(reception_loss(pp, sp) == doctest::Approx(reception_loss(p, s)).epsilon(1e-12));
    }
}

TEST_CASE("classification_loss") {
    SUBCASE("confident correct prediction is near zero") {
        DenseMatrix probs = DenseMatrix::from_rows({{1.0 - 1e-7, 1e-7}});
        CHECK(classification_loss(probs, {0}, {0}) < 1e-6);
    }
    SUBCASE("uniform two-class is ln 2") {
        DenseMatrix probs = DenseMatrix::from_rows({{0.5, 0.5}});
        CHECK(classification_loss(probs, {1}, {0}) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-10));
    }
    SUBCASE("uniform q-class is ln q") {
        for (int q : {3, 5, 8}) {
            DenseMatrix probs(4, q, 1.0 / q);
            std::vector<int> labels = {0, 1, 2, 0};
            CHECK(classification_loss(probs, labels, {0, 1, 2, 3}) ==
                  doctest::Approx(std::log(double(q))).epsilon(1e-10));
        }
    }
    SUBCASE("moving mass toward the true class strictly helps") {
        double prev = 1e9;
        for (double p : {0.3, 0.5, 0.7, 0.9, 0.99}) {
            DenseMatrix probs = DenseMatrix::from_rows({{p, 1.0 - p}});
            double loss = classification_loss(probs, {0}, {0});
            CHECK(loss < prev);
            prev = loss;
        }
    }
    SUBCASE("empty labeled set rejected") {
        DenseMatrix probs(1, 2, 0.5);
        CHECK_THROWS_AS(classification_loss(probs, {0}, {}), std::invalid_argument);
    }
}

TEST_CASE("link_loss") {
    SUBCASE("single positive at half confidence") {
        CHECK(link_loss({0.5}, {}, {1.0}, {}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("saturated positives vanish") {
        CHECK(link_loss({1.0 - 1e-7, 1.0 - 1e-7}, {}, {1.0, 1.0}, {}) < 1e-6);
    }
    SUBCASE("single negative mirrors the positive case") {
        CHECK(link_loss({}, {0.5}, {}, {0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("mean reduction divides by the pair count") {
        double sum_red = link_loss({0.5, 0.5}, {0.5, 0.5}, {1.0, 1.0}, {0.0, 0.0},
                                   Reduction::Sum);
        double mean_red = link_loss({0.5, 0.5}, {0.5, 0.5}, {1.0, 1.0}, {0.0, 0.0},
                                    Reduction::Mean);
        CHECK(sum_red == doctest::Approx(4.0 * std::log(2.0)));
        CHECK(mean_red == doctest::Approx(std::log(2.0)));
    }
}

TEST_CASE("clustering_loss") {
    SUBCASE("points on their centroids, two centroids 2 apart") {
        DenseMatrix z = DenseMatrix::from_rows({{0, 0}, {2, 0}});
        DenseMatrix c = DenseMatrix::from_rows({{0, 0}, {2, 0}});
        double loss = clustering_loss(z, c, {0, 1}, 2);
        CHECK(loss == doctest::Approx(-2.0).epsilon(1e-4));
        // the literal printed form flips the sign
        CHECK(clustering_loss(z, c, {0, 1}, 2, true) == doctest::Approx(2.0).epsilon(1e-4));
    }
    SUBCASE("q = 1 with everything on the centroid") {
        DenseMatrix z(3, 2, 0.5);
        DenseMatrix c(1, 2, 0.5);
        CHECK(std::fabs(clustering_loss(z, c, {0, 0, 0}, 1)) < 1e-4);
    }
    SUBCASE("node equidistant from both centroids nets zero") {
        DenseMatrix z = DenseMatrix::from_rows({{1.0, 0.0}});
        DenseMatrix c = DenseMatrix::from_rows({{0, 0}, {2, 0}});
        CHECK(clustering_loss(z, c, {0}, 2) == doctest::Approx(0.0).epsilon(1e-10));
    }
    SUBCASE("invalid assignment rejected") {
        DenseMatrix z(2, 2), c(2, 2);
        CHECK_THROWS_AS(clustering_loss(z, c, {0, 2}, 2), std::invalid_argument);
    }
}

TEST_CASE("distillation_loss") {
    SUBCASE("KL of a distribution against itself is exactly zero") {
        Rng rng(12);
        for (int trial = 0; trial < 5; ++trial) {
            DenseMatrix p = rodtest::random_matrix(6, 4, rng, 0.05, 1.0);
            for (int i = 0; i < p.rows; ++i) {
                double s = 0;
                for (int j = 0; j < p.cols; ++j) s += p(i, j);
                for (int j = 0; j < p.cols; ++j) p(i, j) /= s;
            }
            CHECK(std::fabs(distillation_loss(p, p, Task::Classify)) <= 1e-12);
        }
        DenseMatrix bern(5, 1, 0.37);
        CHECK(std::fabs(distillation_loss(bern, bern, Task::Link)) <= 1e-12);
    }
    SUBCASE("hand-computed row KL") {
        DenseMatrix p = DenseMatrix::from_rows({{0.5, 0.5}});
        DenseMatrix q = DenseMatrix::from_rows({{0.25, 0.75}});
        double expect = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
        CHECK(distillation_loss(p, q, Task::Classify) == doctest::Approx(expect).epsilon(1e-9));
        CHECK(expect == doctest::Approx(0.143841).epsilon(1e-4));
    }
    SUBCASE("nonnegative over random distribution pairs") {
        Rng rng(5);
        for (int trial = 0; trial < 1000; ++trial) {
            DenseMatrix p(1, 3), q(1, 3);
            double sp = 0, sq = 0;
            for (int j = 0; j < 3; ++j) {
                p(0, j) = 0.01 + rng.uniform();
                q(0, j) = 0.01 + rng.uniform();
                sp += p(0, j);
                sq += q(0, j);
            }
            for (int j = 0; j < 3; ++j) {
                p(0, j) /= sp;
                q(0, j) /= sq;
            }
            CHECK(distillation_loss(p, q, Task::Classify) >= -1e-12);
        }
    }
}

TEST_CASE("joint_loss") {
    SUBCASE("single-student arithmetic") {
        LossBreakdown b = joint_loss({1.0}, {2.0}, {3.0}, 0.1, 0.1);
        CHECK(b.total == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("tiny coefficients approach the bare task loss") {
        LossBreakdown b = joint_loss({1.0, 2.0}, {5.0, 5.0}, {7.0, 7.0}, 1e-9, 1e-9);
        CHECK(b.total == doctest::Approx(3.0).epsilon(1e-6));
    }
    SUBCASE("doubling alpha doubles only the reception share") {
        LossBreakdown b1 = joint_loss({1.0}, {2.0}, {3.0}, 0.1, 0.1);
        LossBreakdown b2 = joint_loss({1.0}, {2.0}, {3.0}, 0.2, 0.1);
        CHECK(b2.total - b1.total == doctest::Approx(0.1 * 2.0).epsilon(1e-12));
    }
    SUBCASE("breakdown identity holds") {
        LossBreakdown b = joint_loss({1.0, 0.5}, {2.0, 0.25}, {3.0, 0.125}, 0.3, 0.7);
        double manual = 0.0;
        for (size_t k = 0; k < 2; ++k)
            manual += b.task[k] + 0.3 * b.reception[k] + 0.7 * b.distill[k];
        CHECK(std::fabs(b.total - manual) < 1e-10);
    }
    SUBCASE("nonpositive coefficients rejected") {
        CHECK_THROWS_AS(joint_loss({1.0}, {1.0}, {1.0}, 0.0, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(joint_loss({1.0}, {1.0}, {1.0}, 0.1, -1.0), std::invalid_argument);
    }
}

TEST_CASE("link_pair_weights rescales the ensemble similarity") {
    SimilarityMatrix s(3, 3);
    s(0, 1) = s(1, 0) = 2.0;
    s(0, 2) = s(2, 0) = -1.0;
    s(1, 2) = s(2, 1) = 0.5;
    SampledAdjacency sampled;
    sampled.pos_pairs = {{0, 1}, {1, 2}};
    sampled.neg_pairs = {{0, 2}};
    LinkWeights w = link_pair_weights(s, sampled);
    CHECK(w.pos[0] == doctest::Approx(1.0));   // max
    CHECK(w.neg[0] == doctest::Approx(0.0));   // min
    CHECK(w.pos[1] == doctest::Approx(0.5));   // midpoint
    // degenerate all-equal case falls back to 0.5
    SimilarityMatrix flat(3, 3, 0.7);
    LinkWeights wf = link_pair_weights(flat, sampled);
    CHECK(wf.pos[0] == doctest::Approx(0.5));
    CHECK(wf.neg[0] == doctest::Approx(0.5));
}
