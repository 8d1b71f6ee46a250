#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "banditscreen/errors.hpp"
#include "banditscreen/rng.hpp"
#include "banditscreen/ssge.hpp"

using namespace banditscreen;

namespace {

Matrix normal_samples(std::size_t m, std::size_t d, Rng& rng, double mean = 0.0) {
    Matrix s(m, d);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) s(r, c) = mean + rng.normal();
    return s;
}

}  // namespace

TEST_CASE("median bandwidth on two points is their distance") {
    const Matrix samples{{0.0}, {2.0}};
    CHECK(median_bandwidth(samples) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("median bandwidth falls back to one on coincident points") {
    const Matrix samples{{1.5, -2.0}, {1.5, -2.0}, {1.5, -2.0}};
    CHECK(median_bandwidth(samples) == 1.0);
}

TEST_CASE("median bandwidth equals the brute-force pairwise median") {
    Rng rng(59);
    const Matrix samples = normal_samples(5, 3, rng);
    std::vector<double> dists;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double diff = samples(i, c) - samples(j, c);
                acc += diff * diff;
            }
            dists.push_back(std::sqrt(acc));
        }
    REQUIRE(dists.size() == 10);
    std::sort(dists.begin(), dists.end());
    const double want = 0.5 * (dists[4] + dists[5]);
    CHECK(median_bandwidth(samples) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("bandwidth preconditions") {
    CHECK_THROWS_AS(median_bandwidth(Matrix(1, 2)), ContractError);
    CHECK_THROWS_AS(SsgeModel::fit(Matrix(1, 2), 1), ContractError);
    const Matrix two{{0.0}, {1.0}};
    CHECK_THROWS_AS(SsgeModel::fit(two, 0), ContractError);
    CHECK_THROWS_AS(SsgeModel::fit(two, 3), ContractError);
    CHECK_THROWS_AS(SsgeModel::fit(two, 1, -1.0), ContractError);
}

TEST_CASE("two identical points give the all-ones rank-one Gram") {
    const Matrix samples{{0.5, 0.5}, {0.5, 0.5}};
    const SsgeModel model = SsgeModel::fit(samples, 2);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) CHECK(model.gram()(r, c) == 1.0);
    CHECK(model.eigenvalues()[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(model.rank() == 1);  // the second eigenvalue is zero and floored away
}

TEST_CASE("far-apart points under a tiny bandwidth give a near-identity Gram") {
    const Matrix samples{{10.0, 0.0, 0.0}, {0.0, 10.0, 0.0}, {0.0, 0.0, 10.0}};
    const SsgeModel model = SsgeModel::fit(samples, 3, 0.5);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            if (r == c)
                CHECK(model.gram()(r, c) == 1.0);
            else
                CHECK(std::abs(model.gram()(r, c)) < 1e-8);
        }
    for (double v : model.eigenvalues()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("kept eigenpairs reconstruct the Gram matrix") {
    Rng rng(61);
    const Matrix samples = normal_samples(10, 2, rng);
    const SsgeModel model = SsgeModel::fit(samples, 10);
    REQUIRE(model.rank() == 10);
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 10; ++k)
                acc += model.eigenvectors()(r, k) * model.eigenvalues()[k] *
                       model.eigenvectors()(c, k);
            CHECK(acc == doctest::Approx(model.gram()(r, c)).epsilon(1e-8));
        }
}

TEST_CASE("score of a standard normal approximates -x") {
    Rng rng(67);
    const Matrix samples = normal_samples(500, 1, rng);
    const SsgeModel model = SsgeModel::fit_auto(samples);

    Matrix grid(41, 1);
    for (std::size_t i = 0; i < 41; ++i) grid(i, 0) = -2.0 + 0.1 * static_cast<double>(i);
    const Matrix scores = model.score(grid);

    double se = 0.0;
    for (std::size_t i = 0; i < 41; ++i) {
        const double err = scores(i, 0) - (-grid(i, 0));
        se += err * err;
    }
    CHECK(std::sqrt(se / 41.0) < 0.3);
}

TEST_CASE("score vanishes at the mean of a shifted normal") {
    Rng rng(71);
    const Matrix samples = normal_samples(500, 1, rng, 3.0);
    const SsgeModel model = SsgeModel::fit_auto(samples);
    const Matrix at_mean = model.score(Matrix{{3.0}});
    CHECK(std::abs(at_mean(0, 0)) < 0.3);
}

TEST_CASE("rank-one duplicate fit stays finite") {
    const Matrix samples{{1.0}, {1.0}, {1.0}};
    const SsgeModel model = SsgeModel::fit(samples, 1);
    const Matrix scores = model.score(Matrix{{0.0}, {1.0}, {2.0}});
    CHECK(scores.all_finite());
}

TEST_CASE("translation equivariance") {
    Rng rng(73);
    const Matrix samples = normal_samples(20, 2, rng);
    Matrix query(5, 2);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 2; ++c) query(r, c) = rng.normal();

    const double c = 10.0;
    Matrix shifted_samples = samples;
    Matrix shifted_query = query;
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t col = 0; col < 2; ++col) shifted_samples(r, col) += c;
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t col = 0; col < 2; ++col) shifted_query(r, col) += c;

    const Matrix base = SsgeModel::fit_auto(samples).score(query);
    const Matrix moved = SsgeModel::fit_auto(shifted_samples).score(shifted_query);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t col = 0; col < 2; ++col)
            CHECK(std::abs(base(r, col) - moved(r, col)) < 1e-8);
}

TEST_CASE("fit and score are bit-deterministic") {
    Rng rng(79);
    const Matrix samples = normal_samples(30, 3, rng);
    Matrix query(4, 3);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) query(r, c) = rng.normal();

    const SsgeModel a = SsgeModel::fit(samples, 15);
    const SsgeModel b = SsgeModel::fit(samples, 15);
    CHECK(a.rank() == b.rank());
    CHECK(a.bandwidth() == b.bandwidth());
    CHECK(a.score(query) == b.score(query));
    CHECK(a.score(query) == a.score(query));
}

TEST_CASE("query dimension mismatch raises") {
    Rng rng(83);
    const Matrix samples = normal_samples(6, 2, rng);
    const SsgeModel model = SsgeModel::fit(samples, 4);
    CHECK_THROWS_AS(model.score(Matrix(2, 3)), ShapeError);
}
