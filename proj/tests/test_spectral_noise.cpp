#include <doctest.h>

#include "ppls/model.hpp"
#include "ppls/spectral_noise.hpp"
#include "ppls/stiefel.hpp"

using namespace ppls;

namespace {

// Population x-view covariance with given spike variances.
Matrix population_cov(int p, const Vector& theta_t2, double sigma_e2, RngStream& rng) {
    Matrix w = stiefel::random_stiefel(p, static_cast<int>(theta_t2.size()), rng);
    return w * theta_t2.asDiagonal() * w.transpose() + sigma_e2 * Matrix::Identity(p, p);
}

}  // namespace

TEST_CASE("flat spectrum recovers sigma^2 for any r") {
    Matrix S = 0.37 * Matrix::Identity(8, 8);
    for (int r : {0, 1, 3, 7}) {
        CHECK(noise_subspace_estimate(S, r).value == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("hand spectrum diag(5,3,1,1,1) with r=2 gives 1") {
    Vector d(5);
    d << 5.0, 3.0, 1.0, 1.0, 1.0;
    Matrix S = d.asDiagonal();
    CHECK(noise_subspace_estimate(S, 2).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("full spectrum bias on the population spiked covariance") {
    // p=50, r=5, sigma_e2=0.5, theta = (2,1.8,1.6,1.4,1.2): bias 8/50 = 0.16.
    RngStream rng(61);
    Vector theta = Vector::LinSpaced(5, 2.0, 1.2);
    Matrix S = population_cov(50, theta, 0.5, rng);
    NoiseEstimate full = full_spectrum_estimate(S);
    CHECK(full.value == doctest::Approx(0.66).epsilon(1e-10));
    CHECK(full.value - 0.5 == doctest::Approx(0.160).epsilon(1e-9));
}

TEST_CASE("full spectrum equals subspace estimate at r=0 exactly") {
    RngStream rng(67);
    Matrix X = normal_matrix(40, 6, rng);
    Matrix S = X.transpose() * X / 40.0;
    CHECK(full_spectrum_estimate(S).value == noise_subspace_estimate(S, 0).value);
}

TEST_CASE("conservative estimate modes") {
    RngStream rng(71);
    Vector theta = Vector::LinSpaced(3, 2.0, 1.2);
    Matrix S = population_cov(20, theta, 0.1, rng);

    SUBCASE("r_max = true r matches the subspace estimate") {
        CHECK(conservative_estimate(S, 3).value ==
              doctest::Approx(noise_subspace_estimate(S, 3).value).epsilon(1e-15));
        CHECK(conservative_estimate(S, 3).mode == NoiseEstimate::Mode::Conservative);
    }

    SUBCASE("over-specified r_max stays exact on the population covariance") {
        for (int rm : {4, 5, 8}) {
            CHECK(conservative_estimate(S, rm).value == doctest::Approx(0.1).epsilon(1e-9));
        }
    }

    SUBCASE("under-specified r adds the average of the skipped spikes") {
        // population value: sigma^2 + sum_{rt < i <= r} theta_i^2 / (p - rt)
        int rt = 1;
        double expected = 0.1 + (theta(1) + theta(2)) / (20 - rt);
        CHECK(noise_subspace_estimate(S, rt).value == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("monotone contamination in the under-specified range") {
    RngStream rng(73);
    Vector theta = Vector::LinSpaced(4, 2.0, 1.2);
    Matrix S = population_cov(30, theta, 0.25, rng);
    double prev = 1e100;
    for (int rt = 0; rt <= 4; ++rt) {
        double v = noise_subspace_estimate(S, rt).value;
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    for (int rt = 4; rt < 10; ++rt) {
        CHECK(noise_subspace_estimate(S, rt).value == doctest::Approx(0.25).epsilon(1e-9));
    }
}

TEST_CASE("error contracts") {
    Matrix S = Matrix::Identity(4, 4);
    CHECK_THROWS_AS(noise_subspace_estimate(S, 4), DimensionError);
    CHECK_THROWS_AS(noise_subspace_estimate(S, -1), DimensionError);
    Matrix bad = Matrix::Identity(4, 4);
    bad(0, 0) = -1.0;  // eigenvalue far below the PSD tolerance
    CHECK_THROWS_AS(noise_subspace_estimate(bad, 1), InputError);
    Matrix asym = Matrix::Identity(4, 4);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(noise_subspace_estimate(asym, 1), InputError);
}

TEST_CASE("near-zero negative eigenvalues are clamped") {
    Matrix S = Matrix::Identity(3, 3);
    S(2, 2) = -5e-9;  // within the PSD slack
    double v = noise_subspace_estimate(S, 1).value;
    CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}
