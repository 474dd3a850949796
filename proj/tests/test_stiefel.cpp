#include <doctest.h>

#include <cmath>

#include "ppls/stiefel.hpp"

using namespace ppls;
using stiefel::qr_retract;
using stiefel::random_stiefel;
using stiefel::tangent_project;

namespace {

// Brute-force projection: build an orthonormal basis of the tangent space at
// W by Gram-Schmidt over projected coordinate matrices, then expand G in it.
Matrix brute_force_project(const Matrix& w, const Matrix& g) {
    const int p = static_cast<int>(w.rows());
    const int r = static_cast<int>(w.cols());
    std::vector<Matrix> basis;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < r; ++j) {
            Matrix e = Matrix::Zero(p, r);
            e(i, j) = 1.0;
            Matrix v = tangent_project(w, e);
            for (const Matrix& b : basis) v -= (b.array() * v.array()).sum() * b;
            double n = v.norm();
            if (n > 1e-8) basis.push_back(v / n);
        }
    }
    CHECK(static_cast<int>(basis.size()) == p * r - r * (r + 1) / 2);
    Matrix out = Matrix::Zero(p, r);
    for (const Matrix& b : basis) out += (b.array() * g.array()).sum() * b;
    return out;
}

}  // namespace

TEST_CASE("tangent_project absorbs symmetric components") {
    RngStream rng(7);
    Matrix w = random_stiefel(6, 2, rng);
    Matrix s = normal_matrix(2, 2, rng);
    s = (0.5 * (s + s.transpose())).eval();
    Matrix g = w * s;
    CHECK(tangent_project(w, g).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tangent_project leaves already-tangent directions unchanged") {
    const int p = 5, r = 2;
    Matrix w = Matrix::Zero(p, r);
    w(0, 0) = 1.0;
    w(1, 1) = 1.0;
    Matrix g = Matrix::Zero(p, r);
    g(r, 0) = 1.0;  // e_{r+1} e_1'
    CHECK((tangent_project(w, g) - g).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tangent_project matches brute-force basis projection") {
    RngStream rng(11);
    Matrix w = random_stiefel(6, 2, rng);
    Matrix g = normal_matrix(6, 2, rng);
    Matrix expected = brute_force_project(w, g);
    CHECK((tangent_project(w, g) - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("tangent_project output satisfies skew condition and idempotence") {
    RngStream rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        RngStream local = rng.fork(trial);
        Matrix w = random_stiefel(8, 3, local);
        Matrix g = normal_matrix(8, 3, local);
        Matrix xi = tangent_project(w, g);
        CHECK(stiefel::tangent_error(w, xi) < 1e-10);
        CHECK((tangent_project(w, xi) - xi).cwiseAbs().maxCoeff() < 1e-12);
        // Orthogonal (trace inner product) to the normal space {W S : S sym}.
        Matrix s = normal_matrix(3, 3, local);
        s = (0.5 * (s + s.transpose())).eval();
        CHECK(std::abs((xi.array() * (w * s).array()).sum()) < 1e-12 * (1 + s.norm() * xi.norm()));
    }
}

TEST_CASE("tangent_project rejects shape mismatch") {
    RngStream rng(5);
    Matrix w = random_stiefel(6, 2, rng);
    CHECK_THROWS_AS(tangent_project(w, Matrix::Zero(6, 3)), DimensionError);
}

TEST_CASE("qr_retract at zero step is the identity") {
    RngStream rng(13);
    Matrix w = random_stiefel(7, 3, rng);
    Matrix xi = tangent_project(w, normal_matrix(7, 3, rng));
    CHECK((qr_retract(w, xi, 0.0) - w).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("qr_retract hand-checked 4x1 case") {
    Matrix w = Matrix::Zero(4, 1);
    w(0, 0) = 1.0;
    Matrix xi = Matrix::Zero(4, 1);
    xi(1, 0) = 1.0;
    Matrix out = qr_retract(w, xi, 1.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(out(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-14));
    CHECK(out(1, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-14));
    CHECK(std::abs(out(2, 0)) < 1e-15);
    CHECK(std::abs(out(3, 0)) < 1e-15);
}

TEST_CASE("qr_retract preserves orthonormality for arbitrary steps") {
    RngStream rng(17);
    for (double alpha : {0.0, 1e-3, 0.5, 1.0, 10.0}) {
        RngStream local = rng.fork(static_cast<uint64_t>(alpha * 1000));
        Matrix w = random_stiefel(9, 4, local);
        Matrix xi = tangent_project(w, normal_matrix(9, 4, local));
        CHECK(stiefel::is_orthonormal(qr_retract(w, xi, alpha)));
    }
}

TEST_CASE("retraction first-order agreement: ||(R(a)-W)/a - Xi|| shrinks with a") {
    RngStream rng(19);
    Matrix w = random_stiefel(8, 3, rng);
    Matrix xi = tangent_project(w, normal_matrix(8, 3, rng));
    double prev = 1e100;
    for (double alpha : {1e-3, 1e-4, 1e-5}) {
        double err = ((qr_retract(w, xi, alpha) - w) / alpha - xi).norm();
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-4);
}

TEST_CASE("qr_retract reports rank deficiency with the step size") {
    Matrix w = Matrix::Zero(4, 1);
    w(0, 0) = 1.0;
    Matrix xi = Matrix::Zero(4, 1);  // not a true tangent; engineered degeneracy
    xi(0, 0) = -1.0;
    CHECK_THROWS_AS(qr_retract(w, xi, 1.0), NumericalError);
}

TEST_CASE("random_stiefel determinism, feasibility, non-degeneracy") {
    RngStream a(42), b(42), c(43);
    Matrix m1 = random_stiefel(3, 2, a);
    Matrix m2 = random_stiefel(3, 2, b);
    CHECK((m1 - m2).cwiseAbs().maxCoeff() == 0.0);

    RngStream big(1);
    CHECK(stiefel::is_orthonormal(random_stiefel(50, 5, big)));

    RngStream d(101), e(202);
    CHECK((random_stiefel(10, 3, d) - random_stiefel(10, 3, e)).norm() > 0.0);

    RngStream f(1);
    CHECK_THROWS_AS(random_stiefel(3, 3, f), DimensionError);
}
