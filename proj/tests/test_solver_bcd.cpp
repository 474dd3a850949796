#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ppls/bench.hpp"
#include "ppls/solver_bcd.hpp"
#include "ppls/stiefel.hpp"

using namespace ppls;

namespace {

ComponentChannel random_channel(RngStream& rng) {
    ComponentChannel ch;
    ch.sigma_e2 = 0.05 + 0.6 * draw_uniform(rng);
    ch.sigma_f2 = 0.05 + 0.6 * draw_uniform(rng);
    // Q values on the scales the model actually produces
    ch.Q_x = 0.5 + 20.0 * draw_uniform(rng);
    ch.Q_y = 0.5 + 20.0 * draw_uniform(rng);
    ch.Q_xy = 10.0 * draw_uniform(rng);
    return ch;
}

int sign_changes_count(const CubicCoeffs& c) {
    const double coeffs[4] = {c.c3, c.c2, c.c1, c.c0};
    int changes = 0;
    double prev = 0.0;
    for (double v : coeffs) {
        if (v == 0.0) continue;
        if (prev != 0.0 && ((prev > 0.0) != (v > 0.0))) ++changes;
        prev = v;
    }
    return changes;
}

SampleMoments population_moments(const PplsParams& params) {
    Matrix sigma = assemble_joint_cov(params);
    const int p = params.p(), q = params.q();
    SampleMoments m;
    m.S_xx = sigma.topLeftCorner(p, p);
    m.S_yy = sigma.bottomRightCorner(q, q);
    m.S_xy = sigma.topRightCorner(p, q);
    m.N = 2000;
    m.mean_x = Vector::Zero(p);
    m.mean_y = Vector::Zero(q);
    return m;
}

}  // namespace

TEST_CASE("theta_update equals a dense log-grid argmin of ell") {
    RngStream rng(307);
    int checked = 0, clipped = 0;
    for (int trial = 0; trial < 100; ++trial) {
        RngStream local = rng.fork(trial);
        ComponentChannel ch = random_channel(local);
        double b = 0.3 + 1.5 * draw_uniform(local);
        double g = 0.01 + 0.4 * draw_uniform(local);

        double theta = theta_update(ch.Q_x, ch.Q_y, ch.Q_xy, b, g, ch.sigma_e2, ch.sigma_f2,
                                    1e-8);

        // 1e5-point grid on log10 scale over [1e-8, 1e3]
        const int grid_n = 100000;
        double best = 1e300;
        int best_k = 0;
        for (int k = 0; k < grid_n; ++k) {
            double s = std::pow(10.0, -8.0 + 11.0 * k / (grid_n - 1.0));
            double v = ell_value(ch, s, b, g);
            if (v < best) {
                best = v;
                best_k = k;
            }
        }
        double grid_arg = std::pow(10.0, -8.0 + 11.0 * best_k / (grid_n - 1.0));
        const double cell = 11.0 / (grid_n - 1.0);  // log10 spacing
        if (best_k == 0) {
            // clip branch: the minimizer sits at the floor
            CHECK(theta == 1e-8);
            ++clipped;
        } else {
            CHECK(std::abs(std::log10(theta) - std::log10(grid_arg)) <= cell);
        }
        ++checked;
    }
    CHECK(checked == 100);
    INFO("clipped cases: ", clipped);
}

TEST_CASE("theta_update clip branch returns the floor") {
    // Q values so small the stationary point is negative
    double theta = theta_update(0.01, 0.01, 0.0, 1.0, 0.1, 0.2, 0.2, 1e-8);
    CHECK(theta == 1e-8);
}

TEST_CASE("theta_update hand-checked symmetric case") {
    // se2 = sf2 = 1, sh2 = 0, b = 1, Qx = Qy = 2, Qxy = 2:
    // d = 2, n = 2 + 2 + 2 = 6, theta* = [(6-2)*1 - 0]/4 = 1
    double theta = theta_update(2.0, 2.0, 2.0, 1.0, 0.0, 1.0, 1.0, 1e-8);
    CHECK(theta == doctest::Approx(1.0).epsilon(1e-12));
    // cross-check against the grid oracle
    ComponentChannel ch{2.0, 2.0, 2.0, 1.0, 1.0};
    double at = ell_value(ch, 1.0, 1.0, 0.0);
    for (double s : {0.5, 0.9, 1.1, 2.0}) CHECK(ell_value(ch, s, 1.0, 0.0) > at);
}

TEST_CASE("b cubic coefficients") {
    SUBCASE("Q_xy = 0 kills c2 and c0") {
        CubicCoeffs c = b_cubic_coeffs(2.0, 3.0, 0.0, 1.5, 0.1, 0.3, 0.4);
        CHECK(c.c2 == 0.0);
        CHECK(c.c0 == 0.0);
    }

    SUBCASE("random draws with Q_xy > 0 and R > 0 have signs (+,+,+,-)") {
        RngStream rng(311);
        int seen = 0;
        for (int trial = 0; trial < 200; ++trial) {
            RngStream local = rng.fork(trial);
            ComponentChannel ch = random_channel(local);
            if (ch.Q_xy <= 0.0) continue;
            double s = 0.2 + 2.0 * draw_uniform(local);
            double g = 0.01 + 0.3 * draw_uniform(local);
            CubicCoeffs c = b_cubic_coeffs(ch.Q_x, ch.Q_y, ch.Q_xy, s, g, ch.sigma_e2,
                                           ch.sigma_f2);
            if (c.c1 <= 0.0) continue;  // R > 0 filter
            CHECK(c.c3 > 0.0);
            CHECK(c.c2 > 0.0);
            CHECK(c.c0 < 0.0);
            ++seen;
        }
        CHECK(seen > 50);
    }

    SUBCASE("cubic root is a stationary point of ell in b") {
        RngStream rng(313);
        for (int trial = 0; trial < 100; ++trial) {
            RngStream local = rng.fork(trial);
            ComponentChannel ch = random_channel(local);
            if (ch.Q_xy <= 1e-6) continue;
            double s = 0.2 + 2.0 * draw_uniform(local);
            double g = 0.01 + 0.3 * draw_uniform(local);
            CubicCoeffs c = b_cubic_coeffs(ch.Q_x, ch.Q_y, ch.Q_xy, s, g, ch.sigma_e2,
                                           ch.sigma_f2);
            double root = cubic_positive_root(c);
            CHECK(root > 0.0);
            CHECK(std::abs(ell_d_b(ch, s, root, g)) <= 1e-9);
        }
    }
}

TEST_CASE("cubic_positive_root") {
    SUBCASE("b^3 = 8") {
        CHECK(cubic_positive_root({1.0, 0.0, 0.0, -8.0}) == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("validated by residual and uniqueness scan") {
        CubicCoeffs c{2.0, 3.0, 4.0, -9.0};
        double root = cubic_positive_root(c);
        auto poly = [&](double x) { return ((c.c3 * x + c.c2) * x + c.c1) * x + c.c0; };
        CHECK(std::abs(poly(root)) <= 1e-10);
        // dense scan over (0, 10*root]: exactly one sign change
        int changes = 0;
        double prev = poly(1e-9);
        for (int k = 1; k <= 20000; ++k) {
            double x = k * (10.0 * root) / 20000.0;
            double v = poly(x);
            if ((prev < 0.0) != (v < 0.0)) ++changes;
            prev = v;
        }
        CHECK(changes == 1);
    }

    SUBCASE("agrees with the companion-matrix eigenvalue oracle") {
        RngStream rng(317);
        for (int trial = 0; trial < 50; ++trial) {
            RngStream local = rng.fork(trial);
            ComponentChannel ch = random_channel(local);
            if (ch.Q_xy <= 1e-6) continue;
            double s = 0.2 + 2.0 * draw_uniform(local);
            double g = 0.01 + 0.3 * draw_uniform(local);
            CubicCoeffs c =
                b_cubic_coeffs(ch.Q_x, ch.Q_y, ch.Q_xy, s, g, ch.sigma_e2, ch.sigma_f2);
            if (sign_changes_count(c) != 1) continue;
            double root = cubic_positive_root(c);

            Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
            companion(1, 0) = 1.0;
            companion(2, 1) = 1.0;
            companion(0, 2) = -c.c0 / c.c3;
            companion(1, 2) = -c.c1 / c.c3;
            companion(2, 2) = -c.c2 / c.c3;
            Eigen::EigenSolver<Eigen::Matrix3d> eig(companion);
            double best = -1.0;
            for (int i = 0; i < 3; ++i) {
                auto v = eig.eigenvalues()(i);
                if (std::abs(v.imag()) < 1e-9 && v.real() > 0.0) best = v.real();
            }
            REQUIRE(best > 0.0);
            CHECK(root == doctest::Approx(best).epsilon(1e-10));
        }
    }

    SUBCASE("precondition violations are rejected") {
        CHECK_THROWS_AS(cubic_positive_root({1.0, 1.0, 1.0, 1.0}), InputError);
    }
}

TEST_CASE("sigma_h_update") {
    RngStream rng(331);
    PplsParams truth = make_truth(10, 8, 3, 0.1, 0.1, 0.05, rng);
    SampleMoments m = population_moments(truth);
    ProjectedStats stats =
        projected_stats(truth.W, truth.C, m, truth.sigma_e2, truth.sigma_f2);

    SUBCASE("population self-consistency recovers sigma_h2") {
        double g = sigma_h_update(stats, truth.theta_t2, truth.b, truth.sigma_e2,
                                  truth.sigma_f2, 0.2);
        CHECK(g == doctest::Approx(truth.sigma_h2).epsilon(1e-6));
    }

    SUBCASE("grid cross-check and stationarity") {
        double g = sigma_h_update(stats, truth.theta_t2, truth.b, truth.sigma_e2,
                                  truth.sigma_f2, 0.2);
        auto total = [&](double gg) {
            double v = 0.0;
            for (int i = 0; i < 3; ++i)
                v += ell_value(channel_at(stats, truth.sigma_e2, truth.sigma_f2, i),
                               truth.theta_t2(i), truth.b(i), gg);
            return v;
        };
        // grid check
        double best = 1e300, best_g = 0.0;
        for (int k = 0; k <= 20000; ++k) {
            double gg = 1e-6 + k * (0.5 - 1e-6) / 20000.0;
            if (total(gg) < best) {
                best = total(gg);
                best_g = gg;
            }
        }
        CHECK(std::abs(g - best_g) < 1e-3);
        // finite-difference stationarity
        const double h = 1e-6;
        CHECK(std::abs((total(g + h) - total(g - h)) / (2.0 * h)) < 1e-6);
    }
}

TEST_CASE("bcd fixed point at the truth on population moments") {
    RngStream rng(337);
    PplsParams truth = make_truth(9, 7, 2, 0.1, 0.1, 0.05, rng);
    SampleMoments m = population_moments(truth);
    FitOptions opts;
    opts.tol = 1e-5;
    FitReport report = fit_bcd_slm(truth, m, truth.sigma_e2, truth.sigma_f2, opts);
    CHECK(report.converged);
    CHECK((report.params.theta_t2 - truth.theta_t2).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((report.params.b - truth.b).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(report.params.sigma_h2 - truth.sigma_h2) < 1e-6);
}

TEST_CASE("bcd monotone descent and componentwise exactness on sampled data") {
    RngStream rng(347);
    PplsParams truth = make_truth(14, 11, 3, 0.1, 0.1, 0.05, rng);
    auto [X, Y] = sample_dataset(truth, 1500, NoiseLaw{}, rng);
    SampleMoments m = sample_moments(X, Y);
    const double se2 = noise_subspace_estimate(m.S_xx, 3).value;
    const double sf2 = noise_subspace_estimate(m.S_yy, 3).value;

    PplsParams init;
    init.W = stiefel::random_stiefel(14, 3, rng);
    init.C = stiefel::random_stiefel(11, 3, rng);
    init.theta_t2 = Vector::Ones(3);
    init.b = Vector::Ones(3);
    init.sigma_h2 = 1e-2;

    FitReport report = fit_bcd_slm(init, m, se2, sf2, FitOptions{});
    CHECK(report.converged);
    for (std::size_t i = 1; i < report.objective_trace.size(); ++i)
        CHECK(report.objective_trace[i] <= report.objective_trace[i - 1] + 1e-10);
    CHECK(stiefel::is_orthonormal(report.params.W));
    CHECK((report.params.theta_t2.array() >= 1e-8).all());
    CHECK((report.params.b.array() > 0.0).all());

    // componentwise stationarity of the scalar blocks at the fit
    ProjectedStats stats = projected_stats(report.params.W, report.params.C, m, se2, sf2);
    for (int i = 0; i < 3; ++i) {
        ComponentChannel ch = channel_at(stats, se2, sf2, i);
        if (report.params.theta_t2(i) > 1e-8) {
            CHECK(std::abs(ell_d_theta2(ch, report.params.theta_t2(i), report.params.b(i),
                                        report.params.sigma_h2)) < 1e-4);
        }
    }
}
