#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ppls/brent.hpp"
#include "ppls/csv.hpp"
#include "ppls/normal.hpp"
#include "ppls/rng.hpp"

using namespace ppls;

namespace {

// Independent quantile oracle: bisection on the CDF.
double quantile_by_bisection(double p) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("normal quantile matches the bisection oracle") {
    for (double p : {0.001, 0.025, 0.25, 0.5, 0.75, 0.95, 0.975, 0.999}) {
        CHECK(std::abs(normal_quantile(p) - quantile_by_bisection(p)) < 1e-10);
    }
    CHECK(normal_quantile(0.75) == doctest::Approx(0.674490).epsilon(1e-6));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK_THROWS_AS(normal_quantile(0.0), InputError);
    CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

TEST_CASE("brent minimizer on shifted quadratics and quartics") {
    // x-resolution of derivative-free minimization is sqrt(eps)-limited
    auto quad = [](double x) { return (x - 1.7) * (x - 1.7) + 3.0; };
    BrentResult res = brent_minimize(quad, -10.0, 10.0, 1e-12);
    CHECK(res.x == doctest::Approx(1.7).epsilon(1e-7));

    auto quart = [](double x) { return std::pow(x - 0.3, 4) + 0.1 * x; };
    res = brent_minimize(quart, -5.0, 5.0, 1e-10);
    // stationary point: 4 (x - 0.3)^3 = -0.1
    double expected = 0.3 - std::cbrt(0.1 / 4.0);
    CHECK(res.x == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("rng streams are deterministic and forked streams differ") {
    RngStream a(9), b(9);
    for (int i = 0; i < 10; ++i) CHECK(a() == b());

    RngStream base(9);
    RngStream f1 = base.fork(1), f2 = base.fork(2);
    int same = 0;
    for (int i = 0; i < 16; ++i)
        if (f1() == f2()) ++same;
    CHECK(same == 0);

    // fork is stable regardless of how much the parent has been consumed
    RngStream c(9);
    RngStream f1_again = c.fork(1);
    RngStream f1_ref = RngStream(9).fork(1);
    CHECK(f1_again() == f1_ref());
}

TEST_CASE("csv round trip and ragged row error") {
    Matrix m(3, 2);
    m << 1.0, 2.5, -3.25, 1e-17, 4.0, 123456789.123456789;
    const std::string path = "test_csv_roundtrip.csv";
    write_csv_matrix(path, m, "x");
    Matrix r = read_csv_matrix(path);
    CHECK((r - m).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());

    const std::string bad = "test_csv_bad.csv";
    {
        std::ofstream out(bad);
        out << "x1,x2\n1.0,2.0\n3.0\n";
    }
    CHECK_THROWS_WITH_AS(read_csv_matrix(bad), doctest::Contains("line 3"), InputError);
    std::remove(bad.c_str());
}

TEST_CASE("fmt17 preserves doubles bit-exactly") {
    RngStream rng(77);
    for (int i = 0; i < 200; ++i) {
        double v = (draw_uniform(rng) - 0.5) * std::pow(10.0, static_cast<int>(draw_uniform(rng) * 40) - 20);
        CHECK(std::stod(fmt17(v)) == v);
    }
}
