#pragma once

#include <cmath>
#include <utility>

namespace ppls {

struct BrentResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
};

// Brent's local minimizer (golden section + successive parabolic
// interpolation) on [a, b]. rel_tol is the relative x-tolerance.
template <class F>
BrentResult brent_minimize(F&& f, double a, double b, double rel_tol, int max_iter = 200) {
    const double golden = 0.5 * (3.0 - std::sqrt(5.0));
    const double abs_tol = 1e-300;

    double x = a + golden * (b - a);
    double w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;

    int it = 0;
    for (; it < max_iter; ++it) {
        double m = 0.5 * (a + b);
        double tol = rel_tol * std::abs(x) + abs_tol;
        double tol2 = 2.0 * tol;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;

        bool use_golden = true;
        if (std::abs(e) > tol) {
            // Fit a parabola through (v,fv), (w,fw), (x,fx).
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            double e_old = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol : -tol;
                use_golden = false;
            }
        }
        if (use_golden) {
            e = (x < m) ? b - x : a - x;
            d = golden * e;
        }

        double u = (std::abs(d) >= tol) ? x + d : x + ((d > 0.0) ? tol : -tol);
        double fu = f(u);
        if (fu <= fx) {
            if (u < x)
                b = x;
            else
                a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x)
                a = u;
            else
                b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return BrentResult{x, fx, it};
}

}  // namespace ppls
