#include "ppls/solver_bcd.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "ppls/brent.hpp"
#include "ppls/stiefel.hpp"

namespace ppls {

double theta_update(double Q_x, double Q_y, double Q_xy, double b, double sigma_h2,
                    double sigma_e2, double sigma_f2, double eps) {
    if (sigma_e2 <= 0.0 || sigma_f2 <= 0.0 || sigma_h2 < 0.0)
        throw InputError("theta_update: invalid variances");
    const double fg = sigma_f2 + sigma_h2;
    const double P = std::sqrt(sigma_e2 * sigma_f2) * Q_xy;
    const double d = fg + b * b * sigma_e2;
    const double n = fg * Q_x + (sigma_h2 + b * b * sigma_e2) * Q_y + b * P;
    const double theta = sigma_e2 * ((n - d) * fg - d * sigma_h2 * Q_y) / (d * d);
    return std::max(theta, eps);
}

CubicCoeffs b_cubic_coeffs(double Q_x, double Q_y, double Q_xy, double theta2, double sigma_h2,
                           double sigma_e2, double sigma_f2) {
    if (sigma_e2 <= 0.0 || sigma_f2 <= 0.0 || sigma_h2 < 0.0)
        throw InputError("b_cubic_coeffs: invalid variances");
    const double a = sigma_e2, fg = sigma_f2 + sigma_h2, s = theta2;
    const double P = std::sqrt(sigma_e2 * sigma_f2) * Q_xy;
    const double R = fg * ((s + a) * (1.0 - Q_y) + s * Q_x) + sigma_h2 * (s + a) * Q_y;
    CubicCoeffs c;
    c.c3 = 2.0 * a * a * s;
    c.c2 = a * s * P;
    c.c1 = 2.0 * a * R;
    c.c0 = -P * fg * (s + a);
    return c;
}

namespace {

int sign_changes(const CubicCoeffs& c) {
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

}  // namespace

double cubic_positive_root(const CubicCoeffs& c) {
    if (sign_changes(c) != 1)
        throw InputError("cubic_positive_root: coefficient sequence needs exactly one sign change");

    auto poly = [&](double x) { return ((c.c3 * x + c.c2) * x + c.c1) * x + c.c0; };
    auto dpoly = [&](double x) { return (3.0 * c.c3 * x + 2.0 * c.c2) * x + c.c1; };
    auto scale_at = [&](double x) {
        const double ax = std::abs(x);
        return ((std::abs(c.c3) * ax + std::abs(c.c2)) * ax + std::abs(c.c1)) * ax +
               std::abs(c.c0);
    };

    // p(0) <= 0 < p(inf) under the sign precondition; expand until bracketed.
    double lo = 0.0, hi = 1.0;
    int expansions = 0;
    while (poly(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++expansions > 200)
            throw NumericalError("cubic_positive_root: no sign change after 200 expansions");
    }

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
        double f = poly(x);
        if (std::abs(f) <= 1e-15 * scale_at(x)) break;
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        double d = dpoly(x);
        double x_newton = (d != 0.0) ? x - f / d : x;
        x = (x_newton > lo && x_newton < hi) ? x_newton : 0.5 * (lo + hi);
        if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    }
    // final polish: Newton squares the residual down to roundoff level
    for (int it = 0; it < 2; ++it) {
        double d = dpoly(x);
        if (d == 0.0) break;
        double x_next = x - poly(x) / d;
        if (x_next > 0.0 && std::abs(poly(x_next)) <= std::abs(poly(x))) x = x_next;
    }
    return x;
}

double sigma_h_update(const ProjectedStats& stats, const Vector& theta_t2, const Vector& b,
                      double sigma_e2, double sigma_f2, double sigma_h2_init, double lower) {
    const int r = static_cast<int>(theta_t2.size());
    auto objective = [&](double g) {
        double total = 0.0;
        for (int i = 0; i < r; ++i) {
            ComponentChannel ch = channel_at(stats, sigma_e2, sigma_f2, i);
            total += ell_value(ch, theta_t2(i), b(i), g);
        }
        return total;
    };

    // Expand the upper end geometrically until the objective increases there.
    double upper = std::max(4.0 * sigma_h2_init, 1e-4);
    double f_upper = objective(upper);
    double best = std::min(objective(lower), std::min(objective(sigma_h2_init), f_upper));
    int expansions = 0;
    while (f_upper <= best && expansions < 80) {
        best = std::min(best, f_upper);
        upper *= 4.0;
        f_upper = objective(upper);
        ++expansions;
    }

    BrentResult res = brent_minimize(objective, lower, upper, 1e-12);

    // Newton polish on the closed-form derivative: Brent's x-resolution is
    // limited by function-value roundoff, the analytic slope is not.
    auto slope = [&](double g) {
        double d = 0.0;
        for (int i = 0; i < r; ++i) {
            ComponentChannel ch = channel_at(stats, sigma_e2, sigma_f2, i);
            d += ell_d_sigma_h2(ch, theta_t2(i), b(i), g);
        }
        return d;
    };
    auto curvature = [&](double g) {
        double d = 0.0;
        for (int i = 0; i < r; ++i) {
            ComponentChannel ch = channel_at(stats, sigma_e2, sigma_f2, i);
            d += ell_d2_sigma_h2(ch, theta_t2(i), b(i), g);
        }
        return d;
    };
    double g = std::max(res.x, lower);
    for (int it = 0; it < 5; ++it) {
        double d1 = slope(g);
        double d2 = curvature(g);
        if (d2 <= 0.0) break;
        double g_next = g - d1 / d2;
        if (!(g_next >= lower && g_next <= upper)) break;
        if (std::abs(slope(g_next)) >= std::abs(d1)) break;
        g = g_next;
    }
    if (objective(g) > res.fx) g = std::max(res.x, lower);

    // Never accept an increase over the incoming value (keeps every block
    // update non-increasing).
    if (sigma_h2_init >= lower && objective(sigma_h2_init) < objective(g)) return sigma_h2_init;
    return g;
}

FitReport fit_bcd_slm(const PplsParams& init, const SampleMoments& moments, double sigma_e2_hat,
                      double sigma_f2_hat, const FitOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const int r = init.r();

    PplsParams cur = init;
    cur.sigma_e2 = sigma_e2_hat;
    cur.sigma_f2 = sigma_f2_hat;
    validate_params(cur);
    if (cur.sigma_h2 <= 0.0) throw InputError("fit_bcd_slm: sigma_h2 must be strictly positive");

    ProjectedStats stats =
        projected_stats(cur.W, cur.C, moments, cur.sigma_e2, cur.sigma_f2);
    double nll = scalar_nll_parts(cur, stats).value;

    FitReport report;
    report.objective_trace.push_back(nll);

    LoadingTangent grad_prev, dir_prev;
    bool have_cg_memory = false;
    int iters_since_restart = 0;
    double last_decrease_loading = -1.0;

    // Per-block slack for the monotonicity assertion.
    auto check_decrease = [](double before, double after, const char* what) {
        if (after > before + 1e-10 * (1.0 + std::abs(before)))
            throw NumericalError(std::string("fit_bcd_slm: ") + what +
                                 " increased the objective (" + fmt17(before) + " -> " +
                                 fmt17(after) + ")");
    };

    int k = 0;
    for (; k < opts.max_iters; ++k) {
        // (1) One Riemannian CG + Armijo step on the loading pair.
        ComponentCoeffs coeffs = component_coeffs(cur);
        auto [gw_e, gc_e] = euclid_grads_from_stats(cur, moments, coeffs);
        LoadingTangent grad{stiefel::tangent_project(cur.W, gw_e),
                            stiefel::tangent_project(cur.C, gc_e)};
        Vector g_scalar = scalar_block_grads(cur, stats);
        const double grad_norm = std::sqrt(grad.inner(grad) + g_scalar.squaredNorm());
        report.grad_norm_trace.push_back(grad_norm);
        if (grad_norm < opts.tol) {
            report.converged = true;
            break;
        }

        LoadingTangent dir;
        if (!have_cg_memory || iters_since_restart >= opts.cg_restart_factor * r) {
            dir = LoadingTangent{-grad.W, -grad.C};
            iters_since_restart = 0;
        } else {
            dir = rcg_direction(grad, grad_prev, dir_prev, cur.W, cur.C);
        }
        double g0 = grad.inner(dir);

        const double nll_before_loading = nll;
        if (g0 < 0.0) {
            auto f_alpha = [&](double alpha) {
                try {
                    Matrix wa = stiefel::qr_retract(cur.W, dir.W, alpha);
                    Matrix ca = stiefel::qr_retract(cur.C, dir.C, alpha);
                    PplsParams cand = cur;
                    cand.W = wa;
                    cand.C = ca;
                    ProjectedStats st =
                        projected_stats(wa, ca, moments, cur.sigma_e2, cur.sigma_f2);
                    return scalar_nll_parts(cand, st).value;
                } catch (const NumericalError&) {
                    return std::numeric_limits<double>::infinity();
                }
            };
            ArmijoOptions line = opts.armijo;
            if (last_decrease_loading > 0.0) {
                double guess = 2.0 * last_decrease_loading / (-g0);
                if (guess > 1e-12) line.init_step = std::min(opts.armijo.init_step, guess);
            }
            std::optional<double> alpha = armijo_backtrack(f_alpha, nll, g0, line);
            if (alpha) {
                double nll_stepped = f_alpha(*alpha);
                cur.W = stiefel::qr_retract(cur.W, dir.W, *alpha);
                cur.C = stiefel::qr_retract(cur.C, dir.C, *alpha);
                last_decrease_loading = std::max(nll - nll_stepped, 0.0);
                grad_prev = grad;
                dir_prev = dir;
                have_cg_memory = true;
                ++iters_since_restart;
            } else {
                last_decrease_loading = -1.0;
                have_cg_memory = false;  // retry from steepest descent next sweep
            }
        }

        // (2) Refresh the projected channels at the new loadings.
        stats = projected_stats(cur.W, cur.C, moments, cur.sigma_e2, cur.sigma_f2);
        nll = scalar_nll_parts(cur, stats).value;
        check_decrease(nll_before_loading, nll, "loading step");

        // (3) Componentwise exact updates, theta2 before b.
        for (int i = 0; i < r; ++i) {
            if (stats.Q_xy(i) < 0.0) {
                // Gauge fix: flipping c_i negates Q_xy(i) and lowers ell_i.
                cur.C.col(i) = -cur.C.col(i);
                stats.Q_xy(i) = -stats.Q_xy(i);
                if (have_cg_memory) {
                    grad_prev.C.col(i) = -grad_prev.C.col(i);
                    dir_prev.C.col(i) = -dir_prev.C.col(i);
                }
            }
            ComponentChannel ch = channel_at(stats, cur.sigma_e2, cur.sigma_f2, i);
            const double ell_before =
                ell_value(ch, cur.theta_t2(i), cur.b(i), cur.sigma_h2);

            cur.theta_t2(i) = theta_update(stats.Q_x(i), stats.Q_y(i), stats.Q_xy(i), cur.b(i),
                                           cur.sigma_h2, cur.sigma_e2, cur.sigma_f2,
                                           opts.eps_floor);
            const double ell_mid = ell_value(ch, cur.theta_t2(i), cur.b(i), cur.sigma_h2);
            check_decrease(ell_before, ell_mid, "theta update");

            if (stats.Q_xy(i) > 0.0) {
                CubicCoeffs cc = b_cubic_coeffs(stats.Q_x(i), stats.Q_y(i), stats.Q_xy(i),
                                                cur.theta_t2(i), cur.sigma_h2, cur.sigma_e2,
                                                cur.sigma_f2);
                cur.b(i) = cubic_positive_root(cc);
                const double ell_after = ell_value(ch, cur.theta_t2(i), cur.b(i), cur.sigma_h2);
                check_decrease(ell_mid, ell_after, "b update");
            }
            // Q_xy(i) == 0: stationarity degenerates; keep the previous b.
        }

        // (4) One-dimensional sigma_h2 solve.
        {
            auto sum_ell = [&](double g) {
                double total = 0.0;
                for (int i = 0; i < r; ++i)
                    total +=
                        ell_value(channel_at(stats, cur.sigma_e2, cur.sigma_f2, i),
                                  cur.theta_t2(i), cur.b(i), g);
                return total;
            };
            const double before = sum_ell(cur.sigma_h2);
            cur.sigma_h2 = std::max(
                sigma_h_update(stats, cur.theta_t2, cur.b, cur.sigma_e2, cur.sigma_f2,
                               cur.sigma_h2),
                opts.eps_floor);
            check_decrease(before, sum_ell(cur.sigma_h2), "sigma_h2 update");
        }

        // (5) Restore the identifiability ordering.
        ComponentOrder order = component_order(cur);
        if (!order.is_identity()) {
            cur = apply_component_order(cur, order);
            Vector qx(r), qy(r), qxy(r);
            for (int i = 0; i < r; ++i) {
                qx(i) = stats.Q_x(order.perm[i]);
                qy(i) = stats.Q_y(order.perm[i]);
                qxy(i) = stats.Q_xy(order.perm[i]);
            }
            stats.Q_x = qx;
            stats.Q_y = qy;
            stats.Q_xy = qxy;
            if (have_cg_memory) {
                grad_prev.W = apply_order_to_columns(grad_prev.W, order);
                grad_prev.C = apply_order_to_columns(grad_prev.C, order);
                dir_prev.W = apply_order_to_columns(dir_prev.W, order);
                dir_prev.C = apply_order_to_columns(dir_prev.C, order);
            }
        }

        const double nll_prev = report.objective_trace.back();
        nll = scalar_nll_parts(cur, stats).value;
        report.objective_trace.push_back(nll);

        if (std::abs(nll_prev - nll) / std::max(std::abs(nll_prev), 1e-12) < opts.tol) {
            report.converged = true;
            ++k;
            break;
        }
    }

    report.params = reorder_components(cur);
    report.iterations = k;
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace ppls
