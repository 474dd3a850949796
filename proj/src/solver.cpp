#include "ppls/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "ppls/stiefel.hpp"

namespace ppls {

std::optional<double> armijo_backtrack(const std::function<double(double)>& f_alpha, double f0,
                                       double g0, const ArmijoOptions& opts) {
    if (!(g0 < 0.0)) throw InputError("armijo_backtrack: g0 must be a descent slope");
    double alpha = opts.init_step;
    for (int k = 0; k <= opts.max_backtracks; ++k) {
        double f = f_alpha(alpha);
        if (std::isfinite(f) && f <= f0 + opts.c1 * alpha * g0) return alpha;
        alpha *= opts.backtrack;
    }
    return std::nullopt;
}

LoadingTangent rcg_direction(const LoadingTangent& grad_now, const LoadingTangent& grad_prev,
                             const LoadingTangent& dir_prev, const Matrix& W, const Matrix& C) {
    LoadingTangent g_prev_t{stiefel::tangent_project(W, grad_prev.W),
                            stiefel::tangent_project(C, grad_prev.C)};
    LoadingTangent d_prev_t{stiefel::tangent_project(W, dir_prev.W),
                            stiefel::tangent_project(C, dir_prev.C)};

    const double denom = grad_prev.inner(grad_prev);
    double beta = 0.0;
    if (denom > 0.0) {
        LoadingTangent diff{grad_now.W - g_prev_t.W, grad_now.C - g_prev_t.C};
        beta = std::max(0.0, grad_now.inner(diff) / denom);
    }
    LoadingTangent dir{-grad_now.W + beta * d_prev_t.W, -grad_now.C + beta * d_prev_t.C};
    if (dir.inner(grad_now) >= 0.0) {  // not a descent direction: restart
        dir.W = -grad_now.W;
        dir.C = -grad_now.C;
    }
    return dir;
}

namespace {

// Warm-started Armijo initial step: the exact minimizer of the quadratic
// model built from the previous accepted decrease, capped at init_step.
double warm_init_step(double last_decrease, double g0, const ArmijoOptions& opts) {
    if (!(last_decrease > 0.0) || !(g0 < 0.0)) return opts.init_step;
    double guess = 2.0 * last_decrease / (-g0);
    if (!(guess > 1e-12)) return opts.init_step;
    return std::min(opts.init_step, guess);
}

void apply_scalar_step(PplsParams& params, const Vector& dir, double alpha, double eps) {
    const int r = params.r();
    for (int i = 0; i < r; ++i) {
        params.theta_t2(i) = std::max(params.theta_t2(i) * std::exp(alpha * dir(2 * i)), eps);
        params.b(i) = std::max(params.b(i) * std::exp(alpha * dir(2 * i + 1)), eps);
    }
    params.sigma_h2 = std::max(params.sigma_h2 * std::exp(alpha * dir(2 * r)), eps);
}

}  // namespace

FitReport fit_slm_manifold(const PplsParams& init, const SampleMoments& moments,
                           double sigma_e2_hat, double sigma_f2_hat, const FitOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const int r = init.r();

    PplsParams cur = init;
    cur.sigma_e2 = sigma_e2_hat;
    cur.sigma_f2 = sigma_f2_hat;
    validate_params(cur);
    if (cur.sigma_h2 <= 0.0)
        throw InputError("fit_slm_manifold: sigma_h2 must be strictly positive");

    auto objective_at = [&](const PplsParams& p) {
        ProjectedStats st = projected_stats(p.W, p.C, moments, p.sigma_e2, p.sigma_f2);
        return scalar_nll_parts(p, st).value;
    };

    ProjectedStats stats =
        projected_stats(cur.W, cur.C, moments, cur.sigma_e2, cur.sigma_f2);
    double nll = scalar_nll_parts(cur, stats).value;

    FitReport report;
    report.objective_trace.push_back(nll);

    LoadingTangent grad_prev, dir_prev;
    bool have_cg_memory = false;
    int iters_since_restart = 0;
    double last_decrease_loading = -1.0, last_decrease_scalar = -1.0;

    int k = 0;
    for (; k < opts.max_iters; ++k) {
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

        // ---- loading block: one Riemannian CG step with Armijo backtracking
        LoadingTangent dir;
        if (!have_cg_memory || iters_since_restart >= opts.cg_restart_factor * r) {
            dir = LoadingTangent{-grad.W, -grad.C};
            iters_since_restart = 0;
        } else {
            dir = rcg_direction(grad, grad_prev, dir_prev, cur.W, cur.C);
        }
        double g0 = grad.inner(dir);
        bool loading_ok = false;
        if (g0 < 0.0) {
            auto f_alpha = [&](double alpha) {
                try {
                    PplsParams cand = cur;
                    cand.W = stiefel::qr_retract(cur.W, dir.W, alpha);
                    cand.C = stiefel::qr_retract(cur.C, dir.C, alpha);
                    return objective_at(cand);
                } catch (const NumericalError&) {
                    return std::numeric_limits<double>::infinity();
                }
            };
            ArmijoOptions line = opts.armijo;
            line.init_step = warm_init_step(last_decrease_loading, g0, opts.armijo);
            std::optional<double> alpha = armijo_backtrack(f_alpha, nll, g0, line);
            if (alpha) {
                cur.W = stiefel::qr_retract(cur.W, dir.W, *alpha);
                cur.C = stiefel::qr_retract(cur.C, dir.C, *alpha);
                double nll_new = objective_at(cur);
                last_decrease_loading = std::max(nll - nll_new, 0.0);
                nll = nll_new;
                loading_ok = true;
            } else {
                last_decrease_loading = -1.0;
            }
        }
        grad_prev = grad;
        dir_prev = dir;
        have_cg_memory = loading_ok;
        if (loading_ok) ++iters_since_restart;

        // ---- scalar block: descent along the negative log-coordinate gradient
        stats = projected_stats(cur.W, cur.C, moments, cur.sigma_e2, cur.sigma_f2);
        nll = scalar_nll_parts(cur, stats).value;
        Vector g_s = scalar_block_grads(cur, stats);
        bool scalar_ok = false;
        if (g_s.squaredNorm() > 0.0) {
            Vector scalar_dir = -g_s;
            double g0_s = -g_s.squaredNorm();
            auto f_alpha = [&](double alpha) {
                try {
                    PplsParams cand = cur;
                    apply_scalar_step(cand, scalar_dir, alpha, opts.eps_floor);
                    return scalar_nll_parts(cand, stats).value;
                } catch (const NumericalError&) {
                    return std::numeric_limits<double>::infinity();
                }
            };
            ArmijoOptions line = opts.armijo;
            line.init_step = warm_init_step(last_decrease_scalar, g0_s, opts.armijo);
            std::optional<double> alpha = armijo_backtrack(f_alpha, nll, g0_s, line);
            if (alpha) {
                apply_scalar_step(cur, scalar_dir, *alpha, opts.eps_floor);
                double nll_new = scalar_nll_parts(cur, stats).value;
                last_decrease_scalar = std::max(nll - nll_new, 0.0);
                nll = nll_new;
                scalar_ok = true;
            } else {
                last_decrease_scalar = -1.0;
            }
        }

        // ---- reorder and record
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
            grad_prev.W = apply_order_to_columns(grad_prev.W, order);
            grad_prev.C = apply_order_to_columns(grad_prev.C, order);
            dir_prev.W = apply_order_to_columns(dir_prev.W, order);
            dir_prev.C = apply_order_to_columns(dir_prev.C, order);
        }

        const double nll_prev = report.objective_trace.back();
        report.objective_trace.push_back(nll);

        if (!loading_ok && !scalar_ok) {
            report.diagnostic = "line search exhausted backtracks at iteration " +
                                std::to_string(k) + " (grad norm " + fmt17(grad_norm) + ")";
            ++k;
            break;
        }
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
