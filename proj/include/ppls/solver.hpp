#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppls/model.hpp"
#include "ppls/scalar_objective.hpp"

namespace ppls {

struct ArmijoOptions {
    double c1 = 1e-4;
    double backtrack = 0.5;
    double init_step = 1.0;
    int max_backtracks = 40;
};

struct FitOptions {
    double tol = 1e-6;        // on tangent-gradient norm and relative objective change
    int max_iters = 1000;
    ArmijoOptions armijo;
    double eps_floor = 1e-8;  // positivity floor for theta_t2, b, sigma_h2
    int cg_restart_factor = 10;  // steepest-descent restart every factor*r iterations
};

struct FitReport {
    PplsParams params;
    std::vector<double> objective_trace;   // non-increasing
    std::vector<double> grad_norm_trace;
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0;  // seconds
    int start_index = 0;
    std::string diagnostic;
};

// Tangent pair on St(p,r) x St(q,r).
struct LoadingTangent {
    Matrix W, C;
    double inner(const LoadingTangent& other) const {
        return (W.array() * other.W.array()).sum() + (C.array() * other.C.array()).sum();
    }
    double norm() const { return std::sqrt(inner(*this)); }
};

// Armijo backtracking: largest step in {init, init*backtrack, ...} satisfying
// f(alpha) <= f0 + c1*alpha*g0. g0 must be a descent slope (< 0). Returns
// nullopt if the backtracking budget is exhausted.
std::optional<double> armijo_backtrack(const std::function<double(double)>& f_alpha, double f0,
                                       double g0, const ArmijoOptions& opts);

// Polak-Ribiere CG direction with nonnegativity clip and automatic restart to
// steepest descent when the result is not a descent direction. grad_prev and
// dir_prev are transported by tangent projection at (W, C).
LoadingTangent rcg_direction(const LoadingTangent& grad_now, const LoadingTangent& grad_prev,
                             const LoadingTangent& dir_prev, const Matrix& W, const Matrix& C);

// SLM-Manifold: Riemannian CG with Armijo backtracking and QR retraction on
// the loading pair, joint with log-coordinate descent on the positive scalars
// under a single line search.
FitReport fit_slm_manifold(const PplsParams& init, const SampleMoments& moments,
                           double sigma_e2_hat, double sigma_f2_hat, const FitOptions& opts = {});

}  // namespace ppls
