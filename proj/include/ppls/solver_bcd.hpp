#pragma once

#include "ppls/solver.hpp"

namespace ppls {

struct CubicCoeffs {
    double c3 = 0.0, c2 = 0.0, c1 = 0.0, c0 = 0.0;
};

// Closed-form conditional minimizer of ell_i in theta_t2 with everything else
// fixed, clipped to the eps floor. Q_xy uses the projected-stats normalization
// (the 2/(se*sf) factor included).
double theta_update(double Q_x, double Q_y, double Q_xy, double b, double sigma_h2,
                    double sigma_e2, double sigma_f2, double eps);

// Coefficients of the stationarity cubic for b_i. When Q_xy > 0 the sequence
// has exactly one sign change, so exactly one positive real root exists.
CubicCoeffs b_cubic_coeffs(double Q_x, double Q_y, double Q_xy, double theta2, double sigma_h2,
                           double sigma_e2, double sigma_f2);

// Unique positive real root by geometric bracket expansion plus a
// Newton/bisection hybrid. Precondition: exactly one sign change in
// (c3, c2, c1, c0), zeros skipped.
double cubic_positive_root(const CubicCoeffs& c);

// Minimizes sum_i ell_i(theta2_i, b_i, .) over sigma_h2 in
// [lower, auto-expanded upper] by Brent's method (relative tol 1e-12).
double sigma_h_update(const ProjectedStats& stats, const Vector& theta_t2, const Vector& b,
                      double sigma_e2, double sigma_f2, double sigma_h2_init,
                      double lower = 1e-10);

// BCD-SLM: per outer iteration, one Riemannian CG + Armijo step on (W, C),
// then exact per-component (theta2, b) updates and a Brent sigma_h2 solve.
FitReport fit_bcd_slm(const PplsParams& init, const SampleMoments& moments, double sigma_e2_hat,
                      double sigma_f2_hat, const FitOptions& opts = {});

}  // namespace ppls
