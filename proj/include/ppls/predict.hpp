#pragma once

#include <vector>

#include "ppls/model.hpp"
#include "ppls/rng.hpp"

namespace ppls {

/**
 * Conditional Gaussian predictive law y | x under fitted PPLS parameters.
 *
 * Mean:  mu(x) = (x - mean_x)' (W St W' + gamma se2 I)^{-1} W St B C' + mean_y
 * Cov:   C (B^2 St + sh2 I) C' + sf2 I
 *          - C B St W' (W St W' + gamma se2 I)^{-1} W St B C'
 *
 * Both collapse to r-dimensional forms; the p x p inverse is never formed.
 * The covariance does not depend on x. kappa rescales it for intervals.
 */
struct PredictiveLaw {
    PplsParams params;
    double gamma = 1.0;
    double kappa = 1.0;
    Vector mean_x, mean_y;

    // cached solve factors
    Matrix mean_factor;  // p x r: W diag(theta2 b / (theta2 + gamma se2))
    Vector cond_m;       // r: sh2 + b^2 theta2 gamma se2 / (theta2 + gamma se2)
};

PredictiveLaw make_law(const PplsParams& params, Vector mean_x, Vector mean_y,
                       double gamma = 1.0, double kappa = 1.0);

Vector predictive_mean(const PredictiveLaw& law, const Vector& x_new);
Matrix predictive_mean_rows(const PredictiveLaw& law, const Matrix& X_new);

// q x q conditional covariance (x-independent under this model; the argument
// is kept for interface stability). kappa is not applied here.
Matrix predictive_cov(const PredictiveLaw& law, const Vector& x_new);

// Quadratic form r' V^{-1} r against the conditional covariance, via the
// rank-r inverse.
double standardized_quadratic(const PredictiveLaw& law, const Vector& resid);

// Log-determinant of the conditional covariance (kappa excluded).
double predictive_cov_logdet(const PredictiveLaw& law);

// gamma minimizing inner-CV prediction MSE of the predictive mean; ties break
// toward the smaller gamma.
double select_gamma(const PplsParams& params, const Matrix& X_tr, const Matrix& Y_tr,
                    std::vector<double> grid, int k_in, RngStream& rng);

// kappa_hat = (n q)^{-1} sum_i r_i' V^{-1} r_i on validation data.
double calibrate_kappa(const PredictiveLaw& law, const Matrix& X_val, const Matrix& Y_val);

// Floors a degenerate kappa at 1e-12 (warns on stderr).
double floor_kappa(double kappa);

struct IntervalBounds {
    Matrix lo, hi;  // n x q each
};

// Element-wise symmetric intervals mu_j(x_i) +- z_{1-alpha/2} sqrt(kappa V_jj).
IntervalBounds intervals(const PredictiveLaw& law, const Matrix& X_new, double alpha);

struct FoldMetrics {
    double mse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    Vector coverage;  // one per alpha
};

FoldMetrics evaluate(const Matrix& pred, const std::vector<IntervalBounds>& bounds,
                     const Matrix& Y_true, const std::vector<double>& alphas);

struct CalibrationTable {
    std::vector<double> alphas;
    Matrix coverage;  // folds x alphas
    Vector ace;       // |mean fold coverage - (1 - alpha)| per alpha
};

CalibrationTable calibration_table(const std::vector<double>& alphas,
                                   const std::vector<Vector>& fold_coverages);

}  // namespace ppls
