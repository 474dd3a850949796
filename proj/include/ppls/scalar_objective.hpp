#pragma once

#include <utility>

#include "ppls/model.hpp"

namespace ppls {

// The r projected scalar channels the likelihood collapses onto:
//   Q_x(i) = w_i' S_xx w_i / sigma_e2,
//   Q_y(i) = c_i' S_yy c_i / sigma_f2,
//   Q_xy(i) = 2 w_i' S_xy c_i / (sigma_e sigma_f).
struct ProjectedStats {
    Vector Q_x, Q_y, Q_xy;
    double tr_sxx = 0.0;
    double tr_syy = 0.0;
};

// Per-component coefficients of the scalar expansion:
//   D_i     = (sf2 + sh2)(theta2 + se2) + b^2 theta2 se2,
//   Phi_x   = 1 - se2 (sf2 + sh2 + b^2 theta2) / D,
//   Phi_y   = 1 - sf2 (se2 + theta2) / D,
//   Phi_xy  = se sf b theta2 / D.
struct ComponentCoeffs {
    Vector D, Phi_x, Phi_y, Phi_xy;
};

// Scalar objective value with the per-component summands exposed:
//   value = (p-r) ln se2 + (q-r) ln sf2 + tr(Sxx)/se2 + tr(Syy)/sf2 + sum ell_i.
struct NllParts {
    double value = 0.0;
    Vector ell;
};

ProjectedStats projected_stats(const Matrix& W, const Matrix& C, const SampleMoments& moments,
                               double sigma_e2, double sigma_f2);

ComponentCoeffs component_coeffs(const PplsParams& params);

NllParts scalar_nll_parts(const PplsParams& params, const ProjectedStats& stats);
double scalar_nll(const PplsParams& params, const SampleMoments& moments);
NllParts scalar_nll_detailed(const PplsParams& params, const SampleMoments& moments);

// Dense oracle: ln det Sigma + tr(S Sigma^{-1}) on the full (p+q) block
// matrix. Never on the hot path; kept as the reference the scalar form is
// checked against.
double dense_nll(const PplsParams& params, const SampleMoments& moments);

// Closed-form Euclidean gradients of the scalar objective in the loadings:
//   G_W = -2 [ S_xx W diag(Phi_x/se2) + S_xy C diag(Phi_xy/(se sf)) ],
//   G_C = -2 [ S_yy C diag(Phi_y/sf2) + S_yx W diag(Phi_xy/(se sf)) ].
std::pair<Matrix, Matrix> euclid_grads(const PplsParams& params, const SampleMoments& moments);
std::pair<Matrix, Matrix> euclid_grads_from_stats(const PplsParams& params,
                                                  const SampleMoments& moments,
                                                  const ComponentCoeffs& coeffs);

// Gradient of the scalar objective in log-coordinates, ordered
// (ln theta2_1, ln b_1, ..., ln theta2_r, ln b_r, ln sigma_h2); length 2r+1.
Vector scalar_block_grads(const PplsParams& params, const ProjectedStats& stats);

// One projected channel: everything ell_i needs besides (theta2, b, sigma_h2).
// Shared by the BCD updates, the Fisher blocks, and the objective itself.
struct ComponentChannel {
    double Q_x = 0.0, Q_y = 0.0, Q_xy = 0.0;
    double sigma_e2 = 1.0, sigma_f2 = 1.0;
};

ComponentChannel channel_at(const ProjectedStats& stats, double sigma_e2, double sigma_f2, int i);

double ell_value(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d_theta2(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d_b(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d_sigma_h2(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d2_theta2(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d2_b(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d2_theta2_b(const ComponentChannel& ch, double theta2, double b, double sigma_h2);
double ell_d2_sigma_h2(const ComponentChannel& ch, double theta2, double b, double sigma_h2);

}  // namespace ppls
