#pragma once

#include "ppls/scalar_objective.hpp"

namespace ppls {

// Per-component 2x2 Fisher block for (theta_t2_i, b_i):
//   J_i = (1/2) [ d2 ell_i / d(theta2)^2    d2 ell_i / d theta2 d b ]
//               [ d2 ell_i / d theta2 d b   d2 ell_i / d b^2        ]
// evaluated at the fitted values, from the closed-form second derivatives.
struct FisherBlock {
    Eigen::Matrix2d J;
    bool positive_definite = false;
};

FisherBlock fisher_block(const PplsParams& params, const ProjectedStats& stats, int i);

// Scalar information for sigma_h2: (1/2) sum_i d2 ell_i / d(sigma_h2)^2.
double fisher_sigma_h(const PplsParams& params, const ProjectedStats& stats);

struct StandardErrors {
    Vector se_theta_t2;        // NaN where undefined
    Vector se_b;
    double se_sigma_h2 = 0.0;  // NaN if undefined
    std::vector<bool> block_defined;
    Vector condition;          // condition number diagnostic per block
};

// sqrt(diag(N^{-1} J_i^{-1})) per component plus the sigma_h2 analog.
StandardErrors standard_errors(const PplsParams& params, const ProjectedStats& stats, long N);

}  // namespace ppls
