#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ppls/common.hpp"
#include "ppls/rng.hpp"

namespace ppls {

/**
 * PPLS parameter vector.
 *
 * Latent model: x = t W' + e,  y = u C' + f,  u = t B + h, with
 * t ~ N(0, Sigma_t), h ~ N(0, sigma_h2 I), e ~ N(0, sigma_e2 I),
 * f ~ N(0, sigma_f2 I). Sigma_t = diag(theta_t2), B = diag(b).
 *
 * Identifiability: W, C orthonormal; b > 0; theta_t2 * b decreasing.
 * sigma_h2 = 0 is allowed only when pcca_mode is set.
 */
struct PplsParams {
    Matrix W;          // p x r, orthonormal columns
    Matrix C;          // q x r, orthonormal columns
    Vector b;          // r positive reals, diagonal of B
    Vector theta_t2;   // r positive reals, diagonal of Sigma_t
    double sigma_e2 = 1.0;
    double sigma_f2 = 1.0;
    double sigma_h2 = 1.0;
    bool pcca_mode = false;  // permits the boundary sigma_h2 = 0

    int p() const { return static_cast<int>(W.rows()); }
    int q() const { return static_cast<int>(C.rows()); }
    int r() const { return static_cast<int>(W.cols()); }
};

// Throws if the parameter invariants are violated (shapes, positivity,
// orthonormality). Ordering is not checked here; see reorder_components.
void validate_params(const PplsParams& params);

struct SampleMoments {
    Matrix S_xx;  // p x p, 1/N-normalized, column-centered
    Matrix S_yy;  // q x q
    Matrix S_xy;  // p x q
    long N = 0;
    Vector mean_x;
    Vector mean_y;
};

struct NoiseLaw {
    enum class Kind { Gaussian, StudentT, GaussianMixture, CenteredPoisson };
    Kind kind = Kind::Gaussian;
    double nu = 5.0;        // Student-t degrees of freedom (> 2)
    double lambda = 1.0;    // Poisson rate
    double mixture_mu = 1.0;  // mixture mean offset as a multiple of sigma

    static NoiseLaw parse(const std::string& name);
    std::string name() const;
};

// Joint (p+q) x (p+q) covariance of (x, y) under the model.
Matrix assemble_joint_cov(const PplsParams& params);

// Component permutation + joint sign flips enforcing the identifiability
// ordering: theta_t2(i)*b(i) decreasing (stable sort), and each (w_i, c_i)
// pair flipped so the largest-magnitude entry of w_i is positive.
struct ComponentOrder {
    std::vector<int> perm;      // output column k comes from input column perm[k]
    std::vector<double> signs;  // +-1 applied jointly to (w, c) after permuting
    bool is_identity() const;
};

ComponentOrder component_order(const PplsParams& params);
PplsParams apply_component_order(const PplsParams& params, const ComponentOrder& order);
Matrix apply_order_to_columns(const Matrix& m, const ComponentOrder& order);

// Permutes components so theta_t2(i)*b(i) is decreasing (stable), then flips
// (w_i, c_i) jointly so the largest-magnitude entry of w_i is positive.
PplsParams reorder_components(const PplsParams& params);

// Samples N rows. Noise laws other than Gaussian are rescaled so the marginal
// variance of e and f matches sigma_e2 / sigma_f2 exactly.
std::pair<Matrix, Matrix> sample_dataset(const PplsParams& params, long N, const NoiseLaw& law,
                                         RngStream& rng);

// Column-centered second-moment blocks with 1/N normalization.
SampleMoments sample_moments(const Matrix& X, const Matrix& Y);

// B = I, sigma_h2 = 0, pcca flag set. Idempotent.
PplsParams pcca_specialize(const PplsParams& params);

}  // namespace ppls
