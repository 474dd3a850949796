#pragma once

#include "ppls/common.hpp"
#include "ppls/rng.hpp"

namespace ppls::stiefel {

// Tolerance for the orthonormality invariant ||W'W - I||_max.
inline constexpr double kOrthoTol = 1e-10;

double orthonormality_error(const Matrix& w);
bool is_orthonormal(const Matrix& w, double tol = kOrthoTol);

// Q factor of the thin QR of m with diag(R) > 0 enforced by column flips.
// Throws NumericalError if m is numerically rank-deficient.
Matrix qf(const Matrix& m);

// Projection of an ambient gradient onto the tangent space at w:
// G - W sym(W'G), with sym(A) = (A + A')/2.
Matrix tangent_project(const Matrix& w, const Matrix& g);

// Skew-condition residual ||W'Xi + Xi'W||_max of a putative tangent vector.
double tangent_error(const Matrix& w, const Matrix& xi);

// Sign-consistent thin-QR retraction qf(W + alpha*Xi).
Matrix qr_retract(const Matrix& w, const Matrix& xi, double alpha);

// Q factor of a p x r standard-Gaussian matrix; deterministic given the
// stream state.
Matrix random_stiefel(int p, int r, RngStream& rng);

}  // namespace ppls::stiefel
