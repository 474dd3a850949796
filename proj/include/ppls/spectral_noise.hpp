#pragma once

#include <string>

#include "ppls/common.hpp"

namespace ppls {

struct NoiseEstimate {
    enum class Mode { Subspace, FullSpectrum, Conservative };
    double value = 0.0;
    Mode mode = Mode::Subspace;
    int rank = 0;      // the r (or r_max) the estimate was formed at
    int eig_lo = 0;    // 1-based index range of eigenvalues averaged,
    int eig_hi = 0;    // under the descending convention lambda_1 >= ...

    std::string mode_name() const;
};

// Mean of the smallest d - r eigenvalues of S (descending convention).
// r = 0 reduces to trace(S)/d exactly. Sample eigenvalues in [-1e-8, 0) are
// clamped to zero; anything below -1e-8 is rejected.
NoiseEstimate noise_subspace_estimate(const Matrix& S, int r);

// trace(S)/d; carries the non-vanishing spiked-model bias.
NoiseEstimate full_spectrum_estimate(const Matrix& S);

// Same arithmetic as noise_subspace_estimate(S, r_max), tagged conservative.
NoiseEstimate conservative_estimate(const Matrix& S, int r_max);

}  // namespace ppls
