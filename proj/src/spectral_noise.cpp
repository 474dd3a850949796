#include "ppls/spectral_noise.hpp"

#include <Eigen/Eigenvalues>

namespace ppls {

std::string NoiseEstimate::mode_name() const {
    switch (mode) {
        case Mode::Subspace: return "subspace";
        case Mode::FullSpectrum: return "full_spectrum";
        case Mode::Conservative: return "conservative";
    }
    return "subspace";
}

NoiseEstimate noise_subspace_estimate(const Matrix& S, int r) {
    const int d = static_cast<int>(S.rows());
    if (S.cols() != d) throw DimensionError("noise estimate: matrix not square");
    if (r < 0 || r >= d) throw DimensionError("noise estimate: need 0 <= r < d");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, S.cwiseAbs().maxCoeff()))
        throw InputError("noise estimate: matrix not symmetric");

    NoiseEstimate est;
    est.rank = r;
    est.eig_lo = r + 1;
    est.eig_hi = d;
    if (r == 0) {
        est.value = S.trace() / d;
        return est;
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        throw NumericalError("noise estimate: eigendecomposition failed");
    Vector lambda = eig.eigenvalues();  // ascending in Eigen
    double sum = 0.0;
    for (int i = 0; i < d - r; ++i) {  // smallest d - r values
        double v = lambda(i);
        if (v < -1e-8)
            throw InputError("noise estimate: eigenvalue " + fmt17(v) + " below PSD tolerance");
        sum += std::max(v, 0.0);
    }
    est.value = sum / (d - r);
    return est;
}

NoiseEstimate full_spectrum_estimate(const Matrix& S) {
    NoiseEstimate est = noise_subspace_estimate(S, 0);
    est.mode = NoiseEstimate::Mode::FullSpectrum;
    return est;
}

NoiseEstimate conservative_estimate(const Matrix& S, int r_max) {
    NoiseEstimate est = noise_subspace_estimate(S, r_max);
    est.mode = NoiseEstimate::Mode::Conservative;
    return est;
}

}  // namespace ppls
