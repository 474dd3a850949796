#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppls/predict.hpp"
#include "ppls/solver.hpp"
#include "ppls/solver_bcd.hpp"
#include "ppls/spectral_noise.hpp"

namespace ppls {

enum class TransformKind { Identity, Log1p, RankInt };
TransformKind parse_transform(const std::string& name);
std::string transform_name(TransformKind kind);

// Coordinate-wise Gaussianization with fitted training state. rank_int stores
// the sorted training values per coordinate; new data maps through the
// interpolated training ECDF, and the approximate inverse interpolates the
// training quantile function with constant extrapolation beyond its range.
class Gaussianizer {
public:
    static Gaussianizer fit(const Matrix& X, TransformKind kind);

    TransformKind kind() const { return kind_; }
    Matrix transform(const Matrix& X) const;
    Matrix inverse(const Matrix& Z) const;

private:
    TransformKind kind_ = TransformKind::Identity;
    std::vector<std::vector<double>> sorted_train_;  // per coordinate (rank_int)
    long n_train_ = 0;
};

enum class SolverKind { Manifold, Bcd };
SolverKind parse_solver(const std::string& name);

enum class NoiseMode { V1, V2 };  // V1: shared conservative noise; V2: rank-adaptive

// BIC(r) = nll + d(r) ln(N)/N with d(r) = (p-r)r + (q-r)r + 2r + 1; the
// pre-fixed noise variances are not counted.
double bic_score(double nll_at_opt, int r, int p, int q, long N);
int bic_param_count(int r, int p, int q);

// Index of the largest eigenvalue gap of S_xx over the candidate range.
int eigengap_rank(const Matrix& S_xx, int r_max);

// Top singular vectors of S_xy with signs aligned so projected cross-scores
// are positive; diagonal parameters refined from projected moments.
PplsParams svd_warm_start(const SampleMoments& moments, int r, double sigma_e2_hat,
                          double sigma_f2_hat);

struct MultistartOptions {
    SolverKind solver = SolverKind::Bcd;
    int starts = 8;
    bool warm_start = true;
    FitOptions fit;
};

// Runs independent fits (one replaced by the SVD warm start when enabled) and
// returns the report with minimal objective, components reordered once.
FitReport multistart_fit(const SampleMoments& moments, int r, double sigma_e2_hat,
                         double sigma_f2_hat, const MultistartOptions& opts, RngStream& rng);

// Convenience wrapper: oracle-r mode on raw data. Noise estimated at rank r
// from the marginal moments, then fixed.
FitReport multistart_fit_data(const Matrix& X, const Matrix& Y, int r,
                              const MultistartOptions& opts, RngStream& rng);

struct CvScores {
    double cv_nll = 0.0;
    double cv_mse = 0.0;
};

// K-fold CV scores at rank r. Centering and noise estimation use training
// folds only; prediction uses gamma = 1. If conservative_noise is supplied
// (V1), it overrides per-fold estimation.
CvScores cv_scores(const Matrix& X, const Matrix& Y, int r, int k_out,
                   const MultistartOptions& opts, RngStream& rng, NoiseMode mode, int r_max);

struct RankSelectionResult {
    std::vector<int> grid;
    std::map<std::string, std::vector<double>> scores;  // criterion -> per-rank score
    std::map<std::string, int> selected;                // criterion -> selected rank
    NoiseMode mode = NoiseMode::V1;
    std::vector<std::pair<double, double>> noise_per_rank;  // (sigma_e2, sigma_f2)
    std::vector<std::string> warnings;
};

// criteria may contain "bic", "cvnll", "cvmse", "gap".
RankSelectionResult rank_select(const Matrix& X, const Matrix& Y, std::vector<int> grid,
                                int r_max, const std::vector<std::string>& criteria,
                                NoiseMode mode, const MultistartOptions& opts, RngStream& rng,
                                int k_out = 5);

// Deterministic row partition into k folds after an rng shuffle.
std::vector<std::vector<long>> make_folds(long n, int k, RngStream rng);

}  // namespace ppls
