#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppls/pipeline.hpp"

namespace ppls {

// Sign- and order-alignment of an estimate against ground truth. The
// assignment maximizes the summed absolute column correlations
// |w_i'w_true_j + c_i'c_true_j| (exact small-r assignment), then applies
// joint (w, c) sign flips, which is the model's own gauge freedom.
struct AlignResult {
    PplsParams aligned;
    std::vector<int> assignment;  // aligned column k came from estimate column assignment[k]
    double mse_w = 0.0;
    double mse_c = 0.0;
    double mse_b = 0.0;
    double mse_sigma_t = 0.0;
    double mse_sigma_h2 = 0.0;
};

AlignResult align_params(const PplsParams& est, const PplsParams& truth);

struct StudyConfig {
    std::string study;
    int p = 0, q = 0, r = 0;  // 0 / negative values fall back to study defaults
    long N = 0;
    double sigma_e2 = -1.0, sigma_f2 = -1.0, sigma_h2 = -1.0;
    int trials = 0;
    std::uint64_t seed = 42;
    std::string solver = "bcd";
    std::string out_dir = ".";
    bool full = false;  // paper-scale dimensions instead of desk scale
    int starts = 0;
    int jobs = 1;
};

// Parses a flat key=value config file (one pair per line, '#' comments).
StudyConfig parse_study_config(const std::string& path);
void apply_study_defaults(StudyConfig& config);

struct StudyRow {
    int trial = 0;
    std::string method;
    std::string metric;
    double value = 0.0;
};

struct StudyResult {
    std::string study;
    std::vector<StudyRow> rows;
    // "method|metric" -> (mean, sd) over trials
    std::map<std::string, std::pair<double, double>> summary;
};

StudyResult run_study(const StudyConfig& config);

// Writes <study>_long.csv and <study>_summary.csv under out_dir.
void write_study_csv(const StudyResult& result, const std::string& out_dir);

// Ground truth used by the synthetic studies: random Stiefel loadings,
// theta_t2 linearly spaced on [1.2, 2.0] descending, b on [0.8, 1.2]
// descending, yielding well-separated ordered spikes.
PplsParams make_truth(int p, int q, int r, double sigma_e2, double sigma_f2, double sigma_h2,
                      RngStream& rng);

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);

}  // namespace ppls
