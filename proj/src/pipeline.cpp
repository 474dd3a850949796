#include "ppls/pipeline.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppls/normal.hpp"
#include "ppls/stiefel.hpp"

namespace ppls {

TransformKind parse_transform(const std::string& name) {
    if (name == "none" || name == "identity") return TransformKind::Identity;
    if (name == "log" || name == "log1p") return TransformKind::Log1p;
    if (name == "rankint" || name == "rank_int") return TransformKind::RankInt;
    throw ConfigError("unknown gaussianize kind: " + name);
}

std::string transform_name(TransformKind kind) {
    switch (kind) {
        case TransformKind::Identity: return "none";
        case TransformKind::Log1p: return "log";
        case TransformKind::RankInt: return "rankint";
    }
    return "none";
}

SolverKind parse_solver(const std::string& name) {
    if (name == "manifold") return SolverKind::Manifold;
    if (name == "bcd") return SolverKind::Bcd;
    throw ConfigError("unknown solver: " + name);
}

Gaussianizer Gaussianizer::fit(const Matrix& X, TransformKind kind) {
    Gaussianizer g;
    g.kind_ = kind;
    g.n_train_ = X.rows();
    if (kind == TransformKind::Log1p) {
        std::string bad;
        for (int j = 0; j < X.cols(); ++j)
            if ((X.col(j).array() <= -1.0).any()) bad += (bad.empty() ? "" : ", ") + std::to_string(j + 1);
        if (!bad.empty())
            throw InputError("log1p transform: entries <= -1 in coordinates " + bad);
    }
    if (kind == TransformKind::RankInt) {
        g.sorted_train_.resize(X.cols());
        for (int j = 0; j < X.cols(); ++j) {
            auto& col = g.sorted_train_[j];
            col.resize(X.rows());
            for (long i = 0; i < X.rows(); ++i) col[i] = X(i, j);
            std::sort(col.begin(), col.end());
        }
    }
    return g;
}

namespace {

// Fractional rank of z among sorted training values: exact matches get the
// average rank of the tie group; between-sample values interpolate linearly;
// out-of-range values clamp to the extreme ranks.
double fractional_rank(const std::vector<double>& sorted, double z) {
    const long n = static_cast<long>(sorted.size());
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), z);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), z);
    const long below = lo - sorted.begin();
    const long equal = hi - lo;
    if (equal > 0) return below + 0.5 * (equal + 1);
    if (below == 0) return 1.0;
    if (below == n) return static_cast<double>(n);
    const double v_lo = sorted[below - 1], v_hi = sorted[below];
    return below + (z - v_lo) / (v_hi - v_lo);
}

}  // namespace

Matrix Gaussianizer::transform(const Matrix& X) const {
    switch (kind_) {
        case TransformKind::Identity:
            return X;
        case TransformKind::Log1p: {
            std::string bad;
            for (int j = 0; j < X.cols(); ++j)
                if ((X.col(j).array() <= -1.0).any())
                    bad += (bad.empty() ? "" : ", ") + std::to_string(j + 1);
            if (!bad.empty())
                throw InputError("log1p transform: entries <= -1 in coordinates " + bad);
            return (X.array() + 1.0).log();
        }
        case TransformKind::RankInt: {
            if (static_cast<int>(sorted_train_.size()) != X.cols())
                throw DimensionError("rank_int transform: column count mismatch");
            Matrix out(X.rows(), X.cols());
            for (int j = 0; j < X.cols(); ++j)
                for (long i = 0; i < X.rows(); ++i) {
                    double rank = fractional_rank(sorted_train_[j], X(i, j));
                    out(i, j) = normal_quantile(rank / (n_train_ + 1.0));
                }
            return out;
        }
    }
    return X;
}

Matrix Gaussianizer::inverse(const Matrix& Z) const {
    switch (kind_) {
        case TransformKind::Identity:
            return Z;
        case TransformKind::Log1p:
            return Z.array().exp() - 1.0;
        case TransformKind::RankInt: {
            if (static_cast<int>(sorted_train_.size()) != Z.cols())
                throw DimensionError("rank_int inverse: column count mismatch");
            Matrix out(Z.rows(), Z.cols());
            for (int j = 0; j < Z.cols(); ++j) {
                const auto& sorted = sorted_train_[j];
                const long n = static_cast<long>(sorted.size());
                for (long i = 0; i < Z.rows(); ++i) {
                    double rank = normal_cdf(Z(i, j)) * (n_train_ + 1.0);
                    if (rank <= 1.0) {
                        out(i, j) = sorted.front();  // constant extrapolation
                    } else if (rank >= static_cast<double>(n)) {
                        out(i, j) = sorted.back();
                    } else {
                        long k = static_cast<long>(std::floor(rank));
                        double frac = rank - k;
                        out(i, j) = sorted[k - 1] + frac * (sorted[k] - sorted[k - 1]);
                    }
                }
            }
            return out;
        }
    }
    return Z;
}

double bic_score(double nll_at_opt, int r, int p, int q, long N) {
    if (!std::isfinite(nll_at_opt)) throw NumericalError("bic_score: non-finite nll");
    if (r < 1) throw InputError("bic_score: grid requires r >= 1");
    return nll_at_opt + bic_param_count(r, p, q) * std::log(static_cast<double>(N)) / N;
}

int bic_param_count(int r, int p, int q) { return (p - r) * r + (q - r) * r + 2 * r + 1; }

int eigengap_rank(const Matrix& S_xx, int r_max) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S_xx, Eigen::EigenvaluesOnly);
    Vector lambda = eig.eigenvalues().reverse();  // descending
    int best = 1;
    double best_gap = -1.0;
    for (int k = 1; k <= r_max && k < lambda.size(); ++k) {
        double gap = lambda(k - 1) - lambda(k);
        if (gap > best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return best;
}

PplsParams svd_warm_start(const SampleMoments& moments, int r, double sigma_e2_hat,
                          double sigma_f2_hat) {
    const int p = static_cast<int>(moments.S_xy.rows());
    const int q = static_cast<int>(moments.S_xy.cols());
    if (r >= std::min(p, q)) throw DimensionError("svd_warm_start: r too large");

    Eigen::JacobiSVD<Matrix> svd(moments.S_xy, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double scale = svd.singularValues()(0);
    if (!(scale > 0.0) || svd.singularValues()(r - 1) <= 1e-12 * scale)
        throw NumericalError("svd_warm_start: cross-covariance numerically rank-deficient");

    PplsParams params;
    params.W = svd.matrixU().leftCols(r);
    params.C = svd.matrixV().leftCols(r);
    // align signs via cross-covariance of projected scores
    for (int i = 0; i < r; ++i) {
        double cross = params.W.col(i).dot(moments.S_xy * params.C.col(i));
        if (cross < 0.0) params.C.col(i) = -params.C.col(i);
    }
    params.b = Vector::Ones(r);
    params.theta_t2.resize(r);
    for (int i = 0; i < r; ++i) {
        double proj = params.W.col(i).dot(moments.S_xx * params.W.col(i));
        params.theta_t2(i) = std::max(proj - sigma_e2_hat, 1e-8);
    }
    params.sigma_e2 = sigma_e2_hat;
    params.sigma_f2 = sigma_f2_hat;
    params.sigma_h2 = 1e-2;
    return reorder_components(params);
}

namespace {

PplsParams random_start(int p, int q, int r, double sigma_e2_hat, double sigma_f2_hat,
                        RngStream& rng) {
    PplsParams params;
    params.W = stiefel::random_stiefel(p, r, rng);
    params.C = stiefel::random_stiefel(q, r, rng);
    params.theta_t2 = Vector::Ones(r);
    params.b = Vector::Ones(r);
    params.sigma_e2 = sigma_e2_hat;
    params.sigma_f2 = sigma_f2_hat;
    params.sigma_h2 = 1e-2;
    return params;
}

FitReport run_solver(SolverKind solver, const PplsParams& init, const SampleMoments& moments,
                     double se2, double sf2, const FitOptions& fit_opts) {
    if (solver == SolverKind::Manifold) return fit_slm_manifold(init, moments, se2, sf2, fit_opts);
    return fit_bcd_slm(init, moments, se2, sf2, fit_opts);
}

}  // namespace

FitReport multistart_fit(const SampleMoments& moments, int r, double sigma_e2_hat,
                         double sigma_f2_hat, const MultistartOptions& opts, RngStream& rng) {
    if (opts.starts < 1) throw ConfigError("multistart_fit: need at least one start");
    const int p = static_cast<int>(moments.S_xx.rows());
    const int q = static_cast<int>(moments.S_yy.rows());

    FitReport best;
    bool have_best = false;
    std::string failures;
    for (int s = 0; s < opts.starts; ++s) {
        RngStream stream = rng.fork(s);
        try {
            PplsParams init;
            if (s == 0 && opts.warm_start) {
                try {
                    init = svd_warm_start(moments, r, sigma_e2_hat, sigma_f2_hat);
                } catch (const Error&) {
                    init = random_start(p, q, r, sigma_e2_hat, sigma_f2_hat, stream);
                }
            } else {
                init = random_start(p, q, r, sigma_e2_hat, sigma_f2_hat, stream);
            }
            FitReport report =
                run_solver(opts.solver, init, moments, sigma_e2_hat, sigma_f2_hat, opts.fit);
            report.start_index = s;
            if (!have_best || report.objective_trace.back() < best.objective_trace.back()) {
                best = std::move(report);
                have_best = true;
            }
        } catch (const Error& e) {
            failures += "start " + std::to_string(s) + ": " + e.what() + "; ";
        }
    }
    if (!have_best) throw NumericalError("multistart_fit: all starts failed (" + failures + ")");
    best.params = reorder_components(best.params);
    if (!failures.empty()) best.diagnostic += " failed starts: " + failures;
    return best;
}

FitReport multistart_fit_data(const Matrix& X, const Matrix& Y, int r,
                              const MultistartOptions& opts, RngStream& rng) {
    SampleMoments moments = sample_moments(X, Y);
    const double se2 = noise_subspace_estimate(moments.S_xx, r).value;
    const double sf2 = noise_subspace_estimate(moments.S_yy, r).value;
    return multistart_fit(moments, r, se2, sf2, opts, rng);
}

std::vector<std::vector<long>> make_folds(long n, int k, RngStream rng) {
    if (k < 2) throw ConfigError("make_folds: need k >= 2");
    if (n < k) throw ConfigError("make_folds: more folds than rows");
    std::vector<long> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (long i = n - 1; i > 0; --i) {
        long j = static_cast<long>(draw_uniform(rng) * (i + 1));
        std::swap(idx[i], idx[std::min(j, i)]);
    }
    std::vector<std::vector<long>> folds(k);
    for (long i = 0; i < n; ++i) folds[i % k].push_back(idx[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

namespace {

struct FoldSplit {
    Matrix X_tr, Y_tr, X_val, Y_val;
};

FoldSplit split_rows(const Matrix& X, const Matrix& Y, const std::vector<long>& val_rows) {
    const long n = X.rows();
    std::vector<bool> in_val(n, false);
    for (long i : val_rows) in_val[i] = true;
    FoldSplit split;
    split.X_tr.resize(n - static_cast<long>(val_rows.size()), X.cols());
    split.Y_tr.resize(split.X_tr.rows(), Y.cols());
    split.X_val.resize(val_rows.size(), X.cols());
    split.Y_val.resize(val_rows.size(), Y.cols());
    long it = 0, iv = 0;
    for (long i = 0; i < n; ++i) {
        if (in_val[i]) {
            split.X_val.row(iv) = X.row(i);
            split.Y_val.row(iv++) = Y.row(i);
        } else {
            split.X_tr.row(it) = X.row(i);
            split.Y_tr.row(it++) = Y.row(i);
        }
    }
    return split;
}

}  // namespace

CvScores cv_scores(const Matrix& X, const Matrix& Y, int r, int k_out,
                   const MultistartOptions& opts, RngStream& rng, NoiseMode mode, int r_max) {
    if (k_out < 2) throw ConfigError("cv_scores: need k_out >= 2");
    auto folds = make_folds(X.rows(), k_out, rng.fork(0x0f01));

    double nll_sum = 0.0, mse_sum = 0.0;
    for (int f = 0; f < k_out; ++f) {
        if (static_cast<int>(folds[f].size()) <= r)
            throw ConfigError("cv_scores: fold " + std::to_string(f) + " has <= r samples");
        FoldSplit split = split_rows(X, Y, folds[f]);
        SampleMoments m_tr = sample_moments(split.X_tr, split.Y_tr);

        const int rank_for_noise = (mode == NoiseMode::V1) ? r_max : r;
        const double se2 = noise_subspace_estimate(m_tr.S_xx, rank_for_noise).value;
        const double sf2 = noise_subspace_estimate(m_tr.S_yy, rank_for_noise).value;

        RngStream fit_rng = rng.fork(1000 + f);
        FitReport fit = multistart_fit(m_tr, r, se2, sf2, opts, fit_rng);

        // validation second moment, centered with training-fold means
        Matrix Xv = split.X_val.rowwise() - m_tr.mean_x.transpose();
        Matrix Yv = split.Y_val.rowwise() - m_tr.mean_y.transpose();
        const long nv = Xv.rows();
        SampleMoments m_val;
        m_val.S_xx = Xv.transpose() * Xv / static_cast<double>(nv);
        m_val.S_yy = Yv.transpose() * Yv / static_cast<double>(nv);
        m_val.S_xy = Xv.transpose() * Yv / static_cast<double>(nv);
        m_val.N = nv;
        m_val.mean_x = m_tr.mean_x;
        m_val.mean_y = m_tr.mean_y;
        nll_sum += dense_nll(fit.params, m_val);

        PredictiveLaw law = make_law(fit.params, m_tr.mean_x, m_tr.mean_y, /*gamma=*/1.0);
        Matrix pred = predictive_mean_rows(law, split.X_val);
        mse_sum += (pred - split.Y_val).squaredNorm() /
                   (static_cast<double>(nv) * split.Y_val.cols());
    }
    return CvScores{nll_sum / k_out, mse_sum / k_out};
}

RankSelectionResult rank_select(const Matrix& X, const Matrix& Y, std::vector<int> grid,
                                int r_max, const std::vector<std::string>& criteria,
                                NoiseMode mode, const MultistartOptions& opts, RngStream& rng,
                                int k_out) {
    const int p = static_cast<int>(X.cols()), q = static_cast<int>(Y.cols());
    if (grid.empty()) throw ConfigError("rank_select: empty grid");
    std::sort(grid.begin(), grid.end());
    if (grid.front() < 1 || grid.back() > r_max || r_max >= std::min(p, q))
        throw ConfigError("rank_select: grid must lie in [1, r_max], r_max < min(p,q)");

    RankSelectionResult result;
    result.grid = grid;
    result.mode = mode;

    SampleMoments moments = sample_moments(X, Y);
    const double cons_se2 = conservative_estimate(moments.S_xx, r_max).value;
    const double cons_sf2 = conservative_estimate(moments.S_yy, r_max).value;

    auto wants = [&](const std::string& c) {
        return std::find(criteria.begin(), criteria.end(), c) != criteria.end();
    };

    if (wants("gap")) {
        int sel = eigengap_rank(moments.S_xx, r_max);
        std::vector<double> scores;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(moments.S_xx, Eigen::EigenvaluesOnly);
        Vector lambda = eig.eigenvalues().reverse();
        for (int r : grid) scores.push_back(lambda(r - 1) - lambda(r));
        result.scores["gap"] = scores;
        result.selected["gap"] = sel;
    }

    std::vector<double> bic, cvnll, cvmse;
    std::vector<int> ok_ranks;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const int r = grid[gi];
        double se2 = cons_se2, sf2 = cons_sf2;
        if (mode == NoiseMode::V2) {
            se2 = noise_subspace_estimate(moments.S_xx, r).value;
            sf2 = noise_subspace_estimate(moments.S_yy, r).value;
        }
        result.noise_per_rank.emplace_back(se2, sf2);
        try {
            if (wants("bic")) {
                RngStream fit_rng = rng.fork(31 * r + 1);
                FitReport fit = multistart_fit(moments, r, se2, sf2, opts, fit_rng);
                bic.push_back(bic_score(fit.objective_trace.back(), r, p, q, moments.N));
            }
            if (wants("cvnll") || wants("cvmse")) {
                RngStream cv_rng = rng.fork(31 * r + 2);
                CvScores cv = cv_scores(X, Y, r, k_out, opts, cv_rng, mode, r_max);
                cvnll.push_back(cv.cv_nll);
                cvmse.push_back(cv.cv_mse);
            }
            ok_ranks.push_back(r);
        } catch (const Error& e) {
            result.warnings.push_back("rank " + std::to_string(r) + " excluded: " + e.what());
        }
    }

    auto pick = [&](const std::vector<double>& scores) {
        int best = ok_ranks.front();
        double best_score = scores.front();
        for (std::size_t i = 1; i < scores.size(); ++i)
            if (scores[i] < best_score) {  // ties break toward smaller r
                best_score = scores[i];
                best = ok_ranks[i];
            }
        return best;
    };

    if (wants("bic") && !bic.empty()) {
        result.scores["bic"] = bic;
        result.selected["bic"] = pick(bic);
    }
    if (wants("cvnll") && !cvnll.empty()) {
        result.scores["cvnll"] = cvnll;
        result.selected["cvnll"] = pick(cvnll);
    }
    if (wants("cvmse") && !cvmse.empty()) {
        result.scores["cvmse"] = cvmse;
        result.selected["cvmse"] = pick(cvmse);
    }
    return result;
}

}  // namespace ppls
