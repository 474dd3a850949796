#include "ppls/predict.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "ppls/normal.hpp"

namespace ppls {

PredictiveLaw make_law(const PplsParams& params, Vector mean_x, Vector mean_y, double gamma,
                       double kappa) {
    if (gamma <= 0.0) throw InputError("make_law: gamma must be positive");
    if (kappa < 0.0) throw InputError("make_law: kappa must be nonnegative");
    PredictiveLaw law;
    law.params = params;
    law.gamma = gamma;
    law.kappa = kappa;
    law.mean_x = std::move(mean_x);
    law.mean_y = std::move(mean_y);
    if (law.mean_x.size() == 0) law.mean_x = Vector::Zero(params.p());
    if (law.mean_y.size() == 0) law.mean_y = Vector::Zero(params.q());
    if (law.mean_x.size() != params.p() || law.mean_y.size() != params.q())
        throw DimensionError("make_law: mean vectors do not match parameter dimensions");

    const int r = params.r();
    const double k = gamma * params.sigma_e2;
    Vector gain(r), m(r);
    for (int i = 0; i < r; ++i) {
        const double s = params.theta_t2(i);
        const double denom = s + k;
        if (denom <= 0.0) throw NumericalError("make_law: singular x-view core");
        gain(i) = s * params.b(i) / denom;
        m(i) = params.sigma_h2 + params.b(i) * params.b(i) * s * k / denom;
    }
    law.mean_factor = params.W * gain.asDiagonal();
    law.cond_m = m;
    return law;
}

Vector predictive_mean(const PredictiveLaw& law, const Vector& x_new) {
    if (x_new.size() != law.params.p())
        throw DimensionError("predictive_mean: x dimension mismatch");
    Vector z = law.mean_factor.transpose() * (x_new - law.mean_x);
    return law.mean_y + law.params.C * z;
}

Matrix predictive_mean_rows(const PredictiveLaw& law, const Matrix& X_new) {
    if (X_new.cols() != law.params.p())
        throw DimensionError("predictive_mean: x dimension mismatch");
    Matrix Z = (X_new.rowwise() - law.mean_x.transpose()) * law.mean_factor;
    Matrix out = Z * law.params.C.transpose();
    out.rowwise() += law.mean_y.transpose();
    return out;
}

Matrix predictive_cov(const PredictiveLaw& law, const Vector&) {
    const int q = law.params.q();
    Matrix v = law.params.C * law.cond_m.asDiagonal() * law.params.C.transpose() +
               law.params.sigma_f2 * Matrix::Identity(q, q);
    return v;
}

double standardized_quadratic(const PredictiveLaw& law, const Vector& resid) {
    if (law.params.sigma_f2 <= 0.0)
        throw NumericalError("standardized_quadratic: singular conditional covariance");
    const int r = law.params.r();
    Vector proj = law.params.C.transpose() * resid;
    double qform = resid.squaredNorm();
    for (int i = 0; i < r; ++i)
        qform -= law.cond_m(i) / (law.cond_m(i) + law.params.sigma_f2) * proj(i) * proj(i);
    return qform / law.params.sigma_f2;
}

double predictive_cov_logdet(const PredictiveLaw& law) {
    const int q = law.params.q(), r = law.params.r();
    double logdet = (q - r) * std::log(law.params.sigma_f2);
    for (int i = 0; i < r; ++i) logdet += std::log(law.cond_m(i) + law.params.sigma_f2);
    return logdet;
}

double select_gamma(const PplsParams& params, const Matrix& X_tr, const Matrix& Y_tr,
                    std::vector<double> grid, int k_in, RngStream& rng) {
    if (grid.empty()) throw ConfigError("select_gamma: empty candidate grid");
    std::sort(grid.begin(), grid.end());
    if (grid.size() == 1) return grid.front();
    if (k_in < 2) throw ConfigError("select_gamma: need at least 2 inner folds");
    const long n = X_tr.rows();
    if (n < 2 * k_in) throw ConfigError("select_gamma: too few rows for inner CV");

    std::vector<long> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (long i = n - 1; i > 0; --i) {
        long j = static_cast<long>(draw_uniform(rng) * (i + 1));
        std::swap(idx[i], idx[std::min(j, i)]);
    }

    std::vector<double> sse(grid.size(), 0.0);
    for (int fold = 0; fold < k_in; ++fold) {
        const long lo = fold * n / k_in, hi = (fold + 1) * n / k_in;
        const long n_val = hi - lo, n_tr = n - n_val;
        Matrix Xt(n_tr, X_tr.cols()), Yt(n_tr, Y_tr.cols());
        Matrix Xv(n_val, X_tr.cols()), Yv(n_val, Y_tr.cols());
        long it = 0, iv = 0;
        for (long k = 0; k < n; ++k) {
            if (k >= lo && k < hi) {
                Xv.row(iv) = X_tr.row(idx[k]);
                Yv.row(iv++) = Y_tr.row(idx[k]);
            } else {
                Xt.row(it) = X_tr.row(idx[k]);
                Yt.row(it++) = Y_tr.row(idx[k]);
            }
        }
        Vector mx = Xt.colwise().mean(), my = Yt.colwise().mean();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            PredictiveLaw law = make_law(params, mx, my, grid[g]);
            Matrix pred = predictive_mean_rows(law, Xv);
            sse[g] += (pred - Yv).squaredNorm();
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (sse[g] < sse[best]) best = g;  // ties keep the smaller gamma
    return grid[best];
}

double calibrate_kappa(const PredictiveLaw& law, const Matrix& X_val, const Matrix& Y_val) {
    if (X_val.rows() != Y_val.rows()) throw DimensionError("calibrate_kappa: row mismatch");
    const long n = X_val.rows();
    if (n < 1) throw InputError("calibrate_kappa: need at least one validation row");
    const int q = law.params.q();
    Matrix pred = predictive_mean_rows(law, X_val);
    double total = 0.0;
    for (long i = 0; i < n; ++i) {
        Vector resid = (Y_val.row(i) - pred.row(i)).transpose();
        total += standardized_quadratic(law, resid);
    }
    return total / (static_cast<double>(n) * q);
}

double floor_kappa(double kappa) {
    if (kappa < 1e-12) {
        std::cerr << "warning: degenerate kappa " << fmt17(kappa) << " floored to 1e-12\n";
        return 1e-12;
    }
    return kappa;
}

IntervalBounds intervals(const PredictiveLaw& law, const Matrix& X_new, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("intervals: alpha must lie in (0,1)");
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const int q = law.params.q();

    Vector diag_v(q);  // diagonal of the conditional covariance
    for (int j = 0; j < q; ++j) {
        double v = law.params.sigma_f2;
        for (int i = 0; i < law.params.r(); ++i)
            v += law.cond_m(i) * law.params.C(j, i) * law.params.C(j, i);
        diag_v(j) = v;
    }
    Vector half = (law.kappa * diag_v.array()).sqrt() * z;

    Matrix mean = predictive_mean_rows(law, X_new);
    IntervalBounds out;
    out.lo = mean.rowwise() - half.transpose();
    out.hi = mean.rowwise() + half.transpose();
    return out;
}

FoldMetrics evaluate(const Matrix& pred, const std::vector<IntervalBounds>& bounds,
                     const Matrix& Y_true, const std::vector<double>& alphas) {
    if (pred.rows() != Y_true.rows() || pred.cols() != Y_true.cols())
        throw DimensionError("evaluate: prediction/truth shape mismatch");
    if (bounds.size() != alphas.size())
        throw DimensionError("evaluate: need one interval set per alpha");

    FoldMetrics metrics;
    const double n_entries = static_cast<double>(pred.rows()) * pred.cols();
    Matrix err = pred - Y_true;
    metrics.mse = err.squaredNorm() / n_entries;
    metrics.mae = err.cwiseAbs().sum() / n_entries;

    Vector col_mean = Y_true.colwise().mean();
    double var = (Y_true.rowwise() - col_mean.transpose()).squaredNorm() / n_entries;
    metrics.r2 = (var > 0.0) ? 1.0 - metrics.mse / var : 0.0;

    metrics.coverage.resize(static_cast<int>(alphas.size()));
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const auto& iv = bounds[a];
        double inside = 0.0;
        for (int i = 0; i < Y_true.rows(); ++i)
            for (int j = 0; j < Y_true.cols(); ++j)
                if (Y_true(i, j) >= iv.lo(i, j) && Y_true(i, j) <= iv.hi(i, j)) inside += 1.0;
        metrics.coverage(static_cast<int>(a)) = inside / n_entries;
    }
    return metrics;
}

CalibrationTable calibration_table(const std::vector<double>& alphas,
                                   const std::vector<Vector>& fold_coverages) {
    CalibrationTable table;
    table.alphas = alphas;
    const int k = static_cast<int>(fold_coverages.size());
    const int na = static_cast<int>(alphas.size());
    table.coverage.resize(k, na);
    for (int f = 0; f < k; ++f) table.coverage.row(f) = fold_coverages[f].transpose();
    table.ace.resize(na);
    for (int a = 0; a < na; ++a) {
        double mean_cov = table.coverage.col(a).mean();
        table.ace(a) = std::abs(mean_cov - (1.0 - alphas[a]));
    }
    return table;
}

}  // namespace ppls
