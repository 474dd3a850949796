#include "ppls/scalar_objective.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

namespace ppls {

ProjectedStats projected_stats(const Matrix& W, const Matrix& C, const SampleMoments& moments,
                               double sigma_e2, double sigma_f2) {
    if (W.rows() != moments.S_xx.rows() || C.rows() != moments.S_yy.rows() ||
        W.cols() != C.cols())
        throw DimensionError("projected_stats: loading/moment shapes do not match");
    if (sigma_e2 <= 0.0 || sigma_f2 <= 0.0)
        throw InputError("projected_stats: noise variances must be positive");

    const int r = static_cast<int>(W.cols());
    const double inv_ef = 1.0 / std::sqrt(sigma_e2 * sigma_f2);
    ProjectedStats stats;
    stats.Q_x.resize(r);
    stats.Q_y.resize(r);
    stats.Q_xy.resize(r);
    Matrix SxxW = moments.S_xx * W;   // O(r p^2)
    Matrix SyyC = moments.S_yy * C;   // O(r q^2)
    Matrix SxyC = moments.S_xy * C;   // O(r p q)
    for (int i = 0; i < r; ++i) {
        stats.Q_x(i) = W.col(i).dot(SxxW.col(i)) / sigma_e2;
        stats.Q_y(i) = C.col(i).dot(SyyC.col(i)) / sigma_f2;
        stats.Q_xy(i) = 2.0 * W.col(i).dot(SxyC.col(i)) * inv_ef;
    }
    stats.tr_sxx = moments.S_xx.trace();
    stats.tr_syy = moments.S_yy.trace();
    return stats;
}

ComponentCoeffs component_coeffs(const PplsParams& params) {
    const int r = params.r();
    const double a = params.sigma_e2, f2 = params.sigma_f2, g = params.sigma_h2;
    ComponentCoeffs c;
    c.D.resize(r);
    c.Phi_x.resize(r);
    c.Phi_y.resize(r);
    c.Phi_xy.resize(r);
    const double se_sf = std::sqrt(a * f2);
    for (int i = 0; i < r; ++i) {
        const double s = params.theta_t2(i);
        const double b = params.b(i);
        const double d = (f2 + g) * (s + a) + b * b * s * a;
        c.D(i) = d;
        c.Phi_x(i) = 1.0 - a * (f2 + g + b * b * s) / d;
        c.Phi_y(i) = 1.0 - f2 * (a + s) / d;
        c.Phi_xy(i) = se_sf * b * s / d;
    }
    return c;
}

ComponentChannel channel_at(const ProjectedStats& stats, double sigma_e2, double sigma_f2,
                            int i) {
    return ComponentChannel{stats.Q_x(i), stats.Q_y(i), stats.Q_xy(i), sigma_e2, sigma_f2};
}

namespace {

// The scalar summand in numerator/denominator form: ell = ln D - N/D with
//   D = (f2+g)(s+a) + b^2 s a,
//   N = (f2+g) s Qx + g (s+a) Qy + b^2 s a Qy + b s P,
// where P = se*sf*Qxy restores the cross term's natural scale.
struct EllWork {
    double a, f2, g, s, b;
    double Qx, Qy, P;
    double D, N;

    EllWork(const ComponentChannel& ch, double theta2, double bb, double sigma_h2)
        : a(ch.sigma_e2),
          f2(ch.sigma_f2),
          g(sigma_h2),
          s(theta2),
          b(bb),
          Qx(ch.Q_x),
          Qy(ch.Q_y),
          P(std::sqrt(ch.sigma_e2 * ch.sigma_f2) * ch.Q_xy) {
        D = (f2 + g) * (s + a) + b * b * s * a;
        N = (f2 + g) * s * Qx + g * (s + a) * Qy + b * b * s * a * Qy + b * s * P;
    }

    double Ds() const { return (f2 + g) + b * b * a; }
    double Ns() const { return (f2 + g) * Qx + g * Qy + b * b * a * Qy + b * P; }
    double Db() const { return 2.0 * b * s * a; }
    double Nb() const { return 2.0 * b * s * a * Qy + s * P; }
    double Dg() const { return s + a; }
    double Ng() const { return s * Qx + (s + a) * Qy; }

    double first(double Dv, double Nv) const { return (Dv * (D + N) - Nv * D) / (D * D); }
};

}  // namespace

double ell_value(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    return std::log(w.D) - w.N / w.D;
}

double ell_d_theta2(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    return w.first(w.Ds(), w.Ns());
}

double ell_d_b(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    return w.first(w.Db(), w.Nb());
}

double ell_d_sigma_h2(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    return w.first(w.Dg(), w.Ng());
}

double ell_d2_theta2(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    const double Ds = w.Ds(), Ns = w.Ns(), D = w.D, N = w.N;
    return -Ds * Ds / (D * D) + 2.0 * Ds * (Ns * D - N * Ds) / (D * D * D);
}

double ell_d2_sigma_h2(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    const double Dg = w.Dg(), Ng = w.Ng(), D = w.D, N = w.N;
    return -Dg * Dg / (D * D) + 2.0 * Dg * (Ng * D - N * Dg) / (D * D * D);
}

double ell_d2_b(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    const double D = w.D, N = w.N, Db = w.Db(), Nb = w.Nb();
    const double Dbb = 2.0 * w.s * w.a;
    const double Nbb = 2.0 * w.s * w.a * w.Qy;
    const double D2 = D * D;
    return (Dbb * D - Db * Db) / D2 -
           ((Nbb * D - N * Dbb) * D2 - 2.0 * D * Db * (Nb * D - N * Db)) / (D2 * D2);
}

double ell_d2_theta2_b(const ComponentChannel& ch, double theta2, double b, double sigma_h2) {
    EllWork w(ch, theta2, b, sigma_h2);
    const double D = w.D, N = w.N;
    const double Ds = w.Ds(), Ns = w.Ns(), Db = w.Db(), Nb = w.Nb();
    const double Dsb = 2.0 * b * w.a;
    const double Nsb = 2.0 * b * w.a * w.Qy + w.P;
    const double D2 = D * D;
    return (Dsb * D - Ds * Db) / D2 -
           ((Nsb * D + Ns * Db - Nb * Ds - N * Dsb) * D2 - 2.0 * D * Db * (Ns * D - N * Ds)) /
               (D2 * D2);
}

NllParts scalar_nll_parts(const PplsParams& params, const ProjectedStats& stats) {
    const int p = params.p(), q = params.q(), r = params.r();
    NllParts out;
    out.ell.resize(r);
    for (int i = 0; i < r; ++i) {
        ComponentChannel ch = channel_at(stats, params.sigma_e2, params.sigma_f2, i);
        double li = ell_value(ch, params.theta_t2(i), params.b(i), params.sigma_h2);
        if (!std::isfinite(li))
            throw NumericalError("scalar_nll: non-finite summand at component " +
                                 std::to_string(i));
        out.ell(i) = li;
    }
    out.value = (p - r) * std::log(params.sigma_e2) + (q - r) * std::log(params.sigma_f2) +
                stats.tr_sxx / params.sigma_e2 + stats.tr_syy / params.sigma_f2 + out.ell.sum();
    if (!std::isfinite(out.value)) throw NumericalError("scalar_nll: non-finite objective");
    return out;
}

NllParts scalar_nll_detailed(const PplsParams& params, const SampleMoments& moments) {
    ProjectedStats stats =
        projected_stats(params.W, params.C, moments, params.sigma_e2, params.sigma_f2);
    return scalar_nll_parts(params, stats);
}

double scalar_nll(const PplsParams& params, const SampleMoments& moments) {
    return scalar_nll_detailed(params, moments).value;
}

double dense_nll(const PplsParams& params, const SampleMoments& moments) {
    const int p = params.p(), q = params.q();
    Matrix sigma = assemble_joint_cov(params);
    Matrix S(p + q, p + q);
    S.topLeftCorner(p, p) = moments.S_xx;
    S.topRightCorner(p, q) = moments.S_xy;
    S.bottomLeftCorner(q, p) = moments.S_xy.transpose();
    S.bottomRightCorner(q, q) = moments.S_yy;

    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NumericalError("dense_nll: joint covariance not positive definite");
    double logdet = 0.0;
    for (int i = 0; i < p + q; ++i) logdet += std::log(llt.matrixL()(i, i));
    logdet *= 2.0;
    return logdet + llt.solve(S).trace();
}

std::pair<Matrix, Matrix> euclid_grads_from_stats(const PplsParams& params,
                                                  const SampleMoments& moments,
                                                  const ComponentCoeffs& coeffs) {
    const double a = params.sigma_e2, f2 = params.sigma_f2;
    const double se_sf = std::sqrt(a * f2);
    Vector dx = coeffs.Phi_x / a;
    Vector dy = coeffs.Phi_y / f2;
    Vector dxy = coeffs.Phi_xy / se_sf;
    Matrix gw = -2.0 * (moments.S_xx * params.W * dx.asDiagonal() +
                        moments.S_xy * params.C * dxy.asDiagonal());
    Matrix gc = -2.0 * (moments.S_yy * params.C * dy.asDiagonal() +
                        moments.S_xy.transpose() * params.W * dxy.asDiagonal());
    return {std::move(gw), std::move(gc)};
}

std::pair<Matrix, Matrix> euclid_grads(const PplsParams& params, const SampleMoments& moments) {
    if (params.W.rows() != moments.S_xx.rows() || params.C.rows() != moments.S_yy.rows())
        throw DimensionError("euclid_grads: parameter/moment shapes do not match");
    return euclid_grads_from_stats(params, moments, component_coeffs(params));
}

Vector scalar_block_grads(const PplsParams& params, const ProjectedStats& stats) {
    const int r = params.r();
    if (params.sigma_h2 <= 0.0)
        throw InputError("scalar_block_grads: requires interior sigma_h2 > 0");
    Vector grad(2 * r + 1);
    double g_sigma_h2 = 0.0;
    for (int i = 0; i < r; ++i) {
        ComponentChannel ch = channel_at(stats, params.sigma_e2, params.sigma_f2, i);
        const double s = params.theta_t2(i), b = params.b(i), g = params.sigma_h2;
        grad(2 * i) = s * ell_d_theta2(ch, s, b, g);
        grad(2 * i + 1) = b * ell_d_b(ch, s, b, g);
        g_sigma_h2 += ell_d_sigma_h2(ch, s, b, g);
    }
    grad(2 * r) = params.sigma_h2 * g_sigma_h2;
    return grad;
}

}  // namespace ppls
