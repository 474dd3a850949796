#include "ppls/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ppls/stiefel.hpp"

namespace ppls {

void validate_params(const PplsParams& params) {
    const int p = params.p(), q = params.q(), r = params.r();
    if (r < 1) throw DimensionError("params: r must be >= 1");
    if (r >= std::min(p, q)) throw DimensionError("params: need r < min(p, q)");
    if (params.C.cols() != r || params.b.size() != r || params.theta_t2.size() != r)
        throw DimensionError("params: inconsistent component counts");
    if (!stiefel::is_orthonormal(params.W) || !stiefel::is_orthonormal(params.C))
        throw InputError("params: loadings are not orthonormal");
    if ((params.b.array() <= 0.0).any()) throw InputError("params: b must be positive");
    if ((params.theta_t2.array() <= 0.0).any())
        throw InputError("params: theta_t2 must be positive");
    if (params.sigma_e2 <= 0.0 || params.sigma_f2 <= 0.0)
        throw InputError("params: observation noise variances must be positive");
    if (params.sigma_h2 < 0.0 || (params.sigma_h2 == 0.0 && !params.pcca_mode))
        throw InputError("params: sigma_h2 must be positive outside PCCA mode");
}

NoiseLaw NoiseLaw::parse(const std::string& name) {
    NoiseLaw law;
    if (name == "gaussian") {
        law.kind = Kind::Gaussian;
    } else if (name == "student_t" || name == "t5") {
        law.kind = Kind::StudentT;
        law.nu = 5.0;
    } else if (name == "t10") {
        law.kind = Kind::StudentT;
        law.nu = 10.0;
    } else if (name == "mixture") {
        law.kind = Kind::GaussianMixture;
    } else if (name == "poisson") {
        law.kind = Kind::CenteredPoisson;
    } else {
        throw ConfigError("unknown noise law: " + name);
    }
    return law;
}

std::string NoiseLaw::name() const {
    switch (kind) {
        case Kind::Gaussian: return "gaussian";
        case Kind::StudentT: return nu == 10.0 ? "t10" : "student_t";
        case Kind::GaussianMixture: return "mixture";
        case Kind::CenteredPoisson: return "poisson";
    }
    return "gaussian";
}

Matrix assemble_joint_cov(const PplsParams& params) {
    validate_params(params);
    const int p = params.p(), q = params.q();
    const Vector& t2 = params.theta_t2;
    const Vector b2t2 = params.b.array().square() * t2.array();

    Matrix sigma(p + q, p + q);
    sigma.topLeftCorner(p, p) =
        params.W * t2.asDiagonal() * params.W.transpose() + params.sigma_e2 * Matrix::Identity(p, p);
    Matrix sxy = params.W * (t2.array() * params.b.array()).matrix().asDiagonal() *
                 params.C.transpose();
    sigma.topRightCorner(p, q) = sxy;
    sigma.bottomLeftCorner(q, p) = sxy.transpose();
    sigma.bottomRightCorner(q, q) =
        params.C * (b2t2.array() + params.sigma_h2).matrix().asDiagonal() * params.C.transpose() +
        params.sigma_f2 * Matrix::Identity(q, q);
    return sigma;
}

bool ComponentOrder::is_identity() const {
    for (std::size_t k = 0; k < perm.size(); ++k)
        if (perm[k] != static_cast<int>(k) || signs[k] != 1.0) return false;
    return true;
}

ComponentOrder component_order(const PplsParams& params) {
    const int r = params.r();
    ComponentOrder order;
    order.perm.resize(r);
    order.signs.assign(r, 1.0);
    std::iota(order.perm.begin(), order.perm.end(), 0);
    std::stable_sort(order.perm.begin(), order.perm.end(), [&](int i, int j) {
        return params.theta_t2(i) * params.b(i) > params.theta_t2(j) * params.b(j);
    });
    for (int k = 0; k < r; ++k) {
        int imax = 0;
        params.W.col(order.perm[k]).cwiseAbs().maxCoeff(&imax);
        if (params.W(imax, order.perm[k]) < 0.0) order.signs[k] = -1.0;
    }
    return order;
}

Matrix apply_order_to_columns(const Matrix& m, const ComponentOrder& order) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t k = 0; k < order.perm.size(); ++k)
        out.col(static_cast<int>(k)) = order.signs[k] * m.col(order.perm[k]);
    return out;
}

PplsParams apply_component_order(const PplsParams& params, const ComponentOrder& order) {
    PplsParams out = params;
    out.W = apply_order_to_columns(params.W, order);  // joint flip keeps Sigma invariant
    out.C = apply_order_to_columns(params.C, order);
    for (std::size_t k = 0; k < order.perm.size(); ++k) {
        out.b(static_cast<int>(k)) = params.b(order.perm[k]);
        out.theta_t2(static_cast<int>(k)) = params.theta_t2(order.perm[k]);
    }
    return out;
}

PplsParams reorder_components(const PplsParams& params) {
    return apply_component_order(params, component_order(params));
}

namespace {

// Draws one noise scalar with unit variance under the given law.
double unit_noise(const NoiseLaw& law, RngStream& rng) {
    switch (law.kind) {
        case NoiseLaw::Kind::Gaussian:
            return draw_normal(rng);
        case NoiseLaw::Kind::StudentT: {
            if (law.nu <= 2.0) throw ConfigError("student_t noise needs nu > 2");
            std::student_t_distribution<double> dist(law.nu);
            return dist(rng) * std::sqrt((law.nu - 2.0) / law.nu);
        }
        case NoiseLaw::Kind::GaussianMixture: {
            // Two components at +-mu with weights 1/2; component variance set
            // so the total variance is 1: s^2 + mu^2 = 1 with mu/s = mixture_mu.
            const double ratio = law.mixture_mu;
            const double s2 = 1.0 / (1.0 + ratio * ratio);
            const double mu = ratio * std::sqrt(s2);
            double z = draw_normal(rng) * std::sqrt(s2);
            return (draw_uniform(rng) < 0.5) ? z + mu : z - mu;
        }
        case NoiseLaw::Kind::CenteredPoisson: {
            if (law.lambda <= 0.0) throw ConfigError("poisson noise needs lambda > 0");
            std::poisson_distribution<long> dist(law.lambda);
            return (static_cast<double>(dist(rng)) - law.lambda) / std::sqrt(law.lambda);
        }
    }
    throw ConfigError("unknown noise law");
}

}  // namespace

std::pair<Matrix, Matrix> sample_dataset(const PplsParams& params, long N, const NoiseLaw& law,
                                         RngStream& rng) {
    const int p = params.p(), q = params.q(), r = params.r();
    if (N < 2) throw InputError("sample_dataset: need N >= 2");
    if ((params.theta_t2.array() < 0.0).any() || params.sigma_e2 < 0.0 || params.sigma_f2 < 0.0 ||
        params.sigma_h2 < 0.0)
        throw InputError("sample_dataset: negative variances");

    const double se = std::sqrt(params.sigma_e2);
    const double sf = std::sqrt(params.sigma_f2);
    const double sh = std::sqrt(params.sigma_h2);
    const Vector st = params.theta_t2.array().sqrt();

    Matrix X(N, p), Y(N, q);
    Vector t(r), u(r);
    for (long n = 0; n < N; ++n) {
        for (int k = 0; k < r; ++k) t(k) = st(k) * draw_normal(rng);
        for (int k = 0; k < r; ++k) u(k) = t(k) * params.b(k) + sh * draw_normal(rng);
        for (int j = 0; j < p; ++j) X(n, j) = se * unit_noise(law, rng);
        X.row(n) += (params.W * t).transpose();
        for (int j = 0; j < q; ++j) Y(n, j) = sf * unit_noise(law, rng);
        Y.row(n) += (params.C * u).transpose();
    }
    return {std::move(X), std::move(Y)};
}

SampleMoments sample_moments(const Matrix& X, const Matrix& Y) {
    if (X.rows() != Y.rows()) throw DimensionError("sample_moments: row counts differ");
    const long N = X.rows();
    if (N < 2) throw InputError("sample_moments: need N >= 2");

    SampleMoments m;
    m.N = N;
    m.mean_x = X.colwise().mean();
    m.mean_y = Y.colwise().mean();
    Matrix Xc = X.rowwise() - m.mean_x.transpose();
    Matrix Yc = Y.rowwise() - m.mean_y.transpose();
    const double inv_n = 1.0 / static_cast<double>(N);
    m.S_xx = inv_n * (Xc.transpose() * Xc);
    m.S_yy = inv_n * (Yc.transpose() * Yc);
    m.S_xy = inv_n * (Xc.transpose() * Yc);
    m.S_xx = 0.5 * (m.S_xx + m.S_xx.transpose()).eval();
    m.S_yy = 0.5 * (m.S_yy + m.S_yy.transpose()).eval();
    return m;
}

PplsParams pcca_specialize(const PplsParams& params) {
    PplsParams out = params;
    out.b.setOnes();
    out.sigma_h2 = 0.0;
    out.pcca_mode = true;
    return out;
}

}  // namespace ppls
