#include "ppls/stiefel.hpp"

#include <Eigen/QR>
#include <cmath>
#include <string>

namespace ppls::stiefel {

double orthonormality_error(const Matrix& w) {
    const int r = static_cast<int>(w.cols());
    return (w.transpose() * w - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
}

bool is_orthonormal(const Matrix& w, double tol) { return orthonormality_error(w) <= tol; }

Matrix qf(const Matrix& m) {
    const int p = static_cast<int>(m.rows());
    const int r = static_cast<int>(m.cols());
    if (r > p) throw DimensionError("qf: more columns than rows");

    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(p, r);
    Matrix rfac = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>();

    const double scale = m.cwiseAbs().maxCoeff();
    for (int j = 0; j < r; ++j) {
        double d = rfac(j, j);
        if (std::abs(d) <= 1e-13 * std::max(scale, 1.0))
            throw NumericalError("qf: rank-deficient input (R diagonal ~ 0 at column " +
                                 std::to_string(j) + ")");
        if (d < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

Matrix tangent_project(const Matrix& w, const Matrix& g) {
    if (g.rows() != w.rows() || g.cols() != w.cols())
        throw DimensionError("tangent_project: gradient shape does not match base point");
    Matrix wg = w.transpose() * g;
    Matrix sym = 0.5 * (wg + wg.transpose());
    return g - w * sym;
}

double tangent_error(const Matrix& w, const Matrix& xi) {
    Matrix s = w.transpose() * xi;
    return (s + s.transpose()).cwiseAbs().maxCoeff();
}

Matrix qr_retract(const Matrix& w, const Matrix& xi, double alpha) {
    if (xi.rows() != w.rows() || xi.cols() != w.cols())
        throw DimensionError("qr_retract: tangent shape does not match base point");
    if (alpha < 0.0) throw InputError("qr_retract: negative step size");
    try {
        return qf(w + alpha * xi);
    } catch (const NumericalError&) {
        throw NumericalError("qr_retract: W + alpha*Xi rank-deficient at alpha = " +
                             fmt17(alpha));
    }
}

Matrix random_stiefel(int p, int r, RngStream& rng) {
    if (r >= p || r < 1) throw DimensionError("random_stiefel: need 1 <= r < p");
    return qf(normal_matrix(p, r, rng));
}

}  // namespace ppls::stiefel
