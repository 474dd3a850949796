#include "ppls/inference.hpp"

#include <cmath>
#include <limits>

namespace ppls {

FisherBlock fisher_block(const PplsParams& params, const ProjectedStats& stats, int i) {
    if (i < 0 || i >= params.r()) throw DimensionError("fisher_block: component out of range");
    ComponentChannel ch = channel_at(stats, params.sigma_e2, params.sigma_f2, i);
    const double s = params.theta_t2(i), b = params.b(i), g = params.sigma_h2;

    FisherBlock block;
    const double jss = 0.5 * ell_d2_theta2(ch, s, b, g);
    const double jbb = 0.5 * ell_d2_b(ch, s, b, g);
    const double jsb = 0.5 * ell_d2_theta2_b(ch, s, b, g);
    block.J << jss, jsb, jsb, jbb;
    block.positive_definite = (jss > 0.0) && (jss * jbb - jsb * jsb > 0.0);
    return block;
}

double fisher_sigma_h(const PplsParams& params, const ProjectedStats& stats) {
    double total = 0.0;
    for (int i = 0; i < params.r(); ++i) {
        ComponentChannel ch = channel_at(stats, params.sigma_e2, params.sigma_f2, i);
        total += ell_d2_sigma_h2(ch, params.theta_t2(i), params.b(i), params.sigma_h2);
    }
    return 0.5 * total;
}

StandardErrors standard_errors(const PplsParams& params, const ProjectedStats& stats, long N) {
    if (N < 1) throw InputError("standard_errors: need N >= 1");
    const int r = params.r();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    StandardErrors se;
    se.se_theta_t2 = Vector::Constant(r, nan);
    se.se_b = Vector::Constant(r, nan);
    se.block_defined.assign(r, false);
    se.condition = Vector::Constant(r, nan);

    for (int i = 0; i < r; ++i) {
        FisherBlock block = fisher_block(params, stats, i);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(block.J);
        const double lmin = eig.eigenvalues()(0), lmax = eig.eigenvalues()(1);
        se.condition(i) = (lmin != 0.0) ? std::abs(lmax / lmin)
                                        : std::numeric_limits<double>::infinity();
        const double det = block.J(0, 0) * block.J(1, 1) - block.J(0, 1) * block.J(1, 0);
        if (!block.positive_definite || det <= 0.0 || !std::isfinite(se.condition(i)) ||
            se.condition(i) > 1e14)
            continue;  // SE undefined; condition diagnostic retained
        // inverse of the 2x2 block
        const double inv00 = block.J(1, 1) / det;
        const double inv11 = block.J(0, 0) / det;
        se.se_theta_t2(i) = std::sqrt(inv00 / static_cast<double>(N));
        se.se_b(i) = std::sqrt(inv11 / static_cast<double>(N));
        se.block_defined[i] = true;
    }

    const double j_h = fisher_sigma_h(params, stats);
    se.se_sigma_h2 = (j_h > 0.0) ? std::sqrt(1.0 / (static_cast<double>(N) * j_h)) : nan;
    return se;
}

}  // namespace ppls
