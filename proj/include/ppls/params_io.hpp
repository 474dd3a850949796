#pragma once

#include <optional>
#include <string>

#include "ppls/model.hpp"

namespace ppls {

// Optional companions stored alongside the parameter vector so a fitted model
// file is self-contained for prediction.
struct ParamsFileExtras {
    std::optional<Vector> mean_x;
    std::optional<Vector> mean_y;
    std::optional<double> gamma;
    std::optional<double> kappa;
    std::optional<double> objective;
    std::optional<Vector> se_theta_t2;
    std::optional<Vector> se_b;
    std::optional<double> se_sigma_h2;
    std::optional<std::string> gaussianize_x;  // transform kind names
    std::optional<std::string> gaussianize_y;
};

// JSON-compatible structured text with keys
// {p,q,r,W,C,b,theta_t2,sigma_e2,sigma_f2,sigma_h2} plus any extras present.
// W and C are stored column-major; all numbers use 17 significant digits.
void save_params(const std::string& path, const PplsParams& params,
                 const ParamsFileExtras& extras = {});

std::pair<PplsParams, ParamsFileExtras> load_params(const std::string& path);

}  // namespace ppls
