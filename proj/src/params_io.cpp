#include "ppls/params_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace ppls {

namespace {

// Writes numbers ourselves so every value carries 17 significant digits.
void write_vector(std::ostream& out, const Vector& v) {
    out << '[';
    for (int i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << fmt17(v(i));
    }
    out << ']';
}

void write_matrix_colmajor(std::ostream& out, const Matrix& m) {
    out << '[';
    for (int j = 0; j < m.cols(); ++j) {
        for (int i = 0; i < m.rows(); ++i) {
            if (i || j) out << ',';
            out << fmt17(m(i, j));
        }
    }
    out << ']';
}

Vector vector_from_json(const nlohmann::json& j) {
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
    return v;
}

Matrix matrix_from_json_colmajor(const nlohmann::json& j, int rows, int cols) {
    if (static_cast<int>(j.size()) != rows * cols)
        throw InputError("params file: matrix size mismatch");
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = j[k++].get<double>();
    return m;
}

}  // namespace

void save_params(const std::string& path, const PplsParams& params,
                 const ParamsFileExtras& extras) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write params file: " + path);

    out << "{\n";
    out << "  \"p\": " << params.p() << ",\n";
    out << "  \"q\": " << params.q() << ",\n";
    out << "  \"r\": " << params.r() << ",\n";
    out << "  \"W\": ";
    write_matrix_colmajor(out, params.W);
    out << ",\n  \"C\": ";
    write_matrix_colmajor(out, params.C);
    out << ",\n  \"b\": ";
    write_vector(out, params.b);
    out << ",\n  \"theta_t2\": ";
    write_vector(out, params.theta_t2);
    out << ",\n  \"sigma_e2\": " << fmt17(params.sigma_e2);
    out << ",\n  \"sigma_f2\": " << fmt17(params.sigma_f2);
    out << ",\n  \"sigma_h2\": " << fmt17(params.sigma_h2);
    if (params.pcca_mode) out << ",\n  \"pcca_mode\": true";

    auto emit_vec = [&](const char* key, const std::optional<Vector>& v) {
        if (!v) return;
        out << ",\n  \"" << key << "\": ";
        write_vector(out, *v);
    };
    auto emit_num = [&](const char* key, const std::optional<double>& v) {
        if (!v) return;
        out << ",\n  \"" << key << "\": " << fmt17(*v);
    };
    emit_vec("mean_x", extras.mean_x);
    emit_vec("mean_y", extras.mean_y);
    emit_num("gamma", extras.gamma);
    emit_num("kappa", extras.kappa);
    emit_num("objective", extras.objective);
    emit_vec("se_theta_t2", extras.se_theta_t2);
    emit_vec("se_b", extras.se_b);
    emit_num("se_sigma_h2", extras.se_sigma_h2);
    if (extras.gaussianize_x) out << ",\n  \"gaussianize_x\": \"" << *extras.gaussianize_x << "\"";
    if (extras.gaussianize_y) out << ",\n  \"gaussianize_y\": \"" << *extras.gaussianize_y << "\"";
    out << "\n}\n";
}

std::pair<PplsParams, ParamsFileExtras> load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open params file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError("params file parse failure: " + std::string(e.what()));
    }

    PplsParams params;
    const int p = j.at("p").get<int>();
    const int q = j.at("q").get<int>();
    const int r = j.at("r").get<int>();
    params.W = matrix_from_json_colmajor(j.at("W"), p, r);
    params.C = matrix_from_json_colmajor(j.at("C"), q, r);
    params.b = vector_from_json(j.at("b"));
    params.theta_t2 = vector_from_json(j.at("theta_t2"));
    params.sigma_e2 = j.at("sigma_e2").get<double>();
    params.sigma_f2 = j.at("sigma_f2").get<double>();
    params.sigma_h2 = j.at("sigma_h2").get<double>();
    params.pcca_mode = j.value("pcca_mode", false);

    ParamsFileExtras extras;
    if (j.contains("mean_x")) extras.mean_x = vector_from_json(j["mean_x"]);
    if (j.contains("mean_y")) extras.mean_y = vector_from_json(j["mean_y"]);
    if (j.contains("gamma")) extras.gamma = j["gamma"].get<double>();
    if (j.contains("kappa")) extras.kappa = j["kappa"].get<double>();
    if (j.contains("objective")) extras.objective = j["objective"].get<double>();
    if (j.contains("se_theta_t2")) extras.se_theta_t2 = vector_from_json(j["se_theta_t2"]);
    if (j.contains("se_b")) extras.se_b = vector_from_json(j["se_b"]);
    if (j.contains("se_sigma_h2")) extras.se_sigma_h2 = j["se_sigma_h2"].get<double>();
    if (j.contains("gaussianize_x")) extras.gaussianize_x = j["gaussianize_x"].get<std::string>();
    if (j.contains("gaussianize_y")) extras.gaussianize_y = j["gaussianize_y"].get<std::string>();
    return {std::move(params), std::move(extras)};
}

}  // namespace ppls
