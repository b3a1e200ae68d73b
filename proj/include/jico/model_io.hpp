#pragma once

#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "jico/csv.hpp"
#include "jico/errors.hpp"
#include "jico/jico.hpp"

namespace jico {

// Self-describing JSON model document. Matrices are stored row-major with
// explicit shapes; gamma = infinity is encoded as the string "inf" so the
// file stays valid JSON.

inline constexpr int kModelFormatVersion = 1;

namespace io_detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json matrix_to_json(const MatrixXd& M) {
    ordered_json j;
    j["rows"] = M.rows();
    j["cols"] = M.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(M.size()));
    for (Index i = 0; i < M.rows(); ++i)
        for (Index jj = 0; jj < M.cols(); ++jj) data.push_back(M(i, jj));
    j["data"] = data;
    return j;
}

inline MatrixXd matrix_from_json(const ordered_json& j, const std::string& name) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (static_cast<Index>(data.size()) != rows * cols)
        throw IoError("model file: matrix '" + name + "' has wrong element count");
    MatrixXd M(rows, cols);
    std::size_t k = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index jj = 0; jj < cols; ++jj) M(i, jj) = data[k++].get<double>();
    return M;
}

inline ordered_json vector_to_json(const VectorXd& v) {
    std::vector<double> data(v.data(), v.data() + v.size());
    return ordered_json(data);
}

inline VectorXd vector_from_json(const ordered_json& j) {
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

}  // namespace io_detail

inline std::string model_to_json(const JicoModel& model) {
    using io_detail::ordered_json;
    ordered_json j;
    j["format_version"] = kModelFormatVersion;
    j["a"] = model.a();
    if (std::isinf(model.gamma)) j["gamma"] = "inf";
    else j["gamma"] = model.gamma;
    j["p"] = model.p();
    j["K"] = model.K();
    ordered_json kg = ordered_json::array();
    for (Index g = 0; g < model.n_groups(); ++g) kg.push_back(model.K_g(g));
    j["K_g"] = kg;
    j["group_labels"] = model.group_labels;
    j["x_means"] = io_detail::vector_to_json(model.centering.x_means);
    j["y_mean"] = model.centering.y_mean;
    j["W"] = io_detail::matrix_to_json(model.W);
    ordered_json wg = ordered_json::array();
    for (const auto& m : model.W_g) wg.push_back(io_detail::matrix_to_json(m));
    j["W_g"] = wg;
    j["U"] = io_detail::matrix_to_json(model.U);
    ordered_json ug = ordered_json::array();
    for (const auto& m : model.U_g) ug.push_back(io_detail::matrix_to_json(m));
    j["U_g"] = ug;
    j["alpha"] = io_detail::vector_to_json(model.alpha);
    ordered_json ag = ordered_json::array();
    for (const auto& v : model.alpha_g) ag.push_back(io_detail::vector_to_json(v));
    j["alpha_g"] = ag;
    j["converged"] = model.converged;
    j["n_iter"] = model.n_iter;
    j["tol"] = model.tol;
    j["truncated"] = model.truncated;
    j["max_fp_residual"] = model.max_fp_residual;
    return j.dump(2) + "\n";
}

inline void save_model(const std::string& path, const JicoModel& model) {
    atomic_write(path, model_to_json(model));
}

inline JicoModel model_from_json(const std::string& text) {
    using io_detail::ordered_json;
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("model file: invalid JSON: ") + e.what());
    }
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw IoError("model file: unsupported format version");

    JicoModel model;
    if (j.at("gamma").is_string()) {
        if (j.at("gamma").get<std::string>() != "inf")
            throw IoError("model file: bad gamma value");
        model.gamma = std::numeric_limits<double>::infinity();
    } else {
        model.gamma = j.at("gamma").get<double>();
    }
    const Index p = j.at("p").get<Index>();
    model.group_labels = j.at("group_labels").get<std::vector<std::string>>();
    const Index G = static_cast<Index>(model.group_labels.size());

    model.centering.x_means = io_detail::vector_from_json(j.at("x_means"));
    model.centering.y_mean = j.at("y_mean").get<double>();
    if (model.centering.x_means.size() != p)
        throw IoError("model file: x_means length does not match p");

    model.W = io_detail::matrix_from_json(j.at("W"), "W");
    model.U = io_detail::matrix_from_json(j.at("U"), "U");
    model.alpha = io_detail::vector_from_json(j.at("alpha"));
    const Index K = j.at("K").get<Index>();
    if (model.W.cols() != K || (K > 0 && model.W.rows() != p))
        throw IoError("model file: W shape does not match declared K and p");
    if (model.U.rows() != K || (K > 0 && model.U.cols() != p))
        throw IoError("model file: U shape does not match declared K and p");
    if (model.alpha.size() != K) throw IoError("model file: alpha length does not match K");
    if (model.W.rows() == 0) model.W.resize(p, 0);
    if (model.U.cols() == 0) model.U.resize(K, p);

    const auto& kg = j.at("K_g");
    if (static_cast<Index>(kg.size()) != G ||
        static_cast<Index>(j.at("W_g").size()) != G ||
        static_cast<Index>(j.at("U_g").size()) != G ||
        static_cast<Index>(j.at("alpha_g").size()) != G)
        throw IoError("model file: per-group blocks do not match group count");

    model.requested_K = K;
    for (Index g = 0; g < G; ++g) {
        const Index Kg = kg[static_cast<std::size_t>(g)].get<Index>();
        MatrixXd Wg = io_detail::matrix_from_json(j.at("W_g")[static_cast<std::size_t>(g)], "W_g");
        MatrixXd Ug = io_detail::matrix_from_json(j.at("U_g")[static_cast<std::size_t>(g)], "U_g");
        VectorXd ag = io_detail::vector_from_json(j.at("alpha_g")[static_cast<std::size_t>(g)]);
        if (Wg.cols() != Kg || (Kg > 0 && Wg.rows() != p))
            throw IoError("model file: W_g shape mismatch in group " + std::to_string(g));
        if (Ug.rows() != Kg || (Kg > 0 && Ug.cols() != p))
            throw IoError("model file: U_g shape mismatch in group " + std::to_string(g));
        if (ag.size() != Kg)
            throw IoError("model file: alpha_g length mismatch in group " + std::to_string(g));
        if (Wg.rows() == 0) Wg.resize(p, 0);
        if (Ug.cols() == 0) Ug.resize(Kg, p);
        model.W_g.push_back(std::move(Wg));
        model.U_g.push_back(std::move(Ug));
        model.alpha_g.push_back(std::move(ag));
        model.requested_K_g.push_back(Kg);
    }

    model.converged = j.at("converged").get<bool>();
    model.n_iter = j.at("n_iter").get<int>();
    model.tol = j.at("tol").get<double>();
    model.truncated = j.value("truncated", false);
    model.max_fp_residual = j.value("max_fp_residual", 0.0);
    return model;
}

inline JicoModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return model_from_json(text);
}

}  // namespace jico
