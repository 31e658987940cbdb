#pragma once

// CSV input (rows = observations, RFC-4180 numeric subset) and the
// PathDocument JSON schema. Numbers are written in shortest round-trip
// form so serialize/parse reproduces every turning point bit for bit.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plus/errors.hpp"
#include "plus/linalg.hpp"
#include "plus/path.hpp"
#include "plus/penalty.hpp"

namespace plus {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kPathFormat = "plus-path/1";

// shortest decimal that parses back to the same double
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ------------------------------------------------------------------
// CSV

inline std::vector<std::vector<double>> read_csv(const std::string& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t end = line.find(',', start);
            if (end == std::string::npos) end = line.size();
            const std::string cell = line.substr(start, end - start);
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size() && cell.find_first_not_of(" \t", used) != std::string::npos)
                    throw std::invalid_argument(cell);
                if (!std::isfinite(v))
                    throw IoError(path + ":" + std::to_string(lineno) + ": non-finite value");
                row.push_back(v);
            } catch (const std::logic_error&) {
                throw IoError(path + ":" + std::to_string(lineno) + ": cannot parse '" + cell
                              + "' as a number");
            }
            if (end == line.size()) break;
            start = end + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError(path + ":" + std::to_string(lineno) + ": row length mismatch ("
                          + std::to_string(row.size()) + " vs "
                          + std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no data rows");
    return rows;
}

inline Matrix read_csv_matrix(const std::string& path, bool skip_header) {
    const auto rows = read_csv(path, skip_header);
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

inline Vector read_csv_vector(const std::string& path, bool skip_header) {
    const auto rows = read_csv(path, skip_header);
    Vector v;
    for (const auto& row : rows) {
        if (row.size() != 1) throw IoError(path + ": expected a single-column response file");
        v.push_back(row[0]);
    }
    return v;
}

// ------------------------------------------------------------------
// PathDocument

inline nlohmann::json penalty_to_json(const PenaltySpec& spec) {
    return {{"kind", penalty_kind_name(spec.kind)},
            {"gamma", spec.gamma()},
            {"knots", spec.knots},
            {"intercepts", spec.intercepts},
            {"slopes", spec.slopes}};
}

inline PenaltySpec penalty_from_json(const nlohmann::json& j) {
    PenaltySpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    spec.kind = kind == "lasso"  ? PenaltyKind::lasso
                : kind == "mcp"  ? PenaltyKind::mcp
                : kind == "scad" ? PenaltyKind::scad
                                 : PenaltyKind::custom;
    spec.knots = j.at("knots").get<std::vector<double>>();
    spec.intercepts = j.at("intercepts").get<std::vector<double>>();
    spec.slopes = j.at("slopes").get<std::vector<double>>();
    validate(spec);
    return spec;
}

inline nlohmann::json path_to_json(const SolutionPath& path, const Vector& col_norms,
                                   bool standardized) {
    nlohmann::json doc;
    doc["format"] = kPathFormat;
    nlohmann::json meta;
    meta["version"] = kToolVersion;
    meta["p"] = path.p;
    meta["penalty"] = penalty_to_json(path.penalty);
    meta["standardized"] = standardized;
    meta["scales"] = col_norms;
    meta["termination"] = termination_name(path.termination);
    meta["diagnostic"] = path.diagnostic;
    meta["k_star"] = path.k_star();
    meta["tol_fit"] = path.tol_fit;
    doc["meta"] = std::move(meta);
    doc["z_tilde"] = path.z_tilde;

    nlohmann::json pts = nlohmann::json::array();
    for (const auto& pt : path.points) {
        nlohmann::json jp;
        jp["k"] = pt.k;
        jp["tau"] = pt.tau;
        jp["lambda"] = pt.lambda();
        jp["xi"] = pt.xi;
        jp["delta"] = pt.delta;
        jp["hit_index"] = pt.hit_index;
        nlohmann::json act = nlohmann::json::array();
        for (std::size_t i = 0; i < pt.active.size(); ++i)
            act.push_back({{"index", pt.active[i]},
                           {"b", pt.b_active[i]},
                           {"eta", pt.eta_active[i]},
                           {"slope", pt.slope_active[i]}});
        jp["active"] = std::move(act);
        pts.push_back(std::move(jp));
    }
    doc["points"] = std::move(pts);

    if (path.ray) {
        nlohmann::json jr;
        nlohmann::json act = nlohmann::json::array();
        for (std::size_t i = 0; i < path.ray->active.size(); ++i)
            act.push_back({{"index", path.ray->active[i]},
                           {"eta", path.ray->eta_active[i]},
                           {"slope", path.ray->slope_active[i]}});
        jr["active"] = std::move(act);
        doc["final_ray"] = std::move(jr);
    } else {
        doc["final_ray"] = nullptr;
    }
    return doc;
}

struct LoadedPath {
    SolutionPath path;
    Vector col_norms;
    bool standardized = true;
};

inline LoadedPath path_from_json(const nlohmann::json& doc) {
    if (doc.at("format").get<std::string>() != kPathFormat)
        throw IoError("unsupported path document format");
    LoadedPath out;
    const auto& meta = doc.at("meta");
    out.path.p = meta.at("p").get<std::size_t>();
    out.path.penalty = penalty_from_json(meta.at("penalty"));
    out.standardized = meta.at("standardized").get<bool>();
    out.col_norms = meta.at("scales").get<Vector>();
    const std::string term = meta.at("termination").get<std::string>();
    out.path.termination = term == "perfect-fit" ? Termination::perfect_fit
                           : term == "step-cap"  ? Termination::step_cap
                                                 : Termination::stalled;
    out.path.diagnostic = meta.value("diagnostic", std::string());
    out.path.tol_fit = meta.value("tol_fit", 0.0);
    out.path.z_tilde = doc.at("z_tilde").get<Vector>();

    for (const auto& jp : doc.at("points")) {
        TurningPoint pt;
        pt.k = jp.at("k").get<std::size_t>();
        pt.tau = jp.at("tau").get<double>();
        pt.xi = jp.at("xi").get<int>();
        pt.delta = jp.at("delta").get<double>();
        pt.hit_index = jp.at("hit_index").get<int>();
        for (const auto& ja : jp.at("active")) {
            pt.active.push_back(ja.at("index").get<std::size_t>());
            pt.b_active.push_back(ja.at("b").get<double>());
            pt.eta_active.push_back(ja.at("eta").get<int>());
            pt.slope_active.push_back(ja.at("slope").get<double>());
        }
        out.path.points.push_back(std::move(pt));
    }
    if (!doc.at("final_ray").is_null()) {
        FinalRay ray;
        for (const auto& ja : doc.at("final_ray").at("active")) {
            ray.active.push_back(ja.at("index").get<std::size_t>());
            ray.eta_active.push_back(ja.at("eta").get<int>());
            ray.slope_active.push_back(ja.at("slope").get<double>());
        }
        out.path.ray = std::move(ray);
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw IoError("cannot write " + path);
    outf << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace plus
