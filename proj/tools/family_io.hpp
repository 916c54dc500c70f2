#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "classb/classb.hpp"

// Family files, value parsing and JSON serialization shared by the CLI subcommands.
namespace classb::cli {

using json = nlohmann::ordered_json;

/// A number written as a constant expression: "2", "-0.5", "1/3", "2^-3".
inline Number parse_number(const std::string& text) {
    Expr e = parse(text);
    if (!e.is_constant()) throw ArgumentError("expected a number, got '" + text + "'");
    return e.value();
}

inline double parse_double(const std::string& text) { return parse_number(text).to_double(); }

/// "a,b,c" into numbers.
inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
    if (out.empty()) throw ArgumentError("empty list");
    return out;
}

/// name=value pairs.
inline std::map<std::string, double> parse_assignments(const std::vector<std::string>& items) {
    std::map<std::string, double> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ArgumentError("expected name=value, got '" + item + "'");
        out[item.substr(0, eq)] = parse_double(item.substr(eq + 1));
    }
    return out;
}

/// A mean point from either name=value pairs or plain values in mean-variable order.
inline Vector parse_point(const FamilySpec& f, const std::vector<std::string>& items) {
    const bool named = !items.empty() && items.front().find('=') != std::string::npos;
    Vector x(f.dim);
    if (!named) {
        if (items.size() != f.dim)
            throw ArgumentError(f.name + ": point needs " + std::to_string(f.dim) + " coordinates");
        for (std::size_t i = 0; i < f.dim; ++i) x[i] = parse_double(items[i]);
        return x;
    }
    const auto values = parse_assignments(items);
    for (std::size_t i = 0; i < f.dim; ++i) {
        auto it = values.find(f.mean_vars[i]);
        if (it == values.end()) throw ArgumentError(f.name + ": point is missing " + f.mean_vars[i]);
        x[i] = it->second;
    }
    if (values.size() != f.dim) throw ArgumentError(f.name + ": point names a variable that is not a mean coordinate");
    return x;
}

inline double json_bound(const json& v, double infinite) {
    if (v.is_null()) return infinite;
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return parse_double(s);
    }
    throw ArgumentError("domain bounds must be numbers, strings or null");
}

/// Family file (JSON):
///   {"name": "...", "mean_vars": ["x1", ...], "V": [["x1", "0"], ...],
///    "domain": {"x1": [0, null], ...}, "constraints": ["..."], "constants": {"n": 5},
///    "laplace": "...", "z_vars": ["z1", ...], "s_char": ["...", ...], "reference_mean": [...],
///    "sampling": {"x1": [0.5, 4], ...}}
/// Only mean_vars, V and domain are required; null bounds are infinite. "sampling" sets the finite
/// box used for seeded checks and the verify grid.
inline FamilySpec family_from_json(const json& j) {
    try {
        const auto mean_vars = j.at("mean_vars").get<std::vector<std::string>>();
        const auto v = j.at("V").get<std::vector<std::vector<std::string>>>();
        if (j.contains("chart")) throw ArgumentError("family file: charted families cannot be loaded from a file");
        Box box;
        for (const auto& [name, bounds] : j.at("domain").items()) {
            if (!bounds.is_array() || bounds.size() != 2)
                throw ArgumentError("family file: domain." + name + " must be [lo, hi]");
            box[name] = {json_bound(bounds[0], -std::numeric_limits<double>::infinity()),
                         json_bound(bounds[1], std::numeric_limits<double>::infinity())};
        }
        Bindings constants;
        if (j.contains("constants"))
            for (const auto& [name, value] : j.at("constants").items()) constants[name] = value.get<double>();
        const std::string name = j.value("name", std::string("user"));
        FamilySpec f = from_variance(v, mean_vars, box, constants, name);
        if (j.contains("sampling")) {
            Box sampling;
            for (const auto& [name, bounds] : j.at("sampling").items()) {
                if (!bounds.is_array() || bounds.size() != 2 || !box.count(name))
                    throw ArgumentError("family file: sampling." + name + " must be [lo, hi] for a domain variable");
                sampling[name] = {json_bound(bounds[0], 0.0), json_bound(bounds[1], 0.0)};
                if (!(std::isfinite(sampling[name].lo) && std::isfinite(sampling[name].hi) && sampling[name].lo < sampling[name].hi))
                    throw ArgumentError("family file: sampling." + name + " must be a finite interval");
            }
            f.domain.sampling = sampling;
            f.grid_box.clear();
        }
        if (j.contains("constraints"))
            for (const auto& c : j.at("constraints")) f.domain.constraints.push_back(parse(c.get<std::string>()));
        if (j.contains("laplace")) {
            std::vector<std::string> z_vars;
            if (j.contains("z_vars")) {
                z_vars = j.at("z_vars").get<std::vector<std::string>>();
            } else if (f.dim == 1) {
                z_vars = {"z"};
            } else {
                for (std::size_t i = 0; i < f.dim; ++i) z_vars.push_back("z" + std::to_string(i + 1));
            }
            if (z_vars.size() != f.dim) throw ArgumentError("family file: z_vars must have one name per coordinate");
            f.laplace = LaplaceTransform{parse(j.at("laplace").get<std::string>()), z_vars};
        }
        if (j.contains("s_char")) {
            std::vector<Expr> s;
            for (const auto& e : j.at("s_char")) s.push_back(parse(e.get<std::string>()));
            if (s.size() != f.dim) throw ArgumentError("family file: s_char must have one entry per coordinate");
            f.s_char = s;
        }
        if (j.contains("reference_mean")) {
            f.reference_mean = j.at("reference_mean").get<std::vector<double>>();
            f.bind_mean(f.reference_mean);
        }
        return f;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("family file: ") + e.what());
    }
}

inline FamilySpec load_family_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open family file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ArgumentError("family file '" + path + "': " + e.what());
    }
    return family_from_json(j);
}

/// Finite numbers as numbers; infinities and NaN as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vector_json(std::span<const double> v) {
    json out = json::array();
    for (double d : v) out.push_back(number(d));
    return out;
}

inline json matrix_json(const NumMatrix& m) {
    json out = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        out.push_back(row);
    }
    return out;
}

inline json matrix_json(const ExprMatrix& m) {
    json out = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(to_string(m(i, j)));
        out.push_back(row);
    }
    return out;
}

inline json family_json(const FamilySpec& f) {
    json j;
    j["name"] = f.name;
    j["dim"] = f.dim;
    j["mean_vars"] = f.mean_vars;
    j["V"] = matrix_json(f.variance);
    json domain = json::object();
    for (const auto& [name, iv] : f.domain.box) domain[name] = json::array({number(iv.lo), number(iv.hi)});
    j["domain"] = domain;
    json constraints = json::array();
    for (const auto& c : f.domain.constraints) constraints.push_back(to_string(c));
    j["constraints"] = constraints;
    j["domain_approximate"] = f.domain.approximate;
    json constants = json::object();
    for (const auto& [name, value] : f.constants) constants[name] = number(value);
    j["constants"] = constants;
    if (f.laplace) {
        j["laplace"] = to_string(f.laplace->expr);
        j["z_vars"] = f.laplace->z_vars;
    }
    if (f.s_char) {
        json s = json::array();
        for (const auto& e : *f.s_char) s.push_back(to_string(e));
        j["s_char"] = s;
    }
    if (f.chart) {
        json chart;
        chart["vars"] = f.chart->vars;
        json mean = json::array();
        for (const auto& e : f.chart->mean) mean.push_back(to_string(e));
        chart["mean"] = mean;
        j["chart"] = chart;
    }
    if (!f.reference_mean.empty()) j["reference_mean"] = vector_json(f.reference_mean);
    j["verified"] = f.verified;
    if (!f.note.empty()) j["note"] = f.note;
    return j;
}

inline json index_json(const MultiIndex& k) { return json(k.entries()); }

/// Space-separated multi-index for CSV cells.
inline std::string index_cell(const MultiIndex& k) {
    std::string s;
    for (std::size_t i = 0; i < k.dim(); ++i) s += (i ? " " : "") + std::to_string(k[i]);
    return s;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace classb::cli
