#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace frachaos {

/// Config problems: parse errors carry the line number, range errors name the field.
struct ConfigError : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

struct SolverConfig {
    double hurst = 0;
    double horizon = 0;
    std::int64_t n_cells = 0;
    std::string a_kind = "constant";  // constant | polynomial
    std::vector<double> a_coefficients{0.0};
    std::string b_kind;  // phi-given | constant
    std::vector<double> b_data;
    std::string eta_kind;  // deterministic | finite-chaos | norm-sequence
    std::string eta_data;  // kept raw: norm sequences are not plain lists
    std::vector<double> eta_factor{1.0};
    int eta_levels = 40;
    int n_max = 12;
    std::int64_t n_paths = 1000;
    std::uint64_t seed = 0;
    double p = 0;
    double p_tilde = 0;
    double theta = 0;  // parse_config fills in the default
    std::string output_dir = "out";
    std::optional<double> operator_norm;

    double alpha() const { return 0.5 - hurst; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || trim(v.substr(used)) != "" || !std::isfinite(x))
        throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    return x;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || trim(v.substr(used)) != "") throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
    if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of numbers");
    return out;
}

}  // namespace detail

/// Flat `key = value` text with `#` comments. Unknown or repeated keys are errors.
inline SolverConfig parse_config(std::istream& in) {
    static const char* known[] = {"hurst",         "horizon",        "n_cells",       "a_spec.kind",
                                  "a_spec.coefficients", "b_spec.kind", "b_spec.data", "eta_spec.kind",
                                  "eta_spec.data", "eta_spec.factor", "eta_spec.levels", "n_max",
                                  "n_paths",       "seed",           "p",             "p_tilde",
                                  "theta",         "output_dir",     "operator_norm"};
    std::map<std::string, std::string> kv;
    std::string line;
    for (int no = 1; std::getline(in, line); ++no) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(no) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(no) + ": missing key");
        if (value.empty()) throw ConfigError("config line " + std::to_string(no) + ": missing value for " + key);
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw ConfigError("config line " + std::to_string(no) + ": unknown key '" + key + "'");
        if (!kv.emplace(key, value).second)
            throw ConfigError("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
    }

    auto need = [&](const char* k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw ConfigError(std::string(k) + ": missing required key");
        return it->second;
    };
    auto opt = [&](const char* k) -> const std::string* {
        auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };

    SolverConfig c;
    c.hurst = detail::parse_real("hurst", need("hurst"));
    if (c.hurst >= 0.5) throw ConfigError("hurst must be < 0.5");
    if (c.hurst <= 0.0) throw ConfigError("hurst must be > 0");
    c.horizon = detail::parse_real("horizon", need("horizon"));
    if (c.horizon <= 0.0) throw ConfigError("horizon must be > 0");
    c.n_cells = detail::parse_int("n_cells", need("n_cells"));
    if (c.n_cells < 8) throw ConfigError("n_cells must be >= 8");

    if (auto v = opt("a_spec.kind")) c.a_kind = *v;
    if (c.a_kind != "constant" && c.a_kind != "polynomial")
        throw ConfigError("a_spec.kind must be constant or polynomial");
    if (auto v = opt("a_spec.coefficients")) c.a_coefficients = detail::parse_list("a_spec.coefficients", *v);
    if (c.a_kind == "constant" && c.a_coefficients.size() != 1)
        throw ConfigError("a_spec.coefficients: constant drift takes exactly one value");

    c.b_kind = need("b_spec.kind");
    if (c.b_kind != "phi-given" && c.b_kind != "constant")
        throw ConfigError("b_spec.kind must be phi-given or constant");
    c.b_data = detail::parse_list("b_spec.data", need("b_spec.data"));
    if (c.b_kind == "constant" && c.b_data.size() != 1)
        throw ConfigError("b_spec.data: constant diffusion takes exactly one value");

    c.eta_kind = need("eta_spec.kind");
    if (c.eta_kind != "deterministic" && c.eta_kind != "finite-chaos" && c.eta_kind != "norm-sequence")
        throw ConfigError("eta_spec.kind must be deterministic, finite-chaos or norm-sequence");
    c.eta_data = need("eta_spec.data");
    if (c.eta_kind == "deterministic") {
        if (detail::parse_list("eta_spec.data", c.eta_data).size() != 1)
            throw ConfigError("eta_spec.data: deterministic eta takes exactly one value");
    } else if (c.eta_kind == "finite-chaos") {
        const auto v = detail::parse_list("eta_spec.data", c.eta_data);
        if (v.size() > 13) throw ConfigError("eta_spec.data: finite chaos supports levels up to 12");
    } else {
        const std::string d = c.eta_data;
        if (d.rfind("list:", 0) == 0) detail::parse_list("eta_spec.data", d.substr(5));
        else if (d.rfind("exp-growth:", 0) == 0) {
            if (detail::parse_real("eta_spec.data", detail::trim(d.substr(11))) <= 0.0)
                throw ConfigError("eta_spec.data: exp-growth constant must be > 0");
        } else if (d != "critical")
            throw ConfigError("eta_spec.data: norm sequence must be list:..., exp-growth:C or critical");
    }
    if (auto v = opt("eta_spec.factor")) c.eta_factor = detail::parse_list("eta_spec.factor", *v);
    if (auto v = opt("eta_spec.levels")) c.eta_levels = int(detail::parse_int("eta_spec.levels", *v));
    if (c.eta_levels < 6 || c.eta_levels > 65536) throw ConfigError("eta_spec.levels must lie in [6, 65536]");

    if (auto v = opt("n_max")) c.n_max = int(detail::parse_int("n_max", *v));
    if (c.n_max < 0) throw ConfigError("n_max must be >= 0");
    if (auto v = opt("n_paths")) c.n_paths = detail::parse_int("n_paths", *v);
    if (c.n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (auto v = opt("seed")) {
        const auto s = detail::parse_int("seed", *v);
        if (s < 0) throw ConfigError("seed must be >= 0");
        c.seed = std::uint64_t(s);
    }

    const double a = c.alpha();
    c.p = 0.5 * (2.0 + 1.0 / a);
    if (auto v = opt("p")) c.p = detail::parse_real("p", *v);
    if (!(c.p > 2.0)) throw ConfigError("p must be > 2");
    if (!(c.p * a < 1.0)) throw ConfigError("p must be < 1/alpha = " + std::to_string(1.0 / a));
    c.p_tilde = 0.5 * (2.0 + c.p);
    if (auto v = opt("p_tilde")) c.p_tilde = detail::parse_real("p_tilde", *v);
    if (!(c.p_tilde > 2.0)) throw ConfigError("p_tilde must be > 2");
    if (!(c.p_tilde < c.p)) {
        std::ostringstream m;
        m.precision(17);
        m << "p_tilde must be < p (got p_tilde = " << c.p_tilde << ", p = " << c.p << ")";
        throw ConfigError(m.str());
    }
    // Default θ puts (1 + e^{2θ}) times the Hölder ceiling at 2, clear of the exponent check.
    const double ceiling = std::min({(c.p - 2.0) / (2.0 * c.p), a, (1.0 - a * c.p) / c.p});
    c.theta = 0.5 * std::log(2.0 / ceiling - 1.0);
    if (auto v = opt("theta")) c.theta = detail::parse_real("theta", *v);
    if (auto v = opt("output_dir")) c.output_dir = *v;
    if (auto v = opt("operator_norm")) {
        c.operator_norm = detail::parse_real("operator_norm", *v);
        if (*c.operator_norm <= 0.0) throw ConfigError("operator_norm must be > 0");
    }
    return c;
}

inline SolverConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

/// key = value lines with every default filled in (the manifest snapshot).
inline std::string format_config(const SolverConfig& c) {
    std::ostringstream os;
    os.precision(17);
    auto list = [&](const std::vector<double>& v) {
        std::ostringstream l;
        l.precision(17);
        for (std::size_t i = 0; i < v.size(); ++i) l << (i ? ", " : "") << v[i];
        return l.str();
    };
    os << "hurst = " << c.hurst << "\nhorizon = " << c.horizon << "\nn_cells = " << c.n_cells
       << "\na_spec.kind = " << c.a_kind << "\na_spec.coefficients = " << list(c.a_coefficients)
       << "\nb_spec.kind = " << c.b_kind << "\nb_spec.data = " << list(c.b_data) << "\neta_spec.kind = " << c.eta_kind
       << "\neta_spec.data = " << c.eta_data << "\neta_spec.factor = " << list(c.eta_factor)
       << "\neta_spec.levels = " << c.eta_levels << "\nn_max = " << c.n_max << "\nn_paths = " << c.n_paths
       << "\nseed = " << c.seed << "\np = " << c.p << "\np_tilde = " << c.p_tilde << "\ntheta = " << c.theta
       << "\noutput_dir = " << c.output_dir << '\n';
    if (c.operator_norm) os << "operator_norm = " << *c.operator_norm << '\n';
    return os.str();
}

}  // namespace frachaos
