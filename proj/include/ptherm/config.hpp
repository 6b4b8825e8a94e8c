// config.hpp: run configuration, the key=value file format and its validation.
//
// File format: one `key = value` per line, `#` starts a comment, sections use
// dotted keys (coupling.ax = 0.5). Command-line flags use the same keys in
// kebab-case (--coupling-ax, --t-max) and override the file.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ptherm/errors.hpp"
#include "ptherm/experiments.hpp"
#include "ptherm/quantum_core.hpp"

namespace ptherm {

struct RunConfig {
    double omega0 = 1.0;
    double temperature = kPaperTemperature;
    double lambda = 0.0;
    double gamma_drude = 1.0;
    Eigen::Vector3d coupling = Eigen::Vector3d::UnitX();
    std::string initial_state = "psi1";
    int depth = 60;
    double dt = 0.0;  // <= 0: automatic
    double t_max = 500.0;
    double steady_tol = 1e-6;
    double steady_window = 200.0;
    double record_interval = 0.05;
    std::string output = "trajectory.csv";
    std::string sweep_case = "I";
    std::vector<double> sweep_lambdas{kPaperLambdas.begin(), kPaperLambdas.end()};

    std::vector<std::string> overridden;  // keys given both in the file and as flags
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v))
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    return v;
}

inline int parse_int(const std::string& key, const std::string& value) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
    if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of numbers");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline Eigen::Vector3d named_coupling(const std::string& key, const std::string& value) {
    if (value == "sx") return {1.0, 0.0, 0.0};
    if (value == "sxsz") return {0.5, 0.0, 0.5};
    const auto v = parse_list(key, value);
    if (v.size() != 3) throw ConfigError(key + ": expected sx, sxsz or ax,ay,az, got '" + value + "'");
    return {v[0], v[1], v[2]};
}

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table{
        {"omega0", [](RunConfig& c, const std::string& v) { c.omega0 = parse_number("omega0", v); }},
        {"temperature", [](RunConfig& c, const std::string& v) { c.temperature = parse_number("temperature", v); }},
        {"lambda", [](RunConfig& c, const std::string& v) { c.lambda = parse_number("lambda", v); }},
        {"gamma_drude", [](RunConfig& c, const std::string& v) { c.gamma_drude = parse_number("gamma_drude", v); }},
        {"coupling", [](RunConfig& c, const std::string& v) { c.coupling = named_coupling("coupling", v); }},
        {"coupling.ax", [](RunConfig& c, const std::string& v) { c.coupling.x() = parse_number("coupling.ax", v); }},
        {"coupling.ay", [](RunConfig& c, const std::string& v) { c.coupling.y() = parse_number("coupling.ay", v); }},
        {"coupling.az", [](RunConfig& c, const std::string& v) { c.coupling.z() = parse_number("coupling.az", v); }},
        {"initial_state", [](RunConfig& c, const std::string& v) { c.initial_state = v; }},
        {"depth", [](RunConfig& c, const std::string& v) { c.depth = parse_int("depth", v); }},
        {"dt", [](RunConfig& c, const std::string& v) { c.dt = v == "auto" ? 0.0 : parse_number("dt", v); }},
        {"t_max", [](RunConfig& c, const std::string& v) { c.t_max = parse_number("t_max", v); }},
        {"steady_tol", [](RunConfig& c, const std::string& v) { c.steady_tol = parse_number("steady_tol", v); }},
        {"steady_window", [](RunConfig& c, const std::string& v) { c.steady_window = parse_number("steady_window", v); }},
        {"record_interval",
         [](RunConfig& c, const std::string& v) { c.record_interval = parse_number("record_interval", v); }},
        {"output", [](RunConfig& c, const std::string& v) { c.output = v; }},
        {"sweep.case", [](RunConfig& c, const std::string& v) { c.sweep_case = v; }},
        {"sweep.lambdas", [](RunConfig& c, const std::string& v) { c.sweep_lambdas = parse_list("sweep.lambdas", v); }},
    };
    return table;
}

} // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : detail::setters()) keys.push_back(k);
    return keys;
}

/// coupling.ax -> coupling-ax, t_max -> t-max
inline std::string flag_name(const std::string& key) {
    std::string f = key;
    std::replace(f.begin(), f.end(), '.', '-');
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    const auto& table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) {
        std::string valid;
        for (const auto& [k, _] : table) valid += (valid.empty() ? "" : ", ") + k;
        throw ConfigError("unknown key '" + key + "'; valid keys: " + valid);
    }
    it->second(c, value);
}

/// key -> value pairs in file order.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + body + "'");
        std::string key = detail::trim(std::string_view(body).substr(0, eq));
        std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void validate(const RunConfig& c) {
    auto need = [](bool ok, const std::string& field, const std::string& constraint) {
        if (!ok) throw ConfigError(field + ": must be " + constraint);
    };
    need(c.omega0 > 0.0, "omega0", "> 0");
    need(c.temperature > 0.0, "temperature", "> 0");
    need(c.lambda >= 0.0, "lambda", ">= 0");
    need(c.gamma_drude > 0.0, "gamma_drude", "> 0");
    need(c.coupling.allFinite() && c.coupling.norm() > 0.0, "coupling", "a non-zero vector");
    need(c.depth >= 1, "depth", ">= 1");
    need(c.t_max > 0.0, "t_max", "> 0");
    need(c.steady_tol > 0.0, "steady_tol", "> 0");
    need(c.record_interval > 0.0, "record_interval", "> 0");
    need(c.steady_window >= c.record_interval, "steady_window", ">= record_interval");
    need(!c.output.empty(), "output", "a non-empty path");
    need(c.sweep_case == "I" || c.sweep_case == "II", "sweep.case", "I or II");
    for (std::size_t i = 0; i < c.sweep_lambdas.size(); ++i) {
        need(c.sweep_lambdas[i] >= 0.0, "sweep.lambdas", "non-negative");
        need(i == 0 || c.sweep_lambdas[i] > c.sweep_lambdas[i - 1], "sweep.lambdas", "strictly increasing");
    }
    try {
        validate(BathParams{c.lambda, c.gamma_drude, 1.0 / c.temperature});
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("temperature/gamma_drude: ") + e.what());
    }
}

/// File values first, then flags; a key set by both is recorded in `overridden`.
inline RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file,
                                const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig c;
    for (const auto& [k, v] : file) set_key(c, k, v);
    for (const auto& [k, v] : flags) {
        set_key(c, k, v);
        const bool in_file = std::any_of(file.begin(), file.end(), [&](const auto& kv) { return kv.first == k; });
        if (in_file && std::find(c.overridden.begin(), c.overridden.end(), k) == c.overridden.end())
            c.overridden.push_back(k);
    }
    validate(c);
    return c;
}

/// psi1 | psi2 | gibbs | mixed | "rx,ry,rz"
inline Operator2 initial_state(const RunConfig& c) {
    const auto& s = c.initial_state;
    if (s == "psi1") return psi1_state();
    if (s == "psi2") return psi2_state();
    if (s == "gibbs") return gibbs_state(1.0 / c.temperature, c.omega0);
    if (s == "mixed") return density_from_bloch({0.3, 0.3, 0.3});
    const auto v = detail::parse_list("initial_state", s);
    if (v.size() != 3) throw ConfigError("initial_state: expected psi1, psi2, gibbs, mixed or rx,ry,rz");
    const BlochVector r(v[0], v[1], v[2]);
    if (r.norm() > 1.0 + kBlochRadiusTol) throw ConfigError("initial_state: Bloch vector must have |r| <= 1");
    return density_from_bloch(r);
}

inline Eigen::Vector3d case_coupling(const std::string& name) {
    if (name == "I") return {1.0, 0.0, 0.0};
    if (name == "II") return {0.5, 0.0, 0.5};
    throw ConfigError("sweep.case: must be I or II");
}

inline EngineConfig engine_config(const RunConfig& c) {
    EngineConfig e;
    e.depth = c.depth;
    e.omega0 = c.omega0;
    e.gamma = c.gamma_drude;
    e.integrator.dt = c.dt;
    e.integrator.t_max = c.t_max;
    e.integrator.steady_tol = c.steady_tol;
    e.integrator.steady_window = c.steady_window;
    e.integrator.record_interval = c.record_interval;
    return e;
}

} // namespace ptherm
