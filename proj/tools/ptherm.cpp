// ptherm: simulate one trajectory, sweep lambda for a coupling case, or run the
// acceptance checks.
//
// exit status: 0 ok, 1 configuration or input error, 2 numerical failure,
// 3 verify finished but at least one check failed.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ptherm/acceptance.hpp"
#include "ptherm/config.hpp"
#include "ptherm/experiments.hpp"

namespace {

using namespace ptherm;
using json = nlohmann::json;

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kChecksFailed = 3 };

struct ConfigOptions {
    std::string file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App* cmd, ConfigOptions& co) {
    cmd->add_option("--config", co.file, "key=value configuration file")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
        std::string names = "--" + flag_name(key);
        if (key == "sweep.case") names += ",--case";
        if (key == "sweep.lambdas") names += ",--lambdas";
        co.options[key] = cmd->add_option(names, co.values[key], "sets " + key);
    }
}

std::vector<std::pair<std::string, std::string>> given_flags(const ConfigOptions& co) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, opt] : co.options)
        if (opt->count() > 0) out.emplace_back(key, co.values.at(key));
    return out;
}

struct Resolved {
    RunConfig config;
    std::vector<std::pair<std::string, std::string>> file, flags;

    bool given(const std::string& prefix) const {
        for (const auto* list : {&file, &flags})
            for (const auto& kv : *list)
                if (kv.first.rfind(prefix, 0) == 0) return true;
        return false;
    }
};

Resolved resolve(const ConfigOptions& co) {
    Resolved r;
    if (!co.file.empty()) r.file = parse_config_text(read_text_file(co.file));
    r.flags = given_flags(co);
    r.config = resolve_config(r.file, r.flags);
    return r;
}

json config_json(const RunConfig& c) {
    json j;
    j["omega0"] = c.omega0;
    j["temperature"] = c.temperature;
    j["lambda"] = c.lambda;
    j["gamma_drude"] = c.gamma_drude;
    j["coupling"] = {{"ax", c.coupling.x()}, {"ay", c.coupling.y()}, {"az", c.coupling.z()}};
    j["initial_state"] = c.initial_state;
    j["depth"] = c.depth;
    j["dt"] = c.dt;
    j["t_max"] = c.t_max;
    j["steady_tol"] = c.steady_tol;
    j["steady_window"] = c.steady_window;
    j["record_interval"] = c.record_interval;
    j["output"] = c.output;
    j["sweep"] = {{"case", c.sweep_case}, {"lambdas", c.sweep_lambdas}};
    j["overridden_by_flags"] = c.overridden;
    return j;
}

json record_json(const TrajectoryRecord& rec) {
    const auto& m = rec.meta;
    json j;
    j["solver"] = m.solver;
    j["lambda"] = m.lambda;
    j["gamma"] = m.gamma;
    j["beta"] = m.beta;
    j["omega0"] = m.omega0;
    j["coupling"] = {m.coupling.x(), m.coupling.y(), m.coupling.z()};
    j["depth"] = m.depth;
    j["dt"] = m.dt;
    j["rows"] = rec.rows.size();
    j["steady"] = rec.steady;
    if (rec.steady) j["steady_time"] = rec.steady_time;
    const BlochVector r = bloch_unchecked(rec.terminal_state());
    j["terminal_bloch"] = {r.x(), r.y(), r.z()};
    j["notes"] = rec.notes;
    return j;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << j.dump(2) << '\n';
    if (!f) throw IoError("write to '" + path + "' failed");
}

std::string sidecar(const std::string& csv) { return csv + ".meta.json"; }

int cmd_simulate(const ConfigOptions& co) {
    const auto r = resolve(co);
    const auto& c = r.config;
    for (const auto& k : c.overridden) std::cerr << "note: flag overrides file value for " << k << '\n';
    const auto rec = run_single(c.coupling, c.lambda, c.temperature, initial_state(c), engine_config(c));
    emit_csv(rec, c.output);
    write_json(sidecar(c.output), {{"command", "simulate"}, {"config", config_json(c)}, {"run", record_json(rec)}});
    for (const auto& n : rec.notes) std::cerr << "note: " << n << '\n';
    const BlochVector b = bloch_unchecked(rec.terminal_state());
    std::cout << "wrote " << c.output << " (" << rec.rows.size() << " rows), "
              << (rec.steady ? "steady at t=" + format_double(rec.steady_time) : std::string("not steady"))
              << ", r = (" << format_double(b.x()) << ", " << format_double(b.y()) << ", " << format_double(b.z())
              << ")\n";
    return kOk;
}

int cmd_sweep(const ConfigOptions& co) {
    auto r = resolve(co);
    auto& c = r.config;
    if (!r.given("output")) c.output = "sweep.csv";
    const Eigen::Vector3d coupling = r.given("coupling") ? c.coupling : case_coupling(c.sweep_case);
    c.coupling = coupling;
    const unsigned threads = sweep_threads();
    const auto sweep = run_case(coupling, c.sweep_lambdas, c.temperature, initial_roster(), engine_config(c), threads);

    emit_csv(sweep, c.output);
    const std::filesystem::path base(c.output);
    const std::string stem = (base.parent_path() / base.stem()).string();
    json runs = json::array();
    for (const auto& p : sweep.points)
        for (std::size_t i = 0; i < p.runs.size(); ++i) {
            const std::string path = stem + ".lambda_" + format_double(p.lambda) + ".state_" + std::to_string(i) + ".csv";
            emit_csv(p.runs[i], path);
            json j = record_json(p.runs[i]);
            j["path"] = path;
            j["initial_state_index"] = i;
            runs.push_back(j);
        }
    json points = json::array();
    for (const auto& p : sweep.points)
        points.push_back({{"lambda", p.lambda}, {"all_steady", p.all_steady}, {"spread", p.spread}});
    write_json(sidecar(c.output), {{"command", "sweep"},
                                   {"config", config_json(c)},
                                   {"threads", threads},
                                   {"unique", sweep.unique()},
                                   {"points", points},
                                   {"runs", runs}});
    for (const auto& p : sweep.points)
        if (!p.all_steady) std::cerr << "note: lambda=" << format_double(p.lambda) << " has runs not steady by t_max\n";
    std::cout << "wrote " << c.output << " (" << sweep.points.size() << " points), postulate 2 deviation "
              << format_double(postulate2_deviation(sweep)) << '\n';
    return kOk;
}

int cmd_verify(bool quick, const std::string& csv_dir) {
    AcceptanceOptions opt;
    opt.quick = quick;
    opt.threads = sweep_threads();
    opt.csv_dir = csv_dir;
    opt.log = [](const std::string& s) { std::cerr << "[verify] " << s << '\n'; };
    bool all = true;
    for (const auto& res : run_acceptance(opt)) {
        std::cout << format_result(res) << std::endl;
        all = all && res.passed;
    }
    return all ? kOk : kChecksFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HEOM simulator for a qubit in a Drude-Lorentz bath, with pointer-basis checks"};
    app.require_subcommand(1);

    ConfigOptions sim_opts, sweep_opts;
    auto* sim = app.add_subcommand("simulate", "integrate one trajectory and write it as CSV");
    add_config_options(sim, sim_opts);
    auto* swp = app.add_subcommand("sweep", "steady states over a lambda list for several initial states");
    add_config_options(swp, sweep_opts);
    bool quick = false;
    std::string csv_dir;
    auto* ver = app.add_subcommand("verify", "run the acceptance checks and print PASS/FAIL per check");
    ver->add_flag("--quick", quick, "shallow hierarchies, for a fast smoke test");
    ver->add_option("--output-dir", csv_dir, "directory for the sweep and trajectory CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sim) return cmd_simulate(sim_opts);
        if (*swp) return cmd_sweep(sweep_opts);
        return cmd_verify(quick, csv_dir);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kConfig;
    }
}
