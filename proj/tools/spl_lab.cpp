#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "spl/experiment.hpp"
#include "spl/suites.hpp"

namespace fs = std::filesystem;
using namespace spl;

namespace {

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        size_t used = 0;
        double x = 0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
            throw ConfigError("sweep: bad value '" + item + "'");
        v.push_back(x);
    }
    return v;
}

void report(const RunResult& r) {
    std::printf("%s %s%s\n", r.manifest.value("status", "?").c_str(), r.dir.string().c_str(),
                r.reused ? " (existing outputs)" : "");
    if (r.manifest.contains("message")) std::printf("  %s\n", r.manifest["message"].get<std::string>().c_str());
    for (const auto& raise : r.manifest.value("t_raises", json::array()))
        std::printf("  raised t %g -> %g\n", raise["from"].get<double>(), raise["to"].get<double>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Singular perturbation lab: resolvent differences, Birman-Schwinger spectra and decay fits"};
    app.require_subcommand(1);

    std::string config, axis, values, suite, manifest, format = "csv", out;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    auto* run = app.add_subcommand("run", "run the tasks of one config");
    run->add_option("config", config, "config file (JSON)")->required();

    auto* sweep = app.add_subcommand("sweep", "run a config over values of one scalar field");
    sweep->add_option("config", config, "config file (JSON)")->required();
    sweep->add_option("--axis", axis, "dotted path of a scalar field, e.g. operator.t")->required();
    sweep->add_option("--values", values, "comma-separated values")->required();
    sweep->add_option("--workers", workers, "parallel runs")->check(CLI::PositiveNumber);

    auto* verify = app.add_subcommand("verify", "run an invariant suite");
    verify->add_option("suite", suite, "identities, kyfan, norms, measures or oracles")->required();

    auto* exp = app.add_subcommand("export", "collect the fits of a run");
    exp->add_option("manifest", manifest, "manifest.json of a run")->required()->check(CLI::ExistingFile);
    exp->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    exp->add_option("-o,--output", out, "write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    try {
        if (*run) {
            RunResult r = run_experiment(load_config(config), output_root());
            report(r);
            return r.exit_code;
        }
        if (*sweep) {
            fs::path table;
            auto rs = sweep_experiment(load_config(config), axis, parse_values(values), output_root(), workers, &table);
            int code = exit_ok;
            for (const auto& r : rs) {
                report(r);
                code = std::max(code, r.exit_code);
            }
            std::printf("table %s\n", table.string().c_str());
            return code;
        }
        if (*verify) {
            SuiteResult s;
            try {
                s = verify_suite(suite);
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "%s\n", e.what());
                return exit_validation;
            }
            for (const auto& l : s.lines)
                std::printf("%s  %s: %s\n", l.pass ? "PASS" : "FAIL", l.name.c_str(), l.detail.c_str());
            return s.pass() ? exit_ok : exit_failure;
        }
        std::string text = export_manifest(manifest, format);
        if (out.empty()) {
            std::cout << text;
        } else {
            std::ofstream f(out);
            f << text;
            if (!f) throw std::runtime_error("cannot write " + out);
        }
        return exit_ok;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "invalid: %s\n", e.what());
        return exit_validation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_numerical;
    }
}
