// stochlab: run, validate and list experiments.
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stochtr/lab.hpp"

namespace lab = stochtr::lab;
using nlohmann::json;

namespace {

constexpr int kPass = 0, kCheckFailed = 1, kInvalid = 2;

bool load(const std::string& path, json& out) {
    std::ifstream is(path);
    if (!is) {
        std::cerr << "error: cannot open " << path << "\n";
        return false;
    }
    try {
        out = json::parse(is);
    } catch (const json::parse_error& e) {
        std::cerr << "error: " << path << ": " << e.what() << "\n";
        return false;
    }
    return true;
}

void print_diagnostics(const std::vector<lab::Diagnostic>& d) {
    for (const auto& x : d) std::cerr << (x.resource ? "resource: " : "invalid: ") << x.str() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochlab: stochastic transport experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "output directory (default: config 'output', else stochlab-out/<id>)");

    auto* val = app.add_subcommand("validate", "list every violated constraint of a config");
    val->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);

    auto* lst = app.add_subcommand("list", "list registered experiments");
    bool as_json = false;
    lst->add_flag("--json", as_json, "JSON output");

    auto* def = app.add_subcommand("defaults", "print the fully defaulted config of an experiment");
    std::string def_id;
    def->add_option("id", def_id, "experiment id")->required();
    def->add_option("--seed", seed, "seed to put in the config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kInvalid;
    }

    if (lst->parsed()) {
        if (as_json) {
            json j = json::array();
            for (const auto& e : lab::list_experiments())
                j.push_back({{"id", e.id}, {"description", e.description}, {"anchor", e.anchor}});
            std::cout << j.dump(2) << "\n";
        } else {
            for (const auto& e : lab::list_experiments())
                std::cout << std::left << std::setw(20) << e.id << e.description << "\n"
                          << std::setw(20) << "" << "[" << e.anchor << "]\n";
        }
        return kPass;
    }
    if (def->parsed()) {
        std::cout << lab::default_config(def_id, seed).dump(2) << "\n";
        return kPass;
    }

    json cfg;
    if (!load(config_path, cfg)) return kInvalid;

    if (val->parsed()) {
        const auto d = lab::validate(cfg);
        if (d.empty()) {
            std::cout << "ok\n";
            return kPass;
        }
        print_diagnostics(d);
        return kInvalid;
    }

    if (seed_opt->count() > 0 && cfg.is_object()) cfg["seed"] = seed;
    if (out_dir.empty()) {
        if (cfg.is_object() && cfg.contains("output") && cfg["output"].is_string())
            out_dir = cfg["output"].get<std::string>();
        else
            out_dir = "stochlab-out/" + (cfg.is_object() ? cfg.value("experiment", std::string("unknown")) : "unknown");
    }
    try {
        const auto rep = lab::run(cfg, out_dir);
        for (const auto& c : rep.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        std::cout << rep.experiment << " seed=" << rep.seed << " -> " << out_dir << " ("
                  << std::setprecision(3) << rep.wall_time_s << " s)\n";
        return rep.passed() ? kPass : kCheckFailed;
    } catch (const lab::ValidationFailed& e) {
        print_diagnostics(e.diagnostics);
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
}
