#include <fracdecay/commands.hpp>
#include <fracdecay/config.hpp>
#include <fracdecay/types.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace fracdecay;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, numerical_error = 3 };

struct Flags
{
    std::string config_path;
    std::string preset;
    std::string out;
    int threads = -1;
    bool dry_run = false;
    std::vector<std::string> overrides;
};

// defaults < preset < config file < command line
config::RunConfig load(const Flags& f)
{
    config::KeyValues file;
    if (!f.config_path.empty()) file = config::KeyValues::parse_file(f.config_path);

    std::string preset = f.preset;
    if (preset.empty())
        if (const auto* e = file.find("run.figure")) preset = e->value;

    config::KeyValues kv;
    if (!preset.empty() && preset != "none") {
        try {
            kv = config::preset(preset);
        } catch (const ConfigError& err) {
            const auto* e = file.find("run.figure");
            if (f.preset.empty() && e) throw ConfigError(e->where() + ": run.figure: " + err.what());
            throw;
        }
    }
    kv.merge(file);
    if (!f.out.empty()) kv.set("output.dir", f.out, "--out");
    if (f.threads >= 0) kv.set("run.threads", std::to_string(f.threads), "--threads");
    for (const auto& o : f.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + o + "'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        kv.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "--set " + o);
    }
    return config::resolve(kv);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fractional decay of emitters at a lossy photonic band edge"};
    app.require_subcommand(1);

    Flags flags;
    app.add_option("--config", flags.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--preset", flags.preset, "figure preset")
        ->check(CLI::IsMember(config::preset_names()));
    app.add_option("--out", flags.out, "output directory");
    app.add_option("--threads", flags.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--dry-run", flags.dry_run, "print the resolved parameters and exit");
    app.add_option("--set", flags.overrides, "override one key, e.g. --set emitter.beta=1e-7");

    using Command = commands::Report (*)(const config::RunConfig&);
    const std::vector<std::tuple<std::string, std::string, Command>> table{
        {"bands", "band structure along a path or on the k-mesh", commands::bands},
        {"ldos", "projected LDOS histogram and band-edge curves", commands::ldos},
        {"kbe-map", "band-edge coefficient through the Wigner-Seitz cell", commands::kbe_map},
        {"decay", "emitter population versus time", commands::decay},
        {"df-scan", "degree of fractional decay versus coupling", commands::df_scan},
    };
    std::map<CLI::App*, Command> run;
    for (const auto& [name, help, fn] : table) {
        auto* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        run[sub] = fn;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        const auto cfg = load(flags);
        if (flags.dry_run) {
            config::write_resolved(std::cout, cfg);
            return ok;
        }
        for (const auto& [sub, fn] : run) {
            if (!sub->parsed()) continue;
            const auto report = fn(cfg);
            for (const auto& s : report.summary) std::cout << s << '\n';
            for (const auto& f : report.files) std::cout << "wrote " << f << '\n';
        }
        return ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
}
