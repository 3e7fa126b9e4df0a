// jchsim - command-line driver for scenario runs, critical-damping sweeps and
// validation suites.

#include "jch/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> traj;
    std::optional<int> threads;

    void apply(jch::ScenarioConfig& c) const {
        if (seed) c.master_seed = *seed;
        if (traj) c.n_traj = *traj;
        if (threads) c.threads = *threads;
    }
};

jch::KeyValues load_or_empty(const std::string& path) {
    return path.empty() ? jch::KeyValues{} : jch::KeyValues::load(path);
}

void report(const jch::ScenarioResult& r, const std::filesystem::path& dir) {
    std::cout << r.config.name << ": " << (dir / r.config.name).string() << (r.config.format == "json" ? ".json" : ".csv");
    if (r.peaks) std::cout << "  negativity " << r.peaks->label();
    std::cout << "\n";
}

void report(const std::vector<jch::GammaCurve>& curves) {
    for (const auto& c : curves) {
        std::cout << "delta = " << jch::format_double(c.delta) << "\n";
        for (const auto& p : c.points) {
            std::cout << "  J = " << jch::format_double(p.J) << "  gamma_c = "
                      << (p.gamma_c ? jch::format_double(*p.gamma_c) : std::string("not bracketed"));
            if (p.gamma_c) std::cout << "  gamma_c/J = " << jch::format_double(*p.gamma_c / p.J);
            if (p.reentrant) std::cout << "  [reentrant]";
            if (!p.region_violations.empty()) std::cout << "  [region violations: " << p.region_violations.size() << "]";
            std::cout << "\n";
        }
        std::cout << "  slope = " << (c.slope ? jch::format_double(*c.slope) : std::string("n/a")) << "\n";
    }
}

int run_sweep(const jch::KeyValues& kv, const Overrides& ov, const std::filesystem::path& out) {
    jch::SweepConfig sw = jch::sweep_from(kv);
    ov.apply(sw.base);
    if (ov.threads) sw.threads = *ov.threads;
    report(jch::run_critical(sw, out));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jaynes-Cummings-Hubbard cavity-array simulator"};
    app.require_subcommand(1);
    Overrides ov;
    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--seed", ov.seed, "master seed");
        sub->add_option("--traj", ov.traj, "number of trajectories")->check(CLI::PositiveNumber);
        sub->add_option("--threads", ov.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    };

    std::string config, preset, out_dir = ".", suite;
    auto* run = app.add_subcommand("run", "run a scenario or named preset");
    run->add_option("--config", config, "INI or JSON scenario file")->check(CLI::ExistingFile);
    run->add_option("--preset", preset, "fig1 | fig2 | fig3 | fig4 | n3 | n4")
        ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "n3", "n4"}));
    run->add_option("--out", out_dir, "output directory");
    add_overrides(run);

    auto* critical = app.add_subcommand("critical", "critical-damping sweep and gamma_c(J) fit");
    critical->add_option("--config", config, "INI or JSON sweep file")->check(CLI::ExistingFile);
    critical->add_option("--out", out_dir, "output directory");
    add_overrides(critical);

    auto* validate = app.add_subcommand("validate", "run a built-in validation suite");
    validate->add_option("--suite", suite, "mapping | oracle | analytic")
        ->required()
        ->check(CLI::IsMember({"mapping", "oracle", "analytic"}));
    add_overrides(validate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (config.empty() && preset.empty()) throw jch::ConfigError("run: give --config, --preset or both");
            const jch::KeyValues kv = load_or_empty(config);
            if (jch::is_sweep_preset(preset)) return run_sweep(kv, ov, out_dir);
            if (preset == "n3" || preset == "n4") {
                jch::ScenarioConfig c = jch::scenario_from(kv, jch::multicavity_config(preset == "n3" ? 3 : 4));
                ov.apply(c);
                const auto m = jch::run_multicavity(c);
                jch::write_result(m.run, out_dir, jch::multicavity_json(m));
                report(m.run, out_dir);
                std::cout << "  t_half(" << m.mi_column << ") = " << jch::format_double(m.t_half)
                          << "  max |dP/dt|(" << m.init_column << ") = " << jch::format_double(m.max_slope) << "\n";
                return 0;
            }
            std::vector<jch::ScenarioConfig> configs =
                preset.empty() ? std::vector<jch::ScenarioConfig>{jch::ScenarioConfig{}} : jch::preset_scenarios(preset);
            for (auto& c : configs) {
                const std::string name = c.name;
                c = jch::scenario_from(kv, c);
                if (configs.size() > 1) c.name = name;  // keep distinct file stems
                ov.apply(c);
                c.validate();
                report(jch::run_scenario(c, out_dir), out_dir);
            }
            return 0;
        }
        if (*critical) return run_sweep(load_or_empty(config), ov, out_dir);
        if (*validate) {
            const auto rep = jch::validate_suite(suite, ov.traj.value_or(2000), ov.seed.value_or(1), ov.threads.value_or(0));
            std::cout << rep.json().dump(2) << "\n";
            return rep.pass() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
