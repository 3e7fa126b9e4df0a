// experiments.hpp - scenario configuration, named presets, the critical-damping
// sweep, multi-cavity runs and the on-demand validation suites

#pragma once

#include "jch/config.hpp"
#include "jch/dynamics.hpp"
#include "jch/model.hpp"
#include "jch/observables.hpp"
#include "jch/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace jch {

enum class Method { mcwf, lindblad, no_jump, unitary };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::mcwf: return "mcwf";
        case Method::lindblad: return "lindblad";
        case Method::no_jump: return "no_jump";
        case Method::unitary: return "unitary";
    }
    return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
    if (s == "mcwf") return Method::mcwf;
    if (s == "lindblad") return Method::lindblad;
    if (s == "no_jump") return Method::no_jump;
    if (s == "unitary") return Method::unitary;
    return std::nullopt;
}

// ------------------------------------------------------------ scenario

struct ScenarioConfig {
    std::string name{"scenario"};

    // [model]; g, J and gamma broadcast when given as one value
    int n_sites{2};
    double delta{0.0};
    double omega_c{0.0};
    std::vector<double> g{1.0};
    std::vector<double> J{0.03};
    std::vector<double> gamma{0.05};
    std::optional<int> n_max;  // default: total initial excitation
    ModelVariant variant{ModelVariant::full};
    bool interconverting{false};

    std::vector<PolaritonLabel> initial{PolaritonLabel::minus(2), PolaritonLabel::ground()};
    TimeGrid grid{0.0, 1500.0, 3000, 0.005, 0.01};

    // [run]
    Method method{Method::mcwf};
    Frame frame{Frame::unconditional};
    int n_traj{2000};
    std::uint64_t master_seed{1};
    int threads{0};
    std::string excitation_cap{"auto"};  // auto | none | integer
    int rho_batches{20};

    // [observables]
    std::vector<std::string> projectors{"P20", "P11"};
    bool symmetrize{false};
    bool compute_negativity{true};
    int cut{1};

    // [classifier]
    double prominence{0.05};
    double t_min{1.0};
    std::string smoothing{"blockade"};  // blockade | none | width in 1/g

    // [output]
    std::string format{"csv"};

    int resolved_n_max() const {
        if (n_max) return *n_max;
        return std::max(1, total_excitation(initial));
    }

    ModelParams model() const {
        ModelParams p;
        p.n_sites = n_sites;
        p.omega_c = omega_c;
        p.omega_a = omega_c + delta;
        const auto ns = static_cast<std::size_t>(std::max(n_sites, 0));
        auto broadcast = [](const std::vector<double>& v, std::size_t n) {
            return v.size() == 1 ? std::vector<double>(n, v[0]) : v;
        };
        p.g = broadcast(g, ns);
        p.hop = broadcast(J, ns > 0 ? ns - 1 : 0);
        p.gamma = broadcast(gamma, ns);
        p.n_max = resolved_n_max();
        return p;
    }

    std::optional<int> resolved_cap() const {
        if (excitation_cap == "none") return std::nullopt;
        if (excitation_cap == "auto") return total_excitation(initial);
        return static_cast<int>(to_integer(excitation_cap).value_or(0));
    }

    std::optional<double> smoothing_width() const {
        if (smoothing == "none") return std::nullopt;
        if (smoothing == "blockade") return ClassifierOptions::blockade_period(delta, g.empty() ? 1.0 : g[0]);
        return to_double(smoothing);
    }

    ClassifierOptions classifier() const {
        ClassifierOptions c;
        c.prominence = prominence;
        c.t_min = t_min;
        c.smoothing_width = smoothing_width();
        return c;
    }

    std::vector<ProjectorSpec> projector_specs() const {
        std::vector<ProjectorSpec> out;
        for (const auto& p : projectors) out.push_back(ProjectorSpec::preset(p, symmetrize));
        return out;
    }

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (name.empty() || name.find_first_of("/\\") != std::string::npos) out.push_back("scenario.name: must be a plain file stem");
        const auto N = static_cast<std::size_t>(std::max(n_sites, 0));
        if (n_sites < 1) out.push_back("model.n_sites: must be >= 1");
        auto check_len = [&](const std::vector<double>& v, std::size_t want, const char* field) {
            if (v.size() != 1 && v.size() != want)
                out.push_back(std::string(field) + ": give one value or " + std::to_string(want));
        };
        check_len(g, N, "model.g");
        if (N > 1) check_len(J, N - 1, "model.J");
        check_len(gamma, N, "model.gamma");
        if (n_max && *n_max < 1) out.push_back("model.n_max: must be >= 1");
        if (initial.size() != N) {
            out.push_back("initial.labels: " + std::to_string(initial.size()) + " labels for " + std::to_string(N) + " sites");
        }
        for (const auto& l : initial) {
            if (l.n > resolved_n_max()) out.push_back("initial.labels: " + l.str() + " exceeds n_max");
            if (variant == ModelVariant::lower_branch && l.branch == Branch::plus)
                out.push_back("initial.labels: " + l.str() + " is not in the lower-branch model");
        }
        if (out.empty()) {
            for (const auto& s : model().problems()) out.push_back("model." + s);
        }
        for (const auto& s : grid.problems()) out.push_back("grid." + s);
        if (n_traj < 1) out.push_back("run.n_traj: must be >= 1");
        if (threads < 0) out.push_back("run.threads: must be >= 0");
        if (rho_batches < 0 || rho_batches > std::max(n_traj, 1)) out.push_back("run.rho_batches: must lie in [0, n_traj]");
        if (excitation_cap != "auto" && excitation_cap != "none") {
            const auto c = to_integer(excitation_cap);
            if (!c || *c < 0) out.push_back("run.excitation_cap: auto, none or a non-negative integer");
            else if (*c < total_excitation(initial)) out.push_back("run.excitation_cap: below the initial excitation");
        }
        bool lossy = false;
        for (double x : gamma) lossy = lossy || x > 0.0;
        if (method == Method::unitary && lossy) out.push_back("run.method: unitary evolution requires gamma = 0");
        if (method == Method::no_jump && frame != Frame::no_loss) {
            out.push_back("run.frame: no_jump evolution is the no_loss frame");
        }
        if (compute_negativity && (cut < 1 || cut >= n_sites)) out.push_back("observables.cut: need 1 <= cut < n_sites");
        for (const auto& p : projectors) {
            try {
                const auto spec = ProjectorSpec::preset(p);
                if (spec.labels.size() != N) out.push_back("observables.projectors: " + p + " does not have one digit per site");
                for (const auto& l : spec.labels)
                    if (l.n > resolved_n_max()) out.push_back("observables.projectors: " + p + " exceeds n_max");
            } catch (const std::exception& e) {
                out.push_back(std::string("observables.projectors: ") + e.what());
            }
        }
        if (!(prominence >= 0.0)) out.push_back("classifier.prominence: must be >= 0");
        if (smoothing != "none" && smoothing != "blockade") {
            const auto w = to_double(smoothing);
            if (!w || *w <= 0.0) out.push_back("classifier.smoothing: blockade, none or a positive width");
        }
        if (format != "csv" && format != "json") out.push_back("output.format: csv or json");
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid scenario '" + name + "':";
        for (const auto& s : p) msg += "\n  " + s;
        throw ConfigError(msg);
    }

    /// Every parameter the run consumes, resolved (broadcasts and defaults expanded).
    Json echo() const {
        const ModelParams p = model();
        Json j;
        j["name"] = name;
        j["model"] = {{"n_sites", n_sites},     {"delta", delta},         {"omega_a", p.omega_a},
                      {"omega_c", omega_c},     {"g", p.g},               {"J", p.hop},
                      {"gamma", p.gamma},       {"n_max", p.n_max},       {"variant", to_string(variant)},
                      {"interconverting", interconverting}};
        std::vector<std::string> labels;
        for (const auto& l : initial) labels.push_back(l.str());
        j["initial"] = {{"labels", labels}};
        j["grid"] = {{"t_start", grid.t_start}, {"t_end", grid.t_end}, {"n_samples", grid.n_samples},
                     {"dt", grid.dt},           {"max_dt", grid.max_dt}};
        const auto cap = resolved_cap();
        j["run"] = {{"method", to_string(method)},     {"frame", to_string(frame)},
                    {"n_traj", n_traj},                {"master_seed", master_seed},
                    {"rho_batches", rho_batches},      {"excitation_cap", cap ? Json(*cap) : Json("none")}};
        j["observables"] = {{"projectors", projectors},
                            {"symmetrize", symmetrize},
                            {"negativity", compute_negativity},
                            {"cut", cut}};
        const auto w = smoothing_width();
        j["classifier"] = {{"prominence", prominence}, {"t_min", t_min}, {"smoothing", smoothing},
                           {"smoothing_width", w ? Json(*w) : Json(nullptr)}};
        j["output"] = {{"format", format}};
        return j;
    }

    std::string input_hash() const { return git_blob_hash(echo().dump()); }
};

/// Range "start:stop:step" (inclusive, step counted in integers) or a list.
inline std::vector<double> parse_real_list(const std::string& s, bool& ok) {
    ok = true;
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::string item;
        std::stringstream ss(s);
        while (std::getline(ss, item, ':')) parts.push_back(trim(item));
        if (parts.size() != 3) return ok = false, std::vector<double>{};
        const auto a = to_double(parts[0]), b = to_double(parts[1]), h = to_double(parts[2]);
        if (!a || !b || !h || *h <= 0.0 || *b < *a) return ok = false, std::vector<double>{};
        std::vector<double> out;
        const long n = std::lround(std::floor((*b - *a) / *h + 1e-9));
        for (long k = 0; k <= n; ++k) out.push_back(*a + static_cast<double>(k) * *h);
        return out;
    }
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        if (auto d = to_double(item)) out.push_back(*d);
        else return ok = false, std::vector<double>{};
    }
    return out;
}

/// Overlay config values on `cfg`; problems are appended as "section.key: reason".
inline void apply_config(ScenarioConfig& cfg, const KeyValues& kv, std::vector<std::string>& problems) {
    FieldReader r(kv, problems);
    r.text("scenario", "name", cfg.name);

    r.integer("model", "n_sites", cfg.n_sites);
    r.real("model", "delta", cfg.delta);
    r.real("model", "omega_c", cfg.omega_c);
    if (auto v = kv.get("model", "omega_a")) {
        if (kv.has("model", "delta")) {
            r.bad("model", "omega_a", "give either delta or omega_a, not both");
        } else if (auto d = to_double(*v)) {
            cfg.delta = *d - cfg.omega_c;
        } else {
            r.bad("model", "omega_a", "not a finite number");
        }
    }
    r.reals("model", "g", cfg.g);
    r.reals("model", "J", cfg.J);
    r.reals("model", "gamma", cfg.gamma);
    if (auto v = kv.get("model", "n_max")) {
        if (trim(*v) == "auto") cfg.n_max.reset();
        else if (auto n = to_integer(*v)) cfg.n_max = static_cast<int>(*n);
        else r.bad("model", "n_max", "auto or an integer");
    }
    if (auto v = kv.get("model", "variant")) {
        try {
            cfg.variant = parse_variant(trim(*v));
        } catch (const ConfigError&) {
            r.bad("model", "variant", "one of full, full_hop, rwa_hop, lower_branch");
        }
    }
    r.boolean("model", "interconverting", cfg.interconverting);

    if (auto v = kv.get("initial", "labels")) {
        std::vector<PolaritonLabel> labels;
        try {
            for (const auto& item : split_list(*v)) labels.push_back(PolaritonLabel::parse(item));
            cfg.initial = std::move(labels);
        } catch (const std::exception& e) {
            r.bad("initial", "labels", e.what());
        }
    }

    r.real("grid", "t_start", cfg.grid.t_start);
    r.real("grid", "t_end", cfg.grid.t_end);
    r.integer("grid", "n_samples", cfg.grid.n_samples);
    r.real("grid", "dt", cfg.grid.dt);
    r.real("grid", "max_dt", cfg.grid.max_dt);

    if (auto v = kv.get("run", "method")) {
        if (auto m = parse_method(trim(*v))) cfg.method = *m;
        else r.bad("run", "method", "one of mcwf, lindblad, no_jump, unitary");
    }
    if (auto v = kv.get("run", "frame")) {
        try {
            cfg.frame = parse_frame(trim(*v));
        } catch (const ConfigError&) {
            r.bad("run", "frame", "unconditional or no_loss");
        }
    }
    r.integer("run", "n_traj", cfg.n_traj);
    r.integer("run", "master_seed", cfg.master_seed);
    r.integer("run", "threads", cfg.threads);
    r.text("run", "excitation_cap", cfg.excitation_cap);
    r.integer("run", "rho_batches", cfg.rho_batches);

    if (auto v = kv.get("observables", "projectors")) cfg.projectors = split_list(*v);
    r.boolean("observables", "symmetrize", cfg.symmetrize);
    r.boolean("observables", "negativity", cfg.compute_negativity);
    r.integer("observables", "cut", cfg.cut);

    r.real("classifier", "prominence", cfg.prominence);
    r.real("classifier", "t_min", cfg.t_min);
    r.text("classifier", "smoothing", cfg.smoothing);

    r.text("output", "format", cfg.format);
}

inline void throw_problems(const std::string& what, const std::vector<std::string>& problems) {
    if (problems.empty()) return;
    std::string msg = "invalid " + what + ":";
    for (const auto& s : problems) msg += "\n  " + s;
    throw ConfigError(msg);
}

inline void reject_unknown_keys(const KeyValues& kv, std::vector<std::string>& problems) {
    for (const auto& k : kv.unused()) problems.push_back(k + ": unknown key");
}

inline ScenarioConfig scenario_from(const KeyValues& kv, ScenarioConfig base = {}) {
    std::vector<std::string> problems;
    apply_config(base, kv, problems);
    reject_unknown_keys(kv, problems);
    throw_problems("config", problems);
    base.validate();
    return base;
}

// -------------------------------------------------------------- running

struct ScenarioResult {
    ScenarioConfig config;
    std::size_t basis_dim{0};
    std::vector<double> times;
    std::vector<std::string> columns;  // observable columns, in order
    std::map<std::string, std::vector<double>> mean;
    std::map<std::string, std::vector<double>> stderr_;
    std::vector<double> survival;           // no_loss frame only
    std::vector<double> negativity;         // empty unless computed
    std::vector<double> negativity_stderr;  // batch-mean error (mcwf) or zeros
    std::optional<PeakReport> peaks;
    std::vector<DensityMatrix> rho;         // lindblad, only with keep_states
    std::vector<StateVector> states;        // unitary / no_jump, only with keep_states
    int n_traj_used{0};

    const std::vector<double>& series(const std::string& column) const {
        auto it = mean.find(column);
        if (it == mean.end()) throw ContractError("no column '" + column + "' in result");
        return it->second;
    }
};

struct SimulateOptions {
    bool keep_states{false};
    std::optional<int> threads;  // overrides config
};

inline ScenarioResult simulate(const ScenarioConfig& cfg, const SimulateOptions& so = {}) {
    cfg.validate();
    const ModelParams p = cfg.model();
    const OpenSystem sys = build_system(p, cfg.variant, cfg.resolved_cap(), cfg.interconverting);
    const StateVector psi0 = sys.product_state(cfg.initial);
    const int K = total_excitation(cfg.initial);
    std::vector<ProjectorObservable> obs;
    for (const auto& spec : cfg.projector_specs()) obs.push_back(make_projector(spec, sys));

    ScenarioResult res;
    res.config = cfg;
    res.basis_dim = static_cast<std::size_t>(sys.basis.dim());
    res.times = cfg.grid.times();
    const std::size_t ns = res.times.size();
    for (const auto& o : obs) {
        res.columns.push_back(o.name);
        res.mean[o.name].assign(ns, 0.0);
        res.stderr_[o.name].assign(ns, 0.0);
    }
    const auto cut = static_cast<std::size_t>(cfg.cut);
    if (cfg.compute_negativity) {
        res.negativity.assign(ns, 0.0);
        res.negativity_stderr.assign(ns, 0.0);
    }

    switch (cfg.method) {
        case Method::unitary:
        case Method::no_jump: {
            const TrajectoryResult tr = cfg.method == Method::unitary
                                            ? evolve_unitary(sys.hamiltonian, psi0, cfg.grid)
                                            : evolve_no_loss(sys.hamiltonian, sys.collapse, psi0, cfg.grid);
            for (std::size_t k = 0; k < ns; ++k) {
                for (const auto& o : obs) res.mean[o.name][k] = population(tr.states[k], o);
                if (cfg.compute_negativity) res.negativity[k] = negativity_pure(tr.states[k], sys.basis, cut);
            }
            if (cfg.frame == Frame::no_loss) res.survival = tr.weights;
            if (so.keep_states) res.states = tr.states;
            res.n_traj_used = 1;
            break;
        }
        case Method::lindblad: {
            const DensityMatrix rho0 = psi0 * psi0.adjoint();
            std::vector<DensityMatrix> rhos;
            if (cfg.frame == Frame::no_loss) {
                ConditionedEvolution ce =
                    lindblad_sector_evolve(sys.hamiltonian, sys.collapse, rho0, cfg.grid, sys.basis.excitations(), K);
                const Index D = sys.basis.dim();
                for (auto& block : ce.rho) {
                    DensityMatrix full = DensityMatrix::Zero(D, D);
                    for (std::size_t i = 0; i < ce.indices.size(); ++i)
                        for (std::size_t j = 0; j < ce.indices.size(); ++j)
                            full(ce.indices[i], ce.indices[j]) = block(static_cast<Index>(i), static_cast<Index>(j));
                    rhos.push_back(std::move(full));
                }
                res.survival = std::move(ce.weight);
            } else {
                rhos = lindblad_evolve(sys.hamiltonian, sys.collapse, rho0, cfg.grid);
            }
            for (std::size_t k = 0; k < ns; ++k) {
                for (const auto& o : obs) res.mean[o.name][k] = population(rhos[k], o);
                if (cfg.compute_negativity) res.negativity[k] = negativity(rhos[k], sys.basis, cut);
            }
            if (so.keep_states) res.rho = std::move(rhos);
            res.n_traj_used = 1;
            break;
        }
        case Method::mcwf: {
            EnsembleOptions eo;
            eo.n_traj = cfg.n_traj;
            eo.master_seed = cfg.master_seed;
            eo.threads = so.threads.value_or(cfg.threads);
            eo.frame = cfg.frame;
            eo.keep_rho = cfg.compute_negativity || so.keep_states;
            eo.rho_batches = cfg.compute_negativity ? std::min(cfg.rho_batches, cfg.n_traj) : 0;
            const EnsembleResult ens = mcwf_ensemble(sys.hamiltonian, sys.collapse, psi0, cfg.grid, obs, eo);
            for (const auto& o : obs) {
                res.mean[o.name] = ens.mean.at(o.name);
                res.stderr_[o.name] = ens.stderr_.at(o.name);
            }
            if (cfg.frame == Frame::no_loss) res.survival = ens.contributing;
            if (cfg.compute_negativity) {
                const auto B = ens.rho_batches.size();
                for (std::size_t k = 0; k < ns; ++k) {
                    res.negativity[k] = negativity(ens.rho_avg[k], sys.basis, cut);
                    if (B >= 2) {
                        double s = 0.0, s2 = 0.0;
                        for (std::size_t b = 0; b < B; ++b) {
                            const double v = negativity(ens.rho_batches[b][k], sys.basis, cut);
                            s += v;
                            s2 += v * v;
                        }
                        const double mu = s / static_cast<double>(B);
                        const double var = std::max(0.0, (s2 - static_cast<double>(B) * mu * mu) / static_cast<double>(B - 1));
                        res.negativity_stderr[k] = std::sqrt(var / static_cast<double>(B));
                    }
                }
            }
            if (so.keep_states) res.rho = ens.rho_avg;
            res.n_traj_used = ens.n_traj;
            break;
        }
    }
    if (cfg.compute_negativity) res.peaks = classify_series(res.times, res.negativity, cfg.classifier());
    return res;
}

// -------------------------------------------------------------- outputs

inline std::vector<std::string> csv_header(const ScenarioResult& r) {
    std::vector<std::string> h{"t"};
    for (const auto& c : r.columns) {
        h.push_back(c);
        h.push_back(c + "_stderr");
    }
    if (!r.survival.empty()) h.push_back("survival");
    if (!r.negativity.empty()) h.push_back("negativity");
    return h;
}

inline std::string to_csv(const ScenarioResult& r) {
    std::string out;
    const auto header = csv_header(r);
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        out += format_double(r.times[k]);
        for (const auto& c : r.columns) {
            out += "," + format_double(r.mean.at(c)[k]);
            out += "," + format_double(r.stderr_.at(c)[k]);
        }
        if (!r.survival.empty()) out += "," + format_double(r.survival[k]);
        if (!r.negativity.empty()) out += "," + format_double(r.negativity[k]);
        out += "\n";
    }
    return out;
}

inline Json peak_json(const PeakReport& p) {
    return {{"classification", p.label()},     {"count", p.count()},
            {"peak_times", p.peak_times},      {"peak_heights", p.peak_heights},
            {"prominences", p.prominences},    {"global_max", p.global_max},
            {"prominence_threshold", p.prominence_threshold}};
}

inline Json sidecar(const ScenarioResult& r) {
    Json j;
    j["config"] = r.config.echo();
    j["input_hash"] = r.config.input_hash();
    j["master_seed"] = r.config.master_seed;
    j["n_traj_used"] = r.n_traj_used;
    j["basis_dim"] = r.basis_dim;
    j["columns"] = csv_header(r);
    j["frame"] = to_string(r.config.frame);
    j["symmetrize"] = r.config.symmetrize;
    Json summary;
    for (const auto& c : r.columns) {
        const auto& s = r.mean.at(c);
        summary["max"][c] = *std::max_element(s.begin(), s.end());
        summary["final"][c] = s.back();
    }
    if (!r.survival.empty()) summary["final"]["survival"] = r.survival.back();
    if (r.peaks) {
        summary["negativity_max"] = *std::max_element(r.negativity.begin(), r.negativity.end());
        summary["negativity_peaks"] = peak_json(*r.peaks);
    }
    j["summary"] = summary;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }
}

/// Writes <name>.csv plus the <name>.json sidecar (format csv), or a single
/// <name>.json carrying the series (format json). Returns the paths written.
inline std::vector<std::filesystem::path> write_result(const ScenarioResult& r, const std::filesystem::path& dir,
                                                       Json extra = {}) {
    ensure_directory(dir);
    Json meta = sidecar(r);
    if (!extra.is_null()) meta["analysis"] = std::move(extra);
    const auto stem = dir / r.config.name;
    std::vector<std::filesystem::path> written;
    if (r.config.format == "json") {
        Json series;
        series["t"] = r.times;
        for (const auto& c : r.columns) {
            series[c] = r.mean.at(c);
            series[c + "_stderr"] = r.stderr_.at(c);
        }
        if (!r.survival.empty()) series["survival"] = r.survival;
        if (!r.negativity.empty()) series["negativity"] = r.negativity;
        meta["series"] = series;
    } else {
        written.push_back(stem.string() + ".csv");
        write_text(written.back(), to_csv(r));
        meta["output"] = r.config.name + ".csv";
    }
    written.push_back(stem.string() + ".json");
    write_text(written.back(), meta.dump(2) + "\n");
    return written;
}

inline ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    ScenarioResult r = simulate(cfg);
    write_result(r, out_dir);
    return r;
}

// -------------------------------------------------------------- presets

/// Two-site lower-branch scenario in the loss-conditioned frame.
inline ScenarioConfig preset_base() {
    ScenarioConfig c;
    c.variant = ModelVariant::lower_branch;
    c.method = Method::lindblad;
    c.frame = Frame::no_loss;
    c.J = {0.03};
    c.gamma = {0.05};
    c.delta = 0.0;
    c.initial = {PolaritonLabel::minus(2), PolaritonLabel::ground()};
    c.projectors = {"P20", "P11"};
    return c;
}

inline std::string number_tag(double x) { return format_double(x); }

inline ScenarioConfig multicavity_config(int n) {
    if (n < 2 || n > 4) throw ContractError("multicavity preset needs n in {2, 3, 4}");
    ScenarioConfig c = preset_base();
    c.name = "n" + std::to_string(n);
    c.n_sites = n;
    c.n_max = n;
    c.method = Method::no_jump;
    c.initial.assign(static_cast<std::size_t>(n), PolaritonLabel::ground());
    c.initial[0] = PolaritonLabel::minus(n);
    c.projectors = {"P" + std::to_string(n) + std::string(static_cast<std::size_t>(n - 1), '0'),
                    "P" + std::string(static_cast<std::size_t>(n), '1')};
    c.grid.t_end = 3000.0;
    c.grid.n_samples = 6000;
    return c;
}

inline bool is_sweep_preset(const std::string& name) { return name == "fig4"; }

inline std::vector<ScenarioConfig> preset_scenarios(const std::string& name) {
    std::vector<ScenarioConfig> out;
    if (name == "fig1") {
        for (double d : {0.0, 0.9}) {
            ScenarioConfig c = preset_base();
            c.name = "fig1_delta" + number_tag(d);
            c.delta = d;
            c.gamma = {0.0};
            c.method = Method::unitary;
            c.frame = Frame::unconditional;
            out.push_back(c);
        }
    } else if (name == "fig2") {
        ScenarioConfig c = preset_base();
        c.name = "fig2";
        out.push_back(c);
    } else if (name == "fig3") {
        for (double gm : {0.02, 0.06}) {
            ScenarioConfig c = preset_base();
            c.name = "fig3_gamma" + number_tag(gm);
            c.J = {0.06};
            c.gamma = {gm};
            out.push_back(c);
        }
    } else if (name == "n3" || name == "n4") {
        out.push_back(multicavity_config(name == "n3" ? 3 : 4));
    } else {
        throw ConfigError("unknown preset '" + name + "' (fig1, fig2, fig3, fig4, n3, n4)");
    }
    return out;
}

// ------------------------------------------------------- critical sweep

struct SweepConfig {
    ScenarioConfig base = preset_base();
    std::vector<double> J_values{0.02, 0.04, 0.06, 0.08};
    std::vector<double> gamma_over_J;  // used when gamma_values is empty
    std::vector<double> gamma_values;
    std::vector<double> delta_values{0.0};
    double t_end_hop{80.0};  // t_end(J) = max(grid.t_end, t_end_hop / J)
    int threads{0};

    SweepConfig() {
        for (int k = 2; k <= 30; ++k) gamma_over_J.push_back(k / 10.0);
        base.name = "critical";
    }

    std::vector<double> gamma_grid(double J) const {
        if (!gamma_values.empty()) return gamma_values;
        std::vector<double> out;
        for (double r : gamma_over_J) out.push_back(r * J);
        return out;
    }

    ScenarioConfig point(double J, double gamma, double delta) const {
        ScenarioConfig c = base;
        c.J = {J};
        c.gamma = {gamma};
        c.delta = delta;
        c.threads = 1;
        const double interval = base.grid.sample_interval();
        c.grid.t_end = std::max(base.grid.t_end, base.grid.t_start + t_end_hop / J);
        c.grid.n_samples = static_cast<int>(std::lround((c.grid.t_end - c.grid.t_start) / interval));
        c.grid.t_end = c.grid.t_start + c.grid.n_samples * interval;
        c.name = "critical_J" + number_tag(J) + "_gamma" + number_tag(gamma) + "_delta" + number_tag(delta);
        return c;
    }

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        auto increasing_positive = [&](const std::vector<double>& v, const char* field) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!(v[i] > 0.0)) out.push_back(std::string(field) + ": entries must be > 0");
                if (i > 0 && !(v[i] > v[i - 1])) out.push_back(std::string(field) + ": must be strictly increasing");
            }
        };
        if (J_values.empty()) out.push_back("sweep.J_values: empty");
        increasing_positive(J_values, "sweep.J_values");
        if (gamma_values.empty() && gamma_over_J.empty()) out.push_back("sweep.gamma_over_J: empty");
        increasing_positive(gamma_values, "sweep.gamma_values");
        increasing_positive(gamma_over_J, "sweep.gamma_over_J");
        if (delta_values.empty()) out.push_back("sweep.delta_values: empty");
        if (!(t_end_hop > 0.0)) out.push_back("sweep.t_end_hop: must be > 0");
        if (base.n_sites != 2) out.push_back("model.n_sites: the criticality sweep is a two-site analysis");
        for (const auto& s : base.problems()) out.push_back(s);
        return out;
    }

    Json echo() const {
        Json j = base.echo();
        j["sweep"] = {{"J_values", J_values},         {"gamma_over_J", gamma_over_J},
                      {"gamma_values", gamma_values}, {"delta_values", delta_values},
                      {"t_end_hop", t_end_hop}};
        return j;
    }
};

inline SweepConfig sweep_from(const KeyValues& kv, SweepConfig sw = {}) {
    std::vector<std::string> problems;
    apply_config(sw.base, kv, problems);
    auto list = [&](const char* key, std::vector<double>& out) {
        if (auto v = kv.get("sweep", key)) {
            bool ok = true;
            auto vals = parse_real_list(*v, ok);
            if (ok) out = std::move(vals);
            else problems.push_back(std::string("sweep.") + key + ": a list or start:stop:step");
        }
    };
    list("J_values", sw.J_values);
    list("gamma_over_J", sw.gamma_over_J);
    list("gamma_values", sw.gamma_values);
    list("delta_values", sw.delta_values);
    FieldReader(kv, problems).real("sweep", "t_end_hop", sw.t_end_hop);
    FieldReader(kv, problems).integer("run", "threads", sw.threads);
    reject_unknown_keys(kv, problems);
    throw_problems("sweep config", problems);
    throw_problems("sweep config", sw.problems());
    return sw;
}

struct CriticalityRow {
    double J{0.0}, gamma{0.0}, delta{0.0};
    PeakReport peaks;
    double t_half_p11{0.0};  // first time P11 reaches half its maximum
    double max_p11{0.0};
    double negativity_max{0.0};
};

struct CriticalityResult {
    double J{0.0}, delta{0.0};
    std::vector<CriticalityRow> rows;  // increasing gamma
    std::optional<double> gamma_c;            // max single-peak height
    std::optional<double> gamma_c_secondary;  // smallest single-peak gamma
    std::string method{"max_single_peak_height"};
    bool not_bracketed{false};
    bool single_point{false};
    bool reentrant{false};
    std::vector<std::string> region_violations;
};

inline double first_crossing_time(const std::vector<double>& t, const std::vector<double>& s, double level) {
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s[k] >= level) return t[k];
    return std::numeric_limits<double>::quiet_NaN();
}

inline CriticalityRow analyse_point(const ScenarioResult& r, double J, double gamma, double delta) {
    CriticalityRow row;
    row.J = J;
    row.gamma = gamma;
    row.delta = delta;
    if (r.peaks) row.peaks = *r.peaks;
    const std::string p11 = r.config.symmetrize ? "P11_sym" : "P11";
    if (r.mean.count(p11)) {
        const auto& s = r.mean.at(p11);
        row.max_p11 = *std::max_element(s.begin(), s.end());
        row.t_half_p11 = first_crossing_time(r.times, s, 0.5 * row.max_p11);
    }
    if (!r.negativity.empty()) row.negativity_max = *std::max_element(r.negativity.begin(), r.negativity.end());
    return row;
}

/// Picks gamma_c from rows sorted by gamma and fills the consistency flags.
inline void decide_critical(CriticalityResult& cr) {
    const CriticalityRow* best = nullptr;
    for (const auto& row : cr.rows) {
        if (row.peaks.classification != PeakClass::SinglePeak) continue;
        if (!cr.gamma_c_secondary) cr.gamma_c_secondary = row.gamma;
        if (!best || row.peaks.max_height() > best->peaks.max_height()) best = &row;
    }
    cr.single_point = cr.rows.size() == 1;
    cr.not_bracketed = best == nullptr;
    if (best) cr.gamma_c = best->gamma;
    int changes = 0;
    for (std::size_t i = 1; i < cr.rows.size(); ++i) {
        const bool a = cr.rows[i - 1].peaks.classification == PeakClass::SinglePeak;
        const bool b = cr.rows[i].peaks.classification == PeakClass::SinglePeak;
        if (a != b) ++changes;
        if (a && !b) cr.reentrant = true;
    }
    if (changes > 1) cr.reentrant = true;
    if (cr.gamma_c) {
        for (const auto& row : cr.rows) {
            const auto cls = row.peaks.classification;
            if (row.gamma > *cr.gamma_c && cls != PeakClass::SinglePeak) {
                cr.region_violations.push_back("gamma=" + format_double(row.gamma) + " above gamma_c is " + row.peaks.label());
            }
            if (row.gamma < 0.5 * *cr.gamma_c && cls != PeakClass::MultiPeak) {
                cr.region_violations.push_back("gamma=" + format_double(row.gamma) + " below gamma_c/2 is " + row.peaks.label());
            }
        }
    }
}

inline void check_gamma_span(const std::vector<double>& grid, double J) {
    if (grid.size() < 2) return;
    if (grid.front() > 0.3 * J * (1.0 + 1e-9) || grid.back() < 3.0 * J * (1.0 - 1e-9)) {
        throw ContractError("estimate_critical_gamma: gamma grid must span at least [0.3 J, 3 J] for J = " +
                            format_double(J));
    }
}

/// Runs every (delta, J, gamma) point on a bounded worker pool; results are
/// assembled in (delta, J, gamma) order.
inline std::vector<CriticalityResult> run_criticality(const SweepConfig& sw) {
    throw_problems("sweep config", sw.problems());
    struct Job {
        std::size_t slot;
        double J, gamma, delta;
    };
    std::vector<CriticalityResult> results;
    std::vector<Job> jobs;
    for (double d : sw.delta_values) {
        for (double J : sw.J_values) {
            const auto grid = sw.gamma_grid(J);
            check_gamma_span(grid, J);
            CriticalityResult cr;
            cr.J = J;
            cr.delta = d;
            cr.rows.resize(grid.size());
            for (double gm : grid) jobs.push_back({results.size(), J, gm, d});
            results.push_back(std::move(cr));
        }
    }
    std::vector<CriticalityRow> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), sw.threads, [&](int i) {
        const Job& jb = jobs[static_cast<std::size_t>(i)];
        const ScenarioResult r = simulate(sw.point(jb.J, jb.gamma, jb.delta), {false, 1});
        rows[static_cast<std::size_t>(i)] = analyse_point(r, jb.J, jb.gamma, jb.delta);
    });
    std::vector<std::size_t> fill(results.size(), 0);
    for (std::size_t i = 0; i < jobs.size(); ++i) results[jobs[i].slot].rows[fill[jobs[i].slot]++] = rows[i];
    for (auto& cr : results) decide_critical(cr);
    return results;
}

inline CriticalityResult estimate_critical_gamma(double J, double delta, SweepConfig sw) {
    sw.J_values = {J};
    sw.delta_values = {delta};
    return run_criticality(sw).front();
}

struct GammaCurve {
    double delta{0.0};
    std::vector<CriticalityResult> points;  // one per J
    std::optional<double> slope;            // least squares through the origin
};

inline std::optional<double> slope_through_origin(const std::vector<CriticalityResult>& pts) {
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : pts) {
        if (!p.gamma_c) continue;
        sxy += p.J * *p.gamma_c;
        sxx += p.J * p.J;
    }
    if (!(sxx > 0.0)) return std::nullopt;
    return sxy / sxx;
}

inline std::vector<GammaCurve> gamma_c_curve(const SweepConfig& sw) {
    if (sw.J_values.size() < 3) throw ContractError("gamma_c_curve: at least 3 J values are required");
    const auto all = run_criticality(sw);
    std::vector<GammaCurve> curves;
    for (double d : sw.delta_values) {
        GammaCurve c;
        c.delta = d;
        for (const auto& cr : all)
            if (cr.delta == d) c.points.push_back(cr);
        c.slope = slope_through_origin(c.points);
        curves.push_back(std::move(c));
    }
    return curves;
}

inline std::string rows_csv(const std::vector<GammaCurve>& curves) {
    std::string out = "delta,J,gamma,gamma_over_J,classification,n_peaks,max_peak_height,negativity_max,max_p11,t_half_p11\n";
    for (const auto& c : curves)
        for (const auto& p : c.points)
            for (const auto& r : p.rows) {
                out += format_double(r.delta) + "," + format_double(r.J) + "," + format_double(r.gamma) + "," +
                       format_double(r.gamma / r.J) + "," + to_string(r.peaks.classification) + "," +
                       std::to_string(r.peaks.count()) + "," + format_double(r.peaks.max_height()) + "," +
                       format_double(r.negativity_max) + "," + format_double(r.max_p11) + "," +
                       format_double(r.t_half_p11) + "\n";
            }
    return out;
}

inline std::string gamma_c_csv(const std::vector<GammaCurve>& curves) {
    std::string out = "delta,J,gamma_c,gamma_c_over_J,gamma_c_secondary,flags\n";
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            std::string flags;
            auto add = [&](bool on, const char* f) {
                if (on) flags += (flags.empty() ? "" : ";") + std::string(f);
            };
            add(p.not_bracketed, "not_bracketed");
            add(p.single_point, "single_point");
            add(p.reentrant, "reentrant");
            add(!p.region_violations.empty(), "region_violation");
            out += format_double(c.delta) + "," + format_double(p.J) + "," +
                   (p.gamma_c ? format_double(*p.gamma_c) : "") + "," +
                   (p.gamma_c ? format_double(*p.gamma_c / p.J) : "") + "," +
                   (p.gamma_c_secondary ? format_double(*p.gamma_c_secondary) : "") + "," + flags + "\n";
        }
    return out;
}

inline Json curves_json(const SweepConfig& sw, const std::vector<GammaCurve>& curves) {
    Json j;
    j["config"] = sw.echo();
    j["input_hash"] = git_blob_hash(sw.echo().dump());
    j["master_seed"] = sw.base.master_seed;
    j["estimator"] = "max_single_peak_height";
    Json arr = Json::array();
    for (const auto& c : curves) {
        Json cj;
        cj["delta"] = c.delta;
        cj["slope"] = c.slope ? Json(*c.slope) : Json(nullptr);
        Json pts = Json::array();
        for (const auto& p : c.points) {
            pts.push_back({{"J", p.J},
                           {"gamma_c", p.gamma_c ? Json(*p.gamma_c) : Json(nullptr)},
                           {"gamma_c_secondary", p.gamma_c_secondary ? Json(*p.gamma_c_secondary) : Json(nullptr)},
                           {"not_bracketed", p.not_bracketed},
                           {"single_point", p.single_point},
                           {"reentrant", p.reentrant},
                           {"region_violations", p.region_violations}});
        }
        cj["points"] = pts;
        arr.push_back(cj);
    }
    j["curves"] = arr;
    return j;
}

inline std::vector<GammaCurve> run_critical(const SweepConfig& sw, const std::filesystem::path& dir) {
    const auto curves = gamma_c_curve(sw);
    ensure_directory(dir);
    write_text(dir / (sw.base.name + "_rows.csv"), rows_csv(curves));
    write_text(dir / (sw.base.name + "_gamma_c.csv"), gamma_c_csv(curves));
    write_text(dir / (sw.base.name + ".json"), curves_json(sw, curves).dump(2) + "\n");
    return curves;
}

// ------------------------------------------------------------ multicavity

struct MulticavityResult {
    int n{0};
    ScenarioResult run;
    std::string init_column, mi_column;
    double t_half{0.0};     // first time P_MI reaches half its maximum
    double max_slope{0.0};  // max |dP_init/dt| of the smoothed initial-state population
};

inline double max_abs_slope(const std::vector<double>& t, const std::vector<double>& s) {
    double m = 0.0;
    for (std::size_t k = 1; k < s.size(); ++k) m = std::max(m, std::abs(s[k] - s[k - 1]) / (t[k] - t[k - 1]));
    return m;
}

inline MulticavityResult analyse_multicavity(ScenarioResult r) {
    MulticavityResult m;
    m.n = r.config.n_sites;
    const auto specs = r.config.projector_specs();
    if (specs.size() < 2) throw ContractError("multicavity analysis needs the initial and Mott projectors");
    m.init_column = specs[0].column();
    m.mi_column = specs[1].column();
    const auto& pmi = r.series(m.mi_column);
    m.t_half = first_crossing_time(r.times, pmi, 0.5 * *std::max_element(pmi.begin(), pmi.end()));
    const auto w = r.config.smoothing_width();
    auto [ts, ps] = w ? boxcar_smooth(r.times, r.series(m.init_column), *w) : std::pair{r.times, r.series(m.init_column)};
    m.max_slope = max_abs_slope(ts, ps);
    m.run = std::move(r);
    return m;
}

inline MulticavityResult run_multicavity(const ScenarioConfig& cfg) {
    if (cfg.n_max && *cfg.n_max != cfg.n_sites) throw ContractError("multicavity run needs n_max = n (exact truncation)");
    return analyse_multicavity(simulate(cfg));
}

inline Json multicavity_json(const MulticavityResult& m) {
    return {{"n", m.n}, {"init_column", m.init_column}, {"mi_column", m.mi_column},
            {"t_half", m.t_half}, {"max_slope", m.max_slope}};
}

inline MulticavityResult run_multicavity_preset(int n, const std::filesystem::path& dir) {
    MulticavityResult m = run_multicavity(multicavity_config(n));
    write_result(m.run, dir, multicavity_json(m));
    return m;
}

// ------------------------------------------------------------- validation

struct Check {
    std::string name;
    double value{0.0};
    double tolerance{0.0};
    bool pass{false};
};

struct ValidationReport {
    std::string suite;
    std::vector<Check> checks;

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
    void add(std::string name, double value, double tol) { checks.push_back({std::move(name), value, tol, value <= tol}); }

    Json json() const {
        Json arr = Json::array();
        for (const auto& c : checks)
            arr.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
        return {{"suite", suite}, {"pass", pass()}, {"checks", arr}};
    }
};

/// U^dag a^dag U from a numerical diagonalization of the bare site Hamiltonian,
/// eigenvectors phased so that the |n,g> component is positive.
inline ComplexMatrix numerical_polariton_creation(const ModelParams& p, int site = 0) {
    const Index nb = bare_site_dim(p.n_max);
    const ComplexMatrix H = site_hamiltonian(p, site);
    const auto ops = site_operators(p.n_max);
    ComplexMatrix U = ComplexMatrix::Zero(nb, dressed_site_dim(p.n_max));
    U(bare_index(0, 0, p.n_max), 0) = 1.0;
    for (int n = 1; n <= p.n_max; ++n) {
        const Index ig = bare_index(0, n, p.n_max), ie = bare_index(1, n - 1, p.n_max);
        Eigen::Matrix2cd block;
        block << H(ig, ig), H(ig, ie), H(ie, ig), H(ie, ie);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(block);
        for (int b = 0; b < 2; ++b) {
            Eigen::Vector2cd v = es.eigenvectors().col(b);
            if (std::abs(v(0)) > 1e-14) v *= std::conj(v(0)) / std::abs(v(0));
            else v *= std::conj(v(1)) / std::abs(v(1));
            const Index col = b == 0 ? 2 * n - 1 : 2 * n;  // ascending: minus first
            U(ig, col) = v(0);
            U(ie, col) = v(1);
        }
    }
    return U.adjoint() * ops.a_dag * U;
}

inline ValidationReport validate_mapping() {
    ValidationReport rep{"mapping", {}};
    for (int nm : {1, 2, 3})
        for (double d : {0.0, 0.9, 2.0}) {
            const ModelParams p = ModelParams::uniform(1, d, 0.0, 0.0, nm);
            const double res = max_abs_diff(creation_in_polariton_basis(p, true), numerical_polariton_creation(p));
            rep.add("a_dag reconstruction n_max=" + std::to_string(nm) + " delta=" + format_double(d), res, 1e-10);
        }
    const auto c2 = hopping_coefficients(2, 0.0, 1.0);
    rep.add("k2(delta=0) - 0.2071", std::abs(c2.k_pm - 0.2071), 1e-3);
    rep.add("c2-(delta=0) - 1.2071", std::abs(c2.c_minus - 1.2071), 1e-3);
    rep.add("c2+(delta=0) - 1.2071", std::abs(c2.c_plus - 1.2071), 1e-3);
    return rep;
}

inline ValidationReport validate_analytic() {
    ValidationReport rep{"analytic", {}};
    // single lossy mode, n0 photons, H = 0
    const int n0 = 3;
    const double gamma = 0.2;
    const Index d = n0 + 1;
    ComplexMatrix a = ComplexMatrix::Zero(d, d);
    for (Index k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    DensityMatrix rho0 = DensityMatrix::Zero(d, d);
    rho0(n0, n0) = 1.0;
    const TimeGrid grid{0.0, 10.0, 100, 0.005, 0.01};
    const auto rhos = lindblad_evolve(ComplexMatrix::Zero(d, d), {std::sqrt(gamma) * a}, rho0, grid);
    double worst = 0.0;
    for (int k = 0; k <= grid.n_samples; ++k) {
        const double n = std::real((a.adjoint() * a * rhos[static_cast<std::size_t>(k)]).trace());
        worst = std::max(worst, std::abs(n - n0 * std::exp(-gamma * grid.time(k))));
    }
    rep.add("lindblad single-mode decay |<n> - n0 exp(-gamma t)|", worst, 1e-6);

    // Rabi oscillation of |1,g> at resonance
    const ModelParams p = ModelParams::uniform(1, 0.0, 0.0, 0.0, 1);
    StateVector psi0 = StateVector::Zero(bare_site_dim(1));
    psi0(bare_index(0, 1, 1)) = 1.0;
    const TimeGrid rg{0.0, 20.0, 200, 0.005, 0.01};
    const auto tr = evolve_unitary(site_hamiltonian(p), psi0, rg);
    double rabi = 0.0;
    for (int k = 0; k <= rg.n_samples; ++k) {
        const double pop = std::norm(tr.states[static_cast<std::size_t>(k)](bare_index(0, 1, 1)));
        rabi = std::max(rabi, std::abs(pop - std::pow(std::cos(rg.time(k)), 2)));
    }
    rep.add("Rabi |P(1,g) - cos^2(g t)|", rabi, 1e-8);
    return rep;
}

struct OracleComparison {
    ScenarioResult ensemble;
    ScenarioResult oracle;
    std::map<std::string, double> worst_excess;  // max over t of |diff| - max(3 stderr, 0.02)
    std::map<std::string, double> worst_diff;
};

/// The two-site lossy scenario from `cfg` run as an MCWF ensemble and as a
/// Lindblad oracle in the unconditional frame (both default to the full model).
inline OracleComparison compare_with_oracle(ScenarioConfig cfg, std::optional<int> threads = std::nullopt) {
    cfg.frame = Frame::unconditional;
    cfg.method = Method::mcwf;
    cfg.compute_negativity = true;
    OracleComparison oc;
    oc.ensemble = simulate(cfg, {false, threads});
    ScenarioConfig oc_cfg = cfg;
    oc_cfg.method = Method::lindblad;
    oc.oracle = simulate(oc_cfg);
    auto compare = [&](const std::string& name, const std::vector<double>& e, const std::vector<double>& se,
                       const std::vector<double>& o) {
        double excess = -1.0, diff = 0.0;
        for (std::size_t k = 0; k < e.size(); ++k) {
            const double d = std::abs(e[k] - o[k]);
            diff = std::max(diff, d);
            excess = std::max(excess, d - std::max(3.0 * se[k], 0.02));
        }
        oc.worst_excess[name] = excess;
        oc.worst_diff[name] = diff;
    };
    for (const auto& c : oc.ensemble.columns) compare(c, oc.ensemble.mean.at(c), oc.ensemble.stderr_.at(c), oc.oracle.mean.at(c));
    compare("negativity", oc.ensemble.negativity, oc.ensemble.negativity_stderr, oc.oracle.negativity);
    return oc;
}

inline ScenarioConfig oracle_scenario() {
    ScenarioConfig c;  // full model at the fig2 point
    c.name = "oracle";
    c.J = {0.03};
    c.gamma = {0.05};
    c.delta = 0.0;
    return c;
}

inline ValidationReport validate_oracle(int n_traj = 2000, std::uint64_t seed = 1, int threads = 0) {
    ValidationReport rep{"oracle", {}};
    ScenarioConfig c = oracle_scenario();
    c.n_traj = n_traj;
    c.master_seed = seed;
    c.threads = threads;
    const auto oc = compare_with_oracle(c);
    for (const auto& [name, excess] : oc.worst_excess) rep.add(name + " ensemble-oracle excess over max(3 stderr, 0.02)", excess, 0.0);
    return rep;
}

inline ValidationReport validate_suite(const std::string& suite, int n_traj = 2000, std::uint64_t seed = 1, int threads = 0) {
    if (suite == "mapping") return validate_mapping();
    if (suite == "analytic") return validate_analytic();
    if (suite == "oracle") return validate_oracle(n_traj, seed, threads);
    throw ConfigError("unknown validation suite '" + suite + "' (mapping, oracle, analytic)");
}

}  // namespace jch
