// Command-line front end: secrecy-rate bounds, the deterministic two-pipe
// example, relay-position sweeps, oracle cross-checks, and gradient checks.
//
// Exit codes: 0 success, 2 configuration error, 3 resource/size error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "secrelay/secrelay.hpp"

namespace {

using secrelay::json;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_size = 3;

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw secrelay::validation_error("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw secrelay::validation_error("config: invalid JSON in '" + path + "': " + e.what());
    }
    // A metadata sidecar is accepted as a config: unwrap its "config" key.
    if (j.is_object() && j.contains("config") && j["config"].is_object()) return j["config"];
    if (!j.is_object()) throw secrelay::validation_error("config: top level must be an object");
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw secrelay::validation_error("config: cannot write '" + path + "'");
    out << text;
}

json result_to_json(const secrelay::BoundResult& r) {
    json j{{"value", r.value}, {"allocation", secrelay::to_json(r.allocation)}};
    if (r.modes) j["modes"] = secrelay::to_json(*r.modes);
    j["diagnostics"] = {{"iterations", r.diagnostics.iterations},
                        {"starts_tried", r.diagnostics.starts_tried},
                        {"best_start", r.diagnostics.best_start},
                        {"converged", r.diagnostics.converged},
                        {"condition_binding", r.diagnostics.condition_binding}};
    return j;
}

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
};

secrelay::SolverOptions resolve_solver(const json& cfg, const CommonFlags& flags) {
    secrelay::SolverOptions opt;
    if (cfg.contains("solver")) opt = secrelay::solver_from_json(cfg["solver"], opt);
    if (flags.seed) opt.seed = *flags.seed;
    return opt;
}

int cmd_bounds(const CommonFlags& flags) {
    const json cfg = load_config_file(flags.config_path);
    if (!cfg.contains("channel"))
        throw secrelay::validation_error("config: missing object 'channel'");
    const auto cc = secrelay::channel_config_from_json(cfg["channel"]);
    const auto solver = resolve_solver(cfg, flags);

    std::optional<secrelay::ModeAssignment> modes;
    if (cfg.contains("modes")) {
        modes = secrelay::modes_from_json(cfg["modes"]);
        secrelay::validate_modes(*modes, cc.channel.size());
    }

    secrelay::BoundResult lower;
    if (modes) {
        lower = secrelay::maximize_lower(cc.channel, cc.budget, *modes, solver);
    } else {
        // No assignment given: try DF everywhere and NF everywhere, keep the
        // better (ties to DF).
        const std::size_t L = cc.channel.size();
        const secrelay::ModeAssignment all_df{std::vector<secrelay::RelayMode>(L, secrelay::RelayMode::DF)};
        const secrelay::ModeAssignment all_nf{std::vector<secrelay::RelayMode>(L, secrelay::RelayMode::NF)};
        const auto rdf = secrelay::maximize_lower(cc.channel, cc.budget, all_df, solver);
        const auto rnf = secrelay::maximize_lower(cc.channel, cc.budget, all_nf, solver);
        lower = rnf.value > rdf.value ? rnf : rdf;
    }
    const auto upper = secrelay::maximize_upper(cc.channel, cc.budget, solver);
    const auto deaf_up = secrelay::maximize_deaf(cc.channel, cc.budget, solver, false);
    const auto deaf_low = secrelay::maximize_deaf(cc.channel, cc.budget, solver, true);
    const auto capacity = secrelay::detect_deaf_capacity(cc.channel, cc.budget, solver);

    json resolved = cfg;
    resolved["solver"] = secrelay::to_json(solver);
    json report{{"version", std::string(secrelay::version)},
                {"config", resolved},
                {"lower", result_to_json(lower)},
                {"upper", result_to_json(upper)},
                {"deaf", {{"upper", result_to_json(deaf_up)}, {"lower", result_to_json(deaf_low)}}}};
    if (capacity.capacity) {
        report["deaf"]["capacity"] = *capacity.capacity;
        report["deaf"]["certificate"] = secrelay::to_json(capacity.certificate);
    }
    const std::string text = report.dump(2) + "\n";
    if (flags.out_path.empty()) std::cout << text;
    else write_text(flags.out_path, text);
    return exit_ok;
}

int cmd_fig3() {
    const std::vector<secrelay::DeterministicSubchannel> pipes{{4.0, 3.0, 2.0}, {5.0, 7.0, 3.0}};
    const double across = secrelay::deterministic_across(pipes);
    const double separate = secrelay::deterministic_separate(pipes);
    std::cout << "across=" << fmt9(across) << " separate=" << fmt9(separate) << "\n";
    return exit_ok;
}

struct SweepFlags {
    std::optional<double> d_min, d_max, d_step;
    std::optional<int> n_states;
    std::string schemes_csv;
};

int cmd_sweep(const CommonFlags& flags, const SweepFlags& sf) {
    json cfg = flags.config_path.empty() ? json::object() : load_config_file(flags.config_path);
    secrelay::FadingScenario scenario = cfg.contains("scenario")
                                            ? secrelay::scenario_from_json(cfg["scenario"])
                                            : secrelay::scenario_from_json(json::object());
    auto solver = resolve_solver(cfg, flags);
    if (flags.seed) scenario.seed = *flags.seed;
    if (sf.n_states) scenario.n_states = *sf.n_states;
    secrelay::validate_scenario(scenario);

    const json sweep_cfg = cfg.contains("sweep") ? cfg["sweep"] : json::object();
    const double d_min = sf.d_min ? *sf.d_min : secrelay::detail::json_number_or(sweep_cfg, "d_min", 0.1);
    const double d_max = sf.d_max ? *sf.d_max : secrelay::detail::json_number_or(sweep_cfg, "d_max", 1.9);
    const double d_step = sf.d_step ? *sf.d_step : secrelay::detail::json_number_or(sweep_cfg, "d_step", 0.1);
    if (!(d_step > 0.0) || d_max < d_min)
        throw secrelay::validation_error("config: sweep grid requires d_step > 0 and d_max >= d_min");
    const int n_batches =
        static_cast<int>(secrelay::detail::json_number_or(sweep_cfg, "n_batches", 1.0));
    if (n_batches < 1) throw secrelay::validation_error("config: sweep.n_batches must be >= 1");
    const bool joint = sweep_cfg.contains("joint_mode_search") &&
                       sweep_cfg["joint_mode_search"].is_boolean() &&
                       sweep_cfg["joint_mode_search"].get<bool>();

    std::vector<std::string> scheme_names;
    if (!sf.schemes_csv.empty()) {
        std::stringstream ss(sf.schemes_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) scheme_names.push_back(tok);
    } else if (sweep_cfg.contains("schemes")) {
        for (const auto& e : sweep_cfg["schemes"]) scheme_names.push_back(e.get<std::string>());
    } else {
        scheme_names = {"DF_all", "NF_all", "hybrid_best", "no_relay", "upper"};
    }
    std::vector<secrelay::SweepScheme> schemes;
    for (const auto& n : scheme_names) schemes.push_back(secrelay::sweep_scheme_from_string(n));

    std::vector<double> d_values;
    for (double d = d_min; d <= d_max + 1e-12; d += d_step) d_values.push_back(d);

    // Average rates over batches; batch b re-seeds the scenario deterministically.
    std::vector<secrelay::SweepRow> rows;
    for (int b = 0; b < n_batches; ++b) {
        secrelay::FadingScenario sb = scenario;
        sb.seed = scenario.seed + 1000003ULL * static_cast<std::uint64_t>(b);
        auto batch_rows = secrelay::sweep_relay_position(sb, d_values, schemes, solver, joint);
        if (b == 0) {
            rows = std::move(batch_rows);
        } else {
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rate += batch_rows[i].rate;
        }
    }
    if (n_batches > 1)
        for (auto& r : rows) r.rate /= static_cast<double>(n_batches);

    std::string csv = "d,scheme,rate_bits\n";
    for (const auto& r : rows)
        csv += fmt9(r.d) + "," + secrelay::to_string(r.scheme) + "," + fmt9(r.rate) + "\n";

    json resolved = cfg;
    resolved["scenario"] = secrelay::to_json(scenario);
    resolved["solver"] = secrelay::to_json(solver);
    resolved["sweep"] = {{"d_min", d_min},
                         {"d_max", d_max},
                         {"d_step", d_step},
                         {"n_batches", n_batches},
                         {"joint_mode_search", joint},
                         {"schemes", scheme_names}};
    if (flags.out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(flags.out_path, csv);
        json meta{{"version", std::string(secrelay::version)},
                  {"seed", scenario.seed},
                  {"n_states", scenario.n_states},
                  {"solver", secrelay::to_json(solver)},
                  {"config", resolved}};
        write_text(flags.out_path + ".meta.json", meta.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_oracle_check(const CommonFlags& flags) {
    const json cfg = load_config_file(flags.config_path);
    if (!cfg.contains("channel"))
        throw secrelay::validation_error("config: missing object 'channel'");
    const auto cc = secrelay::channel_config_from_json(cfg["channel"]);
    const auto solver = resolve_solver(cfg, flags);
    const std::size_t L = cc.channel.size();
    secrelay::ModeAssignment modes{std::vector<secrelay::RelayMode>(L, secrelay::RelayMode::NF)};
    if (cfg.contains("modes")) {
        modes = secrelay::modes_from_json(cfg["modes"]);
        secrelay::validate_modes(modes, L);
    }
    const int r = solver.grid_resolution;
    struct Line {
        const char* name;
        double opt, oracle;
    };
    const Line lines[] = {
        {"lower", secrelay::maximize_lower(cc.channel, cc.budget, modes, solver).value,
         secrelay::grid_oracle_lower(cc.channel, cc.budget, modes, r).value},
        {"upper", secrelay::maximize_upper(cc.channel, cc.budget, solver).value,
         secrelay::grid_oracle_upper(cc.channel, cc.budget, r).value},
        {"deaf", secrelay::maximize_deaf(cc.channel, cc.budget, solver, false).value,
         secrelay::grid_oracle_deaf(cc.channel, cc.budget, r, false).value},
    };
    for (const auto& l : lines)
        std::cout << l.name << ": optimizer=" << fmt9(l.opt) << " oracle=" << fmt9(l.oracle)
                  << " |diff|=" << fmt9(std::abs(l.opt - l.oracle)) << "\n";
    return exit_ok;
}

int cmd_gradcheck(const CommonFlags& flags) {
    secrelay::SolverOptions solver;
    secrelay::ChannelConfig cc;
    if (!flags.config_path.empty()) {
        const json cfg = load_config_file(flags.config_path);
        if (!cfg.contains("channel"))
            throw secrelay::validation_error("config: missing object 'channel'");
        cc = secrelay::channel_config_from_json(cfg["channel"]);
        solver = resolve_solver(cfg, flags);
    } else {
        cc.channel.subchannels = {{1.0, 1.0, 2.0, 4.0, 0.5}, {0.5, 1.5, 1.0, 1.0, 2.0}};
        cc.budget = {4.0, 4.0};
        if (flags.seed) solver.seed = *flags.seed;
    }
    const std::size_t L = cc.channel.size();
    secrelay::ModeAssignment modes{std::vector<secrelay::RelayMode>(L, secrelay::RelayMode::NF)};
    for (std::size_t l = 0; l + 1 < L; l += 2) modes.modes[l] = secrelay::RelayMode::DF;

    std::mt19937_64 rng(solver.seed);
    auto interior_point = [&]() {
        secrelay::Allocation a = secrelay::zero_allocation(L);
        for (std::size_t l = 0; l < L; ++l) {
            a.p1[l] = secrelay::detail::uniform_in(rng, 0.1, 0.9) * cc.budget.p1_total /
                      static_cast<double>(L);
            a.p2[l] = secrelay::detail::uniform_in(rng, 0.1, 0.9) * cc.budget.p2_total /
                      static_cast<double>(L);
            a.alpha[l] = secrelay::detail::uniform_in(rng, 0.1, 0.9);
            a.psi[l] = secrelay::detail::uniform_in(rng, -0.9, 0.9);
        }
        return a;
    };
    const secrelay::ObjectiveKind kinds[] = {secrelay::ObjectiveKind::lower,
                                             secrelay::ObjectiveKind::upper,
                                             secrelay::ObjectiveKind::deaf};
    const char* names[] = {"lower", "upper", "deaf"};
    for (int k = 0; k < 3; ++k) {
        double worst = 0.0;
        int done = 0, attempts = 0;
        while (done < 20 && attempts < 2000) {
            ++attempts;
            try {
                worst = std::max(worst, secrelay::finite_diff_check(kinds[k], cc.channel, cc.budget,
                                                                    modes, interior_point()));
                ++done;
            } catch (const secrelay::kink_proximity_error&) {
                continue;
            }
        }
        std::cout << names[k] << ": max_rel_error=" << fmt9(worst) << " points=" << done << "\n";
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"secrecy-rate bounds for parallel Gaussian relay channels with an eavesdropper"};
    app.require_subcommand(1);

    CommonFlags flags;
    SweepFlags sf;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    int n_states_flag = 0;
    double d_min_flag = 0, d_max_flag = 0, d_step_flag = 0;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", flags.config_path, "JSON config file");
        if (need_config) opt->required();
        sub->add_option("--out", flags.out_path, "output path (default: stdout)");
        sub->add_option("--seed", seed_flag, "RNG seed override");
    };

    auto* bounds = app.add_subcommand("bounds", "optimize all bounds for a channel config");
    add_common(bounds, true);

    auto* fig3 = app.add_subcommand("fig3", "deterministic two-subchannel coding example");
    (void)fig3;

    auto* sweep = app.add_subcommand("sweep", "relay-position sweep over fading scenarios");
    add_common(sweep, false);
    sweep->add_option("--n-states", n_states_flag, "fading states per batch");
    sweep->add_option("--d-min", d_min_flag, "first relay distance");
    sweep->add_option("--d-max", d_max_flag, "last relay distance");
    sweep->add_option("--d-step", d_step_flag, "relay distance step");
    sweep->add_option("--schemes", sf.schemes_csv,
                      "comma list of DF_all,NF_all,hybrid_best,no_relay,upper");

    auto* oracle = app.add_subcommand("oracle-check", "optimizer vs exhaustive lattice search");
    add_common(oracle, true);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the gradients");
    add_common(grad, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }
    auto flag_given = [](const CLI::App* sub, const std::string& name) {
        const CLI::Option* o = sub->get_option_no_throw(name);
        return o != nullptr && o->count() > 0;
    };
    for (const CLI::App* sub : {bounds, sweep, oracle, grad})
        if (sub->parsed() && flag_given(sub, "--seed")) seed_set = true;
    if (seed_set) flags.seed = seed_flag;
    if (sweep->parsed()) {
        if (flag_given(sweep, "--n-states")) sf.n_states = n_states_flag;
        if (flag_given(sweep, "--d-min")) sf.d_min = d_min_flag;
        if (flag_given(sweep, "--d-max")) sf.d_max = d_max_flag;
        if (flag_given(sweep, "--d-step")) sf.d_step = d_step_flag;
    }

    try {
        if (bounds->parsed()) return cmd_bounds(flags);
        if (fig3->parsed()) return cmd_fig3();
        if (sweep->parsed()) return cmd_sweep(flags, sf);
        if (oracle->parsed()) return cmd_oracle_check(flags);
        if (grad->parsed()) return cmd_gradcheck(flags);
    } catch (const secrelay::size_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_size;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    }
    return exit_config;
}
