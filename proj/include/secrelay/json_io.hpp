#ifndef SECRELAY_JSON_IO_HPP
#define SECRELAY_JSON_IO_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "secrelay/channel.hpp"
#include "secrelay/common.hpp"
#include "secrelay/fading.hpp"
#include "secrelay/optim.hpp"

// JSON mapping for the documented file formats. Parse errors throw
// validation_error with the offending field's path so the CLI can report it.

namespace secrelay {

using json = nlohmann::json;

namespace detail {

inline double json_number(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key) || !j[key].is_number())
        throw validation_error("config: missing or non-numeric field '" + path + key + "'");
    return j[key].get<double>();
}

inline double json_number_or(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number())
        throw validation_error("config: non-numeric field '" + key + "'");
    return j[key].get<double>();
}

} // namespace detail

// --- channel document ------------------------------------------------------

struct ChannelConfig {
    ParallelChannel channel;
    PowerBudget budget;
};

inline json to_json(const GaussianSubchannel& s) {
    return json{{"sigma2_relay", s.sigma2_relay},
                {"sigma2_dest", s.sigma2_dest},
                {"sigma2_eve", s.sigma2_eve},
                {"rho1", s.rho1},
                {"rho2", s.rho2}};
}

inline json to_json(const ChannelConfig& c) {
    json subs = json::array();
    for (const auto& s : c.channel.subchannels) subs.push_back(to_json(s));
    return json{{"subchannels", subs}, {"budget", {{"p1", c.budget.p1_total}, {"p2", c.budget.p2_total}}}};
}

inline ChannelConfig channel_config_from_json(const json& j) {
    ChannelConfig c;
    if (!j.contains("subchannels") || !j["subchannels"].is_array() || j["subchannels"].empty())
        throw validation_error("config: 'subchannels' must be a non-empty array");
    std::size_t i = 0;
    for (const auto& js : j["subchannels"]) {
        const std::string path = "subchannels[" + std::to_string(i) + "].";
        GaussianSubchannel s;
        s.sigma2_relay = detail::json_number(js, "sigma2_relay", path);
        s.sigma2_dest = detail::json_number(js, "sigma2_dest", path);
        s.sigma2_eve = detail::json_number(js, "sigma2_eve", path);
        s.rho1 = detail::json_number(js, "rho1", path);
        s.rho2 = detail::json_number(js, "rho2", path);
        c.channel.subchannels.push_back(s);
        ++i;
    }
    if (!j.contains("budget") || !j["budget"].is_object())
        throw validation_error("config: missing object 'budget'");
    c.budget.p1_total = detail::json_number(j["budget"], "p1", "budget.");
    c.budget.p2_total = detail::json_number(j["budget"], "p2", "budget.");
    validate_channel(c.channel);
    validate_budget(c.budget);
    return c;
}

// --- allocation / modes ------------------------------------------------------

inline json to_json(const Allocation& a) {
    return json{{"p1", a.p1}, {"p2", a.p2}, {"alpha", a.alpha}, {"psi", a.psi}};
}

inline json to_json(const ModeAssignment& m) {
    json arr = json::array();
    for (RelayMode mode : m.modes) arr.push_back(mode == RelayMode::DF ? "DF" : "NF");
    return arr;
}

inline ModeAssignment modes_from_json(const json& j) {
    if (!j.is_array()) throw validation_error("config: 'modes' must be an array of \"DF\"/\"NF\"");
    ModeAssignment m;
    for (const auto& e : j) {
        const std::string s = e.is_string() ? e.get<std::string>() : std::string();
        if (s == "DF") m.modes.push_back(RelayMode::DF);
        else if (s == "NF") m.modes.push_back(RelayMode::NF);
        else throw validation_error("config: 'modes' entries must be \"DF\" or \"NF\"");
    }
    return m;
}

// --- solver options ----------------------------------------------------------

inline json to_json(const SolverOptions& o) {
    return json{{"n_starts", o.n_starts},   {"max_iters", o.max_iters},
                {"step_init", o.step_init}, {"tol", o.tol},
                {"seed", o.seed},           {"grid_resolution", o.grid_resolution}};
}

inline SolverOptions solver_from_json(const json& j, SolverOptions base = {}) {
    base.n_starts = static_cast<int>(detail::json_number_or(j, "n_starts", base.n_starts));
    base.max_iters = static_cast<int>(detail::json_number_or(j, "max_iters", base.max_iters));
    base.step_init = detail::json_number_or(j, "step_init", base.step_init);
    base.tol = detail::json_number_or(j, "tol", base.tol);
    base.seed = static_cast<std::uint64_t>(
        detail::json_number_or(j, "seed", static_cast<double>(base.seed)));
    base.grid_resolution =
        static_cast<int>(detail::json_number_or(j, "grid_resolution", base.grid_resolution));
    validate_options(base);
    return base;
}

// --- fading scenario ---------------------------------------------------------

inline json to_json(const FadingScenario& sc) {
    auto pos = [](const std::array<double, 2>& p) { return json::array({p[0], p[1]}); };
    return json{{"geometry",
                 {{"source", pos(sc.geometry.source_pos)},
                  {"relay", pos(sc.geometry.relay_pos)},
                  {"dest", pos(sc.geometry.dest_pos)},
                  {"eve", pos(sc.geometry.eve_pos)},
                  {"gamma", sc.geometry.gamma}}},
                {"budget", {{"p1", sc.budget.p1_total}, {"p2", sc.budget.p2_total}}},
                {"n_states", sc.n_states},
                {"noise",
                 {{"sigma2_relay", sc.noise.sigma2_relay},
                  {"sigma2_dest", sc.noise.sigma2_dest},
                  {"sigma2_eve", sc.noise.sigma2_eve}}},
                {"seed", sc.seed}};
}

inline FadingScenario scenario_from_json(const json& j) {
    FadingScenario sc;
    if (j.contains("geometry")) {
        const json& jg = j["geometry"];
        auto pos = [&](const char* key, std::array<double, 2> fallback) {
            if (!jg.contains(key)) return fallback;
            const json& p = jg[key];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                throw validation_error(std::string("config: geometry.") + key +
                                       " must be [x, y]");
            return std::array<double, 2>{p[0].get<double>(), p[1].get<double>()};
        };
        sc.geometry.source_pos = pos("source", sc.geometry.source_pos);
        sc.geometry.relay_pos = pos("relay", sc.geometry.relay_pos);
        sc.geometry.dest_pos = pos("dest", sc.geometry.dest_pos);
        sc.geometry.eve_pos = pos("eve", sc.geometry.eve_pos);
        sc.geometry.gamma = detail::json_number_or(jg, "gamma", sc.geometry.gamma);
    }
    if (j.contains("budget")) {
        sc.budget.p1_total = detail::json_number(j["budget"], "p1", "scenario.budget.");
        sc.budget.p2_total = detail::json_number(j["budget"], "p2", "scenario.budget.");
    } else {
        sc.budget = {64.0, 64.0};
    }
    sc.n_states = static_cast<int>(detail::json_number_or(j, "n_states", 64));
    if (j.contains("noise")) {
        const json& jn = j["noise"];
        sc.noise.sigma2_relay = detail::json_number_or(jn, "sigma2_relay", 1.0);
        sc.noise.sigma2_dest = detail::json_number_or(jn, "sigma2_dest", 1.0);
        sc.noise.sigma2_eve = detail::json_number_or(jn, "sigma2_eve", 1.0);
    }
    sc.seed = static_cast<std::uint64_t>(detail::json_number_or(j, "seed", 0.0));
    validate_scenario(sc);
    return sc;
}

} // namespace secrelay

#endif
