#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "field_io.hpp"
#include "models.hpp"
#include "units.hpp"

namespace cavqed {

// Run configuration: one JSON object with sections emitter, cavity, sideband,
// numerics, filter, three_level plus a top-level "model". Rates carry their
// unit in the key suffix (gamma_MHz, kappa_f_THz, ...) and every section
// holding rates states "angular": true|false. Axes are a number, an array,
// or {"start", "stop", "points", "spacing": "log"|"linear"}.

using json = nlohmann::json;

struct NumericsConfig {
    int photon_cutoff = 1;
    std::string method = "exact"; ///< exact | grid
    int frequency_points = 2048;
    int time_points = 1024;
    double window_multiplier = 10.0;
    double t_max_tolerance = 1e-6;
    int threads = 0; ///< 0 = hardware concurrency
};

struct RunConfig {
    std::string model = "two_level";
    EmitterParams emitter;
    std::vector<double> v_m_rel;
    std::vector<double> q;
    double omega_c = 0.0;
    double n = 1.0;
    double detuning = 0.0; ///< emitter minus cavity, rad/s
    double eta = 1.0;
    double f_r = 1.0;
    SidebandModel sideband;
    NumericsConfig numerics;
    std::vector<double> kappa_f;  ///< external filter widths, rad/s; empty = unfiltered
    double filter_center = 0.0;   ///< relative to the ZPL, rad/s
    std::optional<ThreeLevelParams> three_level;
    std::vector<double> theta;

    json resolved;
    std::string hash;
};

namespace detail {

inline std::string fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string line_col(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name))
    {
        if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string path(const std::string& key) const { return name_ + "." + key; }

    const json& get(const std::string& key) const
    {
        used_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(path(key) + ": required");
        }
        const json& v = get(key);
        if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
        return v.get<double>();
    }

    int integer(const std::string& key, int fallback) const
    {
        if (!has(key)) return fallback;
        const json& v = get(key);
        if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
        return v.get<int>();
    }

    std::string text(const std::string& key, const std::string& fallback) const
    {
        if (!has(key)) return fallback;
        const json& v = get(key);
        if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
        return v.get<std::string>();
    }

    bool angular() const
    {
        if (!has("angular")) throw ConfigError(path("angular") + ": required (true for rad/s, false for cycles/s)");
        const json& v = get("angular");
        if (!v.is_boolean()) throw ConfigError(path("angular") + ": expected true or false");
        return v.get<bool>();
    }

    /// Key `name_<unit>` for exactly one unit; nullopt if absent.
    std::optional<std::pair<std::string, double>> unit_key(const std::string& name) const
    {
        std::optional<std::pair<std::string, double>> hit;
        for (const char* u : {"THz", "GHz", "MHz", "Hz"}) {
            const std::string k = name + "_" + u;
            if (!has(k)) continue;
            if (hit) throw ConfigError(path(name) + ": given in more than one unit");
            hit = {k, units::frequency_scale(u)};
        }
        return hit;
    }

    std::vector<double> rate_axis(const std::string& name, bool required) const
    {
        const auto k = unit_key(name);
        if (!k) {
            if (required) throw ConfigError(path(name) + "_<THz|GHz|MHz|Hz>: required");
            return {};
        }
        const bool ang = angular();
        auto vals = axis(k->first);
        for (auto& v : vals) v = units::to_angular(v, k->second, ang);
        return vals;
    }

    std::optional<double> rate(const std::string& name, bool required) const
    {
        const auto v = rate_axis(name, required);
        if (v.empty()) return std::nullopt;
        if (v.size() != 1) throw ConfigError(path(name) + ": expected a single value");
        return v.front();
    }

    std::vector<double> axis(const std::string& key) const
    {
        const json& v = get(key);
        if (v.is_number()) return {v.get<double>()};
        std::vector<double> out;
        if (v.is_array()) {
            for (const auto& x : v) {
                if (!x.is_number()) throw ConfigError(path(key) + ": array entries must be numbers");
                out.push_back(x.get<double>());
            }
        } else if (v.is_object()) {
            for (const auto& [k, _] : v.items())
                if (k != "start" && k != "stop" && k != "points" && k != "spacing")
                    throw ConfigError(path(key) + "." + k + ": unknown key");
            if (!v.contains("start") || !v.contains("stop") || !v.contains("points"))
                throw ConfigError(path(key) + ": axis needs start, stop and points");
            if (!v["start"].is_number() || !v["stop"].is_number() || !v["points"].is_number_integer())
                throw ConfigError(path(key) + ": start/stop must be numbers and points an integer");
            const double a = v["start"].get<double>(), b = v["stop"].get<double>();
            const int n = v["points"].get<int>();
            const std::string spacing = v.value("spacing", std::string("linear"));
            if (n < 1) throw ConfigError(path(key) + ".points: must be >= 1");
            if (spacing != "log" && spacing != "linear")
                throw ConfigError(path(key) + ".spacing: expected 'log' or 'linear'");
            if (spacing == "log" && !(a > 0.0 && b > 0.0))
                throw ConfigError(path(key) + ": log axis needs positive start and stop");
            for (int i = 0; i < n; ++i) {
                const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
                out.push_back(spacing == "log" ? a * std::pow(b / a, t) : a + (b - a) * t);
            }
        } else {
            throw ConfigError(path(key) + ": expected a number, array or axis object");
        }
        if (out.empty()) throw ConfigError(path(key) + ": axis is empty");
        for (double x : out)
            if (!std::isfinite(x)) throw ConfigError(path(key) + ": non-finite value");
        return out;
    }

    void reject_unknown() const
    {
        for (const auto& [k, _] : j_.items())
            if (!used_.count(k)) throw ConfigError(path(k) + ": unknown key");
    }

private:
    const json& j_;
    std::string name_;
    mutable std::set<std::string> used_;
};

inline SidebandModel parse_sideband(const json& j, const std::string& where, double debye_waller)
{
    const Section s(j, where);
    if (!s.has("components")) throw ConfigError(s.path("components") + ": required");
    const json& comps = s.get("components");
    if (!comps.is_array()) throw ConfigError(s.path("components") + ": expected an array");
    const bool ang = (s.has("angular") || !comps.empty()) ? s.angular() : false;
    s.text("description", "");
    std::vector<SidebandComponent> out;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const Section c(comps[k], where + ".components[" + std::to_string(k) + "]");
        const auto center = c.unit_key("center");
        const auto fwhm = c.unit_key("fwhm");
        if (!center || !fwhm) throw ConfigError(c.path("center_<unit>/fwhm_<unit>") + ": required");
        SidebandComponent sc;
        sc.center = units::to_angular(c.number(center->first), center->second, ang);
        sc.width = units::to_angular(c.number(fwhm->first), fwhm->second, ang);
        sc.weight = c.number("weight");
        if (!(sc.width > 0.0)) throw ConfigError(c.path(fwhm->first) + ": must be > 0");
        if (!(sc.weight > 0.0)) throw ConfigError(c.path("weight") + ": must be > 0");
        c.reject_unknown();
        out.push_back(sc);
    }
    s.reject_unknown();
    if (out.empty()) {
        if (debye_waller != 1.0) throw ConfigError(where + ": no components but emitter.debye_waller < 1");
        return {};
    }
    return SidebandModel::normalized(out, debye_waller);
}

inline void check_positive(double v, const std::string& what)
{
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + ": must be > 0");
}

} // namespace detail

inline json parse_json_text(const std::string& text, const std::string& origin)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
    }
}

/// Applies `section.key=value` (dotted path); the value is parsed as JSON,
/// falling back to a plain string.
inline void apply_override(json& root, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set '" + assignment + "': expected key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &root;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("--set '" + assignment + "': empty key component");
        if (!node->is_object()) throw ConfigError("--set '" + assignment + "': '" + key + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        pos = dot + 1;
    }
}

/// Validates a raw configuration; `base_dir` resolves relative file paths.
inline RunConfig resolve_config(json raw, const std::filesystem::path& base_dir = ".")
{
    using detail::Section;
    if (!raw.is_object()) throw ConfigError("config: top level must be an object");

    if (raw.contains("sideband") && raw["sideband"].is_object() && raw["sideband"].contains("file")) {
        const json& f = raw["sideband"]["file"];
        if (!f.is_string()) throw ConfigError("sideband.file: expected a path string");
        if (raw["sideband"].size() != 1) throw ConfigError("sideband: 'file' excludes other keys");
        std::filesystem::path p(f.get<std::string>());
        if (p.is_relative()) p = base_dir / p;
        std::string text;
        try {
            text = detail::read_file(p.string());
        } catch (const IoError& e) {
            throw ConfigError(std::string("sideband.file: ") + e.what());
        }
        raw["sideband"] = parse_json_text(text, p.string());
    }

    RunConfig cfg;
    const Section top(raw, "config");
    cfg.model = top.text("model", "two_level");
    top.text("description", "");
    if (cfg.model != "two_level" && cfg.model != "three_level")
        throw ConfigError("config.model: expected 'two_level' or 'three_level'");

    if (!top.has("emitter")) throw ConfigError("emitter: section required");
    const Section em(top.get("emitter"), "emitter");
    cfg.emitter.gamma = *em.rate("gamma", true);
    cfg.emitter.gamma_star = em.rate("gamma_star", false).value_or(0.0);
    cfg.emitter.debye_waller = em.number("debye_waller", 1.0);
    const double lambda_nm = em.number("wavelength_nm");
    detail::check_positive(lambda_nm, "emitter.wavelength_nm");
    cfg.emitter.omega0 = units::omega_from_wavelength(lambda_nm * 1e-9);
    if (em.has("coupling_fraction")) cfg.emitter.coupling_fraction = em.number("coupling_fraction");
    em.reject_unknown();
    try {
        cfg.emitter.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("emitter: ") + e.what());
    }

    if (!top.has("cavity")) throw ConfigError("cavity: section required");
    const Section cav(top.get("cavity"), "cavity");
    if (cav.has("v_m_rel")) cfg.v_m_rel = cav.axis("v_m_rel");
    if (cav.has("q")) cfg.q = cav.axis("q");
    for (double v : cfg.v_m_rel) detail::check_positive(v, "cavity.v_m_rel");
    for (double v : cfg.q)
        if (!(v >= 1.0)) throw ConfigError("cavity.q: must be >= 1");
    cfg.omega_c = units::omega_from_wavelength(cav.number("wavelength_nm", lambda_nm) * 1e-9);
    cfg.n = cav.number("n", 1.0);
    if (!(cfg.n >= 1.0)) throw ConfigError("cavity.n: must be >= 1");
    cfg.detuning = cav.unit_key("detuning") ? *cav.rate("detuning", false) : 0.0;
    cfg.eta = cav.number("eta", 1.0);
    cfg.f_r = cav.number("f_r", 1.0);
    if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) throw ConfigError("cavity.eta: must lie in [0, 1]");
    if (!(cfg.f_r >= 0.0 && cfg.f_r <= 1.0)) throw ConfigError("cavity.f_r: must lie in [0, 1]");
    cav.reject_unknown();

    if (top.has("sideband")) {
        cfg.sideband = detail::parse_sideband(top.get("sideband"), "sideband", cfg.emitter.debye_waller);
    } else if (cfg.emitter.debye_waller != 1.0) {
        throw ConfigError("sideband: section required when emitter.debye_waller < 1");
    }

    if (top.has("numerics")) {
        const Section nu(top.get("numerics"), "numerics");
        auto& n = cfg.numerics;
        n.photon_cutoff = nu.integer("photon_cutoff", n.photon_cutoff);
        n.method = nu.text("method", n.method);
        n.frequency_points = nu.integer("frequency_points", n.frequency_points);
        n.time_points = nu.integer("time_points", n.time_points);
        n.window_multiplier = nu.number("window_multiplier", n.window_multiplier);
        n.t_max_tolerance = nu.number("t_max_tolerance", n.t_max_tolerance);
        n.threads = nu.integer("threads", n.threads);
        nu.reject_unknown();
        if (n.photon_cutoff < 1) throw ConfigError("numerics.photon_cutoff: must be >= 1");
        if (n.method != "exact" && n.method != "grid") throw ConfigError("numerics.method: expected 'exact' or 'grid'");
        if (n.frequency_points < 16) throw ConfigError("numerics.frequency_points: must be >= 16");
        if (n.time_points < 16) throw ConfigError("numerics.time_points: must be >= 16");
        detail::check_positive(n.window_multiplier, "numerics.window_multiplier");
        detail::check_positive(n.t_max_tolerance, "numerics.t_max_tolerance");
        if (n.threads < 0) throw ConfigError("numerics.threads: must be >= 0");
    }

    if (top.has("filter")) {
        const Section fi(top.get("filter"), "filter");
        cfg.kappa_f = fi.rate_axis("kappa_f", false);
        for (double k : cfg.kappa_f) detail::check_positive(k, "filter.kappa_f");
        cfg.filter_center = fi.unit_key("center") ? *fi.rate("center", false) : 0.0;
        fi.reject_unknown();
    }

    if (top.has("three_level")) {
        const Section tl(top.get("three_level"), "three_level");
        ThreeLevelParams p;
        p.base = cfg.emitter;
        p.delta = *tl.rate("delta", true);
        p.gamma_star_xy = tl.rate("gamma_star_xy", false).value_or(0.0);
        p.temperature = tl.number("temperature_K");
        if (tl.has("theta")) cfg.theta = tl.axis("theta");
        if (tl.has("theta_deg")) {
            if (!cfg.theta.empty()) throw ConfigError("three_level: give theta or theta_deg, not both");
            for (double d : tl.axis("theta_deg")) cfg.theta.push_back(d * units::pi / 180.0);
        }
        if (cfg.theta.empty()) cfg.theta = {0.0};
        for (double t : cfg.theta)
            if (!(t >= 0.0 && t <= units::pi / 2 + 1e-12)) throw ConfigError("three_level.theta: must lie in [0, pi/2]");
        p.theta = cfg.theta.front();
        const std::string upper = tl.text("upper", "x");
        const std::string res = tl.text("resonance", "y");
        const std::string init = tl.text("initial", "theta");
        if (upper != "x" && upper != "y") throw ConfigError("three_level.upper: expected 'x' or 'y'");
        if (res != "x" && res != "y" && res != "midpoint")
            throw ConfigError("three_level.resonance: expected 'x', 'y' or 'midpoint'");
        if (init != "theta" && init != "x" && init != "y")
            throw ConfigError("three_level.initial: expected 'theta', 'x' or 'y'");
        p.upper = upper == "x" ? ExcitedLevel::x : ExcitedLevel::y;
        p.resonance = res == "x" ? CavityResonance::x : res == "y" ? CavityResonance::y : CavityResonance::midpoint;
        p.initial = init == "theta" ? InitialPopulation::theta : init == "x" ? InitialPopulation::x : InitialPopulation::y;
        tl.reject_unknown();
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("three_level: ") + e.what());
        }
        cfg.three_level = p;
    }
    if (cfg.numerics.method == "grid" && cfg.detuning != 0.0 && !cfg.kappa_f.empty())
        throw ConfigError("numerics.method: 'grid' cannot filter a detuned cavity externally, use 'exact'");
    if (cfg.model == "three_level" && !cfg.three_level) throw ConfigError("three_level: section required by model");

    top.reject_unknown();
    cfg.resolved = raw;
    cfg.hash = "fnv1a64:" + detail::fnv1a64(raw.dump());
    return cfg;
}

/// Reads a config file, applies overrides in order and resolves it.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {})
{
    std::string text;
    try {
        text = detail::read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    json raw = parse_json_text(text, path);
    for (const auto& o : overrides) apply_override(raw, o);
    return resolve_config(std::move(raw), std::filesystem::path(path).parent_path());
}

} // namespace cavqed
