#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "merit.hpp"
#include "photonics.hpp"

namespace cavqed {

struct PointSpec {
    double v_m_rel = 0.0;
    double q = 0.0;
    std::optional<double> kappa_f;
    std::optional<double> theta;
};

struct PointResult {
    PointSpec spec;
    double g = 0.0;
    double kappa_c = 0.0;
    FigureOfMerit fom;
    std::string status = "ok";
};

inline EmitterCavityModel build_model(const RunConfig& cfg, const PointSpec& p, double& g_out, double& kappa_out)
{
    const CavityParams cav{p.v_m_rel, p.q, cfg.omega_c, cfg.n};
    CouplingGeometry geom;
    geom.eta = cfg.eta;
    geom.f_r = cfg.f_r;
    g_out = coupling_from_geometry(cav, cfg.emitter, geom);
    kappa_out = cav.kappa();
    const CavityCoupling cc{g_out, kappa_out, cfg.detuning};
    if (cfg.model == "three_level") {
        ThreeLevelParams tl = *cfg.three_level;
        tl.base = cfg.emitter;
        if (p.theta) tl.theta = *p.theta;
        return build_three_level_model(tl, cc, cfg.numerics.photon_cutoff);
    }
    return build_two_level_model(cfg.emitter, cc, cfg.numerics.photon_cutoff);
}

/// ZPL spectrum on a time/frequency grid (numerics.method = grid).
inline TwoColourSpectrum grid_spectrum(const EmitterCavityModel& m, const NumericsConfig& n)
{
    const Superoperator l = m.liouvillian();
    const double t_max = adaptive_t_max(l, m.initial_state, m.loss_operator, n.t_max_tolerance);
    const auto t = uniform_axis(t_max / (n.time_points - 1), n.time_points);
    const Operator e = m.emission_operator;
    const CorrelatorGrid g = two_time_correlator(l, m.initial_state, e.adjoint(), e, t, t);
    return two_colour_spectrum(g, m.emission_rate,
                               default_frequency_axis(m, n.window_multiplier, n.frequency_points), m.rate_scale);
}

/// Figures of merit at one point; throws on failure.
inline PointResult evaluate_point(const RunConfig& cfg, const PointSpec& p)
{
    PointResult r;
    r.spec = p;
    const EmitterCavityModel m = build_model(cfg, p, r.g, r.kappa_c);
    // frame rotates at the cavity: ZPL sits at +detuning, the cavity at 0
    const FilterSpec cavity(r.kappa_c, -cfg.detuning);
    const bool grid = cfg.numerics.method == "grid";
    if (!p.kappa_f) {
        r.fom = grid ? figure_of_merit(grid_spectrum(m, cfg.numerics), cfg.sideband, cavity)
                     : evaluate(m, cfg.sideband, cavity);
        return r;
    }
    const FilterSpec ext(*p.kappa_f, cfg.filter_center);
    const double purcell = r.kappa_c > 0.0 ? 4.0 * r.g * r.g / r.kappa_c : 0.0;
    if (grid) {
        r.fom = apply_external_filter(grid_spectrum(m, cfg.numerics), cfg.sideband, cavity, ext);
        r.fom.tight_filter = ext.kappa < purcell + cfg.emitter.gamma;
    } else {
        r.fom = evaluate_filtered(m, cfg.sideband, cavity, ext, purcell + cfg.emitter.gamma, cfg.detuning);
    }
    return r;
}

inline std::string failure_status(const std::exception& e)
{
    if (const auto* n = dynamic_cast<const NumericsError*>(&e)) return "failed:" + n->reason();
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "failed:invalid_parameters";
    return "failed:error";
}

/// Evaluates every point; failures are recorded per row. Results are in
/// input order whatever the thread count.
inline std::vector<PointResult> evaluate_points(const RunConfig& cfg, const std::vector<PointSpec>& pts, int threads = 0)
{
    std::vector<PointResult> out(pts.size());
    auto work = [&](std::size_t k) {
        try {
            out[k] = evaluate_point(cfg, pts[k]);
        } catch (const std::exception& e) {
            PointResult r;
            r.spec = pts[k];
            try {
                build_model(cfg, pts[k], r.g, r.kappa_c);
            } catch (const std::exception&) {
            }
            r.status = failure_status(e);
            out[k] = r;
        }
    };
    unsigned n = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, pts.size()));
    if (n <= 1) {
        for (std::size_t k = 0; k < pts.size(); ++k) work(k);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < pts.size(); k = next++) work(k);
        });
    for (auto& th : pool) th.join();
    return out;
}

inline std::vector<PointSpec> sweep_points(const RunConfig& cfg)
{
    if (cfg.v_m_rel.empty() || cfg.q.empty()) throw ConfigError("cavity.v_m_rel and cavity.q: required for a sweep");
    if (cfg.kappa_f.size() > 1) throw ConfigError("filter.kappa_f: a sweep takes at most one filter width");
    std::vector<PointSpec> pts;
    for (double v : cfg.v_m_rel)
        for (double q : cfg.q) {
            PointSpec p{v, q, std::nullopt, std::nullopt};
            if (!cfg.kappa_f.empty()) p.kappa_f = cfg.kappa_f.front();
            pts.push_back(p);
        }
    return pts;
}

/// Single point: explicit values win over single-valued config axes.
inline PointSpec single_point(const RunConfig& cfg, std::optional<double> v_m_rel, std::optional<double> q)
{
    auto pick = [](std::optional<double> given, const std::vector<double>& axis, const char* name) {
        if (given) return *given;
        if (axis.size() == 1) return axis.front();
        throw ConfigError(std::string("cavity.") + name + ": a single value is needed (or pass it on the command line)");
    };
    return {pick(v_m_rel, cfg.v_m_rel, "v_m_rel"), pick(q, cfg.q, "q"), std::nullopt, std::nullopt};
}

// ---- tables ----

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::vector<std::string> fom_cells(const PointResult& r)
{
    const bool ok = r.status == "ok";
    auto cell = [&](double v) { return ok ? fmt(v) : std::string(); };
    return {cell(r.fom.i_zpl),  cell(r.fom.f_zpl), cell(r.fom.f_sb), cell(r.fom.i_total),
            cell(r.fom.beta), cell(r.fom.beta * r.fom.i_total), ok ? (r.fom.tight_filter ? "1" : "0") : "",
            r.status};
}

inline Table sweep_table(const std::vector<PointResult>& res)
{
    Table t{{"v_m_rel", "q", "g", "kappa_c", "i_zpl", "f_zpl", "f_sb", "i_total", "beta", "beta_times_i", "tight_filter",
             "status"},
            {}};
    for (const auto& r : res) {
        std::vector<std::string> row{fmt(r.spec.v_m_rel), fmt(r.spec.q), fmt(r.g), fmt(r.kappa_c)};
        const auto f = fom_cells(r);
        row.insert(row.end(), f.begin(), f.end());
        t.rows.push_back(row);
    }
    return t;
}

inline Table filter_scan_table(const std::vector<PointResult>& res)
{
    Table t{{"kappa_f", "i_total", "beta", "i_zpl", "f_zpl", "f_sb", "beta_times_i", "tight_filter", "status"}, {}};
    for (const auto& r : res) {
        const auto f = fom_cells(r);
        t.rows.push_back({fmt(*r.spec.kappa_f), f[3], f[4], f[0], f[1], f[2], f[5], f[6], f[7]});
    }
    return t;
}

inline Table theta_scan_table(const std::vector<PointResult>& res)
{
    Table t{{"theta", "i_zpl", "i_total", "f_zpl", "f_sb", "beta", "tight_filter", "status"}, {}};
    for (const auto& r : res) {
        const auto f = fom_cells(r);
        t.rows.push_back({fmt(*r.spec.theta), f[0], f[3], f[1], f[2], f[4], f[6], f[7]});
    }
    return t;
}

inline void write_csv(std::ostream& os, const std::string& command, const RunConfig& cfg, const Table& t)
{
    os << "# cavqed " << command << "\n";
    os << "# config_hash: " << cfg.hash << "\n";
    os << "# config: " << cfg.resolved.dump() << "\n";
    os << "# rates in rad/s\n";
    for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
        os << "\n";
    }
}

inline json table_json(const std::string& command, const RunConfig& cfg, const Table& t)
{
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::object();
        for (std::size_t k = 0; k < t.columns.size(); ++k) {
            const std::string& c = t.columns[k];
            const std::string& v = row[k];
            if (c == "status") r[c] = v;
            else if (v.empty()) r[c] = nullptr;
            else if (c == "tight_filter") r[c] = v == "1";
            else r[c] = std::stod(v);
        }
        rows.push_back(r);
    }
    return json{{"command", command}, {"config_hash", cfg.hash}, {"config", cfg.resolved}, {"rows", rows}};
}

} // namespace cavqed
