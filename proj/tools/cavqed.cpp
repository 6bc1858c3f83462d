#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavqed/config.hpp"
#include "cavqed/field_io.hpp"
#include "cavqed/harminv.hpp"
#include "cavqed/photonics.hpp"
#include "cavqed/sweeps.hpp"

using namespace cavqed;

namespace {

struct Common {
    std::string config;
    std::string output;
    std::string format;
    std::vector<std::string> set;
    int threads = -1;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_format, bool needs_config = true)
{
    auto* opt = sub->add_option("--config", c.config, "configuration file (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--output,-o", c.output, "output path (default or \"-\": stdout)");
    c.format = default_format;
    sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--set", c.set, "override a config key, section.key=value (repeatable)");
}

void emit(const Common& c, const std::string& text)
{
    if (c.output.empty() || c.output == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(c.output, std::ios::binary);
    if (!out) throw IoError("cannot write '" + c.output + "'");
    out << text;
    if (!out) throw IoError("write failure on '" + c.output + "'");
}

std::string render(const Common& c, const std::string& command, const RunConfig& cfg, const Table& t)
{
    if (c.format == "json") return table_json(command, cfg, t).dump(2) + "\n";
    std::ostringstream os;
    write_csv(os, command, cfg, t);
    return os.str();
}

int threads_of(const Common& c, const RunConfig& cfg) { return c.threads >= 0 ? c.threads : cfg.numerics.threads; }

Vec3 parse_vec3(const std::string& s, const std::string& what)
{
    Vec3 v{};
    std::stringstream ss(s);
    std::string item;
    for (std::size_t k = 0; k < 3; ++k) {
        if (!std::getline(ss, item, ',')) throw ConfigError(what + ": expected three comma-separated numbers");
        try {
            std::size_t used = 0;
            v[k] = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(what + ": '" + item + "' is not a number");
        }
    }
    if (std::getline(ss, item, ',')) throw ConfigError(what + ": expected three comma-separated numbers");
    return v;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cavqed: cavity-QED single-photon source figures of merit"};
    app.require_subcommand(1);

    Common fom_c, sweep_c, filter_c, theta_c, mv_c, hi_c;
    std::optional<double> vm, q;

    auto* fom = app.add_subcommand("fom", "figures of merit at one (V_m, Q) point");
    add_common(fom, fom_c, "json");
    fom->add_option("--vm", vm, "mode volume in (lambda/n)^3");
    fom->add_option("--q", q, "quality factor");

    auto* sweep = app.add_subcommand("sweep", "(V_m, Q) grid, outer V_m, inner Q");
    add_common(sweep, sweep_c, "csv");
    sweep->add_option("--threads", sweep_c.threads, "worker threads (0 = all cores)");

    auto* filter = app.add_subcommand("filter-scan", "external filter width scan at one point");
    add_common(filter, filter_c, "csv");
    filter->add_option("--vm", vm, "mode volume in (lambda/n)^3");
    filter->add_option("--q", q, "quality factor");
    filter->add_option("--threads", filter_c.threads, "worker threads (0 = all cores)");

    auto* theta = app.add_subcommand("theta-scan", "three-level orientation scan at one point");
    add_common(theta, theta_c, "csv");
    theta->add_option("--vm", vm, "mode volume in (lambda/n)^3");
    theta->add_option("--q", q, "quality factor");
    theta->add_option("--threads", theta_c.threads, "worker threads (0 = all cores)");

    std::string field_file, r_nm, dipole;
    double wavelength_nm = 637.0;
    std::optional<double> index;
    auto* modevol = app.add_subcommand("modevol", "mode volume and field structure of a field export");
    modevol->add_option("field_file", field_file, "binary or CSV field grid")->required();
    modevol->add_option("--r", r_nm, "emitter position x,y,z in nm (default: field maximum)");
    modevol->add_option("--dipole", dipole, "dipole axis x,y,z (default: along the peak field)");
    modevol->add_option("--wavelength-nm", wavelength_nm, "wavelength for (lambda/n)^3");
    modevol->add_option("--n", index, "refractive index for (lambda/n)^3 (default: sqrt(eps) at the maximum)");
    modevol->add_option("--output,-o", mv_c.output, "output path (default or \"-\": stdout)");

    std::string signal_file;
    std::optional<double> dt;
    int max_modes = 10;
    double noise_floor = 1e-6;
    auto* harminv = app.add_subcommand("harminv", "resonances of a ringdown signal");
    harminv->add_option("signal_file", signal_file, "CSV (time, Re[, Im])")->required();
    harminv->add_option("--dt", dt, "sample spacing in seconds (default: from the time column)");
    harminv->add_option("--max-modes", max_modes, "largest number of modes to fit");
    harminv->add_option("--noise-floor", noise_floor, "relative amplitude cut");
    harminv->add_option("--output,-o", hi_c.output, "output path (default or \"-\": stdout)");
    hi_c.format = "csv";
    harminv->add_option("--format", hi_c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fom->parsed()) {
            const RunConfig cfg = load_config(fom_c.config, fom_c.set);
            PointSpec p = single_point(cfg, vm, q);
            if (cfg.kappa_f.size() > 1) throw ConfigError("filter.kappa_f: fom takes at most one filter width");
            if (!cfg.kappa_f.empty()) p.kappa_f = cfg.kappa_f.front();
            if (cfg.model == "three_level") p.theta = cfg.theta.front();
            const PointResult r = evaluate_point(cfg, p);
            if (fom_c.format == "csv") {
                emit(fom_c, render(fom_c, "fom", cfg, sweep_table({r})));
            } else {
                json j{{"command", "fom"},
                       {"config_hash", cfg.hash},
                       {"config", cfg.resolved},
                       {"v_m_rel", p.v_m_rel},
                       {"q", p.q},
                       {"g", r.g},
                       {"kappa_c", r.kappa_c},
                       {"i_zpl", r.fom.i_zpl},
                       {"f_zpl", r.fom.f_zpl},
                       {"f_sb", r.fom.f_sb},
                       {"i_total", r.fom.i_total},
                       {"beta", r.fom.beta},
                       {"beta_times_i", r.fom.beta * r.fom.i_total},
                       {"tight_filter", r.fom.tight_filter},
                       {"status", r.status}};
                if (p.kappa_f) j["kappa_f"] = *p.kappa_f;
                if (p.theta) j["theta"] = *p.theta;
                emit(fom_c, j.dump(2) + "\n");
            }
        } else if (sweep->parsed()) {
            const RunConfig cfg = load_config(sweep_c.config, sweep_c.set);
            auto pts = sweep_points(cfg);
            if (cfg.model == "three_level")
                for (auto& p : pts) p.theta = cfg.theta.front();
            const auto res = evaluate_points(cfg, pts, threads_of(sweep_c, cfg));
            emit(sweep_c, render(sweep_c, "sweep", cfg, sweep_table(res)));
        } else if (filter->parsed()) {
            const RunConfig cfg = load_config(filter_c.config, filter_c.set);
            if (cfg.kappa_f.empty()) throw ConfigError("filter.kappa_f_<unit>: an axis is required for filter-scan");
            const PointSpec base = single_point(cfg, vm, q);
            std::vector<PointSpec> pts;
            for (double k : cfg.kappa_f) {
                PointSpec p = base;
                p.kappa_f = k;
                if (cfg.model == "three_level") p.theta = cfg.theta.front();
                pts.push_back(p);
            }
            const auto res = evaluate_points(cfg, pts, threads_of(filter_c, cfg));
            for (std::size_t k = 1; k < res.size(); ++k) {
                if (res[k].status != "ok" || res[k - 1].status != "ok") continue;
                if ((res[k].spec.kappa_f > res[k - 1].spec.kappa_f) && res[k].fom.beta < res[k - 1].fom.beta - 1e-9)
                    throw NumericsError("beta_not_monotone",
                                        "filter-scan: beta decreased between kappa_f = " + fmt(*res[k - 1].spec.kappa_f) +
                                            " and " + fmt(*res[k].spec.kappa_f));
            }
            emit(filter_c, render(filter_c, "filter-scan", cfg, filter_scan_table(res)));
        } else if (theta->parsed()) {
            const RunConfig cfg = load_config(theta_c.config, theta_c.set);
            if (cfg.model != "three_level") throw ConfigError("config.model: theta-scan needs 'three_level'");
            const PointSpec base = single_point(cfg, vm, q);
            if (cfg.kappa_f.size() > 1) throw ConfigError("filter.kappa_f: theta-scan takes at most one filter width");
            std::vector<PointSpec> pts;
            for (double t : cfg.theta) {
                PointSpec p = base;
                p.theta = t;
                if (!cfg.kappa_f.empty()) p.kappa_f = cfg.kappa_f.front();
                pts.push_back(p);
            }
            const auto res = evaluate_points(cfg, pts, threads_of(theta_c, cfg));
            emit(theta_c, render(theta_c, "theta-scan", cfg, theta_scan_table(res)));
        } else if (modevol->parsed()) {
            const FieldGrid g = load_field_grid(field_file);
            const std::size_t peak = peak_index(g);
            const Vec3 r = r_nm.empty() ? grid_position(g, peak) : [&] {
                Vec3 v = parse_vec3(r_nm, "--r");
                for (auto& x : v) x *= 1e-9;
                return v;
            }();
            Vec3 d{};
            if (dipole.empty()) {
                // real direction of the peak field after removing its global phase
                const auto& e = g.e_field[peak];
                std::size_t big = 0;
                for (std::size_t c = 1; c < 3; ++c)
                    if (std::abs(e[c]) > std::abs(e[big])) big = c;
                const cplx ph = std::conj(e[big]) / std::abs(e[big]);
                for (std::size_t c = 0; c < 3; ++c) d[c] = (e[c] * ph).real();
            } else {
                d = parse_vec3(dipole, "--dipole");
            }
            CouplingGeometry s;
            try {
                s = field_structure(g, r, d);
            } catch (const std::out_of_range& e) {
                throw ConfigError(std::string("--r: ") + e.what());
            }
            const double n = index ? *index : std::sqrt(g.epsilon[peak]);
            if (!(n >= 1.0)) throw ConfigError("--n: must be >= 1");
            const double l = wavelength_nm * 1e-9 / n;
            json j{{"v_m", s.v_m},
                   {"v_m_rel", s.v_m / (l * l * l)},
                   {"f_r", s.f_r},
                   {"eta", s.eta},
                   {"v_m_eff", std::isfinite(s.v_m_eff) ? json(s.v_m_eff) : json("inf")},
                   {"n", n},
                   {"wavelength_nm", wavelength_nm},
                   {"r", {r[0], r[1], r[2]}}};
            emit(mv_c, j.dump(2) + "\n");
        } else if (harminv->parsed()) {
            const Ringdown rd = load_ringdown(signal_file);
            const double step = dt ? *dt : rd.dt;
            if (!(step > 0.0)) throw ConfigError("--dt: sample spacing must be > 0");
            ResonanceSet modes;
            try {
                modes = harmonic_inversion(rd.samples, step, max_modes, noise_floor);
            } catch (const std::invalid_argument& e) {
                throw NumericsError("harminv", e.what());
            }
            if (hi_c.format == "json") {
                json rows = json::array();
                for (const auto& m : modes)
                    rows.push_back({{"frequency_THz", m.frequency / units::THz},
                                    {"Q", m.q},
                                    {"amp_abs", std::abs(m.amplitude)},
                                    {"amp_phase", std::arg(m.amplitude)},
                                    {"decay_rate", m.decay_rate}});
                emit(hi_c, json{{"command", "harminv"}, {"modes", rows}}.dump(2) + "\n");
            } else {
                std::ostringstream os;
                os << "frequency_THz,Q,amp_abs,amp_phase,decay_rate\n";
                for (const auto& m : modes)
                    os << fmt(m.frequency / units::THz) << "," << fmt(m.q) << "," << fmt(std::abs(m.amplitude)) << ","
                       << fmt(std::arg(m.amplitude)) << "," << fmt(m.decay_rate) << "\n";
                emit(hi_c, os.str());
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericsError& e) {
        std::cerr << "numerics failure (" << e.reason() << "): " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerics failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
