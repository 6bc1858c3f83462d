#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "cavqed/field_io.hpp"
#include "cavqed/harminv.hpp"
#include "cavqed/photonics.hpp"

using namespace cavqed;

namespace {

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
    return v;
}

template <class F>
FieldGrid make_grid(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& z, F field,
                    double eps = 1.0)
{
    FieldGrid g;
    g.axes = {x, y, z};
    g.epsilon.assign(g.size(), eps);
    g.e_field.resize(g.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            for (std::size_t k = 0; k < z.size(); ++k) g.e_field[g.index(i, j, k)] = field(x[i], y[j], z[k]);
    return g;
}

// energy density exp(-r^2/s^2), field polarised along x
FieldGrid gaussian_grid(double sigma, int per_sigma, double half_span = 3.0)
{
    const int n = static_cast<int>(2 * half_span * per_sigma) + 1;
    const auto ax = linspace(-half_span * sigma, half_span * sigma, n);
    return make_grid(ax, ax, ax, [&](double x, double y, double z) {
        return CVec3{std::exp(-(x * x + y * y + z * z) / (2 * sigma * sigma)), 0.0, 0.0};
    });
}

EmitterParams nv_emitter()
{
    EmitterParams e;
    e.gamma = units::two_pi * 30e6;
    e.gamma_star = 0.0;
    e.debye_waller = 0.02;
    e.omega0 = units::omega_from_wavelength(637e-9);
    return e;
}

std::filesystem::path temp_path(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("cavqed_" + std::to_string(::getpid()) + "_" + name);
}

} // namespace

TEST(ModeVolume, UniformBoxIsExact)
{
    const auto ax = linspace(0.0, 1e-6, 5);
    const auto g = make_grid(ax, ax, ax, [](double, double, double) { return CVec3{cplx(0.3, 0.4), 0.0, 0.0}; }, 2.0);
    EXPECT_NEAR(mode_volume(g) / 1e-18, 1.0, 1e-12);
}

TEST(ModeVolume, GaussianAnalytic)
{
    const double sigma = 50e-9;
    const double exact = std::pow(units::pi, 1.5) * sigma * sigma * sigma;
    const double fine = mode_volume(gaussian_grid(sigma, 20));
    EXPECT_NEAR(fine / exact, 1.0, 0.01);
    const double coarse = mode_volume(gaussian_grid(sigma, 10));
    EXPECT_LT(std::abs(fine - coarse) / fine, 0.005);
}

TEST(ModeVolume, ScaleInvariance)
{
    auto g = gaussian_grid(1.0, 4);
    for (std::size_t n = 0; n < g.size(); ++n) g.epsilon[n] = 1.0 + 0.5 * static_cast<double>(n % 7);
    const double v0 = mode_volume(g);
    const auto s0 = field_structure(g, {0.3, -0.2, 0.1}, {1.0, 0.2, 0.0});
    const cplx c(-2.5, 7.0);
    for (auto& e : g.e_field)
        for (auto& x : e) x *= c;
    EXPECT_NEAR(mode_volume(g) / v0, 1.0, 1e-12);
    const auto s1 = field_structure(g, {0.3, -0.2, 0.1}, {1.0, 0.2, 0.0});
    EXPECT_NEAR(s1.f_r, s0.f_r, 1e-12);
    EXPECT_NEAR(s1.eta, s0.eta, 1e-12);
}

TEST(ModeVolume, RejectsInvalidGrids)
{
    const auto ax = linspace(0.0, 1.0, 3);
    auto g = make_grid(ax, ax, ax, [](double, double, double) { return CVec3{0.0, 0.0, 0.0}; });
    EXPECT_THROW(mode_volume(g), std::invalid_argument);
    g.e_field[0][1] = 1.0;
    g.epsilon[3] = 0.5;
    EXPECT_THROW(mode_volume(g), std::invalid_argument);
    g.epsilon[3] = 1.0;
    g.axes[1] = {0.0, 0.0, 1.0};
    EXPECT_THROW(mode_volume(g), std::invalid_argument);
}

TEST(FieldStructure, PeakAndOrientation)
{
    const auto g = gaussian_grid(1.0, 4);
    const auto at_peak = field_structure(g, {0.0, 0.0, 0.0}, {1.0, 0.0, 0.0});
    EXPECT_NEAR(at_peak.f_r, 1.0, 1e-12);
    EXPECT_NEAR(at_peak.eta, 1.0, 1e-12);
    EXPECT_NEAR(at_peak.v_m_eff, at_peak.v_m, 1e-12 * at_peak.v_m);

    const auto perp = field_structure(g, {0.0, 0.0, 0.0}, {0.0, 0.0, 1.0});
    EXPECT_NEAR(perp.eta, 0.0, 1e-15);

    // on-grid point r = 0.5 (x): |E| = exp(-1/8)
    const auto off = field_structure(g, {0.5, 0.0, 0.0}, {1.0, 1.0, 0.0});
    EXPECT_NEAR(off.f_r, std::exp(-0.125), 1e-12);
    EXPECT_NEAR(off.eta, 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(off.v_m_eff, off.v_m / (off.f_r * off.f_r), 1e-12 * off.v_m_eff);
    EXPECT_GE(off.v_m_eff, off.v_m);

    EXPECT_THROW(field_structure(g, {10.0, 0.0, 0.0}, {1.0, 0.0, 0.0}), std::out_of_range);
    EXPECT_THROW(field_structure(g, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(FieldStructure, TrilinearInterpolationIsExactForLinearFields)
{
    const auto ax = linspace(0.0, 1.0, 4);
    const auto g = make_grid(ax, ax, ax, [](double x, double y, double z) {
        return CVec3{cplx(1.0 + x + 2 * y - z, 0.5 * z), 0.0, 0.0};
    });
    const auto e = interpolate_field(g, {0.41, 0.77, 0.13});
    EXPECT_NEAR(std::abs(e[0] - cplx(1.0 + 0.41 + 1.54 - 0.13, 0.065)), 0.0, 1e-13);
}

TEST(Coupling, ScalesWithModeVolume)
{
    const auto em = nv_emitter();
    CavityParams cav{0.01, 1000.0, em.omega0, 2.0};
    const double g1 = coupling_from_geometry(cav, em);
    cav.v_m_rel *= 4.0;
    EXPECT_NEAR(coupling_from_geometry(cav, em) / g1, 0.5, 1e-14);
    cav.v_m_rel /= 8.0;
    EXPECT_NEAR(coupling_from_geometry(cav, em) / g1, std::sqrt(2.0), 1e-14);
    EXPECT_EQ(coupling_from_geometry(cav, em, {1.0, 0.0, 0.0, 0.0}), 0.0);
    EXPECT_GT(g1, 0.0);
}

TEST(Coupling, PurcellFactorAtBowTieDesign)
{
    const auto em = nv_emitter();
    const CavityParams cav{0.001, 200.0, em.omega0, 2.0};
    const double fp = purcell_factor(cav, em, coupling_from_geometry(cav, em));
    EXPECT_NEAR(fp, 3.0 / (4.0 * units::pi * units::pi) * 200.0 / 0.001, 1e-6 * fp);
    EXPECT_NEAR(fp, 1.52e4, 0.01e4);
}

TEST(Coupling, PurcellIdentityRandomDraws)
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        auto em = nv_emitter();
        em.gamma *= 0.2 + 5.0 * u(rng);
        em.debye_waller = 0.01 + 0.99 * u(rng);
        if (k % 2) em.coupling_fraction = 0.1 + 0.9 * u(rng);
        em.omega0 = units::omega_from_wavelength((500 + 400 * u(rng)) * 1e-9);
        const CavityParams cav{std::pow(10.0, -3.0 + 3.0 * u(rng)), std::pow(10.0, 1.0 + 4.0 * u(rng)), em.omega0,
                               1.0 + 2.0 * u(rng)};
        const double g = coupling_from_geometry(cav, em);
        const double lhs = purcell_factor(cav, em, g);
        const double rhs = 3.0 / (4.0 * units::pi * units::pi) * cav.q / cav.v_m_rel;
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-10);
        EXPECT_NEAR(4.0 * g * g / cav.kappa(), lhs * em.coupling_rate(), 1e-10 * lhs * em.coupling_rate());
    }
}

TEST(PurcellEnhancement, Ratios)
{
    SampledSpectrum p0{linspace(1.0, 10.0, 50), std::vector<double>(50, 3.0)};
    auto same = purcell_enhancement(p0, p0);
    for (double f : same.f_p) EXPECT_DOUBLE_EQ(f, 1.0);
    SampledSpectrum p2 = p0;
    for (auto& p : p2.power) p *= 2.0;
    for (double f : purcell_enhancement(p2, p0).f_p) EXPECT_DOUBLE_EQ(f, 2.0);

    // Lorentzian peak of height 40 over a flat background of 1, reference on a coarser axis
    SampledSpectrum wg{linspace(0.0, 20.0, 2001), {}};
    for (double w : wg.omega) wg.power.push_back(1.0 + 40.0 / (1.0 + (w - 9.3) * (w - 9.3) / 0.04));
    SampledSpectrum ref{linspace(-1.0, 21.0, 23), std::vector<double>(23, 0.5)};
    const auto fp = purcell_enhancement(wg, ref);
    const double peak = *std::max_element(fp.f_p.begin(), fp.f_p.end());
    EXPECT_NEAR(peak / 82.0, 1.0, 0.01);
}

TEST(PurcellEnhancement, OverlapAndZeros)
{
    SampledSpectrum a{linspace(0.0, 1.0, 11), std::vector<double>(11, 1.0)};
    SampledSpectrum b{linspace(2.0, 3.0, 11), std::vector<double>(11, 1.0)};
    EXPECT_THROW(purcell_enhancement(a, b), std::invalid_argument);
    SampledSpectrum c{linspace(0.5, 1.5, 11), std::vector<double>(11, 1.0)};
    c.power[0] = 0.0;
    const auto fp = purcell_enhancement(a, c);
    EXPECT_EQ(fp.excluded, 1u);
    EXPECT_EQ(fp.omega.size(), 5u);
    EXPECT_DOUBLE_EQ(fp.omega.front(), 0.6);
}

TEST(HarmonicInversion, SingleMode)
{
    const double f = 470e12, q = 200.0;
    const double dt = 0.137 / f;
    const ResonanceSet truth{{f, q, cplx(0.8, -0.3), units::pi * f / q}};
    const auto got = harmonic_inversion(synthesize(truth, dt, 2048), dt, 4, 1e-6);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_NEAR(got[0].frequency / f, 1.0, 1e-4);
    EXPECT_NEAR(got[0].q / q, 1.0, 1e-2);
    EXPECT_NEAR(std::abs(got[0].amplitude - truth[0].amplitude), 0.0, 1e-6);
    EXPECT_NEAR(got[0].decay_rate, units::pi * got[0].frequency / got[0].q, 1e-9 * got[0].decay_rate);
    EXPECT_LT(got[0].frequency, 0.5 / dt);
}

TEST(HarmonicInversion, TwoSeparatedModes)
{
    const double dt = 1e-15, q = 200.0;
    const double f1 = 0.2 / dt;
    const double f2 = f1 + 3.0 * f1 / q;
    const ResonanceSet truth{{f1, q, cplx(1.0, 0.0), units::pi * f1 / q},
                             {f2, q, 0.6 * std::exp(cplx(0.0, 0.5)), units::pi * f2 / q}};
    const auto got = harmonic_inversion(synthesize(truth, dt, 2048), dt, 6, 1e-6);
    ASSERT_EQ(got.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_NEAR(got[k].frequency / truth[k].frequency, 1.0, 1e-4);
        EXPECT_NEAR(got[k].q / q, 1.0, 1e-2);
        EXPECT_NEAR(std::abs(got[k].amplitude) / std::abs(truth[k].amplitude), 1.0, 0.05);
    }
}

TEST(HarmonicInversion, RoundTripRandomModes)
{
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double dt = 1.0;
    for (int trial = 0; trial < 5; ++trial) {
        ResonanceSet truth;
        for (int j = 0; j < 3; ++j) {
            const double f = 0.05 + 0.13 * j + 0.02 * u(rng);
            const double q = 50.0 + 300.0 * u(rng);
            truth.push_back({f, q, std::polar(0.3 + u(rng), units::two_pi * u(rng)), units::pi * f / q});
        }
        const auto got = harmonic_inversion(synthesize(truth, dt, 1024), dt, 8, 1e-6);
        ASSERT_EQ(got.size(), 3u);
        for (const auto& t : truth) {
            const auto it = std::min_element(got.begin(), got.end(), [&](const Resonance& a, const Resonance& b) {
                return std::abs(a.frequency - t.frequency) < std::abs(b.frequency - t.frequency);
            });
            EXPECT_NEAR(it->frequency / t.frequency, 1.0, 1e-6);
            EXPECT_NEAR(it->q / t.q, 1.0, 1e-4);
            EXPECT_NEAR(std::abs(it->amplitude - t.amplitude), 0.0, 1e-6);
        }
        for (std::size_t k = 1; k < got.size(); ++k)
            EXPECT_GE(std::abs(got[k - 1].amplitude), std::abs(got[k].amplitude));
    }
}

TEST(HarmonicInversion, ZeroSignalAndErrors)
{
    EXPECT_TRUE(harmonic_inversion(CVector::Zero(64), 1.0, 4).empty());
    EXPECT_THROW(harmonic_inversion(CVector::Zero(10), 1.0, 4), std::invalid_argument);
    EXPECT_THROW(harmonic_inversion(CVector::Ones(64), 0.0, 4), std::invalid_argument);
    CVector bad = CVector::Ones(64);
    bad(5) = cplx(std::nan(""), 0.0);
    EXPECT_THROW(harmonic_inversion(bad, 1.0, 4), std::invalid_argument);
}

TEST(FieldIo, BinaryRoundTrip)
{
    auto g = gaussian_grid(1e-7, 3, 2.0);
    g.e_field[7][2] = cplx(0.25, -0.5);
    const auto path = temp_path("grid.bin");
    save_field_grid(g, path.string());
    const auto back = load_field_grid(path.string());
    std::filesystem::remove(path);
    ASSERT_EQ(back.size(), g.size());
    EXPECT_EQ(back.axes, g.axes);
    EXPECT_EQ(back.epsilon, g.epsilon);
    EXPECT_EQ(back.e_field, g.e_field);
}

TEST(FieldIo, CsvFallback)
{
    const auto path = temp_path("grid.csv");
    {
        std::ofstream out(path);
        out << "# exported field\nx,y,z,eps,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz\n";
        for (int i = 1; i >= 0; --i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    out << i * 1e-6 << "," << j * 1e-6 << "," << k * 1e-6 << ",2.25,1,0,0,0,0," << (i + j + k) << "\n";
    }
    const auto g = load_field_grid(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(g.size(), 8u);
    EXPECT_DOUBLE_EQ(g.axes[0][1], 1e-6);
    EXPECT_EQ(g.e_field[g.index(1, 1, 1)][2], cplx(0.0, 3.0));
    EXPECT_DOUBLE_EQ(g.epsilon[g.index(0, 1, 0)], 2.25);
}

TEST(FieldIo, DiagnosticsCarryByteOffsets)
{
    const auto g = gaussian_grid(1e-7, 2, 1.0);
    std::string buf = encode_field_grid(g);
    const auto path = temp_path("bad.bin");
    auto write = [&](const std::string& s) {
        std::ofstream out(path, std::ios::binary);
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    };

    write(buf.substr(0, buf.size() - 5));
    try {
        load_field_grid(path.string());
        FAIL() << "truncated payload accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
    }

    // first eps sample sits right after the three axes
    const std::size_t eps0 = buf.find('\n') + 1 + 8 * (g.nx() + g.ny() + g.nz());
    std::string bad = buf;
    const double half = 0.5;
    std::memcpy(bad.data() + eps0, &half, 8);
    write(bad);
    try {
        load_field_grid(path.string());
        FAIL() << "eps < 1 accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset " + std::to_string(eps0)), std::string::npos) << e.what();
    }

    write("{\"format\": \"cavqed-field\", \"version\": 1, \"shape\": [2, 2\n");
    EXPECT_THROW(load_field_grid(path.string()), IoError);
    write("x,y,z,eps,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz\n0,0,0,1,1,0,0,0,0,0\n0,0,oops\n");
    try {
        load_field_grid(path.string());
        FAIL() << "malformed csv accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset 60"), std::string::npos) << e.what();
    }
    std::filesystem::remove(path);
    EXPECT_THROW(load_field_grid(path.string()), IoError);
}

TEST(FieldIo, RingdownAndSpectrumCsv)
{
    const auto path = temp_path("ring.csv");
    {
        std::ofstream out(path);
        out << "time,re,im\n0,1,0\n0.5,0,1\n1.0,-1,0\n";
    }
    const auto r = load_ringdown(path.string());
    EXPECT_DOUBLE_EQ(r.dt, 0.5);
    EXPECT_EQ(r.samples(1), cplx(0.0, 1.0));
    {
        std::ofstream out(path);
        out << "0,1\n0.5,0\n1.5,-1\n";
    }
    EXPECT_THROW(load_ringdown(path.string()), IoError);
    {
        std::ofstream out(path);
        out << "frequency_THz,power\n470,2\n471,3\n";
    }
    const auto s = load_spectrum(path.string());
    EXPECT_NEAR(s.omega[1], units::two_pi * 471e12, 1.0);
    std::filesystem::remove(path);
}

// Needs an FDTD export of the bow-tie cavity (binary or CSV) supplied via
// CAVQED_BOWTIE_FIELD; optional CAVQED_BOWTIE_N sets the index (default 2.4).
TEST(BowTieFixture, ModeVolumeAndFieldStructure)
{
    const char* path = std::getenv("CAVQED_BOWTIE_FIELD");
    if (!path) GTEST_SKIP() << "no bow-tie field export supplied (set CAVQED_BOWTIE_FIELD)";
    const double n = std::getenv("CAVQED_BOWTIE_N") ? std::atof(std::getenv("CAVQED_BOWTIE_N")) : 2.4;
    const auto g = load_field_grid(path);
    const double l = 637e-9 / n;
    EXPECT_NEAR(mode_volume(g) / (l * l * l), 0.075, 0.0075);
    const Vec3 peak = grid_position(g, peak_index(g));
    for (double dx : {-6e-9, 6e-9}) {
        const auto s = field_structure(g, {peak[0] + dx, peak[1], peak[2]}, {1.0, 0.0, 0.0});
        EXPECT_NEAR(s.f_r, 0.5, 0.1);
    }
}
