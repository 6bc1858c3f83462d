#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + CAVQED_CLI + "\" " + args + " 2>/dev/null";
    FILE* p = ::popen(cmd.c_str(), "r");
    Result r;
    if (!p) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string cfg(const std::string& name) { return std::string("--config \"") + CAVQED_CONFIG_DIR + "/" + name + "\""; }

// data rows of a csv table, header row first
std::vector<std::vector<std::string>> rows(const std::string& csv)
{
    std::vector<std::vector<std::string>> out;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (line.back() == ',') cells.emplace_back();
        out.push_back(cells);
    }
    return out;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name)
{
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return k;
    throw std::runtime_error("no column " + name);
}

} // namespace

TEST(Cli, SweepIsIndependentOfThreadCount)
{
    const auto a = cli("sweep " + cfg("fig3d.json") + " --format csv --threads 1");
    const auto b = cli("sweep " + cfg("fig3d.json") + " --format csv --threads 4");
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("# config_hash: fnv1a64:"), std::string::npos);
}

TEST(Cli, SingleCellSweepMatchesFom)
{
    const auto s = cli("sweep " + cfg("fig3d.json") + " --set cavity.v_m_rel=0.01 --set cavity.q=500 --format json");
    const auto f = cli("fom " + cfg("fig3d.json") + " --set cavity.v_m_rel=0.01 --set cavity.q=500");
    ASSERT_EQ(s.code, 0);
    ASSERT_EQ(f.code, 0);
    const json sj = json::parse(s.out), fj = json::parse(f.out);
    ASSERT_EQ(sj["rows"].size(), 1u);
    for (const char* k : {"i_zpl", "f_zpl", "f_sb", "i_total", "g", "kappa_c"})
        EXPECT_NEAR(sj["rows"][0][k].get<double>(), fj[k].get<double>(), 1e-11 * std::abs(fj[k].get<double>())) << k;
    EXPECT_EQ(sj["config_hash"], fj["config_hash"]);
}

TEST(Cli, NoDephasingGivesUnitIndistinguishability)
{
    const auto f = cli("fom " + cfg("fig3d.json") + " --set emitter.gamma_star_THz=0 --vm 0.01 --q 1000");
    ASSERT_EQ(f.code, 0);
    EXPECT_NEAR(json::parse(f.out)["i_zpl"].get<double>(), 1.0, 1e-3);
}

TEST(Cli, OverridesChangeTheHash)
{
    const auto a = cli("fom " + cfg("fig3d.json") + " --vm 0.01 --q 1000");
    const auto b = cli("fom " + cfg("fig3d.json") + " --set cavity.n=2.1 --vm 0.01 --q 1000");
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_NE(json::parse(a.out)["config_hash"], json::parse(b.out)["config_hash"]);
}

TEST(Cli, FilterScanTradesEfficiencyForIndistinguishability)
{
    const auto r = cli("filter-scan " + cfg("fig3d_filter.json") + " --format csv -o -");
    ASSERT_EQ(r.code, 0);
    const auto t = rows(r.out);
    ASSERT_GT(t.size(), 3u);
    const auto kb = column(t[0], "beta"), ki = column(t[0], "i_total");
    for (std::size_t k = 2; k < t.size(); ++k) {
        EXPECT_GT(std::stod(t[k][kb]), std::stod(t[k - 1][kb]));
        EXPECT_LT(std::stod(t[k][ki]), std::stod(t[k - 1][ki]));
    }
}

TEST(Cli, ThetaScanDecoupledLimitsAgreeWithMirror)
{
    // x above y by 100 GHz, cavity on y: theta = 0 and pi/2 are the two decoupled orientations
    const auto r = cli("theta-scan " + cfg("fig5b.json") + " --format csv");
    ASSERT_EQ(r.code, 0);
    const auto t = rows(r.out);
    ASSERT_EQ(t.size(), 12u);
    const auto ki = column(t[0], "i_zpl");
    EXPECT_NEAR(std::stod(t[1][0]), 0.0, 1e-12);
    EXPECT_NEAR(std::stod(t[11][0]), 1.5707963267949, 1e-10);
    double lowest = 1.0;
    for (std::size_t k = 1; k < t.size(); ++k) lowest = std::min(lowest, std::stod(t[k][ki]));
    EXPECT_LT(lowest, std::stod(t[1][ki]));
    EXPECT_LT(lowest, std::stod(t[11][ki]));
}

TEST(Cli, FailedRowsKeepTheirPlace)
{
    // eta = 0: nothing reaches the cavity port
    const auto r = cli("sweep " + cfg("fig3d.json") +
                       " --set cavity.v_m_rel=0.01 --set cavity.q=[100,1000] --set cavity.eta=0 --format csv");
    ASSERT_EQ(r.code, 0);
    const auto t = rows(r.out);
    ASSERT_EQ(t.size(), 3u);
    const auto ks = column(t[0], "status"), ki = column(t[0], "i_total");
    for (std::size_t k = 1; k < t.size(); ++k) {
        ASSERT_EQ(t[k].size(), t[0].size());
        EXPECT_EQ(t[k][ks].rfind("failed:", 0), 0u) << t[k][ks];
        EXPECT_TRUE(t[k][ki].empty());
    }
    EXPECT_EQ(t[2][1], "1000");
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(cli("fom --config /nonexistent/cavqed.json --vm 0.01 --q 10").code, 1);
    EXPECT_EQ(cli("fom " + cfg("fig3d.json") + " --set emitter.bogus=1 --vm 0.01 --q 10").code, 1);
    EXPECT_EQ(cli("fom " + cfg("fig3d.json") + " --vm -1 --q 10").code, 1);
    EXPECT_EQ(cli("sweep " + cfg("fig3d.json") + " --set cavity.q=[100,0.5]").code, 1);
    EXPECT_EQ(cli("theta-scan " + cfg("fig3d.json")).code, 1);
    EXPECT_EQ(cli("no-such-command").code, 1);
    EXPECT_EQ(cli("harminv /nonexistent/ringdown.csv --dt 1e-15").code, 3);
    EXPECT_EQ(cli("modevol /nonexistent/field.bin").code, 3);
}
