#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "distill/column.hpp"
#include "support.hpp"

using namespace distill;
using namespace distill::column;
using testing_support::dense_solve;
using testing_support::DenseMatrix;

namespace {

std::vector<thermo::Component> btx()
{
    return {thermo::library_component("benzene"), thermo::library_component("toluene"),
            thermo::library_component("p-xylene")};
}

thermo::Stream btx_feed()
{
    return {{3.35, 3.35, 3.35}, 298.15, thermo::kAtmosphere};
}

double antoine_pa(const thermo::Component& c, double t)
{
    return std::pow(10.0, c.antoine_a - c.antoine_b / (t + c.antoine_c)) * 1e5;
}

}  // namespace

TEST_CASE("derive_flows worked examples")
{
    auto f = derive_flows(10.0, 1.0, 2.0, 2.0);
    CHECK(f.distillate == doctest::Approx(4.0));
    CHECK(f.bottoms == doctest::Approx(6.0));
    CHECK(f.reflux == doctest::Approx(8.0));
    CHECK(f.vapor_top == doctest::Approx(12.0));
    CHECK(f.liquid_bottom == doctest::Approx(18.0));
    CHECK(f.vapor_bottom == doctest::Approx(12.0));

    f = derive_flows(10.0, 1.0, 3.0, 3.0);
    CHECK(f.distillate == doctest::Approx(30.0 / 7.0));
    CHECK(f.bottoms == doctest::Approx(40.0 / 7.0));

    f = derive_flows(10.0, 0.0, 1.0, 1.0);
    CHECK(f.distillate == doctest::Approx(20.0 / 3.0));
}

TEST_CASE("derive_flows closes all balances for random inputs")
{
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double feed = std::exp(std::uniform_real_distribution<double>(-5.0, 8.0)(gen));
        const double q = unit(gen);
        const double r = std::exp(std::uniform_real_distribution<double>(-3.0, 4.0)(gen));
        const double s = std::exp(std::uniform_real_distribution<double>(-3.0, 4.0)(gen));
        const auto fl = derive_flows(feed, q, r, s);
        REQUIRE(fl.distillate > 0.0);
        REQUIRE(fl.bottoms > 0.0);
        REQUIRE(fl.reflux > 0.0);
        REQUIRE(fl.vapor_top > 0.0);
        REQUIRE(fl.liquid_bottom > 0.0);
        REQUIRE(fl.vapor_bottom > 0.0);
        CHECK(std::abs(fl.distillate + fl.bottoms - feed) <= 1e-12 * feed);
        CHECK(std::abs(fl.reflux + q * feed - fl.liquid_bottom) <= 1e-12 * fl.liquid_bottom);
        CHECK(std::abs(fl.vapor_bottom + fl.bottoms - fl.liquid_bottom) <= 1e-12 * fl.liquid_bottom);
        // vapor balance around the feed tray
        CHECK(std::abs(fl.vapor_top - fl.vapor_bottom - (1.0 - q) * feed) <= 1e-10 * fl.vapor_top);
    }
}

TEST_CASE("thomas_solve small systems")
{
    const std::vector<double> zero(4, 0.0), one(4, 1.0), r{1.0, -2.0, 3.5, 7.0};
    const auto x = thomas_solve(zero, one, zero, r);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == r[i]);

    const std::vector<double> lower{0.0, 1.0}, diag{2.0, 2.0}, upper{1.0, 0.0}, rhs{3.0, 3.0};
    const auto y = thomas_solve(lower, diag, upper, rhs);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(1.0));

    const std::vector<double> bad_diag{0.0, 2.0};
    CHECK_THROWS_AS(thomas_solve(lower, bad_diag, upper, rhs), SingularSystemError);
    CHECK_THROWS(thomas_solve(lower, diag, upper, std::vector<double>{1.0}));
}

TEST_CASE("thomas_solve matches dense elimination on random diagonally dominant systems")
{
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 50;
        std::vector<double> lo(n), di(n), up(n), rhs(n);
        DenseMatrix a(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = i > 0 ? u(gen) : 0.0;
            up[i] = i + 1 < n ? u(gen) : 0.0;
            di[i] = (std::abs(lo[i]) + std::abs(up[i]) + 0.5) * (u(gen) < 0 ? -1.0 : 1.0);
            rhs[i] = 10.0 * u(gen);
            a[i][i] = di[i];
            if (i > 0) a[i][i - 1] = lo[i];
            if (i + 1 < n) a[i][i + 1] = up[i];
        }
        const auto x = thomas_solve(lo, di, up, rhs);
        const auto ref = dense_solve(a, rhs);
        double rmax = 0.0, resid = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rmax = std::max(rmax, std::abs(rhs[i]));
            double ax = 0.0;
            for (std::size_t j = 0; j < n; ++j) ax += a[i][j] * x[j];
            resid = std::max(resid, std::abs(ax - rhs[i]));
            CHECK(x[i] == doctest::Approx(ref[i]).epsilon(1e-9));
        }
        CHECK(resid < 1e-9 * rmax);
    }
}

TEST_CASE("stage system equals a dense solve of the raw balances for N = 3")
{
    // Unknowns: liquid l0..l4 and vapor v1..v4 of one component, solved densely
    // from the balance statements themselves.
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_stages = 3;
        const double reflux = u(gen);
        const double feed = u(gen);
        std::vector<double> s(5, 0.0);
        for (int j = 1; j <= 4; ++j) s[j] = u(gen);

        const std::size_t nl = 5, nv = 4, n = nl + nv;
        auto L = [](int j) { return static_cast<std::size_t>(j); };
        auto V = [&](int j) { return nl + static_cast<std::size_t>(j - 1); };
        DenseMatrix a(n, std::vector<double>(n, 0.0));
        std::vector<double> b(n, 0.0);
        std::size_t row = 0;
        // condenser: v1 = l0 (1 + 1/R)
        a[row][V(1)] = 1.0;
        a[row][L(0)] = -(1.0 + 1.0 / reflux);
        ++row;
        // trays: l_{j-1} + v_{j+1} + f_j = l_j + v_j
        for (int j = 1; j <= n_stages; ++j) {
            a[row][L(j - 1)] += 1.0;
            a[row][V(j + 1)] += 1.0;
            a[row][L(j)] -= 1.0;
            a[row][V(j)] -= 1.0;
            b[row] = j == 2 ? -feed : 0.0;
            ++row;
        }
        // reboiler: l3 = b + v4
        a[row][L(3)] = 1.0;
        a[row][L(4)] = -1.0;
        a[row][V(4)] = -1.0;
        ++row;
        // equilibrium: v_j = S_j l_j
        for (int j = 1; j <= 4; ++j) {
            a[row][V(j)] = 1.0;
            a[row][L(j)] = -s[j];
            ++row;
        }
        REQUIRE(row == n);
        const auto ref = dense_solve(a, b);

        REQUIRE(feed_tray(n_stages) == 2);
        const auto sys = assemble_component_system(n_stages, reflux, s, feed);
        const auto l = thomas_solve(sys.lower, sys.diagonal, sys.upper, sys.rhs);
        for (int j = 0; j <= 4; ++j) CHECK(std::abs(l[L(j)] - ref[L(j)]) <= 1e-9 * std::max(1.0, ref[L(j)]));
        // distillate + bottoms = feed
        CHECK(l[0] / reflux + l[4] == doctest::Approx(feed).epsilon(1e-12));
    }
}

TEST_CASE("feed tray is the middle tray rounded up")
{
    CHECK(feed_tray(3) == 2);
    CHECK(feed_tray(4) == 2);
    CHECK(feed_tray(30) == 15);
    CHECK(feed_tray(31) == 16);
}

TEST_CASE("column spec validation")
{
    ColumnSpec spec{thermo::kAtmosphere, 2, 3.0, 3.0};
    CHECK_THROWS(spec.validate());
    spec.n_stages = 3;
    CHECK_NOTHROW(spec.validate());
    spec.reflux_ratio = 0.0;
    CHECK_THROWS(spec.validate());
    spec = {0.0, 10, 1.0, 1.0};
    CHECK_THROWS(spec.validate());
}

TEST_CASE("BTX reference column converges and conserves")
{
    const auto comps = btx();
    const auto feed = btx_feed();
    const ColumnSpec spec{thermo::kAtmosphere, 30, 3.0, 3.0};
    const auto r = solve_column(comps, feed, spec);
    REQUIRE(r.converged);
    CHECK(r.iterations <= 200);
    CHECK(r.failure.empty());
    REQUIRE(r.stage_temperatures.size() == 32);
    CHECK(r.stage_temperatures.back() > r.stage_temperatures.front());
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(r.distillate.flows[i] + r.bottoms.flows[i] - feed.flows[i]) <= 1e-8 * feed.flows[i]);
        CHECK(r.distillate.flows[i] >= 0.0);
        CHECK(r.bottoms.flows[i] >= 0.0);
    }
    CHECK(r.distillate.temperature == r.stage_temperatures.front());
    CHECK(r.bottoms.temperature == r.stage_temperatures.back());
    CHECK(r.distillate.pressure == spec.pressure);
    CHECK(r.bottoms.pressure == spec.pressure);
    CHECK(r.max_vapor_flow == std::max(r.flows.vapor_top, r.flows.vapor_bottom));
    CHECK(r.feed_liquid_fraction == 1.0);

    // duties from mean latent heats of the products
    const auto lam = [&](const thermo::Stream& s) {
        return thermo::mixture_properties(comps, s, thermo::Phase::liquid).latent_heat;
    };
    CHECK(r.condenser_duty == doctest::Approx(r.flows.vapor_top * lam(r.distillate)));
    CHECK(r.reboiler_duty == doctest::Approx(r.flows.vapor_bottom * lam(r.bottoms)));

    // benzene goes overhead, p-xylene to the bottoms
    CHECK(r.distillate.flows[0] > 0.99 * feed.flows[0]);
    CHECK(r.bottoms.flows[2] > 0.99 * feed.flows[2]);
}

TEST_CASE("randomized solves conserve mass and order temperatures")
{
    std::mt19937_64 gen(21);
    const auto comps_btx = btx();
    const std::vector<thermo::Component> comps_hc{
        thermo::library_component("ethane"),     thermo::library_component("propane"),
        thermo::library_component("isobutane"),  thermo::library_component("n-butane"),
        thermo::library_component("isopentane"), thermo::library_component("n-pentane")};
    const thermo::Stream feed_hc{{17, 1110, 1198, 516, 334, 173}, 378.15, 17.4 * thermo::kAtmosphere};

    int converged = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const bool hc = trial % 2 == 1;
        const auto& comps = hc ? comps_hc : comps_btx;
        const auto feed = hc ? feed_hc : btx_feed();
        const double p = (hc ? 5.0 : 0.5) * std::exp(std::uniform_real_distribution<double>(0.0, 1.6)(gen)) *
                         thermo::kAtmosphere;
        const ColumnSpec spec{p, 5 + static_cast<int>(gen() % 40),
                              std::exp(std::uniform_real_distribution<double>(-1.5, 2.5)(gen)),
                              std::exp(std::uniform_real_distribution<double>(-1.5, 2.5)(gen))};
        const auto r = solve_column(comps, feed, spec);
        if (!r.converged) continue;
        ++converged;
        double total = 0.0;
        for (std::size_t i = 0; i < comps.size(); ++i) {
            CHECK(std::abs(r.distillate.flows[i] + r.bottoms.flows[i] - feed.flows[i]) <=
                  1e-8 * feed.flows[i]);
            total += r.distillate.flows[i] + r.bottoms.flows[i];
        }
        CHECK(std::abs(total - feed.total_flow()) <= 1e-8 * feed.total_flow());
        CHECK(r.stage_temperatures.back() >= r.stage_temperatures.front());
    }
    CHECK(converged >= 90);
}

TEST_CASE("binary high-reflux column is consistent with the Fenske estimate")
{
    const std::vector<thermo::Component> bt{thermo::library_component("benzene"),
                                            thermo::library_component("toluene")};
    const thermo::Stream feed{{5.0, 5.0}, 298.15, thermo::kAtmosphere};
    const ColumnSpec spec{thermo::kAtmosphere, 20, 100.0, 100.0};
    const auto r = solve_column(bt, feed, spec);
    REQUIRE(r.converged);

    const auto alpha_at = [&](double t) { return antoine_pa(bt[0], t) / antoine_pa(bt[1], t); };
    const double alpha = std::sqrt(alpha_at(r.stage_temperatures.front()) * alpha_at(r.stage_temperatures.back()));
    const double fenske = std::pow(alpha, spec.n_stages + 1);
    const double sf = (r.distillate.flows[0] / r.bottoms.flows[0]) * (r.bottoms.flows[1] / r.distillate.flows[1]);
    CAPTURE(sf);
    CAPTURE(fenske);
    CHECK(sf >= fenske / 3.0);
    CHECK(sf <= fenske * 3.0);
}

TEST_CASE("degenerate feed is rejected")
{
    const auto comps = btx();
    const thermo::Stream empty{{0.0, 0.0, 0.0}, 300.0, thermo::kAtmosphere};
    CHECK_THROWS_AS(solve_column(comps, empty, {thermo::kAtmosphere, 10, 1.0, 1.0}), thermo::DegenerateStreamError);
}

TEST_CASE("sweep limit yields an unconverged result instead of throwing")
{
    const auto comps = btx();
    SolverOptions opts;
    opts.max_sweeps = 1;
    const auto r = solve_column(comps, btx_feed(), {thermo::kAtmosphere, 30, 3.0, 3.0}, opts);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.max_temperature_change > 0.01);
}
