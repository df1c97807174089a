#include <doctest.h>

#include <cmath>

#include "rsspred/scenario.hpp"
#include "test_helpers.hpp"

using namespace rsspred;

namespace {

ScenarioConfig small_config() {
    ScenarioConfig cfg;
    cfg.area_m = 400.0;
    cfg.cellsize_m = 4.0;
    cfg.clutter_count = 8;
    cfg.n_sites = 2;
    cfg.ue_density_per_m2 = 0.002; // ~320 traces
    return cfg;
}

OracleParams no_shadow_params(int clutter_count) {
    OracleParams p;
    p.pen_loss_db = default_pen_loss(clutter_count);
    p.shadow_sigma_db = 0.0;
    return p;
}

} // namespace

TEST_CASE("oracle on boresight at level height reduces to tx + gain - pathloss") {
    const auto geo = testutil::flat_geo(200, 200, 2.0);
    SiteTopology site;
    site.cell_id = "c1";
    site.x = 50.0;
    site.y = 50.0;
    site.h_bs = 30.0;
    site.azimuth_deg = 0.0; // boresight due North
    site.tilt_deg = 0.0;
    site.tx_power_dbm = 43.0;

    auto params = no_shadow_params(4);
    const double d = 100.0;
    const double rss = oracle_rss(geo, site, 50.0, 150.0, 1.5, params);
    // theta_hor = 0, z_ue == z_bs raster heights so phi_ue = 0 = tilt
    const double expected = 43.0 + params.gain_max_dbi -
                            (params.los_intercept_db + params.los_slope_db * std::log10(d));
    CHECK(rss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("horizontal pattern loss is exactly 12 dB at one half-power beamwidth") {
    const auto params = no_shadow_params(4);
    CHECK(antenna_loss_h(params.hpbw_h_deg, params) == doctest::Approx(12.0));
    CHECK(antenna_loss_h(0.0, params) == 0.0);
    CHECK(antenna_loss_h(180.0, params) == 30.0); // capped
    CHECK(antenna_loss_v(params.hpbw_v_deg, params) == doctest::Approx(12.0));
    CHECK(antenna_loss_v(90.0, params) == 20.0); // capped
}

TEST_CASE("oracle matches an independent spreadsheet-style re-evaluation") {
    auto geo = testutil::random_city(5, 120, 2.0, 6);
    SiteTopology site;
    site.cell_id = "s0_1";
    site.x = 30.0;
    site.y = 40.0;
    site.h_bs = 28.0;
    site.azimuth_deg = 135.0;
    site.tilt_deg = 6.0;
    site.tx_power_dbm = 43.0;

    OracleParams params = no_shadow_params(6);
    params.shadow_sigma_db = 3.0;
    params.seed = 99;
    const double x = 180.0, y = 160.0, h_ue = 1.5;

    // independent recomputation from the published pieces
    const double z_ue = geo.ground(x, y) + geo.building(x, y);
    const double z_bs = geo.ground(site.x, site.y) + geo.building(site.x, site.y);
    const auto sep = angular_separations(site, x, y, z_ue, z_bs);
    const auto summary = summarize_profile(extract_profile(geo, site, x, y), geo);
    const double a_h = std::min(12.0 * std::pow(sep.theta_hor / 63.0, 2.0), 30.0);
    const double a_v = std::min(12.0 * std::pow(sep.phi_ver / 4.7, 2.0), 20.0);
    const double pl = summary.los
                          ? params.los_intercept_db +
                                params.los_slope_db * std::log10(std::max(sep.d, 1.0))
                          : params.nlos_intercept_db +
                                params.nlos_slope_db * std::log10(std::max(sep.d, 1.0));
    double pen = 0.0;
    for (std::size_t c = 0; c < summary.n_penetrations_c.size(); ++c)
        pen += summary.n_penetrations_c[c] * params.pen_loss_db[c];
    std::uint64_t key = hash_combine(params.seed,
                                     static_cast<std::uint64_t>(
                                         static_cast<std::int64_t>(std::floor(x / 10.0))));
    key = hash_combine(key, static_cast<std::uint64_t>(
                                static_cast<std::int64_t>(std::floor(y / 10.0))));
    key = hash_combine(key, hash_string(site.cell_id));
    const double shadow = params.shadow_sigma_db * hashed_normal(key);
    const double expected = 43.0 + 18.3 - a_h - a_v - pl - pen -
                            params.indoor_alpha_db_m * summary.d_indoor - shadow;

    CHECK(oracle_rss(geo, site, x, y, h_ue, params) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("oracle is monotonically non-increasing in theta_hor below the cap") {
    const auto geo = testutil::flat_geo(400, 400, 2.0);
    SiteTopology site;
    site.cell_id = "c1";
    site.x = 400.0;
    site.y = 400.0;
    site.h_bs = 30.0;
    site.azimuth_deg = 0.0;
    const auto params = no_shadow_params(4);

    const double d = 200.0;
    double prev = 1e9;
    for (double bearing = 0.0; bearing <= 80.0; bearing += 5.0) {
        const double x = 400.0 + d * std::sin(bearing * std::numbers::pi / 180.0);
        const double y = 400.0 + d * std::cos(bearing * std::numbers::pi / 180.0);
        const double rss = oracle_rss(geo, site, x, y, 1.5, params);
        CHECK(rss <= prev + 1e-9);
        prev = rss;
    }
}

TEST_CASE("oracle rejects out-of-bounds points and bad tables") {
    const auto geo = testutil::flat_geo(50, 50, 2.0, 4);
    SiteTopology site;
    site.cell_id = "c1";
    site.x = 20.0;
    site.y = 20.0;
    site.h_bs = 10.0;
    auto params = no_shadow_params(4);
    CHECK_THROWS_AS(oracle_rss(geo, site, 500.0, 20.0, 1.5, params), BoundsError);
    params.pen_loss_db.pop_back();
    CHECK_THROWS_AS(oracle_rss(geo, site, 30.0, 20.0, 1.5, params), ConfigError);
}

TEST_CASE("generate_scenario is deterministic and seed-sensitive") {
    const auto cfg = small_config();
    const auto a = generate_scenario(cfg, 7);
    const auto b = generate_scenario(cfg, 7);
    CHECK(a.geo.dtm.values == b.geo.dtm.values);
    CHECK(a.geo.dhm.values == b.geo.dhm.values);
    CHECK(a.geo.dlu.values == b.geo.dlu.values);
    REQUIRE(a.traces.size() == b.traces.size());
    bool all_equal = true;
    for (std::size_t i = 0; i < a.traces.size(); ++i) {
        if (a.traces[i].x != b.traces[i].x || a.traces[i].y != b.traces[i].y ||
            a.traces[i].rss_dbm != b.traces[i].rss_dbm ||
            a.traces[i].cell_id != b.traces[i].cell_id)
            all_equal = false;
    }
    CHECK(all_equal);
    REQUIRE(a.sites.size() == static_cast<std::size_t>(cfg.n_sites * 3));

    const auto c = generate_scenario(cfg, 8);
    bool differs = c.traces.size() != a.traces.size();
    for (std::size_t i = 0; !differs && i < std::min(a.traces.size(), c.traces.size()); ++i)
        if (a.traces[i].x != c.traces[i].x) differs = true;
    CHECK(differs);
}

TEST_CASE("zero UE density yields zero traces") {
    auto cfg = small_config();
    cfg.ue_density_per_m2 = 0.0;
    const auto data = generate_scenario(cfg, 1);
    CHECK(data.traces.empty());
}

TEST_CASE("trace count concentrates near the Poisson intensity") {
    Rng rng(123);
    const double lambda = 10000.0;
    const auto n = rng.poisson(lambda);
    CHECK(std::fabs(static_cast<double>(n) / lambda - 1.0) < 0.05);

    // and through the generator at a smaller scale
    auto cfg = small_config();
    cfg.ue_density_per_m2 = 0.0625; // 10000 expected over 400 x 400
    const auto data = generate_scenario(cfg, 42);
    CHECK(std::fabs(static_cast<double>(data.traces.size()) / 10000.0 - 1.0) < 0.05);
}

TEST_CASE("missing fraction produces missing rss rows for cleaning") {
    auto cfg = small_config();
    cfg.missing_fraction = 0.5;
    cfg.ue_density_per_m2 = 0.005;
    const auto data = generate_scenario(cfg, 3);
    std::size_t missing = 0;
    for (const auto& t : data.traces)
        if (!t.rss_dbm) ++missing;
    const double frac = static_cast<double>(missing) / static_cast<double>(data.traces.size());
    CHECK(frac > 0.35);
    CHECK(frac < 0.65);

    const auto cleaned = clean_traces(data.traces, data.sites);
    CHECK(cleaned.size() == data.traces.size() - missing);
}

TEST_CASE("generator rejects inconsistent configuration") {
    auto cfg = small_config();
    cfg.oracle.pen_loss_db = {1.0, 2.0}; // shorter than clutter_count
    CHECK_THROWS_AS(generate_scenario(cfg, 1), ConfigError);

    auto cfg2 = small_config();
    cfg2.p_building = 0.9;
    cfg2.p_park = 0.2;
    CHECK_THROWS_AS(generate_scenario(cfg2, 1), ConfigError);
}

TEST_CASE("scenario sites sit inside the area with three sectors at distinct azimuths") {
    const auto data = generate_scenario(small_config(), 11);
    for (std::size_t i = 0; i < data.sites.size(); i += 3) {
        CHECK(data.geo.in_bounds(data.sites[i].x, data.sites[i].y));
        const double a0 = data.sites[i].azimuth_deg;
        const double a1 = data.sites[i + 1].azimuth_deg;
        const double a2 = data.sites[i + 2].azimuth_deg;
        CHECK(a0 != a1);
        CHECK(a1 != a2);
        CHECK(std::fmod(a1 - a0 + 360.0, 360.0) == doctest::Approx(120.0));
        CHECK(std::fmod(a2 - a1 + 360.0, 360.0) == doctest::Approx(120.0));
    }
}
