#include <doctest.h>

#include <algorithm>
#include <map>

#include "rsspred/network.hpp"
#include "rsspred/rng.hpp"
#include "test_helpers.hpp"

using namespace rsspred;

namespace {

std::vector<SiteTopology> one_site() {
    SiteTopology s;
    s.cell_id = "c1";
    s.x = 100.0;
    s.y = 200.0;
    s.h_bs = 30.0;
    return {s};
}

} // namespace

TEST_CASE("parse_sites echoes fields") {
    testutil::TempDir dir("rsspred_sites");
    testutil::spit(dir.file("sites.csv"),
                   "cell_id,x,y,h_bs,azimuth_deg,tilt_deg,tx_power_dbm,freq_mhz,antenna\n"
                   "c1,100,200,30,120,5,43,2110,iso\n");
    const auto sites = parse_sites(dir.file("sites.csv"));
    REQUIRE(sites.size() == 1);
    CHECK(sites[0].cell_id == "c1");
    CHECK(sites[0].azimuth_deg == 120.0);
    CHECK(sites[0].tilt_deg == 5.0);
    CHECK(sites[0].tx_power_dbm == 43.0);
    CHECK(sites[0].antenna == "iso");
}

TEST_CASE("parse_sites names the missing column") {
    testutil::TempDir dir("rsspred_sites_missing");
    testutil::spit(dir.file("sites.csv"),
                   "cell_id,x,y,h_bs,azimuth_deg,tx_power_dbm,freq_mhz,antenna\n"
                   "c1,100,200,30,120,43,2110,iso\n");
    CHECK_THROWS_WITH_AS(parse_sites(dir.file("sites.csv")),
                         doctest::Contains("tilt_deg"), SchemaError);
}

TEST_CASE("parse_sites keeps ten unique records") {
    testutil::TempDir dir("rsspred_sites_ten");
    std::string csv = "cell_id,x,y,h_bs,azimuth_deg,tilt_deg,tx_power_dbm,freq_mhz,antenna\n";
    for (int i = 0; i < 10; ++i)
        csv += "c" + std::to_string(i) + ",0,0,10,0,0,43,2110,iso\n";
    testutil::spit(dir.file("sites.csv"), csv);
    const auto sites = parse_sites(dir.file("sites.csv"));
    CHECK(sites.size() == 10);
    std::vector<std::string> ids;
    for (const auto& s : sites) ids.push_back(s.cell_id);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("parse_traces handles missing rss and reports bad rows") {
    testutil::TempDir dir("rsspred_traces");
    testutil::spit(dir.file("traces.csv"), "timestamp,x,y,cell_id,rss_dbm\n"
                                           "0,10,20,c1,-85\n"
                                           "1,11,21,c1,\n");
    const auto traces = parse_traces(dir.file("traces.csv"));
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].rss_dbm == -85.0);
    CHECK(!traces[1].rss_dbm.has_value());

    testutil::spit(dir.file("bad.csv"), "timestamp,x,y,cell_id,rss_dbm\n"
                                        "0,10,20,c1,-85\n"
                                        "1,eleven,21,c1,-86\n");
    CHECK_THROWS_WITH_AS(parse_traces(dir.file("bad.csv")), doctest::Contains("row 3"),
                         ParseError);
}

TEST_CASE("clean_traces drops missing, non-finite and unknown-cell rows in order") {
    const auto sites = one_site();
    UeTrace valid;
    valid.x = 1;
    valid.y = 2;
    valid.cell_id = "c1";
    valid.rss_dbm = -80.0;
    UeTrace missing = valid;
    missing.rss_dbm.reset();
    UeTrace alien = valid;
    alien.cell_id = "zz";
    UeTrace nan_xy = valid;
    nan_xy.x = std::numeric_limits<double>::quiet_NaN();

    const auto out = clean_traces({missing, valid, alien, nan_xy}, sites);
    REQUIRE(out.size() == 1);
    CHECK(out[0].rss_dbm == -80.0);

    const std::vector<UeTrace> all_valid{valid, valid, valid};
    CHECK(clean_traces(all_valid, sites).size() == 3);
}

TEST_CASE("clean_traces recount oracle on randomized corpora") {
    const auto sites = one_site();
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<UeTrace> traces;
        std::size_t invalid = 0;
        const auto n = static_cast<std::size_t>(rng.uniform_int(0, 200));
        for (std::size_t i = 0; i < n; ++i) {
            UeTrace u;
            u.x = rng.uniform(0, 100);
            u.y = rng.uniform(0, 100);
            u.cell_id = "c1";
            u.rss_dbm = rng.uniform(-120, -40);
            const double roll = rng.uniform();
            if (roll < 0.2) {
                u.rss_dbm.reset();
                ++invalid;
            } else if (roll < 0.3) {
                u.cell_id = "unknown";
                ++invalid;
            }
            traces.push_back(std::move(u));
        }
        CHECK(clean_traces(traces, sites).size() == n - invalid);
    }
}

TEST_CASE("grid_traces averages in the dBm domain per (bin, cell)") {
    UeTrace a;
    a.x = 3.0;
    a.y = 4.0;
    a.cell_id = "c1";
    a.rss_dbm = -80.0;
    UeTrace b = a;
    b.rss_dbm = -90.0;
    const auto bins = grid_traces({a, b}, 10.0);
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].bin_ix == 0);
    CHECK(bins[0].bin_iy == 0);
    CHECK(bins[0].mean_rss == doctest::Approx(-85.0));
    CHECK(bins[0].count == 2);
}

TEST_CASE("grid_traces separates distinct bins and cells") {
    UeTrace a;
    a.x = 3.0;
    a.y = 4.0;
    a.cell_id = "c1";
    a.rss_dbm = -80.0;
    UeTrace b = a;
    b.x = 13.0; // next bin
    UeTrace c = a;
    c.cell_id = "c2"; // same bin, other cell
    const auto bins = grid_traces({a, b, c}, 10.0);
    REQUIRE(bins.size() == 3);
    for (const auto& m : bins) CHECK(m.count == 1);
}

TEST_CASE("grid_traces is idempotent on one-trace bins and conserves counts") {
    Rng rng(5);
    std::vector<UeTrace> traces;
    for (int i = 0; i < 300; ++i) {
        UeTrace u;
        u.x = rng.uniform(0.0, 500.0);
        u.y = rng.uniform(0.0, 500.0);
        u.cell_id = "c" + std::to_string(rng.uniform_int(0, 3));
        u.rss_dbm = rng.uniform(-120.0, -40.0);
        traces.push_back(std::move(u));
    }
    const auto bins = grid_traces(traces, 10.0);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    CHECK(total == traces.size());

    // every mean lies inside the contributing range
    std::map<std::tuple<long long, long long, std::string>, std::pair<double, double>> ranges;
    for (const auto& u : traces) {
        const auto key = std::make_tuple(static_cast<long long>(std::floor(u.x / 10.0)),
                                         static_cast<long long>(std::floor(u.y / 10.0)),
                                         u.cell_id);
        auto it = ranges.find(key);
        if (it == ranges.end())
            ranges[key] = {*u.rss_dbm, *u.rss_dbm};
        else {
            it->second.first = std::min(it->second.first, *u.rss_dbm);
            it->second.second = std::max(it->second.second, *u.rss_dbm);
        }
    }
    for (const auto& b : bins) {
        const auto& [lo, hi] = ranges.at({b.bin_ix, b.bin_iy, b.cell_id});
        CHECK(b.mean_rss >= lo - 1e-12);
        CHECK(b.mean_rss <= hi + 1e-12);
    }

    // re-grid the bin centers: with one trace per bin the mapping is stable
    std::vector<UeTrace> singles;
    for (const auto& b : bins) {
        UeTrace u;
        u.x = b.center_x();
        u.y = b.center_y();
        u.cell_id = b.cell_id;
        u.rss_dbm = b.mean_rss;
        singles.push_back(std::move(u));
    }
    const auto again = grid_traces(singles, 10.0);
    REQUIRE(again.size() >= bins.size()); // distinct (bin, cell) keys stay distinct
    std::size_t matches = 0;
    for (std::size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].count == 1);
        ++matches;
    }
    CHECK(matches == again.size());
    CHECK(again.size() == bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) {
        CHECK(again[i].bin_ix == bins[i].bin_ix);
        CHECK(again[i].bin_iy == bins[i].bin_iy);
        CHECK(again[i].cell_id == bins[i].cell_id);
        CHECK(again[i].mean_rss == doctest::Approx(bins[i].mean_rss));
    }
}

TEST_CASE("grid_traces milliwatt averaging differs from dB averaging as expected") {
    UeTrace a;
    a.x = 1.0;
    a.y = 1.0;
    a.cell_id = "c1";
    a.rss_dbm = -80.0;
    UeTrace b = a;
    b.rss_dbm = -90.0;
    const auto mw = grid_traces({a, b}, 10.0, true);
    REQUIRE(mw.size() == 1);
    const double expected =
        10.0 * std::log10((std::pow(10.0, -8.0) + std::pow(10.0, -9.0)) / 2.0);
    CHECK(mw[0].mean_rss == doctest::Approx(expected));
    CHECK(mw[0].mean_rss > -85.0); // linear mean is dominated by the stronger signal
}
