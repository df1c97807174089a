#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/features.hpp"
#include "rsspred/network.hpp"
#include "rsspred/profile.hpp"
#include "rsspred/raster.hpp"
#include "rsspred/rng.hpp"

namespace rsspred {

// Parameters of the deterministic ground-truth RSS function used to label
// synthetic scenarios. Antenna gain/beamwidths default to the macro sector
// settings the rest of the toolkit assumes.
struct OracleParams {
    double gain_max_dbi = 18.3;
    double hpbw_h_deg = 63.0;
    double hpbw_v_deg = 4.7;
    double los_intercept_db = 30.0;  // pathloss at 1 m, LoS
    double los_slope_db = 22.0;      // dB per decade
    double nlos_intercept_db = 20.0;
    double nlos_slope_db = 40.0;
    std::vector<double> pen_loss_db; // per clutter class, dB per penetrated building
    double indoor_alpha_db_m = 0.1;  // linear indoor loss
    double shadow_sigma_db = 4.0;
    double shadow_bin_m = 10.0;      // shadowing is frozen per (bin, cell)
    std::uint64_t seed = 0;

    void validate(int clutter_count) const {
        if (shadow_sigma_db < 0.0) throw ConfigError("shadow sigma must be >= 0");
        if (!(hpbw_h_deg > 0.0 && hpbw_v_deg > 0.0))
            throw ConfigError("antenna beamwidths must be > 0");
        if (static_cast<int>(pen_loss_db.size()) != clutter_count)
            throw ConfigError("penetration loss table length " +
                              std::to_string(pen_loss_db.size()) + " != clutter_count " +
                              std::to_string(clutter_count));
    }
};

inline std::vector<double> default_pen_loss(int clutter_count) {
    std::vector<double> t(static_cast<std::size_t>(clutter_count), 0.0);
    // Classes 0..2 are street/park/water; buildings start at class 3.
    for (int c = 3; c < clutter_count; ++c)
        t[static_cast<std::size_t>(c)] = 2.5 + 0.3 * static_cast<double>(c - 3);
    return t;
}

inline double antenna_loss_h(double theta_hor_deg, const OracleParams& p) {
    const double r = theta_hor_deg / p.hpbw_h_deg;
    return std::min(12.0 * r * r, 30.0);
}

inline double antenna_loss_v(double phi_ver_deg, const OracleParams& p) {
    const double r = phi_ver_deg / p.hpbw_v_deg;
    return std::min(12.0 * r * r, 20.0);
}

// Deterministic ground-truth RSS: transmit power and antenna pattern minus
// a distance law picked by the LoS state, per-building penetration losses,
// linear indoor loss and frozen per-bin shadowing. Not a ray tracer; it is
// a function of the same latent geometry the feature extractor sees, which
// makes the learning task well-posed.
inline double oracle_rss(const GeoStack& geo, const SiteTopology& site, double x_ue, double y_ue,
                         double h_ue, const OracleParams& params) {
    params.validate(geo.clutter_count);
    const double z_ue = geo.ground(x_ue, y_ue) + geo.building(x_ue, y_ue);
    const double z_bs = geo.ground(site.x, site.y) + geo.building(site.x, site.y);
    const auto a = angular_separations(site, x_ue, y_ue, z_ue, z_bs);

    const auto profile = extract_profile(geo, site, x_ue, y_ue, h_ue);
    const auto s = summarize_profile(profile, geo);

    const double d_log = std::log10(std::max(a.d, 1.0));
    const double pathloss = s.los ? params.los_intercept_db + params.los_slope_db * d_log
                                  : params.nlos_intercept_db + params.nlos_slope_db * d_log;

    double pen = 0.0;
    for (std::size_t c = 0; c < s.n_penetrations_c.size(); ++c)
        pen += static_cast<double>(s.n_penetrations_c[c]) * params.pen_loss_db[c];

    double shadow = 0.0;
    if (params.shadow_sigma_db > 0.0) {
        const auto ix = static_cast<std::int64_t>(std::floor(x_ue / params.shadow_bin_m));
        const auto iy = static_cast<std::int64_t>(std::floor(y_ue / params.shadow_bin_m));
        std::uint64_t key = hash_combine(params.seed, static_cast<std::uint64_t>(ix));
        key = hash_combine(key, static_cast<std::uint64_t>(iy));
        key = hash_combine(key, hash_string(site.cell_id));
        shadow = params.shadow_sigma_db * hashed_normal(key);
    }

    return site.tx_power_dbm + params.gain_max_dbi - antenna_loss_h(a.theta_hor, params) -
           antenna_loss_v(a.phi_ver, params) - pathloss - pen -
           params.indoor_alpha_db_m * s.d_indoor - shadow;
}

// Manhattan-style synthetic city: square area gridded into blocks by a
// street lattice, each block a building / park / water / plaza, gentle
// sinusoidal terrain, sites on street intersections with three sectors.
struct ScenarioConfig {
    double area_m = 1000.0;
    double cellsize_m = 4.0;
    double block_m = 80.0;
    double street_m = 20.0;
    double building_h_min = 8.0;
    double building_h_max = 40.0;
    double p_building = 0.55;
    double p_park = 0.25;
    double p_water = 0.05;
    int clutter_count = 15;
    int n_sites = 4;
    double h_bs_min = 20.0;
    double h_bs_max = 35.0;
    double tilt_min = 3.0;
    double tilt_max = 8.0;
    double tx_power_dbm = 43.0;
    double freq_mhz = 2110.0;
    double ue_density_per_m2 = 0.008; // Poisson spatial intensity
    double h_ue = 1.5;
    double noise_sigma_db = 1.0;      // measurement noise on top of the oracle
    double missing_fraction = 0.02;   // traces emitted without an rss value
    OracleParams oracle;

    void validate() const {
        if (!(area_m > 0.0 && cellsize_m > 0.0)) throw ConfigError("area and cellsize must be > 0");
        if (!(block_m > 0.0 && street_m >= 0.0)) throw ConfigError("block layout must be positive");
        if (clutter_count < 4)
            throw ConfigError("clutter_count must be >= 4 (street, park, water, buildings)");
        if (p_building + p_park + p_water > 1.0 + 1e-12)
            throw ConfigError("block type probabilities exceed 1");
        if (n_sites < 1) throw ConfigError("n_sites must be >= 1");
        if (ue_density_per_m2 < 0.0) throw ConfigError("ue density must be >= 0");
        if (missing_fraction < 0.0 || missing_fraction > 1.0)
            throw ConfigError("missing_fraction must be in [0, 1]");
    }
};

struct ScenarioData {
    GeoStack geo;
    std::vector<SiteTopology> sites;
    std::vector<UeTrace> traces;
    OracleParams oracle; // effective parameters, seed filled in
};

namespace detail {

struct BlockInfo {
    int clutter = 0;   // 0 street/plaza, 1 park, 2 water, >=3 building classes
    double height = 0.0;
};

inline BlockInfo block_info(long long bx, long long by, const ScenarioConfig& cfg,
                            std::uint64_t seed) {
    std::uint64_t key = hash_combine(seed ^ 0x626c6f636bULL, static_cast<std::uint64_t>(bx));
    key = hash_combine(key, static_cast<std::uint64_t>(by));
    std::uint64_t s = key;
    const double u = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    const double uh = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    const auto uc = splitmix64(s);
    BlockInfo b;
    if (u < cfg.p_building) {
        b.clutter = 3 + static_cast<int>(uc % static_cast<std::uint64_t>(cfg.clutter_count - 3));
        b.height = cfg.building_h_min + (cfg.building_h_max - cfg.building_h_min) * uh;
    } else if (u < cfg.p_building + cfg.p_park) {
        b.clutter = 1;
    } else if (u < cfg.p_building + cfg.p_park + cfg.p_water) {
        b.clutter = 2;
    }
    return b;
}

} // namespace detail

inline ScenarioData generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
    config.validate();
    OracleParams oracle = config.oracle;
    if (oracle.pen_loss_db.empty()) oracle.pen_loss_db = default_pen_loss(config.clutter_count);
    oracle.validate(config.clutter_count);
    oracle.seed = hash_combine(seed, 0x73686164ULL);

    const auto n = static_cast<std::size_t>(std::ceil(config.area_m / config.cellsize_m));
    RasterGrid dtm, dhm, dlu;
    for (RasterGrid* g : {&dtm, &dhm, &dlu}) {
        g->ncols = n;
        g->nrows = n;
        g->xll = 0.0;
        g->yll = 0.0;
        g->cellsize = config.cellsize_m;
        g->values.assign(n * n, 0.0);
    }

    // Terrain: a seeded tilted plane quantized per block tile. Constant
    // ground under each building keeps its rooftop plane flat, so a direct
    // ray crosses it at most once instead of flickering along a surface
    // made of sub-decimeter cell steps.
    std::uint64_t ts = hash_combine(seed, 0x7465727261ULL);
    const double slope_x = 0.024 * (static_cast<double>(splitmix64(ts) >> 11) * 0x1.0p-53 - 0.5);
    const double slope_y = 0.024 * (static_cast<double>(splitmix64(ts) >> 11) * 0x1.0p-53 - 0.5);

    const double pitch = config.block_m + config.street_m;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double x = (static_cast<double>(c) + 0.5) * config.cellsize_m;
            const double y = (static_cast<double>(n - 1 - r) + 0.5) * config.cellsize_m;
            dtm.at(r, c) = 20.0 + slope_x * std::floor(x / pitch) * pitch +
                           slope_y * std::floor(y / pitch) * pitch;
            const double ox = std::fmod(x, pitch);
            const double oy = std::fmod(y, pitch);
            if (ox < config.street_m || oy < config.street_m) continue; // street cell
            const auto bx = static_cast<long long>(std::floor(x / pitch));
            const auto by = static_cast<long long>(std::floor(y / pitch));
            const auto b = detail::block_info(bx, by, config, seed);
            dlu.at(r, c) = static_cast<double>(b.clutter);
            dhm.at(r, c) = b.height;
        }
    }
    GeoStack geo = make_geo_stack(std::move(dtm), std::move(dhm), std::move(dlu),
                                  config.clutter_count);

    // Sites on street intersections, three sectors each.
    Rng rng(hash_combine(seed, 0x7369746573ULL));
    std::vector<std::pair<double, double>> intersections;
    const auto blocks = static_cast<long long>(std::floor(config.area_m / pitch));
    for (long long i = 1; i < blocks; ++i)
        for (long long j = 1; j < blocks; ++j)
            intersections.emplace_back(static_cast<double>(i) * pitch + config.street_m / 2.0,
                                       static_cast<double>(j) * pitch + config.street_m / 2.0);
    if (intersections.size() < static_cast<std::size_t>(config.n_sites))
        throw ConfigError("area too small for the requested number of sites");
    rng.shuffle(intersections);

    std::vector<SiteTopology> sites;
    for (int i = 0; i < config.n_sites; ++i) {
        const auto [sx, sy] = intersections[static_cast<std::size_t>(i)];
        const double h = rng.uniform(config.h_bs_min, config.h_bs_max);
        const double base_az = rng.uniform(0.0, 120.0);
        const double tilt = rng.uniform(config.tilt_min, config.tilt_max);
        for (int k = 0; k < 3; ++k) {
            SiteTopology s;
            s.cell_id = "s" + std::to_string(i) + "_" + std::to_string(k);
            s.x = sx;
            s.y = sy;
            s.h_bs = h;
            s.azimuth_deg = std::fmod(base_az + 120.0 * k, 360.0);
            s.tilt_deg = tilt;
            s.tx_power_dbm = config.tx_power_dbm;
            s.freq_mhz = config.freq_mhz;
            s.antenna = "sector";
            sites.push_back(std::move(s));
        }
    }

    // UE traces: Poisson count, uniform positions, strongest-oracle serving
    // cell, noisy measurement; a configurable fraction loses its rss value.
    Rng ue_rng(hash_combine(seed, 0x756573ULL));
    const double lambda = config.ue_density_per_m2 * config.area_m * config.area_m;
    const auto n_ues = ue_rng.poisson(lambda);

    std::vector<UeTrace> traces;
    traces.reserve(n_ues);
    for (std::uint64_t i = 0; i < n_ues; ++i) {
        UeTrace u;
        u.timestamp = static_cast<double>(i);
        u.x = ue_rng.uniform(0.0, config.area_m);
        u.y = ue_rng.uniform(0.0, config.area_m);
        u.h_ue = config.h_ue;
        const double noise = ue_rng.normal(0.0, config.noise_sigma_db);
        const bool missing = ue_rng.uniform() < config.missing_fraction;

        double best = -std::numeric_limits<double>::infinity();
        for (const auto& s : sites) {
            if (s.x == u.x && s.y == u.y) continue;
            const double rss = oracle_rss(geo, s, u.x, u.y, u.h_ue, oracle);
            if (rss > best) {
                best = rss;
                u.cell_id = s.cell_id;
            }
        }
        if (!missing) u.rss_dbm = best + noise;
        traces.push_back(std::move(u));
    }

    return ScenarioData{std::move(geo), std::move(sites), std::move(traces), std::move(oracle)};
}

} // namespace rsspred
