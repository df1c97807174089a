#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/network.hpp"
#include "rsspred/raster.hpp"

namespace rsspred {

// One sample of the direct BS->UE ray. t is the horizontal distance from
// the BS along the path; z_ray the straight-line height at t.
struct ProfileSample {
    double t = 0.0;
    double z_ground = 0.0;
    double h_building = 0.0;
    int clutter = 0;
    double z_ray = 0.0;
};

struct PathProfile {
    std::vector<ProfileSample> samples; // t strictly increasing from 0
    double z_bs = 0.0;                  // ground + building + antenna height
    double z_ue = 0.0;                  // ground + building at the UE cell
    double d = 0.0;                     // horizontal BS->UE distance, meters
    double step = 0.0;                  // sampling step, meters
    double x_bs = 0.0, y_bs = 0.0;
    double x_ue = 0.0, y_ue = 0.0;
};

// Geometric summary of a profile: link state, diffraction extent, building
// penetrations and per-clutter distance decomposition.
struct ProfileSummary {
    bool los = true;
    double d_fd = -1.0; // distance to first obstructed sample, -1 when LoS
    double d_ld = -1.0; // distance to last obstructed sample, -1 when LoS
    int n_penetrations = 0;
    double d_indoor = 0.0;
    double d_outdoor = 0.0;
    int clutter_bs = 0;
    int clutter_ue = 0;
    std::vector<int> n_penetrations_c;  // length C, sums to n_penetrations
    std::vector<double> d_indoor_c;     // length C, sums to d_indoor
    std::vector<double> d_outdoor_c;    // length C, sums to d_outdoor
};

// Obstruction margin: a sample blocks the ray only if it clears the direct
// line by more than this, so exact grazing does not count.
inline constexpr double kObstructionEpsilon = 1e-6;

// Sampled vertical cut through the geodata along the direct path.
// The antenna sits h_bs above ground + building at the BS cell; the UE
// height is the ground + building elevation of its cell (the raster
// convention used for all angle features, see angular_separations).
inline PathProfile extract_profile_with_step(const GeoStack& geo, const SiteTopology& site,
                                             double x_ue, double y_ue, double step) {
    if (!geo.in_bounds(site.x, site.y))
        throw BoundsError("BS position (" + format_double(site.x) + ", " + format_double(site.y) +
                          ") outside geodata bounds");
    if (!geo.in_bounds(x_ue, y_ue))
        throw BoundsError("UE position (" + format_double(x_ue) + ", " + format_double(y_ue) +
                          ") outside geodata bounds");
    const double dx = x_ue - site.x;
    const double dy = y_ue - site.y;
    const double d = std::hypot(dx, dy);
    if (!(d > 0.0)) throw DomainError("degenerate path: BS and UE are co-located");
    if (!(step > 0.0)) throw DomainError("profile step must be > 0");

    PathProfile p;
    p.d = d;
    p.step = step;
    p.x_bs = site.x;
    p.y_bs = site.y;
    p.x_ue = x_ue;
    p.y_ue = y_ue;
    p.z_bs = geo.ground(site.x, site.y) + geo.building(site.x, site.y) + site.h_bs;
    p.z_ue = geo.ground(x_ue, y_ue) + geo.building(x_ue, y_ue);

    const auto n = static_cast<std::size_t>(std::floor(d / step)) + 1;
    p.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * step;
        const double f = t / d;
        const double x = site.x + f * dx;
        const double y = site.y + f * dy;
        ProfileSample s;
        s.t = t;
        s.z_ground = geo.ground(x, y);
        s.h_building = geo.building(x, y);
        s.clutter = geo.clutter(x, y);
        s.z_ray = p.z_bs + (p.z_ue - p.z_bs) * f;
        p.samples.push_back(s);
    }
    return p;
}

inline PathProfile extract_profile(const GeoStack& geo, const SiteTopology& site, double x_ue,
                                   double y_ue, double /*h_ue*/ = 1.5) {
    return extract_profile_with_step(geo, site, x_ue, y_ue, geo.dtm.cellsize / 2.0);
}

// Walks the samples once. The BS sample is skipped (its own rooftop is not
// an obstruction); every later sample, including the one nearest the UE,
// contributes one step length to the indoor/outdoor decomposition of its
// clutter class. A penetration is a maximal contiguous run of indoor
// samples, attributed to the class of the run's first sample.
inline ProfileSummary summarize_profile(const PathProfile& p, const GeoStack& geo) {
    const int C = geo.clutter_count;
    ProfileSummary s;
    s.n_penetrations_c.assign(static_cast<std::size_t>(C), 0);
    s.d_indoor_c.assign(static_cast<std::size_t>(C), 0.0);
    s.d_outdoor_c.assign(static_cast<std::size_t>(C), 0.0);
    s.clutter_bs = geo.clutter(p.x_bs, p.y_bs);
    s.clutter_ue = geo.clutter(p.x_ue, p.y_ue);

    bool in_run = false;
    for (std::size_t i = 1; i < p.samples.size(); ++i) {
        const auto& smp = p.samples[i];
        const bool obstructed = smp.z_ground + smp.h_building > smp.z_ray + kObstructionEpsilon;
        const bool indoor = obstructed && smp.h_building > 0.0;
        const auto c = static_cast<std::size_t>(smp.clutter);

        if (obstructed) {
            if (s.los) s.d_fd = smp.t;
            s.d_ld = smp.t;
            s.los = false;
        }
        if (indoor) {
            s.d_indoor += p.step;
            s.d_indoor_c[c] += p.step;
            if (!in_run) {
                s.n_penetrations += 1;
                s.n_penetrations_c[c] += 1;
                in_run = true;
            }
        } else {
            s.d_outdoor += p.step;
            s.d_outdoor_c[c] += p.step;
            in_run = false;
        }
    }
    return s;
}

} // namespace rsspred
