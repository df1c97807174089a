#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/network.hpp"
#include "rsspred/profile.hpp"
#include "rsspred/raster.hpp"

// Empirical pathloss baselines. Every log() in the source formulas is
// base 10 (Hata-family convention). COST-Hata takes d in kilometers, SPM
// in meters; signatures state the unit.

namespace rsspred {

enum class HataArea { Urban, Suburban, QuasiOpenRural, OpenRural };
enum class HataCorrection { SmallCity, OpenRural };

struct CostHataParams {
    double a1 = 46.3;
    double a2 = 33.9;
    double a3 = -13.82;
    double b1 = 44.9;
    double b2 = -6.55;
    double b3 = 0.0;
    HataArea area = HataArea::Urban;
    HataCorrection correction = HataCorrection::SmallCity;
};

struct SuiParams {
    // Intercept as published; physically implausible, so overridable.
    double intercept = -7366.0;
    double a = 4.6;
    double b = 0.0075;
    double c = 12.6;
    double x = 10.8;
};

struct SpmParams {
    double k1 = 23.8;
    double k2 = 44.9;
    double k3 = 10.89;
    double k4 = 0.19;
    double k5 = -10.0;
    double k6 = 0.0;
    double k7 = 0.0;
    double k_clutter = 1.0;
    std::vector<double> clutter_loss; // dB per class, length C
};

struct Itu452Inputs {
    double l_a = 0.0; // troposcatter sub-loss, dB
    double l_b = 0.0; // LoS / over-sea diffraction sub-loss, dB
    double l_c = 0.0; // diffraction + enhancement sub-loss, dB
    double l_d = 0.0; // companion sub-loss in the interpolation term, dB
    double a_bs = 0.0;
    double a_ue = 0.0;
    double theta_mrad = 0.0; // path angular distance, milliradians
};

inline double hata_ue_correction(HataCorrection kind, double f_mhz, double h_ue) {
    if (kind == HataCorrection::OpenRural) {
        const double l = std::log10(11.75 * h_ue);
        return 3.2 * l * l - 4.97;
    }
    const double lf = std::log10(f_mhz);
    return (1.1 * lf - 0.7) * h_ue - (1.56 * lf - 0.8);
}

// COST-Hata pathloss in dB; d in kilometers.
inline double cost_hata(const CostHataParams& p, double f_mhz, double h_bs, double h_ue,
                        double d_km) {
    if (!(f_mhz > 0.0 && h_bs > 0.0 && h_ue > 0.0 && d_km > 0.0))
        throw DomainError("cost_hata requires positive f, h_bs, h_ue and d");
    const double lf = std::log10(f_mhz);
    double loss = p.a1 + p.a2 * lf + p.a3 * std::log10(h_bs) +
                  (p.b1 + p.b2 * std::log10(h_bs) + p.b3 * h_bs) * std::log10(d_km);
    loss -= hata_ue_correction(p.correction, f_mhz, h_ue);
    switch (p.area) {
    case HataArea::Urban:
        break;
    case HataArea::Suburban: {
        const double l = std::log10(f_mhz / 28.0);
        loss -= 2.0 * l * l + 5.4;
        break;
    }
    case HataArea::QuasiOpenRural:
        loss -= 4.78 * lf * lf - 18.33 * lf + 35.94;
        break;
    case HataArea::OpenRural:
        loss -= 4.78 * lf * lf - 18.33 * lf + 40.94;
        break;
    }
    return loss;
}

// SUI pathloss in dB; d in kilometers.
inline double sui(const SuiParams& p, double f_mhz, double h_bs, double h_ue, double d_km) {
    if (!(f_mhz > 0.0 && h_bs > 0.0 && h_ue > 0.0 && d_km > 0.0))
        throw DomainError("sui requires positive f, h_bs, h_ue and d");
    const double a_hbs = p.a - p.b * h_bs + p.c / h_bs;
    const double a_hue = p.x * std::log10(h_ue / 2.0);
    return p.intercept + 26.0 * std::log10(f_mhz) + 10.0 * a_hbs * (1.0 + std::log10(d_km)) -
           a_hue;
}

// Single knife-edge loss for Fresnel parameter v (ITU-R P.526 approximation).
inline double knife_edge_loss(double v) {
    if (v <= -0.78) return 0.0;
    const double u = v - 0.1;
    return 6.9 + 20.0 * std::log10(std::sqrt(u * u + 1.0) + u);
}

namespace detail {

// Principal-edge search between two virtual terminals on the profile.
// Heights are obstacle tops (ground + building); the reference line joins
// (t_a, z_a) to (t_b, z_b).
inline double deygout_segment(const PathProfile& p, std::size_t ia, std::size_t ib, double z_a,
                              double z_b, double lambda_m, int depth) {
    if (ib <= ia + 1) return 0.0;
    const double t_a = p.samples[ia].t;
    const double t_b = (ib == p.samples.size()) ? p.d : p.samples[ib].t;
    const double span = t_b - t_a;
    if (!(span > 0.0)) return 0.0;

    double best_v = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = ia + 1; i < ib; ++i) {
        const double t = p.samples[i].t;
        const double d1 = t - t_a;
        const double d2 = t_b - t;
        if (!(d1 > 0.0 && d2 > 0.0)) continue;
        const double z_line = z_a + (z_b - z_a) * (d1 / span);
        const double h = p.samples[i].z_ground + p.samples[i].h_building - z_line;
        const double v = h * std::sqrt(2.0 * span / (lambda_m * d1 * d2));
        if (v > best_v) {
            best_v = v;
            best_i = i;
        }
    }
    if (!(best_v > -0.78)) return 0.0;

    double loss = knife_edge_loss(best_v);
    if (depth > 0) {
        const double z_edge =
            p.samples[best_i].z_ground + p.samples[best_i].h_building;
        loss += deygout_segment(p, ia, best_i, z_a, z_edge, lambda_m, depth - 1);
        loss += deygout_segment(p, best_i, ib, z_edge, z_b, lambda_m, depth - 1);
    }
    return loss;
}

} // namespace detail

// Deygout multiple knife-edge diffraction loss over a profile: principal
// edge by maximum Fresnel parameter, one recursion on each sub-path, at
// most three edges total. Unobstructed paths cost 0 dB.
inline double deygout_loss(const PathProfile& p, double f_mhz) {
    if (!(f_mhz > 0.0)) throw DomainError("deygout_loss requires positive frequency");
    if (p.samples.size() < 3) return 0.0;
    const double lambda_m = 299.792458 / f_mhz;
    return detail::deygout_segment(p, 0, p.samples.size(), p.z_bs, p.z_ue, lambda_m, 1);
}

// Standard Propagation Model pathloss in dB; d in meters. Effective
// terminal heights are measured against the mean ground level along the
// profile and clamped to >= 1 m; the UE side adds the receiver height h_ue
// on top of its raster cell height.
inline double spm(const SpmParams& p, const PathProfile& profile, const GeoStack& geo,
                  double f_mhz, double d_m, double h_ue) {
    if (!(d_m >= 1.0)) throw DomainError("spm requires d >= 1 m");
    if (static_cast<int>(p.clutter_loss.size()) != geo.clutter_count)
        throw ConfigError("spm clutter loss table length " +
                          std::to_string(p.clutter_loss.size()) + " != clutter_count " +
                          std::to_string(geo.clutter_count));

    double ground_sum = 0.0;
    for (const auto& s : profile.samples) ground_sum += s.z_ground;
    const double mean_ground = ground_sum / static_cast<double>(profile.samples.size());
    const double h_eff_bs = std::max(1.0, profile.z_bs - mean_ground);
    const double h_eff_ue = std::max(1.0, profile.z_ue + h_ue - mean_ground);

    // Weighted clutter loss: weights are per-class path-length fractions.
    double f_clutter = 0.0;
    if (profile.samples.size() > 1) {
        const double n = static_cast<double>(profile.samples.size() - 1);
        std::vector<std::size_t> counts(static_cast<std::size_t>(geo.clutter_count), 0);
        for (std::size_t i = 1; i < profile.samples.size(); ++i)
            counts[static_cast<std::size_t>(profile.samples[i].clutter)] += 1;
        for (std::size_t c = 0; c < counts.size(); ++c)
            f_clutter += (static_cast<double>(counts[c]) / n) * p.clutter_loss[c];
    }

    const double ld = std::log10(d_m);
    const double l_diff = deygout_loss(profile, f_mhz);
    return p.k1 + p.k2 * ld + p.k3 * std::log10(h_eff_bs) + p.k4 * l_diff +
           p.k5 * ld * std::log10(h_eff_bs) + p.k6 * h_eff_ue + p.k7 * std::log10(h_eff_ue) +
           p.k_clutter * f_clutter;
}

// ITU-R P.452 combining formula. Sub-losses are inputs; only the blending
// of the two branches and the surroundings losses happen here.
inline double itu452(const Itu452Inputs& in) {
    const double f_j = 1.0 - 0.5 * (1.0 + std::tanh(2.4 * (in.theta_mrad - 0.3) / 0.3));
    const double branch = in.l_b + (in.l_c - in.l_d) * f_j;
    const double combined =
        -5.0 * std::log10(std::pow(10.0, -0.2 * in.l_a) + std::pow(10.0, -0.2 * branch));
    return combined + in.a_bs + in.a_ue;
}

enum class EmpiricalModel { CostHata, Sui, Spm, Itu452 };

inline EmpiricalModel parse_empirical_model(const std::string& name) {
    if (name == "cost-hata") return EmpiricalModel::CostHata;
    if (name == "sui") return EmpiricalModel::Sui;
    if (name == "spm") return EmpiricalModel::Spm;
    if (name == "itu452") return EmpiricalModel::Itu452;
    throw ConfigError("unknown empirical model '" + name +
                      "' (expected cost-hata, sui, spm or itu452)");
}

// Bundled parameter set for all four models, loadable from one file.
struct EmpiricalParams {
    CostHataParams cost_hata;
    SuiParams sui;
    SpmParams spm;
    std::optional<Itu452Inputs> itu452;
};

struct PredictPoint {
    double x = 0.0;
    double y = 0.0;
    std::string cell_id;
    double h_ue = 1.5;
};

// P_UE = P_BS - L_path per point. The horizontal distance is floored to
// 1 m before unit conversion so the log terms stay bounded next to a mast.
inline std::vector<double> empirical_predict(EmpiricalModel model, const EmpiricalParams& params,
                                             const GeoStack& geo,
                                             const std::vector<SiteTopology>& sites,
                                             const std::vector<PredictPoint>& points) {
    if (model == EmpiricalModel::Spm &&
        static_cast<int>(params.spm.clutter_loss.size()) != geo.clutter_count)
        throw ConfigError("spm clutter loss table does not match the geodata clutter count");
    if (model == EmpiricalModel::Itu452 && !params.itu452)
        throw ConfigError("itu452 requires configured sub-losses (l_a, l_b, l_c, l_d)");

    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& pt : points) {
        const auto& site = find_site(sites, pt.cell_id);
        const double d_m = std::max(1.0, std::hypot(pt.x - site.x, pt.y - site.y));
        double loss = 0.0;
        switch (model) {
        case EmpiricalModel::CostHata:
            loss = cost_hata(params.cost_hata, site.freq_mhz, site.h_bs, pt.h_ue, d_m / 1000.0);
            break;
        case EmpiricalModel::Sui:
            loss = sui(params.sui, site.freq_mhz, site.h_bs, pt.h_ue, d_m / 1000.0);
            break;
        case EmpiricalModel::Spm: {
            const auto profile = extract_profile(geo, site, pt.x, pt.y, pt.h_ue);
            loss = spm(params.spm, profile, geo, site.freq_mhz, d_m, pt.h_ue);
            break;
        }
        case EmpiricalModel::Itu452:
            loss = itu452(*params.itu452);
            break;
        }
        out.push_back(site.tx_power_dbm - loss);
    }
    return out;
}

// Key-value parameter file: one `name value` pair per line, `#` comments.
// spm.clutter_loss takes C comma-separated values.
inline EmpiricalParams load_empirical_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model parameter file: " + path);
    EmpiricalParams p;
    Itu452Inputs itu;
    bool itu_seen = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto sp = s.find_first_of(" \t");
        if (sp == std::string_view::npos)
            throw FormatError(path + " line " + std::to_string(line_no) +
                              ": expected 'key value'");
        const std::string key(trim(s.substr(0, sp)));
        const std::string value(trim(s.substr(sp + 1)));
        const std::string where = path + " line " + std::to_string(line_no);
        if (key == "cost_hata.a1") p.cost_hata.a1 = parse_double(value, where);
        else if (key == "cost_hata.a2") p.cost_hata.a2 = parse_double(value, where);
        else if (key == "cost_hata.a3") p.cost_hata.a3 = parse_double(value, where);
        else if (key == "cost_hata.b1") p.cost_hata.b1 = parse_double(value, where);
        else if (key == "cost_hata.b2") p.cost_hata.b2 = parse_double(value, where);
        else if (key == "cost_hata.b3") p.cost_hata.b3 = parse_double(value, where);
        else if (key == "cost_hata.area") {
            if (value == "urban") p.cost_hata.area = HataArea::Urban;
            else if (value == "suburban") p.cost_hata.area = HataArea::Suburban;
            else if (value == "quasi_open_rural") p.cost_hata.area = HataArea::QuasiOpenRural;
            else if (value == "open_rural") p.cost_hata.area = HataArea::OpenRural;
            else throw ConfigError(where + ": unknown area '" + value + "'");
        } else if (key == "cost_hata.correction") {
            if (value == "small_city") p.cost_hata.correction = HataCorrection::SmallCity;
            else if (value == "open_rural") p.cost_hata.correction = HataCorrection::OpenRural;
            else throw ConfigError(where + ": unknown correction '" + value + "'");
        } else if (key == "sui.intercept") p.sui.intercept = parse_double(value, where);
        else if (key == "sui.a") p.sui.a = parse_double(value, where);
        else if (key == "sui.b") p.sui.b = parse_double(value, where);
        else if (key == "sui.c") p.sui.c = parse_double(value, where);
        else if (key == "sui.x") p.sui.x = parse_double(value, where);
        else if (key == "spm.k1") p.spm.k1 = parse_double(value, where);
        else if (key == "spm.k2") p.spm.k2 = parse_double(value, where);
        else if (key == "spm.k3") p.spm.k3 = parse_double(value, where);
        else if (key == "spm.k4") p.spm.k4 = parse_double(value, where);
        else if (key == "spm.k5") p.spm.k5 = parse_double(value, where);
        else if (key == "spm.k6") p.spm.k6 = parse_double(value, where);
        else if (key == "spm.k7") p.spm.k7 = parse_double(value, where);
        else if (key == "spm.k_clutter") p.spm.k_clutter = parse_double(value, where);
        else if (key == "spm.clutter_loss") {
            p.spm.clutter_loss.clear();
            for (auto f : split_csv_line(value))
                p.spm.clutter_loss.push_back(parse_double(f, where));
        } else if (key == "itu452.l_a") { itu.l_a = parse_double(value, where); itu_seen = true; }
        else if (key == "itu452.l_b") { itu.l_b = parse_double(value, where); itu_seen = true; }
        else if (key == "itu452.l_c") { itu.l_c = parse_double(value, where); itu_seen = true; }
        else if (key == "itu452.l_d") { itu.l_d = parse_double(value, where); itu_seen = true; }
        else if (key == "itu452.a_bs") { itu.a_bs = parse_double(value, where); itu_seen = true; }
        else if (key == "itu452.a_ue") { itu.a_ue = parse_double(value, where); itu_seen = true; }
        else if (key == "itu452.theta_mrad") {
            itu.theta_mrad = parse_double(value, where);
            itu_seen = true;
        } else
            throw ConfigError(where + ": unknown parameter '" + key + "'");
    }
    if (itu_seen) p.itu452 = itu;
    return p;
}

} // namespace rsspred
