#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/network.hpp"
#include "rsspred/profile.hpp"
#include "rsspred/raster.hpp"

namespace rsspred {

// Geometric separations between a sector antenna and a point.
struct AngularSeparations {
    double d = 0.0;         // horizontal distance, meters
    double theta_hor = 0.0; // |azimuth - bearing| wrapped into [0, 180]
    double phi_ver = 0.0;   // arrival tilt minus BS downtilt, degrees
    double d_vert = 0.0;    // z_bs - z_ue, meters
    double d_man = 0.0;     // |dx| + |dy|, meters
};

inline double wrap_angle_180(double deg) {
    double w = std::fmod(std::fabs(deg), 360.0);
    if (w > 180.0) w = 360.0 - w;
    return w;
}

// z_ue and z_bs are the raster heights (ground + building) of the two
// cells; the BS antenna height is deliberately not part of z_bs here,
// matching the convention used to build the training features.
inline AngularSeparations angular_separations(const SiteTopology& site, double x_ue, double y_ue,
                                              double z_ue, double z_bs) {
    const double dx = x_ue - site.x;
    const double dy = y_ue - site.y;
    AngularSeparations a;
    a.d = std::hypot(dx, dy);
    if (!(a.d > 0.0)) throw DomainError("degenerate geometry: BS and UE are co-located");

    // Compass bearing BS->UE: atan2(east offset, north offset), 0 = North.
    double bearing = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
    if (bearing < 0.0) bearing += 360.0;
    a.theta_hor = wrap_angle_180(site.azimuth_deg - bearing);

    const double phi_ue = std::atan((z_ue - z_bs) / a.d) * 180.0 / std::numbers::pi;
    a.phi_ver = phi_ue - site.tilt_deg;
    a.d_vert = z_bs - z_ue;
    a.d_man = std::fabs(dx) + std::fabs(dy);
    return a;
}

// The full per-link predictor set: five separations, link state, diffraction
// extent, penetrations and per-clutter distance decomposition.
struct FeatureVector {
    AngularSeparations sep;
    bool los = true;
    double d_fd = -1.0; // -1 sentinel when LoS
    double d_ld = -1.0;
    int n_penetrations = 0;
    double d_indoor = 0.0;
    double d_outdoor = 0.0;
    int clutter_bs = 0;
    int clutter_ue = 0;
    std::vector<int> n_penetrations_c;
    std::vector<double> d_indoor_c;
    std::vector<double> d_outdoor_c;
};

inline constexpr std::size_t kScalarFeatureCount = 13;

inline std::vector<std::string> feature_names(int clutter_count) {
    std::vector<std::string> names = {"d",    "theta_hor", "phi_ver",   "d_vert", "d_man",
                                      "los",  "d_fd",      "d_ld",      "n_pen",  "d_indoor",
                                      "d_outdoor", "c_bs",      "c_ue"};
    for (int c = 0; c < clutter_count; ++c) names.push_back("n_pen_c" + std::to_string(c));
    for (int c = 0; c < clutter_count; ++c) names.push_back("d_in_c" + std::to_string(c));
    for (int c = 0; c < clutter_count; ++c) names.push_back("d_out_c" + std::to_string(c));
    return names;
}

// Feature rows plus regression target, with the bin key kept alongside so
// exports stay joinable. Values are stored row-major.
struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<uint8_t> categorical; // 1 where the column is a class code
    std::size_t n_rows = 0;
    std::vector<double> values; // n_rows * names.size()
    std::vector<double> target; // rss, dBm
    std::vector<long long> bin_ix;
    std::vector<long long> bin_iy;
    std::vector<std::string> cell_id;

    std::size_t width() const { return names.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * width() + c]; }
    const double* row(std::size_t r) const { return values.data() + r * width(); }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw ReferenceError("unknown feature '" + name + "'");
    }
};

inline std::vector<uint8_t> categorical_mask(const std::vector<std::string>& names) {
    std::vector<uint8_t> mask(names.size(), 0);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == "los" || names[i] == "c_bs" || names[i] == "c_ue") mask[i] = 1;
    return mask;
}

inline FeatureVector assemble_features(const GeoStack& geo, const SiteTopology& site, double x_ue,
                                       double y_ue) {
    const double z_ue = geo.ground(x_ue, y_ue) + geo.building(x_ue, y_ue);
    const double z_bs = geo.ground(site.x, site.y) + geo.building(site.x, site.y);
    FeatureVector f;
    f.sep = angular_separations(site, x_ue, y_ue, z_ue, z_bs);

    const auto profile = extract_profile(geo, site, x_ue, y_ue);
    const auto s = summarize_profile(profile, geo);
    f.los = s.los;
    f.d_fd = s.los ? -1.0 : s.d_fd;
    f.d_ld = s.los ? -1.0 : s.d_ld;
    f.n_penetrations = s.n_penetrations;
    f.d_indoor = s.d_indoor;
    f.d_outdoor = s.d_outdoor;
    f.clutter_bs = s.clutter_bs;
    f.clutter_ue = s.clutter_ue;
    f.n_penetrations_c = s.n_penetrations_c;
    f.d_indoor_c = s.d_indoor_c;
    f.d_outdoor_c = s.d_outdoor_c;
    return f;
}

inline void append_feature_row(std::vector<double>& out, const FeatureVector& f) {
    out.push_back(f.sep.d);
    out.push_back(f.sep.theta_hor);
    out.push_back(f.sep.phi_ver);
    out.push_back(f.sep.d_vert);
    out.push_back(f.sep.d_man);
    out.push_back(f.los ? 1.0 : 0.0);
    out.push_back(f.d_fd);
    out.push_back(f.d_ld);
    out.push_back(static_cast<double>(f.n_penetrations));
    out.push_back(f.d_indoor);
    out.push_back(f.d_outdoor);
    out.push_back(static_cast<double>(f.clutter_bs));
    out.push_back(static_cast<double>(f.clutter_ue));
    for (int v : f.n_penetrations_c) out.push_back(static_cast<double>(v));
    for (double v : f.d_indoor_c) out.push_back(v);
    for (double v : f.d_outdoor_c) out.push_back(v);
}

// One row per binned measurement, evaluated at the bin center, in
// (bin_ix, bin_iy, cell_id) order so repeated builds are byte-identical.
inline FeatureMatrix build_feature_matrix(const GeoStack& geo,
                                          const std::vector<SiteTopology>& sites,
                                          std::vector<BinnedMeasurement> binned) {
    std::sort(binned.begin(), binned.end(), [](const BinnedMeasurement& a,
                                               const BinnedMeasurement& b) {
        return std::tie(a.bin_ix, a.bin_iy, a.cell_id) < std::tie(b.bin_ix, b.bin_iy, b.cell_id);
    });

    FeatureMatrix m;
    m.names = feature_names(geo.clutter_count);
    m.categorical = categorical_mask(m.names);
    m.values.reserve(binned.size() * m.names.size());
    for (const auto& b : binned) {
        const auto& site = find_site(sites, b.cell_id);
        const auto f = assemble_features(geo, site, b.center_x(), b.center_y());
        append_feature_row(m.values, f);
        m.target.push_back(b.mean_rss);
        m.bin_ix.push_back(b.bin_ix);
        m.bin_iy.push_back(b.bin_iy);
        m.cell_id.push_back(b.cell_id);
        m.n_rows += 1;
    }
    return m;
}

inline FeatureMatrix subset_rows(const FeatureMatrix& m, const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.names = m.names;
    out.categorical = m.categorical;
    out.values.reserve(rows.size() * m.width());
    for (std::size_t r : rows) {
        const double* src = m.row(r);
        out.values.insert(out.values.end(), src, src + m.width());
        out.target.push_back(m.target[r]);
        out.bin_ix.push_back(m.bin_ix[r]);
        out.bin_iy.push_back(m.bin_iy[r]);
        out.cell_id.push_back(m.cell_id[r]);
    }
    out.n_rows = rows.size();
    return out;
}

inline FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::size_t>& cols) {
    FeatureMatrix out;
    for (std::size_t c : cols) {
        if (c >= m.width()) throw ReferenceError("column index out of range");
        out.names.push_back(m.names[c]);
        out.categorical.push_back(m.categorical[c]);
    }
    out.values.reserve(m.n_rows * cols.size());
    for (std::size_t r = 0; r < m.n_rows; ++r)
        for (std::size_t c : cols) out.values.push_back(m.at(r, c));
    out.target = m.target;
    out.bin_ix = m.bin_ix;
    out.bin_iy = m.bin_iy;
    out.cell_id = m.cell_id;
    out.n_rows = m.n_rows;
    return out;
}

inline void write_feature_csv(const FeatureMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open features file for writing: " + path);
    out << "bin_ix,bin_iy,cell_id,rss_dbm";
    for (const auto& n : m.names) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        out << m.bin_ix[r] << ',' << m.bin_iy[r] << ',' << m.cell_id[r] << ','
            << format_double(m.target[r]);
        for (std::size_t c = 0; c < m.width(); ++c) out << ',' << format_double(m.at(r, c));
        out << '\n';
    }
    if (!out) throw IoError("failed writing features file: " + path);
}

inline FeatureMatrix read_feature_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    if (t.header.size() < 4 || t.header[0] != "bin_ix" || t.header[1] != "bin_iy" ||
        t.header[2] != "cell_id" || t.header[3] != "rss_dbm")
        throw SchemaError(path + ": expected header starting bin_ix,bin_iy,cell_id,rss_dbm");
    FeatureMatrix m;
    m.names.assign(t.header.begin() + 4, t.header.end());
    m.categorical = categorical_mask(m.names);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + " row " + std::to_string(r + 2);
        m.bin_ix.push_back(parse_int(row[0], where));
        m.bin_iy.push_back(parse_int(row[1], where));
        m.cell_id.push_back(row[2]);
        m.target.push_back(parse_double(row[3], where));
        for (std::size_t c = 4; c < row.size(); ++c)
            m.values.push_back(parse_double(row[c], where));
        m.n_rows += 1;
    }
    return m;
}

} // namespace rsspred
