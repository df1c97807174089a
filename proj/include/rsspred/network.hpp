#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/strconv.hpp"

namespace rsspred {

// One BS sector: position, antenna pointing and radio parameters.
struct SiteTopology {
    std::string cell_id;
    double x = 0.0;             // meters, raster frame
    double y = 0.0;             // meters, raster frame
    double h_bs = 0.0;          // antenna height above ground + building, meters
    double azimuth_deg = 0.0;   // [0, 360), clockwise from North
    double tilt_deg = 0.0;      // positive below horizontal
    double tx_power_dbm = 43.0;
    double freq_mhz = 2110.0;
    std::string antenna = "default";

    void validate() const {
        if (!(h_bs > 0.0)) throw ParseError("site " + cell_id + ": h_bs must be > 0");
        if (!(freq_mhz > 0.0)) throw ParseError("site " + cell_id + ": freq_mhz must be > 0");
        if (azimuth_deg < 0.0 || azimuth_deg >= 360.0)
            throw ParseError("site " + cell_id + ": azimuth_deg must be in [0, 360)");
    }
};

// One raw UE measurement row. rss_dbm is missing for out-of-coverage rows.
struct UeTrace {
    double timestamp = 0.0;
    double x = 0.0;
    double y = 0.0;
    std::string cell_id;
    std::optional<double> rss_dbm;
    double h_ue = 1.5; // receiver height, meters
};

// Gridded average of all traces sharing (bin_ix, bin_iy, cell_id).
struct BinnedMeasurement {
    long long bin_ix = 0;
    long long bin_iy = 0;
    double bin_width = 10.0;
    std::string cell_id;
    double mean_rss = 0.0; // dBm
    std::size_t count = 0;

    double center_x() const { return (static_cast<double>(bin_ix) + 0.5) * bin_width; }
    double center_y() const { return (static_cast<double>(bin_iy) + 0.5) * bin_width; }
};

namespace detail {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name, const std::string& path) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw SchemaError(path + ": missing column '" + name + "'");
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path + ": empty file, expected a header row");
    for (auto f : split_csv_line(line)) t.header.emplace_back(f);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != t.header.size())
            throw ParseError(path + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(t.header.size()));
        std::vector<std::string> row;
        row.reserve(fields.size());
        for (auto f : fields) row.emplace_back(f);
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace detail

// Sites CSV: cell_id,x,y,h_bs,azimuth_deg,tilt_deg,tx_power_dbm,freq_mhz,antenna
inline std::vector<SiteTopology> parse_sites(const std::string& path) {
    const auto t = detail::read_csv(path);
    const auto c_id = t.column("cell_id", path);
    const auto c_x = t.column("x", path);
    const auto c_y = t.column("y", path);
    const auto c_h = t.column("h_bs", path);
    const auto c_az = t.column("azimuth_deg", path);
    const auto c_tilt = t.column("tilt_deg", path);
    const auto c_pw = t.column("tx_power_dbm", path);
    const auto c_f = t.column("freq_mhz", path);
    const auto c_ant = t.column("antenna", path);

    std::vector<SiteTopology> sites;
    sites.reserve(t.rows.size());
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + " row " + std::to_string(r + 2);
        SiteTopology s;
        s.cell_id = row[c_id];
        s.x = parse_double(row[c_x], where);
        s.y = parse_double(row[c_y], where);
        s.h_bs = parse_double(row[c_h], where);
        s.azimuth_deg = parse_double(row[c_az], where);
        s.tilt_deg = parse_double(row[c_tilt], where);
        s.tx_power_dbm = parse_double(row[c_pw], where);
        s.freq_mhz = parse_double(row[c_f], where);
        s.antenna = row[c_ant];
        s.validate();
        if (!seen.insert(s.cell_id).second)
            throw ParseError(path + ": duplicate cell_id '" + s.cell_id + "'");
        sites.push_back(std::move(s));
    }
    return sites;
}

inline void write_sites(const std::vector<SiteTopology>& sites, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open sites file for writing: " + path);
    out << "cell_id,x,y,h_bs,azimuth_deg,tilt_deg,tx_power_dbm,freq_mhz,antenna\n";
    for (const auto& s : sites) {
        out << s.cell_id << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
            << format_double(s.h_bs) << ',' << format_double(s.azimuth_deg) << ','
            << format_double(s.tilt_deg) << ',' << format_double(s.tx_power_dbm) << ','
            << format_double(s.freq_mhz) << ',' << s.antenna << '\n';
    }
}

// Traces CSV: timestamp,x,y,cell_id,rss_dbm with an empty rss field meaning
// the measurement is missing (kept so that clean_traces can drop it).
inline std::vector<UeTrace> parse_traces(const std::string& path) {
    const auto t = detail::read_csv(path);
    const auto c_ts = t.column("timestamp", path);
    const auto c_x = t.column("x", path);
    const auto c_y = t.column("y", path);
    const auto c_id = t.column("cell_id", path);
    const auto c_rss = t.column("rss_dbm", path);

    std::vector<UeTrace> traces;
    traces.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + " row " + std::to_string(r + 2);
        UeTrace u;
        u.timestamp = parse_double(row[c_ts], where);
        u.x = parse_double(row[c_x], where);
        u.y = parse_double(row[c_y], where);
        u.cell_id = row[c_id];
        if (!row[c_rss].empty()) u.rss_dbm = parse_double(row[c_rss], where);
        traces.push_back(std::move(u));
    }
    return traces;
}

inline void write_traces(const std::vector<UeTrace>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open traces file for writing: " + path);
    out << "timestamp,x,y,cell_id,rss_dbm\n";
    for (const auto& u : traces) {
        out << format_double(u.timestamp) << ',' << format_double(u.x) << ','
            << format_double(u.y) << ',' << u.cell_id << ',';
        if (u.rss_dbm) out << format_double(*u.rss_dbm);
        out << '\n';
    }
}

// Drops rows with missing/non-finite rss, non-finite coordinates, or a
// serving cell that is not in the site list. Order preserved; never fails.
inline std::vector<UeTrace> clean_traces(const std::vector<UeTrace>& traces,
                                         const std::vector<SiteTopology>& sites) {
    std::unordered_set<std::string> known;
    for (const auto& s : sites) known.insert(s.cell_id);
    std::vector<UeTrace> out;
    out.reserve(traces.size());
    for (const auto& u : traces) {
        if (!u.rss_dbm || !std::isfinite(*u.rss_dbm)) continue;
        if (!std::isfinite(u.x) || !std::isfinite(u.y)) continue;
        if (!known.count(u.cell_id)) continue;
        out.push_back(u);
    }
    return out;
}

// Spatial binning: one output record per unique (bin_ix, bin_iy, cell_id),
// sorted by that key. Averaging happens in the dBm (log) domain by default;
// average_in_milliwatt switches to linear-power averaging for sensitivity
// studies.
inline std::vector<BinnedMeasurement> grid_traces(const std::vector<UeTrace>& traces,
                                                  double bin_width = 10.0,
                                                  bool average_in_milliwatt = false) {
    if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
    struct Acc {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::map<std::tuple<long long, long long, std::string>, Acc> bins;
    for (const auto& u : traces) {
        if (!u.rss_dbm) continue;
        const auto ix = static_cast<long long>(std::floor(u.x / bin_width));
        const auto iy = static_cast<long long>(std::floor(u.y / bin_width));
        auto& acc = bins[{ix, iy, u.cell_id}];
        acc.sum += average_in_milliwatt ? std::pow(10.0, *u.rss_dbm / 10.0) : *u.rss_dbm;
        acc.count += 1;
    }
    std::vector<BinnedMeasurement> out;
    out.reserve(bins.size());
    for (const auto& [key, acc] : bins) {
        BinnedMeasurement b;
        b.bin_ix = std::get<0>(key);
        b.bin_iy = std::get<1>(key);
        b.bin_width = bin_width;
        b.cell_id = std::get<2>(key);
        const double mean = acc.sum / static_cast<double>(acc.count);
        b.mean_rss = average_in_milliwatt ? 10.0 * std::log10(mean) : mean;
        b.count = acc.count;
        out.push_back(std::move(b));
    }
    return out;
}

inline const SiteTopology& find_site(const std::vector<SiteTopology>& sites,
                                     const std::string& cell_id) {
    for (const auto& s : sites)
        if (s.cell_id == cell_id) return s;
    throw ReferenceError("unknown cell_id '" + cell_id + "'");
}

} // namespace rsspred
