#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/strconv.hpp"

namespace rsspred {

// Georeferenced single-band raster, row-major with row 0 the northernmost
// row (ESRI ASCII grid convention). Immutable after load by convention;
// nothing here mutates a grid once it is built.
struct RasterGrid {
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double xll = 0.0;      // lower-left corner easting, meters
    double yll = 0.0;      // lower-left corner northing, meters
    double cellsize = 1.0; // meters
    double nodata = -9999.0;
    std::vector<double> values; // row-major, nrows * ncols

    double& at(std::size_t row, std::size_t col) { return values[row * ncols + col]; }
    double at(std::size_t row, std::size_t col) const { return values[row * ncols + col]; }

    double width() const { return static_cast<double>(ncols) * cellsize; }
    double height() const { return static_cast<double>(nrows) * cellsize; }

    bool in_bounds(double x, double y) const {
        return x >= xll && y >= yll && x < xll + width() && y < yll + height();
    }

    std::size_t col_of(double x) const {
        return static_cast<std::size_t>(std::floor((x - xll) / cellsize));
    }

    // Row index from the top: yll is the bottom edge, row 0 the north edge.
    std::size_t row_of(double y) const {
        const auto from_bottom = static_cast<std::size_t>(std::floor((y - yll) / cellsize));
        return nrows - 1 - from_bottom;
    }

    // Nearest-cell sample. Out of bounds throws; a nodata cell reads as
    // "no value" rather than the sentinel number.
    std::optional<double> value_at(double x, double y) const {
        if (!in_bounds(x, y))
            throw BoundsError("coordinate (" + format_double(x) + ", " + format_double(y) +
                              ") outside raster bounds");
        const double v = at(row_of(y), col_of(x));
        if (v == nodata) return std::nullopt;
        return v;
    }

    // Convenience for stacks where nodata should degrade to a neutral value.
    double value_or(double x, double y, double fallback) const {
        return value_at(x, y).value_or(fallback);
    }

    void validate() const {
        if (ncols < 1 || nrows < 1)
            throw FormatError("raster must have at least one row and column");
        if (!(cellsize > 0.0)) throw FormatError("raster cellsize must be > 0");
        if (values.size() != ncols * nrows)
            throw FormatError("raster value count " + std::to_string(values.size()) +
                              " does not match ncols*nrows " + std::to_string(ncols * nrows));
    }

    bool same_shape(const RasterGrid& o) const {
        return ncols == o.ncols && nrows == o.nrows && xll == o.xll && yll == o.yll &&
               cellsize == o.cellsize;
    }
};

// ESRI ASCII grid reader. Header keys are case-insensitive; NODATA_value is
// optional (defaults to -9999) since many producers omit it.
inline RasterGrid load_raster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open raster file: " + path);

    RasterGrid g;
    bool have_ncols = false, have_nrows = false, have_xll = false, have_yll = false,
         have_cell = false;

    std::string line;
    std::streampos data_start = in.tellg();
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key >> value)) break; // blank line before data
        const std::string k = lower_copy(key);
        if (k == "ncols") {
            g.ncols = static_cast<std::size_t>(parse_int(value, "ncols header"));
            have_ncols = true;
        } else if (k == "nrows") {
            g.nrows = static_cast<std::size_t>(parse_int(value, "nrows header"));
            have_nrows = true;
        } else if (k == "xllcorner") {
            g.xll = parse_double(value, "xllcorner header");
            have_xll = true;
        } else if (k == "yllcorner") {
            g.yll = parse_double(value, "yllcorner header");
            have_yll = true;
        } else if (k == "cellsize") {
            g.cellsize = parse_double(value, "cellsize header");
            have_cell = true;
        } else if (k == "nodata_value") {
            g.nodata = parse_double(value, "NODATA_value header");
        } else {
            break; // first data row reached
        }
        data_start = in.tellg();
    }

    if (!have_ncols) throw FormatError(path + ": missing header key 'ncols'");
    if (!have_nrows) throw FormatError(path + ": missing header key 'nrows'");
    if (!have_xll) throw FormatError(path + ": missing header key 'xllcorner'");
    if (!have_yll) throw FormatError(path + ": missing header key 'yllcorner'");
    if (!have_cell) throw FormatError(path + ": missing header key 'cellsize'");

    in.clear();
    in.seekg(data_start);

    const std::size_t expected = g.ncols * g.nrows;
    g.values.reserve(expected);
    std::string tok;
    while (in >> tok) {
        if (g.values.size() == expected)
            throw FormatError(path + ": more than the expected " + std::to_string(expected) +
                              " values");
        g.values.push_back(parse_double(tok, "raster data in " + path));
    }
    if (g.values.size() != expected)
        throw FormatError(path + ": truncated data, expected " + std::to_string(expected) +
                          " values, got " + std::to_string(g.values.size()));
    g.validate();
    return g;
}

inline void write_raster(const RasterGrid& g, const std::string& path) {
    g.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open raster file for writing: " + path);
    out << "ncols " << g.ncols << "\n";
    out << "nrows " << g.nrows << "\n";
    out << "xllcorner " << format_double(g.xll) << "\n";
    out << "yllcorner " << format_double(g.yll) << "\n";
    out << "cellsize " << format_double(g.cellsize) << "\n";
    out << "NODATA_value " << format_double(g.nodata) << "\n";
    for (std::size_t r = 0; r < g.nrows; ++r) {
        for (std::size_t c = 0; c < g.ncols; ++c) {
            if (c) out << ' ';
            out << format_double(g.at(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing raster file: " + path);
}

// Aligned DTM + DHM + DLU stack describing one propagation environment.
// clutter_count is the number of distinct land-use classes C; DLU cells
// hold integers in [0, C).
struct GeoStack {
    RasterGrid dtm; // ground elevation, meters
    RasterGrid dhm; // building height above ground, meters
    RasterGrid dlu; // land-use class id
    int clutter_count = 0;

    void validate() const {
        dtm.validate();
        dhm.validate();
        dlu.validate();
        if (!dtm.same_shape(dhm) || !dtm.same_shape(dlu))
            throw FormatError("DTM/DHM/DLU rasters do not share shape and georeference");
        if (clutter_count < 1) throw FormatError("clutter_count must be >= 1");
        for (double v : dhm.values)
            if (v != dhm.nodata && v < 0.0)
                throw FormatError("DHM contains a negative building height");
        for (double v : dlu.values) {
            if (v == dlu.nodata) continue;
            if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(clutter_count))
                throw FormatError("DLU value " + format_double(v) +
                                  " is not an integer in [0, clutter_count)");
        }
    }

    bool in_bounds(double x, double y) const { return dtm.in_bounds(x, y); }

    // Terrain sampling treats nodata as flat/open ground.
    double ground(double x, double y) const { return dtm.value_or(x, y, 0.0); }
    double building(double x, double y) const { return dhm.value_or(x, y, 0.0); }
    int clutter(double x, double y) const { return static_cast<int>(dlu.value_or(x, y, 0.0)); }
};

inline GeoStack make_geo_stack(RasterGrid dtm, RasterGrid dhm, RasterGrid dlu,
                               int clutter_count = 0) {
    GeoStack g{std::move(dtm), std::move(dhm), std::move(dlu), clutter_count};
    if (clutter_count <= 0) {
        double max_class = 0.0;
        for (double v : g.dlu.values)
            if (v != g.dlu.nodata && v > max_class) max_class = v;
        g.clutter_count = static_cast<int>(max_class) + 1;
    }
    g.validate();
    return g;
}

inline GeoStack load_geo_stack(const std::string& dir, int clutter_count = 0) {
    return make_geo_stack(load_raster(dir + "/dtm.asc"), load_raster(dir + "/dhm.asc"),
                          load_raster(dir + "/dlu.asc"), clutter_count);
}

} // namespace rsspred
