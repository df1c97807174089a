#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsspred/empirical.hpp"
#include "rsspred/errors.hpp"
#include "rsspred/eval.hpp"
#include "rsspred/explain.hpp"
#include "rsspred/features.hpp"
#include "rsspred/gbdt.hpp"
#include "rsspred/network.hpp"
#include "rsspred/raster.hpp"
#include "rsspred/scenario.hpp"

namespace rsspred {

inline constexpr const char* kToolVersion = "rsspred 0.1.0";

// Plain-text audit record, one per CLI run. Wall-clock timing makes this
// the only non-reproducible artifact of a seeded run.
struct RunManifest {
    std::string command;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open manifest for writing: " + path);
        out << "command: " << command << '\n';
        out << "version: " << kToolVersion << '\n';
        if (seed) out << "seed: " << *seed << '\n';
        if (!config.empty()) out << "config: " << config << '\n';
        for (const auto& p : inputs) out << "input: " << p << '\n';
        for (const auto& p : outputs) out << "output: " << p << '\n';
        out << "wall_seconds: " << format_double(wall_seconds) << '\n';
    }
};

// 8-bit ASCII PGM, north row first; dBm values mapped linearly from
// [min_dbm, max_dbm] and clamped.
inline void write_pgm(const std::vector<double>& rss, std::size_t nx, std::size_t ny,
                      double min_dbm, double max_dbm, const std::string& path) {
    if (rss.size() != nx * ny) throw DataError("pgm value count does not match grid size");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open PGM file for writing: " + path);
    out << "P2\n" << nx << ' ' << ny << "\n255\n";
    for (std::size_t row = 0; row < ny; ++row) {
        const std::size_t iy = ny - 1 - row; // north first
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double v = rss[iy * nx + ix];
            int pixel = static_cast<int>(std::lround(255.0 * (v - min_dbm) / (max_dbm - min_dbm)));
            pixel = std::clamp(pixel, 0, 255);
            if (ix) out << ' ';
            out << pixel;
        }
        out << '\n';
    }
}

namespace cli_detail {

struct PointsFile {
    std::vector<PredictPoint> points;
};

inline PointsFile read_points(const std::string& path) {
    const auto t = detail::read_csv(path);
    const auto c_x = t.column("x", path);
    const auto c_y = t.column("y", path);
    const auto c_id = t.column("cell_id", path);
    PointsFile f;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = path + " row " + std::to_string(r + 2);
        PredictPoint p;
        p.x = parse_double(t.rows[r][c_x], where);
        p.y = parse_double(t.rows[r][c_y], where);
        p.cell_id = t.rows[r][c_id];
        f.points.push_back(std::move(p));
    }
    return f;
}

inline void write_cv_report_csv(const CvReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report for writing: " + path);
    out << "fold,rmse,r2,train_s,predict_s\n";
    for (std::size_t i = 0; i < rep.folds.size(); ++i)
        out << i << ',' << format_double(rep.folds[i].rmse) << ','
            << format_double(rep.folds[i].r2) << ',' << format_double(rep.train_seconds[i])
            << ',' << format_double(rep.predict_seconds[i]) << '\n';
    out << "mean," << format_double(rep.mean_rmse) << ',' << format_double(rep.mean_r2) << ','
        << format_double(rep.mean_train_seconds()) << ','
        << format_double(rep.mean_predict_seconds()) << '\n';
    out << "std," << format_double(rep.std_rmse) << ',' << format_double(rep.std_r2) << ",,\n";
}

inline GbdtConfig parse_inline_config(const std::string& text) {
    GbdtConfig cfg;
    if (text.empty()) return cfg;
    for (auto part : split_csv_line(text)) {
        const auto eq = part.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config entries must be key=value, got '" + std::string(part) + "'");
        const std::string key(trim(part.substr(0, eq)));
        const std::string value(trim(part.substr(eq + 1)));
        if (key == "n_estimators") cfg.n_estimators = static_cast<int>(parse_int(value, key));
        else if (key == "max_depth") cfg.max_depth = static_cast<int>(parse_int(value, key));
        else if (key == "learning_rate") cfg.learning_rate = parse_double(value, key);
        else if (key == "min_samples_leaf")
            cfg.min_samples_leaf = static_cast<int>(parse_int(value, key));
        else if (key == "n_bins") cfg.n_bins = static_cast<int>(parse_int(value, key));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "goss") {
            const auto colon = value.find(':');
            if (colon == std::string::npos)
                throw ConfigError("goss value must be top:rand, got '" + value + "'");
            cfg.goss = GossConfig{parse_double(value.substr(0, colon), key),
                                  parse_double(value.substr(colon + 1), key)};
        } else
            throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

} // namespace cli_detail

inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"ML-based large-scale 3D pathloss / RSS prediction toolkit", "rsspred"};
    app.require_subcommand(1);

    const auto t_start = std::chrono::steady_clock::now();
    auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    // ---- gen ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate a seeded synthetic scenario");
    std::uint64_t gen_seed = 0;
    ScenarioConfig gen_cfg;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "Scenario seed");
    gen->add_option("--area", gen_cfg.area_m, "Square area side, meters");
    gen->add_option("--cellsize", gen_cfg.cellsize_m, "Raster cell size, meters");
    gen->add_option("--sites", gen_cfg.n_sites, "Number of sites (3 sectors each)");
    gen->add_option("--ue-density", gen_cfg.ue_density_per_m2, "UE intensity per m^2");
    gen->add_option("--clutters", gen_cfg.clutter_count, "Number of land-use classes");
    gen->add_option("--block", gen_cfg.block_m, "Building block pitch, meters");
    gen->add_option("--street", gen_cfg.street_m, "Street width, meters");
    gen->add_option("--noise-sigma", gen_cfg.noise_sigma_db, "Measurement noise sigma, dB");
    gen->add_option("--shadow-sigma", gen_cfg.oracle.shadow_sigma_db, "Shadowing sigma, dB");
    gen->add_option("--missing-fraction", gen_cfg.missing_fraction,
                    "Fraction of traces emitted without rss");
    gen->add_option("--out", gen_out, "Output directory")->required();

    // ---- features -----------------------------------------------------
    auto* feat = app.add_subcommand("features", "Extract the feature matrix from a scenario");
    std::string feat_geo, feat_sites, feat_traces, feat_out;
    double feat_bin_width = 10.0;
    bool feat_mw = false;
    int feat_clutters = 0;
    feat->add_option("--geo", feat_geo, "Geodata directory (dtm/dhm/dlu.asc)")->required();
    feat->add_option("--clutters", feat_clutters,
                     "Clutter class count (default: highest DLU class + 1)");
    feat->add_option("--sites", feat_sites, "Sites CSV")->required();
    feat->add_option("--traces", feat_traces, "Traces CSV")->required();
    feat->add_option("--bin-width", feat_bin_width, "Gridding bin width, meters");
    feat->add_flag("--mw-average", feat_mw, "Average rss in milliwatt domain instead of dBm");
    feat->add_option("--out", feat_out, "Output features CSV")->required();

    // ---- train --------------------------------------------------------
    auto* train = app.add_subcommand("train", "Fit the boosted model and cross-validate");
    std::string train_features, train_model_out, train_report;
    GbdtConfig train_cfg;
    std::string train_goss;
    int train_cv_k = 5, train_cv_repeats = 1;
    std::uint64_t train_seed = 0;
    train->add_option("--features", train_features, "Features CSV")->required();
    train->add_option("--n-estimators", train_cfg.n_estimators, "Boosting iterations");
    train->add_option("--max-depth", train_cfg.max_depth, "Maximum tree depth");
    train->add_option("--learning-rate", train_cfg.learning_rate, "Shrinkage");
    train->add_option("--min-samples-leaf", train_cfg.min_samples_leaf, "Minimum rows per leaf");
    train->add_option("--n-bins", train_cfg.n_bins, "Histogram bins per feature");
    train->add_option("--goss", train_goss, "GOSS fractions as top:rand, e.g. 0.2:0.1");
    train->add_option("--seed", train_seed, "Seed for fit and CV folds");
    train->add_option("--cv-k", train_cv_k, "CV folds");
    train->add_option("--cv-repeats", train_cv_repeats, "CV repeats");
    train->add_option("--out-model", train_model_out, "Output model JSON")->required();
    train->add_option("--report", train_report, "Output CV report CSV");

    // ---- tune ---------------------------------------------------------
    auto* tune_cmd = app.add_subcommand("tune", "Hyperparameter search");
    std::string tune_features, tune_strategy = "tpe", tune_report;
    int tune_budget = 10;
    std::uint64_t tune_seed = 0;
    SearchSpace tune_space;
    tune_cmd->add_option("--features", tune_features, "Features CSV")->required();
    tune_cmd->add_option("--strategy", tune_strategy, "grid | random | tpe | anneal");
    tune_cmd->add_option("--budget", tune_budget, "Maximum evaluations");
    tune_cmd->add_option("--seed", tune_seed, "Search and CV fold seed");
    tune_cmd->add_option("--n-estimators-lo", tune_space.n_estimators_lo, "Range low");
    tune_cmd->add_option("--n-estimators-hi", tune_space.n_estimators_hi, "Range high");
    tune_cmd->add_option("--max-depth-lo", tune_space.max_depth_lo, "Range low");
    tune_cmd->add_option("--max-depth-hi", tune_space.max_depth_hi, "Range high");
    tune_cmd->add_option("--learning-rate-lo", tune_space.learning_rate_lo, "Range low");
    tune_cmd->add_option("--learning-rate-hi", tune_space.learning_rate_hi, "Range high");
    tune_cmd->add_option("--lattice-points", tune_space.lattice_points,
                         "Lattice points per dimension (grid, anneal)");
    tune_cmd->add_option("--report", tune_report, "Output trials CSV")->required();

    // ---- predict ------------------------------------------------------
    auto* pred = app.add_subcommand("predict", "Predict RSS at points or over a bin lattice");
    std::string pred_model, pred_geo, pred_sites, pred_points, pred_csv, pred_pgm;
    bool pred_grid = false;
    double pred_bin_width = 10.0, pgm_min = -120.0, pgm_max = -40.0;
    pred->add_option("--model", pred_model, "Model JSON")->required();
    pred->add_option("--geo", pred_geo, "Geodata directory")->required();
    pred->add_option("--sites", pred_sites, "Sites CSV")->required();
    pred->add_option("--points", pred_points, "Points CSV (x,y,cell_id)");
    pred->add_flag("--grid", pred_grid, "Predict a coverage map over the bin lattice");
    pred->add_option("--bin-width", pred_bin_width, "Lattice bin width, meters");
    pred->add_option("--out-csv", pred_csv, "Output CSV")->required();
    pred->add_option("--out-pgm", pred_pgm, "Output PGM coverage map (grid mode)");
    pred->add_option("--pgm-min", pgm_min, "PGM window low, dBm");
    pred->add_option("--pgm-max", pgm_max, "PGM window high, dBm");

    // ---- empirical ----------------------------------------------------
    auto* emp = app.add_subcommand("empirical", "Predict RSS with an empirical baseline model");
    std::string emp_name, emp_params, emp_geo, emp_sites, emp_points, emp_out;
    emp->add_option("--model-name", emp_name, "cost-hata | sui | spm | itu452")->required();
    emp->add_option("--params", emp_params, "Model parameter file");
    emp->add_option("--geo", emp_geo, "Geodata directory")->required();
    emp->add_option("--sites", emp_sites, "Sites CSV")->required();
    emp->add_option("--points", emp_points, "Points CSV (x,y,cell_id)")->required();
    emp->add_option("--out", emp_out, "Output CSV")->required();

    // ---- compare ------------------------------------------------------
    auto* cmp = app.add_subcommand("compare",
                                   "Cross-validated model vs empirical baselines on one scenario");
    std::string cmp_geo, cmp_sites, cmp_traces, cmp_report, cmp_params;
    std::uint64_t cmp_seed = 0;
    double cmp_bin_width = 10.0;
    std::string cmp_config;
    cmp->add_option("--geo", cmp_geo, "Geodata directory")->required();
    cmp->add_option("--sites", cmp_sites, "Sites CSV")->required();
    cmp->add_option("--traces", cmp_traces, "Traces CSV")->required();
    cmp->add_option("--seed", cmp_seed, "CV fold seed");
    cmp->add_option("--bin-width", cmp_bin_width, "Gridding bin width, meters");
    cmp->add_option("--params", cmp_params, "Empirical model parameter file");
    cmp->add_option("--config", cmp_config, "Inline gbdt config, key=value pairs");
    cmp->add_option("--report", cmp_report, "Output CSV")->required();

    // ---- explain ------------------------------------------------------
    auto* expl = app.add_subcommand("explain", "SHAP attributions and the lighter-model study");
    std::string expl_model, expl_features, expl_outdir;
    int expl_topk = 5;
    std::uint64_t expl_seed = 0;
    std::vector<std::string> expl_dependence;
    expl->add_option("--model", expl_model, "Model JSON")->required();
    expl->add_option("--features", expl_features, "Features CSV")->required();
    expl->add_option("--top-k", expl_topk, "Features kept in the lighter model");
    expl->add_option("--seed", expl_seed, "CV fold seed for the lighter-model study");
    expl->add_option("--dependence", expl_dependence,
                     "Dependence export pair feature:interaction (repeatable)");
    expl->add_option("--out-dir", expl_outdir, "Output directory")->required();

    // ---- bench --------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Training / prediction timing table");
    std::string bench_features, bench_config, bench_report;
    std::uint64_t bench_seed = 0;
    bench->add_option("--features", bench_features, "Features CSV")->required();
    bench->add_option("--config", bench_config, "Inline gbdt config, key=value pairs");
    bench->add_option("--seed", bench_seed, "CV fold seed");
    bench->add_option("--report", bench_report, "Output CSV")->required();

    std::reverse(args.begin(), args.end()); // CLI11 parses in reverse order
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::flush;
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (gen->parsed()) {
            const auto data = generate_scenario(gen_cfg, gen_seed);
            std::filesystem::create_directories(gen_out);
            write_raster(data.geo.dtm, gen_out + "/dtm.asc");
            write_raster(data.geo.dhm, gen_out + "/dhm.asc");
            write_raster(data.geo.dlu, gen_out + "/dlu.asc");
            write_sites(data.sites, gen_out + "/sites.csv");
            write_traces(data.traces, gen_out + "/traces.csv");
            RunManifest man;
            man.command = "gen";
            man.seed = gen_seed;
            man.config = "area=" + format_double(gen_cfg.area_m) +
                         " cellsize=" + format_double(gen_cfg.cellsize_m) +
                         " sites=" + std::to_string(gen_cfg.n_sites) +
                         " ue_density=" + format_double(gen_cfg.ue_density_per_m2) +
                         " clutters=" + std::to_string(gen_cfg.clutter_count);
            man.outputs = {gen_out + "/dtm.asc", gen_out + "/dhm.asc", gen_out + "/dlu.asc",
                           gen_out + "/sites.csv", gen_out + "/traces.csv"};
            man.wall_seconds = wall();
            man.write(gen_out + "/manifest.txt");
            std::cout << "wrote scenario with " << data.sites.size() << " cells and "
                      << data.traces.size() << " traces to " << gen_out << '\n';
        } else if (feat->parsed()) {
            const auto geo = load_geo_stack(feat_geo, feat_clutters);
            const auto sites = parse_sites(feat_sites);
            const auto traces = clean_traces(parse_traces(feat_traces), sites);
            const auto binned = grid_traces(traces, feat_bin_width, feat_mw);
            const auto m = build_feature_matrix(geo, sites, binned);
            write_feature_csv(m, feat_out);
            RunManifest man;
            man.command = "features";
            man.config = "bin_width=" + format_double(feat_bin_width);
            man.inputs = {feat_geo, feat_sites, feat_traces};
            man.outputs = {feat_out};
            man.wall_seconds = wall();
            man.write(feat_out + ".manifest.txt");
            std::cout << "wrote " << m.n_rows << " feature rows (" << m.width()
                      << " columns) to " << feat_out << '\n';
        } else if (train->parsed()) {
            if (!train_goss.empty()) {
                const auto colon = train_goss.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("--goss expects top:rand, e.g. 0.2:0.1");
                train_cfg.goss = GossConfig{parse_double(train_goss.substr(0, colon), "--goss"),
                                            parse_double(train_goss.substr(colon + 1), "--goss")};
            }
            train_cfg.seed = train_seed;
            const auto m = read_feature_csv(train_features);
            const auto report = repeated_kfold_cv(m, train_cfg, train_cv_k, train_cv_repeats,
                                                  train_seed);
            const auto model = fit(m, train_cfg);
            save_model(model, train_model_out);
            RunManifest man;
            man.command = "train";
            man.seed = train_seed;
            man.config = "n_estimators=" + std::to_string(train_cfg.n_estimators) +
                         " max_depth=" + std::to_string(train_cfg.max_depth) +
                         " learning_rate=" + format_double(train_cfg.learning_rate);
            man.inputs = {train_features};
            man.outputs = {train_model_out};
            if (!train_report.empty()) {
                cli_detail::write_cv_report_csv(report, train_report);
                man.outputs.push_back(train_report);
            }
            man.wall_seconds = wall();
            man.write(train_model_out + ".manifest.txt");
            std::cout << "cv rmse " << format_double(report.mean_rmse) << " +- "
                      << format_double(report.std_rmse) << " dB, r2 "
                      << format_double(report.mean_r2) << "; model written to "
                      << train_model_out << '\n';
        } else if (tune_cmd->parsed()) {
            const auto m = read_feature_csv(tune_features);
            const auto strategy = parse_tune_strategy(tune_strategy);
            const auto result = tune(m, tune_space, strategy, tune_budget, tune_seed);
            write_tuning_report(result, strategy, tune_report);
            RunManifest man;
            man.command = "tune";
            man.seed = tune_seed;
            man.config = "strategy=" + tune_strategy + " budget=" + std::to_string(tune_budget);
            man.inputs = {tune_features};
            man.outputs = {tune_report};
            man.wall_seconds = wall();
            man.write(tune_report + ".manifest.txt");
            std::cout << "best rmse " << format_double(result.best_mean_rmse) << " dB with "
                      << "n_estimators=" << result.best_config.n_estimators
                      << " max_depth=" << result.best_config.max_depth
                      << " learning_rate=" << format_double(result.best_config.learning_rate)
                      << " after " << result.evaluations << " evaluations\n";
        } else if (pred->parsed()) {
            if (pred_grid == !pred_points.empty())
                throw ConfigError("predict needs exactly one of --points or --grid");
            const auto model = load_model(pred_model);
            // the model's own feature list fixes the clutter count
            if (model.feature_names.size() < kScalarFeatureCount ||
                (model.feature_names.size() - kScalarFeatureCount) % 3 != 0)
                throw SchemaError("model feature list is not a per-clutter expanded layout");
            const auto model_clutters =
                static_cast<int>((model.feature_names.size() - kScalarFeatureCount) / 3);
            const auto geo = load_geo_stack(pred_geo, model_clutters);
            const auto sites = parse_sites(pred_sites);
            RunManifest man;
            man.command = "predict";
            man.inputs = {pred_model, pred_geo, pred_sites};

            std::ofstream out(pred_csv);
            if (!out) throw IoError("cannot open output CSV: " + pred_csv);
            if (pred_grid) {
                const auto nx = static_cast<std::size_t>(
                    std::floor(geo.dtm.width() / pred_bin_width));
                const auto ny = static_cast<std::size_t>(
                    std::floor(geo.dtm.height() / pred_bin_width));
                std::vector<double> best(nx * ny,
                                         -std::numeric_limits<double>::infinity());
                std::vector<std::string> best_cell(nx * ny);
                FeatureMatrix row_matrix;
                row_matrix.names = feature_names(geo.clutter_count);
                row_matrix.categorical = categorical_mask(row_matrix.names);
                out << "bin_ix,bin_iy,x,y,cell_id,rss_dbm\n";
                for (std::size_t iy = 0; iy < ny; ++iy) {
                    for (std::size_t ix = 0; ix < nx; ++ix) {
                        const double x = geo.dtm.xll + (static_cast<double>(ix) + 0.5) * pred_bin_width;
                        const double y = geo.dtm.yll + (static_cast<double>(iy) + 0.5) * pred_bin_width;
                        for (const auto& site : sites) {
                            if (site.x == x && site.y == y) continue;
                            const auto f = assemble_features(geo, site, x, y);
                            std::vector<double> vals;
                            append_feature_row(vals, f);
                            const double rss = model.predict_row(vals.data());
                            if (rss > best[iy * nx + ix]) {
                                best[iy * nx + ix] = rss;
                                best_cell[iy * nx + ix] = site.cell_id;
                            }
                        }
                        out << ix << ',' << iy << ',' << format_double(x) << ','
                            << format_double(y) << ',' << best_cell[iy * nx + ix] << ','
                            << format_double(best[iy * nx + ix]) << '\n';
                    }
                }
                man.outputs = {pred_csv};
                if (!pred_pgm.empty()) {
                    write_pgm(best, nx, ny, pgm_min, pgm_max, pred_pgm);
                    man.outputs.push_back(pred_pgm);
                }
                std::cout << "wrote " << nx * ny << " lattice predictions to " << pred_csv
                          << '\n';
            } else {
                const auto pts = cli_detail::read_points(pred_points);
                man.inputs.push_back(pred_points);
                out << "x,y,cell_id,rss_dbm\n";
                for (const auto& p : pts.points) {
                    const auto& site = find_site(sites, p.cell_id);
                    const auto f = assemble_features(geo, site, p.x, p.y);
                    std::vector<double> vals;
                    append_feature_row(vals, f);
                    out << format_double(p.x) << ',' << format_double(p.y) << ',' << p.cell_id
                        << ',' << format_double(model.predict_row(vals.data())) << '\n';
                }
                man.outputs = {pred_csv};
                std::cout << "wrote " << pts.points.size() << " point predictions to "
                          << pred_csv << '\n';
            }
            man.wall_seconds = wall();
            man.write(pred_csv + ".manifest.txt");
        } else if (emp->parsed()) {
            const auto geo = load_geo_stack(emp_geo);
            const auto sites = parse_sites(emp_sites);
            const auto pts = cli_detail::read_points(emp_points);
            EmpiricalParams params;
            if (!emp_params.empty()) params = load_empirical_params(emp_params);
            if (params.spm.clutter_loss.empty())
                params.spm.clutter_loss.assign(static_cast<std::size_t>(geo.clutter_count), 0.0);
            const auto model = parse_empirical_model(emp_name);
            const auto rss = empirical_predict(model, params, geo, sites, pts.points);
            std::ofstream out(emp_out);
            if (!out) throw IoError("cannot open output CSV: " + emp_out);
            out << "x,y,cell_id,rss_dbm\n";
            for (std::size_t i = 0; i < pts.points.size(); ++i)
                out << format_double(pts.points[i].x) << ',' << format_double(pts.points[i].y)
                    << ',' << pts.points[i].cell_id << ',' << format_double(rss[i]) << '\n';
            RunManifest man;
            man.command = "empirical";
            man.config = "model=" + emp_name;
            man.inputs = {emp_geo, emp_sites, emp_points};
            if (!emp_params.empty()) man.inputs.push_back(emp_params);
            man.outputs = {emp_out};
            man.wall_seconds = wall();
            man.write(emp_out + ".manifest.txt");
            std::cout << "wrote " << rss.size() << " " << emp_name << " predictions to "
                      << emp_out << '\n';
        } else if (cmp->parsed()) {
            const auto geo = load_geo_stack(cmp_geo);
            const auto sites = parse_sites(cmp_sites);
            const auto traces = clean_traces(parse_traces(cmp_traces), sites);
            const auto binned = grid_traces(traces, cmp_bin_width);
            const auto m = build_feature_matrix(geo, sites, binned);

            GbdtConfig cfg = cli_detail::parse_inline_config(cmp_config);
            cfg.seed = cmp_seed;
            const auto cv = repeated_kfold_cv(m, cfg, 5, 1, cmp_seed);

            EmpiricalParams params;
            if (!cmp_params.empty()) params = load_empirical_params(cmp_params);
            if (params.spm.clutter_loss.empty())
                params.spm.clutter_loss.assign(static_cast<std::size_t>(geo.clutter_count), 0.0);

            std::vector<PredictPoint> pts;
            pts.reserve(m.n_rows);
            for (std::size_t r = 0; r < m.n_rows; ++r)
                pts.push_back({(static_cast<double>(m.bin_ix[r]) + 0.5) * cmp_bin_width,
                               (static_cast<double>(m.bin_iy[r]) + 0.5) * cmp_bin_width,
                               m.cell_id[r], 1.5});

            std::ofstream out(cmp_report);
            if (!out) throw IoError("cannot open report for writing: " + cmp_report);
            out << "model,rmse,r2\n";
            out << "gbdt," << format_double(cv.mean_rmse) << ',' << format_double(cv.mean_r2)
                << '\n';
            std::cout << "gbdt: rmse " << format_double(cv.mean_rmse) << " dB, r2 "
                      << format_double(cv.mean_r2) << '\n';
            std::vector<std::pair<std::string, EmpiricalModel>> models = {
                {"cost-hata", EmpiricalModel::CostHata},
                {"sui", EmpiricalModel::Sui},
                {"spm", EmpiricalModel::Spm}};
            if (params.itu452) models.emplace_back("itu452", EmpiricalModel::Itu452);
            for (const auto& [name, kind] : models) {
                const auto rss = empirical_predict(kind, params, geo, sites, pts);
                const auto met = metrics(m.target, rss);
                out << name << ',' << format_double(met.rmse) << ',' << format_double(met.r2)
                    << '\n';
                std::cout << name << ": rmse " << format_double(met.rmse) << " dB, r2 "
                          << format_double(met.r2) << '\n';
            }
            RunManifest man;
            man.command = "compare";
            man.seed = cmp_seed;
            man.inputs = {cmp_geo, cmp_sites, cmp_traces};
            man.outputs = {cmp_report};
            man.wall_seconds = wall();
            man.write(cmp_report + ".manifest.txt");
        } else if (expl->parsed()) {
            const auto model = load_model(expl_model);
            const auto m = read_feature_csv(expl_features);
            std::filesystem::create_directories(expl_outdir);
            const auto shap = tree_shap(model, m);
            write_shap_csv(shap, expl_outdir + "/shap.csv");
            const auto summary = shap_summary(shap);
            write_shap_summary_csv(summary, expl_outdir + "/shap_summary.csv");
            RunManifest man;
            man.command = "explain";
            man.seed = expl_seed;
            man.inputs = {expl_model, expl_features};
            man.outputs = {expl_outdir + "/shap.csv", expl_outdir + "/shap_summary.csv"};
            for (const auto& dep : expl_dependence) {
                const auto colon = dep.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("--dependence expects feature:interaction");
                const auto table = dependence_export(shap, m, dep.substr(0, colon),
                                                     dep.substr(colon + 1));
                const std::string path =
                    expl_outdir + "/dependence_" + table.feature + "_" + table.interaction +
                    ".csv";
                write_dependence_csv(table, path);
                man.outputs.push_back(path);
            }
            const auto lighter =
                lighter_model_report(m, model.config, expl_topk, expl_seed);
            {
                std::ofstream out(expl_outdir + "/lighter_model.csv");
                if (!out) throw IoError("cannot open lighter-model report for writing");
                out << "metric,full,light,delta\n";
                out << "rmse," << format_double(lighter.full.mean_rmse) << ','
                    << format_double(lighter.light.mean_rmse) << ','
                    << format_double(lighter.rmse_delta) << '\n';
                out << "r2," << format_double(lighter.full.mean_r2) << ','
                    << format_double(lighter.light.mean_r2) << ','
                    << format_double(lighter.r2_delta) << '\n';
                out << "train_s," << format_double(lighter.full.mean_train_seconds()) << ','
                    << format_double(lighter.light.mean_train_seconds()) << ','
                    << format_double(lighter.train_time_delta) << '\n';
                out << "predict_s," << format_double(lighter.full.mean_predict_seconds()) << ','
                    << format_double(lighter.light.mean_predict_seconds()) << ','
                    << format_double(lighter.predict_time_delta) << '\n';
                out << "selected,";
                for (std::size_t i = 0; i < lighter.selected.size(); ++i)
                    out << (i ? ";" : "") << lighter.selected[i];
                out << ",,\n";
            }
            man.outputs.push_back(expl_outdir + "/lighter_model.csv");
            man.wall_seconds = wall();
            man.write(expl_outdir + "/manifest.txt");
            std::cout << "top feature: " << summary.feature_names[summary.ranking[0]]
                      << "; lighter-model rmse delta "
                      << format_double(100.0 * lighter.rmse_delta) << "%\n";
        } else if (bench->parsed()) {
            const auto m = read_feature_csv(bench_features);
            GbdtConfig cfg = cli_detail::parse_inline_config(bench_config);
            cfg.seed = bench_seed;
            std::ofstream out(bench_report);
            if (!out) throw IoError("cannot open report for writing: " + bench_report);
            out << "model,train_s,predict_s,cv_rmse,cv_r2\n";
            const auto gb = repeated_kfold_cv(m, cfg, 5, 1, bench_seed);
            out << "gbdt," << format_double(gb.mean_train_seconds()) << ','
                << format_double(gb.mean_predict_seconds()) << ','
                << format_double(gb.mean_rmse) << ',' << format_double(gb.mean_r2) << '\n';
            const auto lin =
                repeated_kfold_cv_baseline(m, BaselineKind::Linear, 5, 5, 1, bench_seed);
            out << "linear," << format_double(lin.mean_train_seconds()) << ','
                << format_double(lin.mean_predict_seconds()) << ','
                << format_double(lin.mean_rmse) << ',' << format_double(lin.mean_r2) << '\n';
            const auto knn =
                repeated_kfold_cv_baseline(m, BaselineKind::Knn, 5, 5, 1, bench_seed);
            out << "knn," << format_double(knn.mean_train_seconds()) << ','
                << format_double(knn.mean_predict_seconds()) << ','
                << format_double(knn.mean_rmse) << ',' << format_double(knn.mean_r2) << '\n';
            RunManifest man;
            man.command = "bench";
            man.seed = bench_seed;
            man.inputs = {bench_features};
            man.outputs = {bench_report};
            man.wall_seconds = wall();
            man.write(bench_report + ".manifest.txt");
            std::cout << "gbdt " << format_double(gb.mean_train_seconds()) << "s train / "
                      << format_double(gb.mean_predict_seconds()) << "s predict, rmse "
                      << format_double(gb.mean_rmse) << " dB\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace rsspred
