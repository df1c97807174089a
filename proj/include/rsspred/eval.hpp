#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/features.hpp"
#include "rsspred/gbdt.hpp"
#include "rsspred/rng.hpp"

namespace rsspred {

struct Metrics {
    double rmse = 0.0;
    double r2 = 0.0;
};

// RMSE and coefficient of determination. A zero-variance target makes R^2
// undefined; it is reported as NaN rather than a fabricated number.
inline Metrics metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.empty() || y.size() != yhat.size())
        throw SchemaError("metrics requires equal, non-zero prediction/target lengths");
    const auto n = static_cast<double>(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        ss_res += e * e;
        const double d = y[i] - mean;
        ss_tot += d * d;
    }
    Metrics m;
    m.rmse = std::sqrt(ss_res / n);
    m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::numeric_limits<double>::quiet_NaN();
    return m;
}

struct CvReport {
    std::vector<Metrics> folds; // k * repeats entries
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    double mean_r2 = 0.0;
    double std_r2 = 0.0;
    std::vector<double> train_seconds;   // per fold
    std::vector<double> predict_seconds; // per fold
    int k = 0;
    int repeats = 0;
    std::uint64_t seed = 0;

    double mean_train_seconds() const {
        double s = 0.0;
        for (double v : train_seconds) s += v;
        return train_seconds.empty() ? 0.0 : s / static_cast<double>(train_seconds.size());
    }
    double mean_predict_seconds() const {
        double s = 0.0;
        for (double v : predict_seconds) s += v;
        return predict_seconds.empty() ? 0.0 : s / static_cast<double>(predict_seconds.size());
    }
};

namespace detail {

inline void finalize_report(CvReport& rep) {
    const auto n = static_cast<double>(rep.folds.size());
    double sr = 0.0, sr2 = 0.0;
    for (const auto& f : rep.folds) {
        sr += f.rmse;
        sr2 += f.r2;
    }
    rep.mean_rmse = sr / n;
    rep.mean_r2 = sr2 / n;
    double vr = 0.0, vr2 = 0.0;
    for (const auto& f : rep.folds) {
        vr += (f.rmse - rep.mean_rmse) * (f.rmse - rep.mean_rmse);
        vr2 += (f.r2 - rep.mean_r2) * (f.r2 - rep.mean_r2);
    }
    rep.std_rmse = std::sqrt(vr / n);
    rep.std_r2 = std::sqrt(vr2 / n);
}

// Balanced fold assignment of a seeded shuffle: fold f of repeat rep holds
// a contiguous chunk of the permuted indices.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n_rows, int k, int repeat,
                                                        std::uint64_t seed) {
    std::vector<std::size_t> perm(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) perm[i] = i;
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(repeat) + 0x666f6c64ULL));
    rng.shuffle(perm);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    const std::size_t base = n_rows / static_cast<std::size_t>(k);
    const std::size_t extra = n_rows % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                        perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return folds;
}

struct CvModel {
    std::function<void(const FeatureMatrix&)> fit;
    std::function<std::vector<double>(const FeatureMatrix&)> predict;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline CvReport cross_validate(const FeatureMatrix& m, int k, int repeats, std::uint64_t seed,
                               const CvModel& model) {
    if (k < 2) throw ConfigError("cross-validation requires k >= 2");
    if (repeats < 1) throw ConfigError("cross-validation requires repeats >= 1");
    if (m.n_rows < static_cast<std::size_t>(k))
        throw DataError("cross-validation needs at least k rows (" + std::to_string(m.n_rows) +
                        " < " + std::to_string(k) + ")");
    CvReport rep;
    rep.k = k;
    rep.repeats = repeats;
    rep.seed = seed;
    for (int r = 0; r < repeats; ++r) {
        const auto folds = make_folds(m.n_rows, k, r, seed);
        for (const auto& fold : folds) {
            std::vector<char> in_fold(m.n_rows, 0);
            for (std::size_t i : fold) in_fold[i] = 1;
            std::vector<std::size_t> train_idx;
            train_idx.reserve(m.n_rows - fold.size());
            for (std::size_t i = 0; i < m.n_rows; ++i)
                if (!in_fold[i]) train_idx.push_back(i);

            const auto train = subset_rows(m, train_idx);
            auto test_idx = fold;
            std::sort(test_idx.begin(), test_idx.end());
            const auto test = subset_rows(m, test_idx);

            auto t0 = std::chrono::steady_clock::now();
            model.fit(train);
            rep.train_seconds.push_back(seconds_since(t0));

            t0 = std::chrono::steady_clock::now();
            const auto yhat = model.predict(test);
            rep.predict_seconds.push_back(seconds_since(t0));

            rep.folds.push_back(metrics(test.target, yhat));
        }
    }
    finalize_report(rep);
    return rep;
}

inline CvModel gbdt_cv_model(const GbdtConfig& cfg) {
    auto ens = std::make_shared<TreeEnsemble>();
    return CvModel{[cfg, ens](const FeatureMatrix& train) { *ens = fit(train, cfg); },
                   [ens](const FeatureMatrix& test) { return ens->predict(test); }};
}

} // namespace detail

// Seeded, repeated k-fold cross-validation of the boosted model. The same
// seed always produces the same folds, fits and metrics.
inline CvReport repeated_kfold_cv(const FeatureMatrix& m, const GbdtConfig& cfg, int k = 5,
                                  int repeats = 1, std::uint64_t seed = 0) {
    return detail::cross_validate(m, k, repeats, seed, detail::gbdt_cv_model(cfg));
}

inline CvReport repeated_kfold_cv_baseline(const FeatureMatrix& m, BaselineKind kind,
                                           int k_neighbors = 5, int k = 5, int repeats = 1,
                                           std::uint64_t seed = 0) {
    auto model = std::make_shared<BaselineModel>();
    detail::CvModel ops{
        [=](const FeatureMatrix& train) { *model = fit_baseline(train, kind, k_neighbors); },
        [=](const FeatureMatrix& test) { return model->predict(test); }};
    return detail::cross_validate(m, k, repeats, seed, ops);
}

// Hyperparameter search over the three boosted-tree knobs. Learning rate
// is handled on a log10 scale everywhere.
struct SearchSpace {
    int n_estimators_lo = 500;
    int n_estimators_hi = 2500;
    int max_depth_lo = 5;
    int max_depth_hi = 20;
    double learning_rate_lo = 0.001;
    double learning_rate_hi = 0.1;
    int lattice_points = 3; // per dimension, for grid and annealing
    int cv_k = 5;
    int cv_repeats = 1;
    GbdtConfig base; // fields other than the tuned three

    int tpe_startup = 5;
    double tpe_gamma = 0.25;
    int tpe_candidates = 24;
    double sa_t0 = 1.0;
    double sa_cooling = 0.85;

    void validate() const {
        if (n_estimators_lo > n_estimators_hi || max_depth_lo > max_depth_hi ||
            learning_rate_lo > learning_rate_hi)
            throw ConfigError("search space bounds must satisfy lo <= hi");
        if (!(learning_rate_lo > 0.0)) throw ConfigError("learning rate bounds must be > 0");
        if (lattice_points < 2) throw ConfigError("lattice_points must be >= 2");
    }
};

enum class TuneStrategy { Grid, Random, Tpe, Anneal };

inline TuneStrategy parse_tune_strategy(const std::string& name) {
    if (name == "grid") return TuneStrategy::Grid;
    if (name == "random") return TuneStrategy::Random;
    if (name == "tpe") return TuneStrategy::Tpe;
    if (name == "anneal") return TuneStrategy::Anneal;
    throw ConfigError("unknown tuning strategy '" + name +
                      "' (expected grid, random, tpe or anneal)");
}

struct Trial {
    GbdtConfig config;
    CvReport report;
};

struct TunerResult {
    std::vector<Trial> trials;
    GbdtConfig best_config;
    double best_mean_rmse = 0.0;
    int evaluations = 0;
};

namespace detail {

// Internal point: (n_estimators, max_depth, log10 learning rate).
struct TunePoint {
    double est = 0.0;
    double depth = 0.0;
    double log_lr = 0.0;
};

inline TunePoint clip_point(TunePoint p, const SearchSpace& s) {
    p.est = std::clamp(p.est, static_cast<double>(s.n_estimators_lo),
                       static_cast<double>(s.n_estimators_hi));
    p.depth = std::clamp(p.depth, static_cast<double>(s.max_depth_lo),
                         static_cast<double>(s.max_depth_hi));
    p.log_lr = std::clamp(p.log_lr, std::log10(s.learning_rate_lo),
                          std::log10(s.learning_rate_hi));
    return p;
}

inline GbdtConfig materialize(const TunePoint& p, const SearchSpace& s) {
    GbdtConfig cfg = s.base;
    cfg.n_estimators = static_cast<int>(std::lround(p.est));
    cfg.max_depth = static_cast<int>(std::lround(p.depth));
    cfg.learning_rate = std::pow(10.0, p.log_lr);
    return cfg;
}

inline TunePoint random_point(Rng& rng, const SearchSpace& s) {
    TunePoint p;
    p.est = std::round(rng.uniform(static_cast<double>(s.n_estimators_lo),
                                   static_cast<double>(s.n_estimators_hi)));
    p.depth = std::round(rng.uniform(static_cast<double>(s.max_depth_lo),
                                     static_cast<double>(s.max_depth_hi)));
    p.log_lr = rng.uniform(std::log10(s.learning_rate_lo), std::log10(s.learning_rate_hi));
    return clip_point(p, s);
}

inline std::vector<double> lattice_values(double lo, double hi, int points, bool round_int) {
    std::vector<double> v;
    for (int i = 0; i < points; ++i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        if (round_int) x = std::round(x);
        v.push_back(x);
    }
    return v;
}

// One-dimensional Parzen mixture: Gaussian kernels at the observed values
// with a Silverman-rule bandwidth.
struct ParzenDensity {
    std::vector<double> centers;
    double bandwidth = 1.0;

    static ParzenDensity fit(const std::vector<double>& xs, double span) {
        ParzenDensity d;
        d.centers = xs;
        const auto n = static_cast<double>(xs.size());
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        double sigma = std::sqrt(var / n);
        if (sigma < 1e-12) sigma = span / 100.0;
        d.bandwidth = std::max(1.06 * sigma * std::pow(n, -0.2), 1e-9);
        return d;
    }

    double log_density(double x) const {
        double acc = 0.0;
        for (double c : centers) {
            const double z = (x - c) / bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        const double norm = static_cast<double>(centers.size()) * bandwidth *
                            std::sqrt(2.0 * 3.14159265358979323846);
        return std::log(std::max(acc / norm, 1e-300));
    }
};

} // namespace detail

// Four search strategies sharing one trial loop: every proposal is scored
// by seeded repeated k-fold CV, and the reported best is the minimum mean
// RMSE over all recorded trials.
inline TunerResult tune(const FeatureMatrix& m, const SearchSpace& space, TuneStrategy strategy,
                        int budget, std::uint64_t seed) {
    space.validate();
    if (budget < 1) throw ConfigError("tuning budget must be >= 1");

    TunerResult result;
    auto evaluate = [&](const detail::TunePoint& p) -> double {
        const auto cfg = detail::materialize(detail::clip_point(p, space), space);
        Trial t{cfg, repeated_kfold_cv(m, cfg, space.cv_k, space.cv_repeats, seed)};
        result.trials.push_back(std::move(t));
        result.evaluations += 1;
        return result.trials.back().report.mean_rmse;
    };

    Rng rng(hash_combine(seed, 0x74756e65ULL + static_cast<std::uint64_t>(strategy)));
    const double log_lo = std::log10(space.learning_rate_lo);
    const double log_hi = std::log10(space.learning_rate_hi);

    switch (strategy) {
    case TuneStrategy::Grid: {
        const auto ests = detail::lattice_values(space.n_estimators_lo, space.n_estimators_hi,
                                                 space.lattice_points, true);
        const auto depths = detail::lattice_values(space.max_depth_lo, space.max_depth_hi,
                                                   space.lattice_points, true);
        const auto lrs = detail::lattice_values(log_lo, log_hi, space.lattice_points, false);
        bool done = false;
        for (double e : ests) {
            for (double d : depths) {
                for (double l : lrs) {
                    if (result.evaluations >= budget) {
                        done = true;
                        break;
                    }
                    evaluate({e, d, l});
                }
                if (done) break;
            }
            if (done) break;
        }
        break;
    }
    case TuneStrategy::Random: {
        for (int i = 0; i < budget; ++i) evaluate(detail::random_point(rng, space));
        break;
    }
    case TuneStrategy::Tpe: {
        std::vector<std::pair<detail::TunePoint, double>> observed;
        for (int i = 0; i < budget; ++i) {
            detail::TunePoint next;
            if (static_cast<int>(observed.size()) < space.tpe_startup) {
                next = detail::random_point(rng, space);
            } else {
                auto sorted = observed;
                std::stable_sort(sorted.begin(), sorted.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
                const auto n_good = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::ceil(space.tpe_gamma *
                                                          static_cast<double>(sorted.size()))));
                std::vector<double> good[3], bad[3];
                for (std::size_t k = 0; k < sorted.size(); ++k) {
                    const auto& p = sorted[k].first;
                    auto* dst = k < n_good ? good : bad;
                    dst[0].push_back(p.est);
                    dst[1].push_back(p.depth);
                    dst[2].push_back(p.log_lr);
                }
                const double spans[3] = {
                    static_cast<double>(space.n_estimators_hi - space.n_estimators_lo),
                    static_cast<double>(space.max_depth_hi - space.max_depth_lo),
                    log_hi - log_lo};
                detail::ParzenDensity g[3], b[3];
                const bool have_bad = !bad[0].empty();
                for (int d = 0; d < 3; ++d) {
                    g[d] = detail::ParzenDensity::fit(good[d], spans[d]);
                    if (have_bad) b[d] = detail::ParzenDensity::fit(bad[d], spans[d]);
                }
                double best_score = -std::numeric_limits<double>::infinity();
                for (int c = 0; c < space.tpe_candidates; ++c) {
                    const auto pick = static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<long long>(good[0].size()) - 1));
                    detail::TunePoint cand;
                    cand.est = std::round(good[0][pick] + rng.normal() * g[0].bandwidth);
                    cand.depth = std::round(good[1][pick] + rng.normal() * g[1].bandwidth);
                    cand.log_lr = good[2][pick] + rng.normal() * g[2].bandwidth;
                    cand = detail::clip_point(cand, space);
                    double score = 0.0;
                    const double coords[3] = {cand.est, cand.depth, cand.log_lr};
                    for (int d = 0; d < 3; ++d) {
                        score += g[d].log_density(coords[d]);
                        if (have_bad) score -= b[d].log_density(coords[d]);
                    }
                    if (score > best_score) {
                        best_score = score;
                        next = cand;
                    }
                }
            }
            const double loss = evaluate(next);
            observed.emplace_back(detail::clip_point(next, space), loss);
        }
        break;
    }
    case TuneStrategy::Anneal: {
        const auto ests = detail::lattice_values(space.n_estimators_lo, space.n_estimators_hi,
                                                 space.lattice_points, true);
        const auto depths = detail::lattice_values(space.max_depth_lo, space.max_depth_hi,
                                                   space.lattice_points, true);
        const auto lrs = detail::lattice_values(log_lo, log_hi, space.lattice_points, false);
        const std::vector<double>* lattice[3] = {&ests, &depths, &lrs};
        int idx[3] = {space.lattice_points / 2, space.lattice_points / 2,
                      space.lattice_points / 2};
        auto point_at = [&](const int* ix) {
            return detail::TunePoint{(*lattice[0])[static_cast<std::size_t>(ix[0])],
                                     (*lattice[1])[static_cast<std::size_t>(ix[1])],
                                     (*lattice[2])[static_cast<std::size_t>(ix[2])]};
        };
        double current = evaluate(point_at(idx));
        double temperature = space.sa_t0;
        while (result.evaluations < budget) {
            int nidx[3] = {idx[0], idx[1], idx[2]};
            const auto dim = static_cast<std::size_t>(rng.uniform_int(0, 2));
            const int step = rng.uniform() < 0.5 ? -1 : 1;
            nidx[dim] = std::clamp(nidx[dim] + step, 0, space.lattice_points - 1);
            const double cand = evaluate(point_at(nidx));
            const double delta = cand - current;
            if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temperature)) {
                idx[0] = nidx[0];
                idx[1] = nidx[1];
                idx[2] = nidx[2];
                current = cand;
            }
            temperature *= space.sa_cooling;
        }
        break;
    }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.trials.size(); ++i)
        if (result.trials[i].report.mean_rmse < result.trials[best].report.mean_rmse) best = i;
    result.best_config = result.trials[best].config;
    result.best_mean_rmse = result.trials[best].report.mean_rmse;
    return result;
}

inline void write_tuning_report(const TunerResult& r, TuneStrategy strategy,
                                const std::string& path) {
    const char* names[] = {"grid", "random", "tpe", "anneal"};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open tuning report for writing: " + path);
    out << "trial,strategy,n_estimators,max_depth,learning_rate,mean_rmse,std_rmse,mean_r2,"
           "train_s,predict_s\n";
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
        const auto& t = r.trials[i];
        out << i << ',' << names[static_cast<int>(strategy)] << ',' << t.config.n_estimators
            << ',' << t.config.max_depth << ',' << format_double(t.config.learning_rate) << ','
            << format_double(t.report.mean_rmse) << ',' << format_double(t.report.std_rmse) << ','
            << format_double(t.report.mean_r2) << ',' << format_double(t.report.mean_train_seconds())
            << ',' << format_double(t.report.mean_predict_seconds()) << '\n';
    }
}

// Sparse-training study: train folds drawn from a seeded subsample, test on
// the held-out fold plus every untouched row. fraction = 1 reduces exactly
// to repeated_kfold_cv.
inline CvReport sparsity_eval(const FeatureMatrix& m, double fraction, const GbdtConfig& cfg,
                              std::uint64_t seed, int k = 5, int repeats = 1) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ConfigError("fraction must be in (0, 1]");
    const auto n_sub =
        static_cast<std::size_t>(fraction * static_cast<double>(m.n_rows));
    if (n_sub < 10) throw DataError("subsample too small: " + std::to_string(n_sub) + " rows");

    std::vector<std::size_t> perm(m.n_rows);
    for (std::size_t i = 0; i < m.n_rows; ++i) perm[i] = i;
    Rng rng(hash_combine(seed, 0x7370617273ULL));
    rng.shuffle(perm);
    std::vector<std::size_t> selected(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_sub));
    std::sort(selected.begin(), selected.end());
    std::vector<char> in_sel(m.n_rows, 0);
    for (std::size_t i : selected) in_sel[i] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < m.n_rows; ++i)
        if (!in_sel[i]) rest.push_back(i);

    CvReport rep;
    rep.k = k;
    rep.repeats = repeats;
    rep.seed = seed;
    for (int r = 0; r < repeats; ++r) {
        const auto folds = detail::make_folds(n_sub, k, r, seed);
        for (const auto& fold : folds) {
            std::vector<char> in_fold(n_sub, 0);
            for (std::size_t i : fold) in_fold[i] = 1;
            std::vector<std::size_t> train_idx;
            for (std::size_t i = 0; i < n_sub; ++i)
                if (!in_fold[i]) train_idx.push_back(selected[i]);
            std::vector<std::size_t> test_idx;
            for (std::size_t i : fold) test_idx.push_back(selected[i]);
            test_idx.insert(test_idx.end(), rest.begin(), rest.end());
            std::sort(test_idx.begin(), test_idx.end());

            const auto train = subset_rows(m, train_idx);
            const auto test = subset_rows(m, test_idx);

            auto t0 = std::chrono::steady_clock::now();
            const auto model = fit(train, cfg);
            rep.train_seconds.push_back(detail::seconds_since(t0));
            t0 = std::chrono::steady_clock::now();
            const auto yhat = model.predict(test);
            rep.predict_seconds.push_back(detail::seconds_since(t0));
            rep.folds.push_back(metrics(test.target, yhat));
        }
    }
    detail::finalize_report(rep);
    return rep;
}

} // namespace rsspred
