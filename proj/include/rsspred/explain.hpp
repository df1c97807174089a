#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "rsspred/errors.hpp"
#include "rsspred/eval.hpp"
#include "rsspred/features.hpp"
#include "rsspred/gbdt.hpp"

namespace rsspred {

// Per-row, per-feature attributions. base plus the row sum equals the
// model prediction for that row (local accuracy).
struct ShapMatrix {
    double base = 0.0;
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<double> values; // row-major
    std::vector<std::string> feature_names;
    std::vector<long long> bin_ix;
    std::vector<long long> bin_iy;
    std::vector<std::string> cell_id;

    double at(std::size_t r, std::size_t f) const { return values[r * n_features + f]; }
};

namespace detail {

// Path state of the TreeSHAP recursion: one entry per unique feature on
// the current root-to-node path, plus the dummy root entry at index 0.
// pweight tracks the permutation weights of all subset sizes at once.
struct PathElem {
    int feature = -1;
    double zero = 1.0; // fraction of paths that flow through when the feature is unknown
    double one = 1.0;  // whether this path is taken when the feature is known
    double pweight = 1.0;
};

inline void extend_path(std::vector<PathElem>& path, double pz, double po, int pi) {
    const std::size_t l = path.size();
    path.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
    for (std::size_t i = l; i-- > 0;) {
        path[i + 1].pweight += po * path[i].pweight * static_cast<double>(i + 1) /
                               static_cast<double>(l + 1);
        path[i].pweight = pz * path[i].pweight * static_cast<double>(l - i) /
                          static_cast<double>(l + 1);
    }
}

inline void unwind_path(std::vector<PathElem>& path, std::size_t index) {
    const std::size_t depth = path.size() - 1;
    const double one = path[index].one;
    const double zero = path[index].zero;
    double next_one = path[depth].pweight;
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next_one * static_cast<double>(depth + 1) /
                              (static_cast<double>(i + 1) * one);
            next_one = tmp - path[i].pweight * zero * static_cast<double>(depth - i) /
                                 static_cast<double>(depth + 1);
        } else {
            path[i].pweight = path[i].pweight * static_cast<double>(depth + 1) /
                              (zero * static_cast<double>(depth - i));
        }
    }
    // Only the feature identities shift down; the recomputed pweights stay
    // with their positions on the shortened path.
    for (std::size_t i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop_back();
}

inline double unwound_path_sum(const std::vector<PathElem>& path, std::size_t index) {
    const std::size_t depth = path.size() - 1;
    const double one = path[index].one;
    const double zero = path[index].zero;
    double next_one = path[depth].pweight;
    double total = 0.0;
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = next_one * static_cast<double>(depth + 1) /
                               (static_cast<double>(i + 1) * one);
            total += tmp;
            next_one = path[i].pweight -
                       tmp * zero * (static_cast<double>(depth - i) /
                                     static_cast<double>(depth + 1));
        } else {
            total += (path[i].pweight / zero) /
                     (static_cast<double>(depth - i) / static_cast<double>(depth + 1));
        }
    }
    return total;
}

inline void shap_recurse(const Tree& tree, const double* row, std::vector<double>& phi,
                         int node_index, std::vector<PathElem> path, double pz, double po,
                         int pi) {
    extend_path(path, pz, po, pi);
    const auto& node = tree.nodes[static_cast<std::size_t>(node_index)];
    const std::size_t depth = path.size() - 1;

    if (node.is_leaf()) {
        for (std::size_t i = 1; i <= depth; ++i) {
            const double w = unwound_path_sum(path, i);
            phi[static_cast<std::size_t>(path[i].feature)] +=
                w * (path[i].one - path[i].zero) * node.value;
        }
        return;
    }

    const bool go_left = row[node.feature] <= node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
    const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / node.cover;

    double incoming_zero = 1.0, incoming_one = 1.0;
    std::size_t prev = 1;
    for (; prev <= depth; ++prev)
        if (path[prev].feature == node.feature) break;
    if (prev <= depth) {
        incoming_zero = path[prev].zero;
        incoming_one = path[prev].one;
        unwind_path(path, prev);
    }

    shap_recurse(tree, row, phi, hot, path, hot_zero * incoming_zero, incoming_one,
                 node.feature);
    shap_recurse(tree, row, phi, cold, path, cold_zero * incoming_zero, 0.0, node.feature);
}

inline double tree_expected_value(const Tree& tree) {
    const double root_cover = tree.nodes[0].cover;
    double acc = 0.0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const auto& node = tree.nodes[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (node.is_leaf()) {
            acc += node.cover / root_cover * node.value;
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return acc;
}

inline void check_covers(const TreeEnsemble& e) {
    for (const auto& t : e.trees) {
        if (t.nodes.empty() || !(t.nodes[0].cover > 0.0))
            throw ModelError("ensemble lacks node covers; retrain or re-serialize the model "
                             "before computing attributions");
        for (const auto& n : t.nodes)
            if (!n.is_leaf() && !(n.cover > 0.0))
                throw ModelError("internal node with zero cover; retrain or re-serialize the "
                                 "model before computing attributions");
    }
}

} // namespace detail

// Exact Shapley attributions under path-dependent (cover-weighted)
// conditional expectations, one tree at a time, summed by additivity and
// scaled by the learning rate.
inline ShapMatrix tree_shap(const TreeEnsemble& e, const FeatureMatrix& m) {
    if (m.width() != e.feature_names.size())
        throw SchemaError("attribution rows have " + std::to_string(m.width()) +
                          " features, model expects " + std::to_string(e.feature_names.size()));
    detail::check_covers(e);

    ShapMatrix s;
    s.n_rows = m.n_rows;
    s.n_features = m.width();
    s.feature_names = m.names;
    s.bin_ix = m.bin_ix;
    s.bin_iy = m.bin_iy;
    s.cell_id = m.cell_id;
    s.values.assign(m.n_rows * m.width(), 0.0);

    s.base = e.base_score;
    for (const auto& t : e.trees)
        s.base += e.config.learning_rate * detail::tree_expected_value(t);

    std::vector<double> phi(m.width());
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        const double* row = m.row(r);
        for (const auto& tree : e.trees) {
            if (tree.nodes.size() == 1) continue; // stump-free tree adds only to the base
            std::fill(phi.begin(), phi.end(), 0.0);
            detail::shap_recurse(tree, row, phi, 0, {}, 1.0, 1.0, -1);
            for (std::size_t f = 0; f < m.width(); ++f)
                s.values[r * m.width() + f] += e.config.learning_rate * phi[f];
        }
    }
    return s;
}

struct ShapSummary {
    std::vector<std::string> feature_names;
    std::vector<double> mean_abs;        // aligned with feature_names
    std::vector<std::size_t> ranking;    // feature indices, descending impact
};

inline ShapSummary shap_summary(const ShapMatrix& s) {
    if (s.n_rows == 0) throw DataError("cannot summarize an empty attribution matrix");
    ShapSummary out;
    out.feature_names = s.feature_names;
    out.mean_abs.assign(s.n_features, 0.0);
    for (std::size_t r = 0; r < s.n_rows; ++r)
        for (std::size_t f = 0; f < s.n_features; ++f)
            out.mean_abs[f] += std::fabs(s.at(r, f));
    for (double& v : out.mean_abs) v /= static_cast<double>(s.n_rows);
    out.ranking.resize(s.n_features);
    std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
        if (out.mean_abs[a] != out.mean_abs[b]) return out.mean_abs[a] > out.mean_abs[b];
        return a < b;
    });
    return out;
}

struct DependenceTable {
    std::string feature;
    std::string interaction;
    std::vector<std::array<double, 3>> rows; // feature value, shap value, interaction value
};

inline DependenceTable dependence_export(const ShapMatrix& s, const FeatureMatrix& m,
                                         const std::string& feature,
                                         const std::string& interaction) {
    if (s.n_rows != m.n_rows)
        throw SchemaError("attribution and feature matrices have different row counts");
    const std::size_t f = m.column(feature);
    const std::size_t g = m.column(interaction);
    DependenceTable t;
    t.feature = feature;
    t.interaction = interaction;
    t.rows.reserve(m.n_rows);
    for (std::size_t r = 0; r < m.n_rows; ++r)
        t.rows.push_back({m.at(r, f), s.at(r, f), m.at(r, g)});
    return t;
}

struct LighterModelReport {
    CvReport full;
    CvReport light;
    std::vector<std::string> selected; // top-k feature names, impact order
    double rmse_delta = 0.0;           // (light - full) / full
    double r2_delta = 0.0;
    double train_time_delta = 0.0;
    double predict_time_delta = 0.0;
};

// Train the full model, rank features by mean |SHAP| over the training
// rows, keep the top k columns and re-evaluate the same configuration on
// the reduced matrix.
inline LighterModelReport lighter_model_report(const FeatureMatrix& m, const GbdtConfig& cfg,
                                               int top_k = 5, std::uint64_t seed = 0,
                                               int cv_k = 5, int cv_repeats = 1) {
    if (top_k < 1 || static_cast<std::size_t>(top_k) > m.width())
        throw ConfigError("top_k must be in [1, feature count]");

    LighterModelReport rep;
    rep.full = repeated_kfold_cv(m, cfg, cv_k, cv_repeats, seed);

    const auto full_model = fit(m, cfg);
    const auto shap = tree_shap(full_model, m);
    const auto summary = shap_summary(shap);

    std::vector<std::size_t> cols(summary.ranking.begin(),
                                  summary.ranking.begin() + top_k);
    for (std::size_t c : cols) rep.selected.push_back(m.names[c]);
    const auto reduced = select_columns(m, cols);
    rep.light = repeated_kfold_cv(reduced, cfg, cv_k, cv_repeats, seed);

    auto rel = [](double light, double full) { return full != 0.0 ? (light - full) / full : 0.0; };
    rep.rmse_delta = rel(rep.light.mean_rmse, rep.full.mean_rmse);
    rep.r2_delta = rel(rep.light.mean_r2, rep.full.mean_r2);
    rep.train_time_delta = rel(rep.light.mean_train_seconds(), rep.full.mean_train_seconds());
    rep.predict_time_delta =
        rel(rep.light.mean_predict_seconds(), rep.full.mean_predict_seconds());
    return rep;
}

inline void write_shap_csv(const ShapMatrix& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open attribution file for writing: " + path);
    out << "bin_ix,bin_iy,cell_id,base";
    for (const auto& n : s.feature_names) out << ",phi_" << n;
    out << '\n';
    for (std::size_t r = 0; r < s.n_rows; ++r) {
        out << (r < s.bin_ix.size() ? s.bin_ix[r] : 0) << ','
            << (r < s.bin_iy.size() ? s.bin_iy[r] : 0) << ','
            << (r < s.cell_id.size() ? s.cell_id[r] : std::string{}) << ','
            << format_double(s.base);
        for (std::size_t f = 0; f < s.n_features; ++f) out << ',' << format_double(s.at(r, f));
        out << '\n';
    }
}

inline void write_shap_summary_csv(const ShapSummary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open summary file for writing: " + path);
    out << "feature,mean_abs_shap,rank\n";
    std::vector<std::size_t> rank_of(s.feature_names.size());
    for (std::size_t r = 0; r < s.ranking.size(); ++r) rank_of[s.ranking[r]] = r;
    for (std::size_t f = 0; f < s.feature_names.size(); ++f)
        out << s.feature_names[f] << ',' << format_double(s.mean_abs[f]) << ',' << rank_of[f]
            << '\n';
}

inline void write_dependence_csv(const DependenceTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open dependence file for writing: " + path);
    out << "feature_value,shap_value,interaction_value\n";
    for (const auto& row : t.rows)
        out << format_double(row[0]) << ',' << format_double(row[1]) << ','
            << format_double(row[2]) << '\n';
}

} // namespace rsspred
