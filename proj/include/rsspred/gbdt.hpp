#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsspred/errors.hpp"
#include "rsspred/features.hpp"
#include "rsspred/rng.hpp"

namespace rsspred {

// Gradient-based one-side sampling: keep the top fraction of rows by
// absolute residual, add a random fraction of the rest with their
// contributions amplified by (1 - top) / rand.
struct GossConfig {
    double top_fraction = 0.2;
    double rand_fraction = 0.1;
};

struct GbdtConfig {
    int n_estimators = 500;
    int max_depth = 8;
    double learning_rate = 0.1;
    int min_samples_leaf = 20;
    int n_bins = 255;
    std::optional<GossConfig> goss;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw ConfigError("learning_rate must be in (0, 1]");
        if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
        if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
        if (goss) {
            if (goss->top_fraction < 0.0 || goss->rand_fraction < 0.0 ||
                goss->top_fraction + goss->rand_fraction > 1.0 + 1e-12)
                throw ConfigError("goss fractions must be non-negative with a + b <= 1");
        }
    }
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double cover = 0.0; // training rows routed through this node
    double value = 0.0; // leaf output before learning-rate scaling

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double eval(const double* row) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = row[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

struct TreeEnsemble {
    double base_score = 0.0;
    GbdtConfig config;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;
    std::vector<double> train_rmse; // per-iteration fit diagnostic, not persisted

    double predict_row(const double* row) const {
        double p = base_score;
        for (const auto& t : trees) p += config.learning_rate * t.eval(row);
        return p;
    }

    std::vector<double> predict(const FeatureMatrix& m) const {
        if (m.width() != feature_names.size())
            throw SchemaError("prediction rows have " + std::to_string(m.width()) +
                              " features, model expects " +
                              std::to_string(feature_names.size()));
        std::vector<double> out(m.n_rows);
        for (std::size_t r = 0; r < m.n_rows; ++r) out[r] = predict_row(m.row(r));
        return out;
    }
};

namespace detail {

// Per-feature quantile bin edges. bin(v) = index of the first edge >= v
// (last bin if none), so a split at edges[b] sends exactly bins 0..b left.
struct FeatureBins {
    std::vector<std::vector<double>> edges; // per feature

    int bin_of(std::size_t feature, double v) const {
        const auto& e = edges[feature];
        return static_cast<int>(std::lower_bound(e.begin(), e.end(), v) - e.begin());
    }

    std::size_t bin_count(std::size_t feature) const { return edges[feature].size() + 1; }
};

inline FeatureBins compute_bins(const FeatureMatrix& m, int n_bins) {
    FeatureBins bins;
    bins.edges.resize(m.width());
    std::vector<double> col(m.n_rows);
    for (std::size_t f = 0; f < m.width(); ++f) {
        for (std::size_t r = 0; r < m.n_rows; ++r) col[r] = m.at(r, f);
        std::sort(col.begin(), col.end());
        std::vector<double> uniq;
        for (double v : col)
            if (uniq.empty() || v != uniq.back()) uniq.push_back(v);

        auto& edges = bins.edges[f];
        if (uniq.size() <= static_cast<std::size_t>(n_bins)) {
            for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
                edges.push_back(uniq[i] + (uniq[i + 1] - uniq[i]) / 2.0);
        } else {
            // Quantile cut points, deduplicated, each turned into the
            // midpoint between the cut value and its next-lower distinct
            // value so the edge separates real observations.
            for (int k = 1; k < n_bins; ++k) {
                const auto pos = static_cast<std::size_t>(
                    static_cast<double>(k) * static_cast<double>(col.size()) /
                    static_cast<double>(n_bins));
                const double qv = col[std::min(pos, col.size() - 1)];
                const auto it = std::lower_bound(uniq.begin(), uniq.end(), qv);
                const auto idx = static_cast<std::size_t>(it - uniq.begin());
                if (idx == 0) continue;
                const double edge = uniq[idx - 1] + (qv - uniq[idx - 1]) / 2.0;
                if (edges.empty() || edge != edges.back()) edges.push_back(edge);
            }
        }
    }
    return bins;
}

struct HistCell {
    double grad = 0.0;
    double weight = 0.0;
    std::size_t count = 0;
};

} // namespace detail

// Histogram gradient boosting with squared loss. Depth-wise growth, split
// gain S_L^2/W_L + S_R^2/W_R - S^2/W over (weighted) residual sums, leaf
// value the weighted mean residual. Deterministic given (matrix, config):
// histograms accumulate in ascending row order and ties break toward the
// lowest feature index, then the lowest threshold.
inline TreeEnsemble fit(const FeatureMatrix& m, const GbdtConfig& cfg) {
    cfg.validate();
    if (m.n_rows == 0) throw DataError("cannot fit on an empty feature matrix");
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        if (!std::isfinite(m.target[r]))
            throw DataError("non-finite target at row " + std::to_string(r));
        for (std::size_t c = 0; c < m.width(); ++c)
            if (!std::isfinite(m.at(r, c)))
                throw DataError("non-finite feature value at row " + std::to_string(r));
    }

    const std::size_t n = m.n_rows;
    const std::size_t n_feat = m.width();

    TreeEnsemble ens;
    ens.config = cfg;
    ens.feature_names = m.names;
    double target_sum = 0.0;
    for (double y : m.target) target_sum += y;
    ens.base_score = target_sum / static_cast<double>(n);

    const auto bins = detail::compute_bins(m, cfg.n_bins);
    std::vector<std::uint16_t> binned(n * n_feat);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < n_feat; ++f)
            binned[r * n_feat + f] = static_cast<std::uint16_t>(bins.bin_of(f, m.at(r, f)));

    std::vector<double> pred(n, ens.base_score);
    std::vector<double> residual(n);
    for (std::size_t r = 0; r < n; ++r) residual[r] = m.target[r] - pred[r];

    // Flattened histogram buffer with per-feature offsets.
    std::vector<std::size_t> hist_offset(n_feat + 1, 0);
    for (std::size_t f = 0; f < n_feat; ++f)
        hist_offset[f + 1] = hist_offset[f] + bins.bin_count(f);
    std::vector<detail::HistCell> hist(hist_offset[n_feat]);

    struct BuildNode {
        int node = 0;
        std::size_t begin = 0, end = 0;
        int depth = 0;
    };

    Rng goss_rng(hash_combine(cfg.seed, 0x676f7373ULL));
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> subset;
    std::vector<double> weight(n, 1.0);

    for (int t = 0; t < cfg.n_estimators; ++t) {
        // Sample selection for this iteration.
        subset.clear();
        if (cfg.goss && cfg.goss->top_fraction < 1.0) {
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double ga = std::fabs(residual[a]);
                const double gb = std::fabs(residual[b]);
                if (ga != gb) return ga > gb;
                return a < b;
            });
            const auto top_n = static_cast<std::size_t>(cfg.goss->top_fraction *
                                                        static_cast<double>(n));
            const auto rand_n = static_cast<std::size_t>(cfg.goss->rand_fraction *
                                                         static_cast<double>(n));
            subset.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_n));
            for (std::size_t i : subset) weight[i] = 1.0;
            if (rand_n > 0) {
                const double amplify =
                    (1.0 - cfg.goss->top_fraction) / cfg.goss->rand_fraction;
                const std::size_t rem = n - top_n;
                for (std::size_t k = 0; k < rand_n; ++k) {
                    const auto j = static_cast<std::size_t>(goss_rng.uniform_int(
                        static_cast<long long>(k), static_cast<long long>(rem) - 1));
                    std::swap(order[top_n + k], order[top_n + j]);
                    subset.push_back(order[top_n + k]);
                    weight[order[top_n + k]] = amplify;
                }
            }
            std::sort(subset.begin(), subset.end());
        } else {
            subset.resize(n);
            for (std::size_t i = 0; i < n; ++i) subset[i] = i;
        }

        Tree tree;
        std::vector<int> split_bin; // transient, parallel to tree.nodes
        tree.nodes.emplace_back();
        split_bin.push_back(-1);

        std::vector<std::size_t> node_rows = subset;
        std::vector<BuildNode> queue{{0, 0, node_rows.size(), 0}};

        while (!queue.empty()) {
            const BuildNode nb = queue.back();
            queue.pop_back();
            const std::size_t count = nb.end - nb.begin;

            double g_sum = 0.0, w_sum = 0.0;
            for (std::size_t i = nb.begin; i < nb.end; ++i) {
                const std::size_t row = node_rows[i];
                g_sum += weight[row] * residual[row];
                w_sum += weight[row];
            }

            auto make_leaf = [&]() {
                tree.nodes[static_cast<std::size_t>(nb.node)].feature = -1;
                tree.nodes[static_cast<std::size_t>(nb.node)].value = g_sum / w_sum;
            };

            if (nb.depth >= cfg.max_depth ||
                count < 2 * static_cast<std::size_t>(cfg.min_samples_leaf)) {
                make_leaf();
                continue;
            }

            for (std::size_t f = 0; f < n_feat; ++f)
                std::fill(hist.begin() + static_cast<std::ptrdiff_t>(hist_offset[f]),
                          hist.begin() + static_cast<std::ptrdiff_t>(hist_offset[f + 1]),
                          detail::HistCell{});
            for (std::size_t i = nb.begin; i < nb.end; ++i) {
                const std::size_t row = node_rows[i];
                const double wr = weight[row] * residual[row];
                const double w = weight[row];
                const std::uint16_t* rb = &binned[row * n_feat];
                for (std::size_t f = 0; f < n_feat; ++f) {
                    auto& cell = hist[hist_offset[f] + rb[f]];
                    cell.grad += wr;
                    cell.weight += w;
                    cell.count += 1;
                }
            }

            double best_gain = 1e-12;
            int best_feature = -1;
            int best_bin = -1;
            const double parent_score = g_sum * g_sum / w_sum;
            for (std::size_t f = 0; f < n_feat; ++f) {
                const std::size_t nb_bins = bins.bin_count(f);
                if (nb_bins < 2) continue;
                double g_l = 0.0, w_l = 0.0;
                std::size_t c_l = 0;
                for (std::size_t b = 0; b + 1 < nb_bins; ++b) {
                    const auto& cell = hist[hist_offset[f] + b];
                    g_l += cell.grad;
                    w_l += cell.weight;
                    c_l += cell.count;
                    const std::size_t c_r = count - c_l;
                    if (c_l < static_cast<std::size_t>(cfg.min_samples_leaf) ||
                        c_r < static_cast<std::size_t>(cfg.min_samples_leaf))
                        continue;
                    const double g_r = g_sum - g_l;
                    const double w_r = w_sum - w_l;
                    if (!(w_l > 0.0) || !(w_r > 0.0)) continue;
                    const double gain =
                        g_l * g_l / w_l + g_r * g_r / w_r - parent_score;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_bin = static_cast<int>(b);
                    }
                }
            }

            if (best_feature < 0) {
                make_leaf();
                continue;
            }

            // Partition node rows: bins <= best_bin to the left, keeping
            // ascending row order on both sides.
            std::vector<std::size_t> left_rows, right_rows;
            left_rows.reserve(count);
            for (std::size_t i = nb.begin; i < nb.end; ++i) {
                const std::size_t row = node_rows[i];
                if (binned[row * n_feat + static_cast<std::size_t>(best_feature)] <=
                    static_cast<std::uint16_t>(best_bin))
                    left_rows.push_back(row);
                else
                    right_rows.push_back(row);
            }
            std::copy(left_rows.begin(), left_rows.end(),
                      node_rows.begin() + static_cast<std::ptrdiff_t>(nb.begin));
            std::copy(right_rows.begin(), right_rows.end(),
                      node_rows.begin() + static_cast<std::ptrdiff_t>(nb.begin) +
                          static_cast<std::ptrdiff_t>(left_rows.size()));

            const int left_id = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            split_bin.push_back(-1);
            const int right_id = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            split_bin.push_back(-1);

            auto& node = tree.nodes[static_cast<std::size_t>(nb.node)];
            node.feature = best_feature;
            node.threshold =
                bins.edges[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(best_bin)];
            node.left = left_id;
            node.right = right_id;
            split_bin[static_cast<std::size_t>(nb.node)] = best_bin;

            queue.push_back({right_id, nb.begin + left_rows.size(), nb.end, nb.depth + 1});
            queue.push_back({left_id, nb.begin, nb.begin + left_rows.size(), nb.depth + 1});
        }

        // Covers from the full training set and the prediction update share
        // one binned routing pass per row.
        double sq_err = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            int i = 0;
            const std::uint16_t* rb = &binned[r * n_feat];
            while (true) {
                auto& node = tree.nodes[static_cast<std::size_t>(i)];
                node.cover += 1.0;
                if (node.is_leaf()) break;
                i = rb[node.feature] <= static_cast<std::uint16_t>(
                                            split_bin[static_cast<std::size_t>(i)])
                        ? node.left
                        : node.right;
            }
            pred[r] += cfg.learning_rate * tree.nodes[static_cast<std::size_t>(i)].value;
            residual[r] = m.target[r] - pred[r];
            sq_err += residual[r] * residual[r];
        }
        ens.train_rmse.push_back(std::sqrt(sq_err / static_cast<double>(n)));
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

inline nlohmann::json ensemble_to_json(const TreeEnsemble& e) {
    nlohmann::json j;
    j["format"] = "rsspred-gbdt";
    j["version"] = 1;
    j["base_score"] = e.base_score;
    j["feature_names"] = e.feature_names;
    nlohmann::json cfg;
    cfg["n_estimators"] = e.config.n_estimators;
    cfg["max_depth"] = e.config.max_depth;
    cfg["learning_rate"] = e.config.learning_rate;
    cfg["min_samples_leaf"] = e.config.min_samples_leaf;
    cfg["n_bins"] = e.config.n_bins;
    if (e.config.goss) {
        cfg["goss"] = {{"top_fraction", e.config.goss->top_fraction},
                       {"rand_fraction", e.config.goss->rand_fraction}};
    } else {
        cfg["goss"] = nullptr;
    }
    cfg["seed"] = e.config.seed;
    j["config"] = std::move(cfg);
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : e.trees) {
        nlohmann::json node_arrays;
        auto& feature = node_arrays["feature"] = nlohmann::json::array();
        auto& threshold = node_arrays["threshold"] = nlohmann::json::array();
        auto& left = node_arrays["left"] = nlohmann::json::array();
        auto& right = node_arrays["right"] = nlohmann::json::array();
        auto& cover = node_arrays["cover"] = nlohmann::json::array();
        auto& value = node_arrays["value"] = nlohmann::json::array();
        for (const auto& nd : t.nodes) {
            feature.push_back(nd.feature);
            threshold.push_back(nd.threshold);
            left.push_back(nd.left);
            right.push_back(nd.right);
            cover.push_back(nd.cover);
            value.push_back(nd.value);
        }
        trees.push_back(std::move(node_arrays));
    }
    j["trees"] = std::move(trees);
    return j;
}

inline void save_model(const TreeEnsemble& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open model file for writing: " + path);
    out << ensemble_to_json(e).dump(1) << '\n';
    if (!out) throw IoError("failed writing model file: " + path);
}

inline TreeEnsemble load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": not a valid model file (" + e.what() + ")");
    }
    try {
        if (j.at("format") != "rsspred-gbdt")
            throw FormatError(path + ": not an rsspred-gbdt model file");
        if (j.at("version") != 1)
            throw FormatError(path + ": unsupported model version " +
                              j.at("version").dump());
        TreeEnsemble e;
        e.base_score = j.at("base_score").get<double>();
        e.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        const auto& cfg = j.at("config");
        e.config.n_estimators = cfg.at("n_estimators").get<int>();
        e.config.max_depth = cfg.at("max_depth").get<int>();
        e.config.learning_rate = cfg.at("learning_rate").get<double>();
        e.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
        e.config.n_bins = cfg.at("n_bins").get<int>();
        if (!cfg.at("goss").is_null())
            e.config.goss = GossConfig{cfg.at("goss").at("top_fraction").get<double>(),
                                       cfg.at("goss").at("rand_fraction").get<double>()};
        e.config.seed = cfg.at("seed").get<std::uint64_t>();
        for (const auto& jt : j.at("trees")) {
            Tree t;
            const auto& feature = jt.at("feature");
            const auto& threshold = jt.at("threshold");
            const auto& left = jt.at("left");
            const auto& right = jt.at("right");
            const auto& cover = jt.at("cover");
            const auto& value = jt.at("value");
            const std::size_t n = feature.size();
            if (threshold.size() != n || left.size() != n || right.size() != n ||
                cover.size() != n || value.size() != n)
                throw FormatError(path + ": tree node arrays have mismatched lengths");
            t.nodes.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                t.nodes[i].feature = feature[i].get<int>();
                t.nodes[i].threshold = threshold[i].get<double>();
                t.nodes[i].left = left[i].get<int>();
                t.nodes[i].right = right[i].get<int>();
                t.nodes[i].cover = cover[i].get<double>();
                t.nodes[i].value = value[i].get<double>();
            }
            e.trees.push_back(std::move(t));
        }
        return e;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed model document (" + std::string(e.what()) + ")");
    }
}

// Linear and k-NN reference learners, both on z-scored features.
enum class BaselineKind { Linear, Knn };

struct BaselineModel {
    BaselineKind kind = BaselineKind::Linear;
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<double> weights; // linear: per standardized feature
    double intercept = 0.0;
    std::vector<double> train_z; // knn: standardized training rows
    std::vector<double> train_y;
    int k = 5;
    std::size_t width = 0;

    std::vector<double> predict(const FeatureMatrix& m) const {
        if (m.width() != width)
            throw SchemaError("prediction rows have " + std::to_string(m.width()) +
                              " features, baseline expects " + std::to_string(width));
        std::vector<double> out(m.n_rows, 0.0);
        std::vector<double> z(width);
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            for (std::size_t c = 0; c < width; ++c)
                z[c] = (m.at(r, c) - mean[c]) / stdev[c];
            if (kind == BaselineKind::Linear) {
                double p = intercept;
                for (std::size_t c = 0; c < width; ++c) p += weights[c] * z[c];
                out[r] = p;
            } else {
                const std::size_t n_train = train_y.size();
                dist.clear();
                dist.reserve(n_train);
                for (std::size_t i = 0; i < n_train; ++i) {
                    double sq = 0.0;
                    const double* ti = &train_z[i * width];
                    for (std::size_t c = 0; c < width; ++c) {
                        const double dlt = z[c] - ti[c];
                        sq += dlt * dlt;
                    }
                    dist.emplace_back(sq, i);
                }
                const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), n_train);
                std::partial_sort(dist.begin(),
                                  dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
                double sum = 0.0;
                for (std::size_t i = 0; i < kk; ++i) sum += train_y[dist[i].second];
                out[r] = sum / static_cast<double>(kk);
            }
        }
        return out;
    }
};

namespace detail {

// Gaussian elimination with partial pivoting; the ridge term keeps the
// system well-posed even for constant columns.
inline std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b) {
    const std::size_t p = b.size();
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::fabs(a[r * p + col]) > std::fabs(a[pivot * p + col])) pivot = r;
        if (pivot != col) {
            for (std::size_t c = 0; c < p; ++c) std::swap(a[col * p + c], a[pivot * p + c]);
            std::swap(b[col], b[pivot]);
        }
        const double diag = a[col * p + col];
        if (diag == 0.0) throw DataError("singular system in linear baseline fit");
        for (std::size_t r = col + 1; r < p; ++r) {
            const double factor = a[r * p + col] / diag;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < p; ++c) a[r * p + c] -= factor * a[col * p + c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(p, 0.0);
    for (std::size_t r = p; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < p; ++c) acc -= a[r * p + c] * x[c];
        x[r] = acc / a[r * p + r];
    }
    return x;
}

} // namespace detail

inline BaselineModel fit_baseline(const FeatureMatrix& m, BaselineKind kind, int k = 5) {
    if (m.n_rows == 0) throw DataError("cannot fit a baseline on an empty matrix");
    if (k < 1) throw ConfigError("k must be >= 1");
    const std::size_t p = m.width();
    BaselineModel b;
    b.kind = kind;
    b.k = k;
    b.width = p;
    b.mean.assign(p, 0.0);
    b.stdev.assign(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < m.n_rows; ++r) s += m.at(r, c);
        b.mean[c] = s / static_cast<double>(m.n_rows);
        double ss = 0.0;
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            const double d = m.at(r, c) - b.mean[c];
            ss += d * d;
        }
        b.stdev[c] = std::sqrt(ss / static_cast<double>(m.n_rows));
        if (b.stdev[c] == 0.0) b.stdev[c] = 1.0;
    }

    if (kind == BaselineKind::Knn) {
        b.train_z.resize(m.n_rows * p);
        for (std::size_t r = 0; r < m.n_rows; ++r)
            for (std::size_t c = 0; c < p; ++c)
                b.train_z[r * p + c] = (m.at(r, c) - b.mean[c]) / b.stdev[c];
        b.train_y = m.target;
        return b;
    }

    // Ridge-regularized least squares on [1, z-scored features].
    const std::size_t q = p + 1;
    std::vector<double> xtx(q * q, 0.0);
    std::vector<double> xty(q, 0.0);
    std::vector<double> z(q, 1.0);
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        for (std::size_t c = 0; c < p; ++c) z[c + 1] = (m.at(r, c) - b.mean[c]) / b.stdev[c];
        for (std::size_t i = 0; i < q; ++i) {
            xty[i] += z[i] * m.target[r];
            for (std::size_t j = i; j < q; ++j) xtx[i * q + j] += z[i] * z[j];
        }
    }
    for (std::size_t i = 0; i < q; ++i) {
        for (std::size_t j = 0; j < i; ++j) xtx[i * q + j] = xtx[j * q + i];
        xtx[i * q + i] += 1e-8;
    }
    const auto beta = detail::solve_linear_system(std::move(xtx), std::move(xty));
    b.intercept = beta[0];
    b.weights.assign(beta.begin() + 1, beta.end());
    return b;
}

} // namespace rsspred
