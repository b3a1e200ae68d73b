#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "jico/jico.hpp"
#include "jico/kfold.hpp"

namespace jico {

inline std::vector<double> default_a_grid() {
    std::vector<double> a;
    for (int i = 0; i <= 20; ++i) a.push_back(i * 0.05);
    a.back() = 1.0;
    return a;
}

// Exhaustive search over K in [0, K_max], K_g in [0, Kg_max] (equal across
// groups by default) and the a-grid, scored by K-fold cross-validated
// pooled MSE.
struct SelectionGrid {
    Index K_max = 2;
    Index Kg_max = 2;
    bool equal_Kg = true;
    std::vector<double> a_grid = default_a_grid();
    int folds = 10;
    std::uint64_t seed = 0;
    FitOptions fit_options = {};
};

struct CvCell {
    Index K = 0;
    std::vector<Index> K_g;
    double a = 0.0;
    double mean_mse = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    std::string error;
};

struct CvReport {
    std::vector<CvCell> table;
    std::size_t best = 0;

    const CvCell& best_cell() const { return table[best]; }
};

namespace detail {

inline std::vector<std::vector<Index>> kg_combinations(Index Kg_max, Index G, bool equal) {
    std::vector<std::vector<Index>> out;
    if (equal) {
        for (Index k = 0; k <= Kg_max; ++k) out.emplace_back(G, k);
        return out;
    }
    std::vector<Index> cur(G, 0);
    while (true) {
        out.push_back(cur);
        Index i = 0;
        while (i < G && cur[i] == Kg_max) cur[i++] = 0;
        if (i == G) break;
        ++cur[i];
    }
    return out;
}

inline Index rank_sum(const CvCell& c) {
    return c.K + std::accumulate(c.K_g.begin(), c.K_g.end(), Index{0});
}

}  // namespace detail

inline CvReport cv_grid(const GroupedDataset& dataset, const SelectionGrid& grid) {
    dataset.validate();
    if (grid.folds < 2) throw Error("cv_grid: need at least 2 folds");
    for (double a : grid.a_grid)
        if (a < 0.0 || a > 1.0) throw Error("cv_grid: a values must lie in [0,1]");

    const auto folds = kfold_split(dataset, grid.folds, grid.seed);
    const auto kg_combos = detail::kg_combinations(grid.Kg_max, dataset.n_groups(), grid.equal_Kg);

    CvReport report;
    for (Index K = 0; K <= grid.K_max; ++K) {
        for (const auto& kg : kg_combos) {
            for (double a : grid.a_grid) {
                CvCell cell;
                cell.K = K;
                cell.K_g = kg;
                cell.a = a;
                try {
                    const double gamma = gamma_from_a(a);
                    std::vector<double> fold_mse;
                    double sq_sum = 0.0;
                    Index n_total = 0;
                    for (const auto& [train, valid] : folds) {
                        const JicoModel m = fit(train, K, kg, gamma, grid.fit_options);
                        double fold_sq = 0.0;
                        Index fold_n = 0;
                        for (Index g = 0; g < valid.n_groups(); ++g) {
                            const VectorXd pred = predict(m, valid.groups[g].X, g);
                            fold_sq += (pred - valid.groups[g].y).squaredNorm();
                            fold_n += pred.size();
                        }
                        fold_mse.push_back(fold_sq / static_cast<double>(fold_n));
                        sq_sum += fold_sq;
                        n_total += fold_n;
                    }
                    cell.mean_mse = 0.0;
                    for (double v : fold_mse) cell.mean_mse += v;
                    cell.mean_mse /= static_cast<double>(fold_mse.size());
                    double var = 0.0;
                    for (double v : fold_mse) var += (v - cell.mean_mse) * (v - cell.mean_mse);
                    var /= std::max<std::size_t>(1, fold_mse.size() - 1);
                    cell.std_error = std::sqrt(var / static_cast<double>(fold_mse.size()));
                } catch (const Error& e) {
                    cell.failed = true;
                    cell.error = e.what();
                }
                report.table.push_back(std::move(cell));
            }
        }
    }

    bool any = false;
    for (std::size_t i = 0; i < report.table.size(); ++i) {
        const auto& c = report.table[i];
        if (c.failed) continue;
        if (!any) {
            any = true;
            report.best = i;
            continue;
        }
        const auto& b = report.table[report.best];
        // Ties go to the smaller total rank, then the smaller a.
        if (c.mean_mse < b.mean_mse ||
            (c.mean_mse == b.mean_mse &&
             (detail::rank_sum(c) < detail::rank_sum(b) ||
              (detail::rank_sum(c) == detail::rank_sum(b) && c.a < b.a))))
            report.best = i;
    }
    if (!any) throw Error("cv_grid: every grid cell failed");
    return report;
}

}  // namespace jico
