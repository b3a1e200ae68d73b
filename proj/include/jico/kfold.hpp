#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "jico/grouped_data.hpp"
#include "jico/rng.hpp"

namespace jico {

// Deterministic stratified K-fold split: each group's rows are shuffled with
// a stream keyed by (seed, group) and dealt round-robin into folds, so the
// validation folds partition every group exactly.
inline std::vector<std::pair<GroupedDataset, GroupedDataset>> kfold_split(
    const GroupedDataset& dataset, int folds, std::uint64_t seed) {
    dataset.validate();
    if (folds < 2) throw Error("kfold_split: need at least 2 folds");
    for (Index g = 0; g < dataset.n_groups(); ++g)
        if (dataset.groups[g].X.rows() < folds)
            throw Error("kfold_split: group " + std::to_string(g) + " has fewer than " +
                        std::to_string(folds) + " samples");

    const Index G = dataset.n_groups();
    // fold assignment per group row
    std::vector<std::vector<int>> assignment(G);
    for (Index g = 0; g < G; ++g) {
        const Index ng = dataset.groups[g].X.rows();
        std::vector<Index> idx(ng);
        std::iota(idx.begin(), idx.end(), Index{0});
        NormalStream rng(seed, 0, static_cast<std::uint64_t>(g), StreamPurpose::FoldShuffle);
        // Fisher-Yates with the deterministic stream.
        for (Index i = ng - 1; i > 0; --i) {
            const Index j = static_cast<Index>(rng.raw() % static_cast<std::uint64_t>(i + 1));
            std::swap(idx[i], idx[j]);
        }
        assignment[g].resize(ng);
        for (Index pos = 0; pos < ng; ++pos)
            assignment[g][idx[pos]] = static_cast<int>(pos % folds);
    }

    std::vector<std::pair<GroupedDataset, GroupedDataset>> out;
    out.reserve(folds);
    for (int f = 0; f < folds; ++f) {
        GroupedDataset train, valid;
        for (Index g = 0; g < G; ++g) {
            const auto& grp = dataset.groups[g];
            const Index ng = grp.X.rows();
            std::vector<Index> tr, va;
            for (Index i = 0; i < ng; ++i)
                (assignment[g][i] == f ? va : tr).push_back(i);
            Group gtrain{MatrixXd(tr.size(), grp.X.cols()), VectorXd(tr.size()), grp.label};
            Group gvalid{MatrixXd(va.size(), grp.X.cols()), VectorXd(va.size()), grp.label};
            for (std::size_t i = 0; i < tr.size(); ++i) {
                gtrain.X.row(i) = grp.X.row(tr[i]);
                gtrain.y[i] = grp.y[tr[i]];
            }
            for (std::size_t i = 0; i < va.size(); ++i) {
                gvalid.X.row(i) = grp.X.row(va[i]);
                gvalid.y[i] = grp.y[va[i]];
            }
            train.groups.push_back(std::move(gtrain));
            valid.groups.push_back(std::move(gvalid));
        }
        out.emplace_back(std::move(train), std::move(valid));
    }
    return out;
}

}  // namespace jico
