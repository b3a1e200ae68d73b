#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "jico/errors.hpp"

namespace jico {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One group's design matrix and response. All groups of a dataset share the
// same column count p; rows are samples.
struct Group {
    MatrixXd X;
    VectorXd y;
    std::string label;
};

struct GroupedDataset {
    std::vector<Group> groups;

    Index n_groups() const { return static_cast<Index>(groups.size()); }
    Index n_cols() const { return groups.empty() ? 0 : groups.front().X.cols(); }
    Index n_rows() const {
        Index n = 0;
        for (const auto& g : groups) n += g.X.rows();
        return n;
    }
    Index min_group_rows() const {
        Index m = groups.empty() ? 0 : groups.front().X.rows();
        for (const auto& g : groups) m = std::min(m, g.X.rows());
        return m;
    }

    void validate() const {
        if (groups.empty()) throw DimensionError("dataset has no groups");
        const Index p = groups.front().X.cols();
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& grp = groups[g];
            if (grp.X.rows() < 1)
                throw DimensionError("group " + std::to_string(g) + " has no rows");
            if (grp.X.cols() != p)
                throw DimensionError("group " + std::to_string(g) + " has " +
                                     std::to_string(grp.X.cols()) + " columns, expected " +
                                     std::to_string(p));
            if (grp.y.size() != grp.X.rows())
                throw DimensionError("group " + std::to_string(g) +
                                     " response length does not match row count");
        }
    }
};

// Column means of the stacked X and mean of the stacked Y, removed before
// fitting and re-applied at prediction time.
struct CenteringInfo {
    VectorXd x_means;  // size p
    double y_mean = 0.0;
};

// Removes the stacked (global) means from every group. Per-group centering is
// available behind a flag for experimentation; the default is global.
inline std::pair<GroupedDataset, CenteringInfo> center(const GroupedDataset& dataset,
                                                       bool per_group = false) {
    dataset.validate();
    const Index p = dataset.n_cols();

    GroupedDataset out = dataset;
    CenteringInfo info;

    if (per_group) {
        // Stored means are still the stacked ones so prediction stays well defined.
        info.x_means = VectorXd::Zero(p);
        double ysum = 0.0;
        Index n = 0;
        for (const auto& g : dataset.groups) {
            info.x_means += g.X.colwise().sum().transpose();
            ysum += g.y.sum();
            n += g.X.rows();
        }
        info.x_means /= static_cast<double>(n);
        info.y_mean = ysum / static_cast<double>(n);
        for (auto& g : out.groups) {
            g.X.rowwise() -= g.X.colwise().mean();
            g.y.array() -= g.y.mean();
        }
        return {std::move(out), info};
    }

    VectorXd xsum = VectorXd::Zero(p);
    double ysum = 0.0;
    Index n = 0;
    for (const auto& g : dataset.groups) {
        xsum += g.X.colwise().sum().transpose();
        ysum += g.y.sum();
        n += g.X.rows();
    }
    info.x_means = xsum / static_cast<double>(n);
    info.y_mean = ysum / static_cast<double>(n);

    for (auto& g : out.groups) {
        g.X.rowwise() -= info.x_means.transpose();
        g.y.array() -= info.y_mean;
    }
    return {std::move(out), info};
}

struct StackedData {
    MatrixXd X;                    // n x p, groups in order
    VectorXd y;                    // n
    Eigen::VectorXi group_index;   // n, row -> group
};

// X = [X_1', ..., X_G']' with group order then within-group order preserved.
inline StackedData stack(const GroupedDataset& dataset) {
    dataset.validate();
    const Index n = dataset.n_rows();
    const Index p = dataset.n_cols();
    StackedData s;
    s.X.resize(n, p);
    s.y.resize(n);
    s.group_index.resize(n);
    Index row = 0;
    for (Index g = 0; g < dataset.n_groups(); ++g) {
        const auto& grp = dataset.groups[g];
        const Index ng = grp.X.rows();
        s.X.middleRows(row, ng) = grp.X;
        s.y.segment(row, ng) = grp.y;
        s.group_index.segment(row, ng).setConstant(static_cast<int>(g));
        row += ng;
    }
    return s;
}

inline GroupedDataset unstack(const StackedData& s, const std::vector<std::string>& labels = {}) {
    GroupedDataset out;
    if (s.X.rows() == 0) return out;
    const int n_groups = s.group_index.maxCoeff() + 1;
    for (int g = 0; g < n_groups; ++g) {
        Index count = 0;
        for (Index i = 0; i < s.group_index.size(); ++i)
            if (s.group_index[i] == g) ++count;
        Group grp;
        grp.X.resize(count, s.X.cols());
        grp.y.resize(count);
        grp.label = g < static_cast<int>(labels.size()) ? labels[g] : "g" + std::to_string(g + 1);
        Index row = 0;
        for (Index i = 0; i < s.group_index.size(); ++i) {
            if (s.group_index[i] == g) {
                grp.X.row(row) = s.X.row(i);
                grp.y[row] = s.y[i];
                ++row;
            }
        }
        out.groups.push_back(std::move(grp));
    }
    return out;
}

// Current joint/individual latent blocks of an in-progress or finished fit.
// Any block may have zero columns.
struct LatentState {
    MatrixXd W;                    // p x K joint weights
    MatrixXd S;                    // n x K joint scores, stacked
    MatrixXd U;                    // K x p joint loadings
    VectorXd alpha;                // K
    std::vector<MatrixXd> W_g;     // p x K_g
    std::vector<MatrixXd> T_g;     // n_g x K_g
    std::vector<MatrixXd> U_g;     // K_g x p
    std::vector<VectorXd> alpha_g; // K_g
};

// The residualized data both half-steps of the fit consume:
//   X_joint rows of group g are X_g - T_g U_g, Y_joint entries Y_g - T_g alpha_g,
//   X_indiv[g] = X_g - S_g U, Y_indiv[g] = Y_g - S_g alpha.
struct ResidualView {
    MatrixXd X_joint;              // n x p
    VectorXd Y_joint;              // n
    std::vector<MatrixXd> X_indiv; // per group, n_g x p
    std::vector<VectorXd> Y_indiv; // per group, n_g
};

inline ResidualView residual_view(const GroupedDataset& dataset, const LatentState& state) {
    dataset.validate();
    const Index G = dataset.n_groups();
    const Index p = dataset.n_cols();
    const Index n = dataset.n_rows();

    const Index K = state.W.cols();
    if (state.S.cols() != K || state.U.rows() != K || state.alpha.size() != K)
        throw DimensionError("joint state blocks disagree on K");
    if (K > 0 && (state.U.cols() != p || state.S.rows() != n))
        throw DimensionError("joint state blocks do not match dataset dimensions");
    if (static_cast<Index>(state.T_g.size()) != G || static_cast<Index>(state.U_g.size()) != G ||
        static_cast<Index>(state.alpha_g.size()) != G)
        throw DimensionError("individual state blocks do not cover all groups");

    ResidualView view;
    view.X_joint.resize(n, p);
    view.Y_joint.resize(n);
    view.X_indiv.resize(G);
    view.Y_indiv.resize(G);

    Index row = 0;
    for (Index g = 0; g < G; ++g) {
        const auto& grp = dataset.groups[g];
        const Index ng = grp.X.rows();
        const Index Kg = state.T_g[g].cols();
        if (state.U_g[g].rows() != Kg || state.alpha_g[g].size() != Kg)
            throw DimensionError("individual state blocks disagree on K_g for group " +
                                 std::to_string(g));
        if (Kg > 0 && (state.T_g[g].rows() != ng || state.U_g[g].cols() != p))
            throw DimensionError("individual state blocks do not match group " +
                                 std::to_string(g));

        if (Kg > 0) {
            view.X_joint.middleRows(row, ng) = grp.X - state.T_g[g] * state.U_g[g];
            view.Y_joint.segment(row, ng) = grp.y - state.T_g[g] * state.alpha_g[g];
        } else {
            view.X_joint.middleRows(row, ng) = grp.X;
            view.Y_joint.segment(row, ng) = grp.y;
        }

        if (K > 0) {
            const MatrixXd Sg = state.S.middleRows(row, ng);
            view.X_indiv[g] = grp.X - Sg * state.U;
            view.Y_indiv[g] = grp.y - Sg * state.alpha;
        } else {
            view.X_indiv[g] = grp.X;
            view.Y_indiv[g] = grp.y;
        }
        row += ng;
    }
    return view;
}

}  // namespace jico
