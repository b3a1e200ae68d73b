#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "jico/continuum.hpp"
#include "jico/errors.hpp"
#include "jico/grouped_data.hpp"
#include "jico/kfold.hpp"

namespace jico {

// Reference regressors used for the benchmark tables: ridge with a
// cross-validated penalty, and PLS / PCR as single-block continuum fits at
// gamma = 1 and gamma = infinity.
enum class BaselineKind { Ridge, Pls, Pcr };
enum class Scope { Global, GroupSpecific };

struct BaselineOptions {
    BaselineKind kind = BaselineKind::Ridge;
    Scope scope = Scope::Global;
    Index components = 2;       // PLS / PCR
    double lambda = -1.0;       // ridge; negative means cross-validate
    int cv_folds = 10;
    std::uint64_t cv_seed = 0;
};

// One linear predictor block: yhat = y_mean + (x - x_means)' beta.
struct LinearBlock {
    VectorXd beta;
    VectorXd x_means;
    double y_mean = 0.0;
};

struct BaselineModel {
    BaselineKind kind = BaselineKind::Ridge;
    Scope scope = Scope::Global;
    std::vector<LinearBlock> blocks;  // one for Global, one per group otherwise
    double lambda = 0.0;              // chosen ridge penalty (global scope)
};

namespace detail {

// Ridge path through the thin SVD: beta(lambda) = V diag(s/(s^2+lambda)) U'y.
struct RidgeSvd {
    MatrixXd V;
    MatrixXd U;
    VectorXd s;

    explicit RidgeSvd(const MatrixXd& X) {
        Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
        V = svd.matrixV();
        U = svd.matrixU();
        s = svd.singularValues();
    }

    VectorXd beta(const VectorXd& y, double lambda) const {
        const VectorXd uty = U.transpose() * y;
        const VectorXd scaled =
            (s.array() / (s.array().square() + lambda)).matrix().asDiagonal() * uty;
        return V * scaled;
    }
};

inline std::vector<double> ridge_lambda_grid(const MatrixXd& Xc, int size = 25) {
    // log-spaced in [1e-4, 1e4] scaled by mean(diag(X'X)) / p
    const double scale = Xc.squaredNorm() / static_cast<double>(Xc.cols() * Xc.cols());
    std::vector<double> grid(size);
    for (int i = 0; i < size; ++i) {
        const double t = size == 1 ? 0.0 : static_cast<double>(i) / (size - 1);
        grid[i] = scale * std::pow(10.0, -4.0 + 8.0 * t);
    }
    return grid;
}

inline LinearBlock fit_ridge_block(const MatrixXd& X, const VectorXd& y,
                                   const BaselineOptions& opt, double* lambda_out) {
    LinearBlock blk;
    blk.x_means = X.colwise().mean().transpose();
    blk.y_mean = y.mean();
    const MatrixXd Xc = X.rowwise() - blk.x_means.transpose();
    const VectorXd yc = y.array() - blk.y_mean;

    double lambda = opt.lambda;
    if (lambda < 0.0) {
        const auto grid = ridge_lambda_grid(Xc);
        const int folds = std::min<int>(opt.cv_folds, static_cast<int>(X.rows()));
        if (folds < 2) throw Error("ridge: too few rows to cross-validate");
        // Deterministic row shuffle, then round-robin folds.
        std::vector<Index> idx(X.rows());
        std::iota(idx.begin(), idx.end(), Index{0});
        NormalStream rng(opt.cv_seed, 0, 0, StreamPurpose::FoldShuffle);
        for (Index i = X.rows() - 1; i > 0; --i) {
            const Index j = static_cast<Index>(rng.raw() % static_cast<std::uint64_t>(i + 1));
            std::swap(idx[i], idx[j]);
        }
        std::vector<double> cv_sq(grid.size(), 0.0);
        for (int f = 0; f < folds; ++f) {
            std::vector<Index> tr, va;
            for (Index i = 0; i < X.rows(); ++i)
                (static_cast<int>(i % folds) == f ? va : tr).push_back(idx[i]);
            MatrixXd Xtr(tr.size(), X.cols()), Xva(va.size(), X.cols());
            VectorXd ytr(tr.size()), yva(va.size());
            for (std::size_t i = 0; i < tr.size(); ++i) {
                Xtr.row(i) = Xc.row(tr[i]);
                ytr[i] = yc[tr[i]];
            }
            for (std::size_t i = 0; i < va.size(); ++i) {
                Xva.row(i) = Xc.row(va[i]);
                yva[i] = yc[va[i]];
            }
            const RidgeSvd svd(Xtr);
            for (std::size_t l = 0; l < grid.size(); ++l) {
                const VectorXd b = svd.beta(ytr, grid[l]);
                cv_sq[l] += (Xva * b - yva).squaredNorm();
            }
        }
        std::size_t best = 0;
        for (std::size_t l = 1; l < grid.size(); ++l)
            if (cv_sq[l] < cv_sq[best]) best = l;
        lambda = grid[best];
    }
    const RidgeSvd svd(Xc);
    blk.beta = svd.beta(yc, lambda);
    if (lambda_out) *lambda_out = lambda;
    return blk;
}

inline LinearBlock fit_cr_block(const MatrixXd& X, const VectorXd& y, double gamma,
                                Index components) {
    LinearBlock blk;
    blk.x_means = X.colwise().mean().transpose();
    blk.y_mean = y.mean();
    const MatrixXd Xc = X.rowwise() - blk.x_means.transpose();
    const VectorXd yc = y.array() - blk.y_mean;

    const Extraction ext = extract_directions(Xc, yc, gamma, components);
    if (ext.count() == 0) {
        blk.beta = VectorXd::Zero(X.cols());
        return blk;
    }
    const MatrixXd S = Xc * ext.W;
    const VectorXd coef = S.completeOrthogonalDecomposition().solve(yc);
    blk.beta = ext.W * coef;
    return blk;
}

}  // namespace detail

inline BaselineModel fit_baseline(const GroupedDataset& dataset, const BaselineOptions& opt) {
    dataset.validate();
    BaselineModel model;
    model.kind = opt.kind;
    model.scope = opt.scope;

    const auto fit_block = [&](const MatrixXd& X, const VectorXd& y) {
        switch (opt.kind) {
            case BaselineKind::Ridge:
                return detail::fit_ridge_block(X, y, opt, &model.lambda);
            case BaselineKind::Pls:
                return detail::fit_cr_block(X, y, 1.0, opt.components);
            case BaselineKind::Pcr:
                return detail::fit_cr_block(X, y, std::numeric_limits<double>::infinity(),
                                            opt.components);
        }
        throw Error("unreachable");
    };

    if (opt.scope == Scope::Global) {
        const StackedData s = stack(dataset);
        model.blocks.push_back(fit_block(s.X, s.y));
    } else {
        for (const auto& grp : dataset.groups)
            model.blocks.push_back(fit_block(grp.X, grp.y));
    }
    return model;
}

inline VectorXd predict_baseline(const BaselineModel& model, const MatrixXd& X_new,
                                 Index group = -1) {
    const LinearBlock* blk = nullptr;
    if (model.scope == Scope::Global) {
        blk = &model.blocks.front();
    } else {
        if (group < 0 || group >= static_cast<Index>(model.blocks.size()))
            throw Error("predict_baseline: group index required for a group-specific model");
        blk = &model.blocks[static_cast<std::size_t>(group)];
    }
    if (X_new.cols() != blk->x_means.size())
        throw DimensionError("predict_baseline: column count mismatch");
    const MatrixXd Xc = X_new.rowwise() - blk->x_means.transpose();
    return (Xc * blk->beta).array() + blk->y_mean;
}

}  // namespace jico
