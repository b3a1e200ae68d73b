#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jico/continuum.hpp"
#include "jico/errors.hpp"
#include "jico/grouped_data.hpp"
#include "jico/kfold.hpp"

namespace jico {

// Per-iteration CR objective values: one entry per joint component and one
// vector per group for the individual components. At the PCR end (infinite
// gamma) entries are the variances of the component scores.
struct ObjectiveVectors {
    VectorXd joint;
    std::vector<VectorXd> individual;
};

inline bool shapes_match(const ObjectiveVectors& a, const ObjectiveVectors& b) {
    if (a.joint.size() != b.joint.size()) return false;
    if (a.individual.size() != b.individual.size()) return false;
    for (std::size_t g = 0; g < a.individual.size(); ++g)
        if (a.individual[g].size() != b.individual[g].size()) return false;
    return true;
}

// True iff the Euclidean distance between the joint vectors and between every
// group's individual vector is within tol.
inline bool converged(const ObjectiveVectors& prev, const ObjectiveVectors& curr, double tol) {
    if (!shapes_match(prev, curr)) throw DimensionError("converged: objective shapes differ");
    if ((prev.joint - curr.joint).norm() > tol) return false;
    for (std::size_t g = 0; g < prev.individual.size(); ++g)
        if ((prev.individual[g] - curr.individual[g]).norm() > tol) return false;
    return true;
}

// Objective values for a set of directions on (X, Y):
//   (w'X'Xw)^(gamma-1) (w'X'Y)^2, or w'X'Xw alone when gamma is infinite.
inline VectorXd objective_vector(const MatrixXd& X, const VectorXd& Y, const MatrixXd& W,
                                 double gamma) {
    VectorXd out(W.cols());
    for (Index k = 0; k < W.cols(); ++k) {
        const VectorXd score = X * W.col(k);
        const double var = score.squaredNorm();
        if (std::isinf(gamma)) {
            out(k) = var;
        } else {
            const double cov = score.dot(Y);
            out(k) = gamma == 0.0 ? cov * cov / var : cov * cov * std::pow(var, gamma - 1.0);
        }
    }
    return out;
}

// Objective vectors of an arbitrary latent state, evaluated on the state's
// own residual views.
inline ObjectiveVectors objective_vectors(const GroupedDataset& centered, const LatentState& state,
                                          double gamma) {
    const ResidualView view = residual_view(centered, state);
    ObjectiveVectors out;
    out.joint = objective_vector(view.X_joint, view.Y_joint, state.W, gamma);
    out.individual.resize(state.W_g.size());
    for (std::size_t g = 0; g < state.W_g.size(); ++g)
        out.individual[g] = objective_vector(view.X_indiv[g], view.Y_indiv[g], state.W_g[g], gamma);
    return out;
}

// Initial value of the individual matrices. ZeroIndividual is the plain
// algorithm; ConstantIndividual starts from an all-constant matrix;
// JointWarmStart runs a zero-start fit first and seeds the individual
// matrices with its estimated joint structure.
struct InitStrategy {
    enum class Kind { ZeroIndividual, ConstantIndividual, JointWarmStart };
    Kind kind = Kind::ZeroIndividual;
    double value = 0.0;

    static InitStrategy zero() { return {Kind::ZeroIndividual, 0.0}; }
    static InitStrategy constant(double v) { return {Kind::ConstantIndividual, v}; }
    static InitStrategy joint_warm_start() { return {Kind::JointWarmStart, 0.0}; }

    std::string name() const {
        switch (kind) {
            case Kind::ZeroIndividual: return "zero";
            case Kind::ConstantIndividual: return "constant(" + std::to_string(value) + ")";
            case Kind::JointWarmStart: return "joint-warm-start";
        }
        return "?";
    }
};

// Global removes the stacked means once before fitting (the default);
// PerGroup centers each group on its own means; None assumes the data are
// already mean zero and stores zero offsets.
enum class CenteringMode { Global, PerGroup, None };

// AlternatingResiduals runs the alternation exactly as the pseudo code
// states it: each half-step solves the plain CR problem on its residualized
// data, and the joint/individual coupling comes from the residualization
// alone. Identifiability additionally enforces the cross-orthogonality
// constraint families (weight and score) inside every CR solve, which makes
// the uniqueness conditions hold to machine precision but pulls the fit away
// from data generated without regard for those conditions.
enum class ConstraintMode { AlternatingResiduals, Identifiability };

struct FitOptions {
    double tol = 1e-6;
    int max_iter = 300;
    InitStrategy init = InitStrategy::zero();
    CenteringMode centering = CenteringMode::Global;
    ConstraintMode constraints = ConstraintMode::AlternatingResiduals;
};

struct JicoModel {
    double gamma = 0.0;               // may be +infinity
    Index requested_K = 0;
    std::vector<Index> requested_K_g;
    MatrixXd W;                       // p x K
    std::vector<MatrixXd> W_g;        // p x K_g
    MatrixXd U;                       // K x p
    std::vector<MatrixXd> U_g;        // K_g x p
    VectorXd alpha;                   // K
    std::vector<VectorXd> alpha_g;    // K_g
    MatrixXd S;                       // n x K converged joint scores (stacked)
    std::vector<MatrixXd> T_g;        // n_g x K_g converged individual scores
    CenteringInfo centering;
    std::vector<std::string> group_labels;
    std::vector<ObjectiveVectors> history;
    bool converged = false;
    int n_iter = 0;
    double tol = 0.0;
    double max_fp_residual = 0.0;     // worst relative fixed-point residual seen
    bool truncated = false;           // some rank was reduced by degeneracy
    bool pinv_used = false;

    double a() const { return a_from_gamma(gamma); }
    Index K() const { return W.cols(); }
    Index K_g(Index g) const { return W_g[static_cast<std::size_t>(g)].cols(); }
    Index n_groups() const { return static_cast<Index>(W_g.size()); }
    Index p() const { return W.rows() > 0 ? W.rows() : centering.x_means.size(); }

    Index group_of(const std::string& label) const {
        for (std::size_t g = 0; g < group_labels.size(); ++g)
            if (group_labels[g] == label) return static_cast<Index>(g);
        throw Error("unknown group label '" + label + "'");
    }
};

namespace detail {

// (W'W)^{-1} W' with a pseudo-inverse fallback for near-dependent columns.
inline MatrixXd loading_of(const MatrixXd& W) {
    if (W.cols() == 0) return MatrixXd(0, W.rows());
    const MatrixXd G = W.transpose() * W;
    Eigen::LDLT<MatrixXd> ldlt(G);
    if (ldlt.info() == Eigen::Success) {
        MatrixXd U = ldlt.solve(W.transpose());
        if (((G * U - W.transpose()).norm()) <= 1e-8 * W.norm() + 1e-300) return U;
    }
    return G.completeOrthogonalDecomposition().solve(W.transpose());
}

// Least-squares coefficients (S'S)^{-1} S' y, pseudo-inverse on deficiency.
inline VectorXd regress(const MatrixXd& S, const VectorXd& y) {
    if (S.cols() == 0) return VectorXd(0);
    return S.completeOrthogonalDecomposition().solve(y);
}

inline void check_exhaustion(const Extraction& ext, const std::string& stage) {
    if (ext.warning == ExtractWarning::RankExhausted)
        throw FitError("fit failed at " + stage + ", component " +
                       std::to_string(ext.count() + 1) + ": rank exhausted");
}

}  // namespace detail

// The alternating joint/individual estimation. Each iteration first extracts
// joint directions from the stacked joint residuals under the individual
// orthogonality constraints, then per group extracts individual directions
// from the individual residuals under the joint constraints, and stops when
// consecutive objective vectors move less than tol.
inline JicoModel fit(const GroupedDataset& dataset, Index K, std::vector<Index> K_g, double gamma,
                     const FitOptions& options = {}) {
    dataset.validate();
    const Index G = dataset.n_groups();
    const Index p = dataset.n_cols();
    if (static_cast<Index>(K_g.size()) != G)
        throw DimensionError("fit: K_g must have one entry per group");
    if (K < 0) throw Error("fit: K must be nonnegative");
    Index max_kg = 0;
    for (Index kg : K_g) {
        if (kg < 0) throw Error("fit: K_g must be nonnegative");
        max_kg = std::max(max_kg, kg);
    }
    if (K + max_kg >= dataset.min_group_rows())
        throw Error("fit: K + max K_g must be smaller than the smallest group");

    GroupedDataset centered;
    CenteringInfo info;
    if (options.centering == CenteringMode::None) {
        centered = dataset;
        info.x_means = VectorXd::Zero(p);
        info.y_mean = 0.0;
    } else {
        std::tie(centered, info) = center(dataset, options.centering == CenteringMode::PerGroup);
    }
    const Index n = centered.n_rows();

    std::vector<Index> offsets(G);
    {
        Index row = 0;
        for (Index g = 0; g < G; ++g) {
            offsets[g] = row;
            row += centered.groups[g].X.rows();
        }
    }

    // Initial individual matrices (the X offsets used by the first joint step).
    std::vector<MatrixXd> init_indiv(G);
    if (options.init.kind == InitStrategy::Kind::ConstantIndividual) {
        for (Index g = 0; g < G; ++g)
            init_indiv[g] = MatrixXd::Constant(centered.groups[g].X.rows(), p,
                                               options.init.value);
    } else if (options.init.kind == InitStrategy::Kind::JointWarmStart) {
        FitOptions warm_opts = options;
        warm_opts.init = InitStrategy::zero();
        const JicoModel warm = fit(dataset, K, K_g, gamma, warm_opts);
        for (Index g = 0; g < G; ++g)
            init_indiv[g] = (centered.groups[g].X * warm.W) * warm.U;
    }

    LatentState state;
    state.W.resize(p, 0);
    state.S.resize(n, 0);
    state.U.resize(0, p);
    state.alpha.resize(0);
    state.W_g.assign(G, MatrixXd(p, 0));
    state.T_g.resize(G);
    state.U_g.assign(G, MatrixXd(0, p));
    state.alpha_g.assign(G, VectorXd(0));
    for (Index g = 0; g < G; ++g) state.T_g[g].resize(centered.groups[g].X.rows(), 0);

    JicoModel model;
    model.gamma = gamma;
    model.requested_K = K;
    model.requested_K_g = K_g;
    model.centering = info;
    model.tol = options.tol;
    for (const auto& grp : centered.groups) model.group_labels.push_back(grp.label);

    MatrixXd X_joint(n, p);
    VectorXd Y_joint(n);

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        // Joint residuals; on the first pass the configured initial
        // individual matrices stand in for T_g U_g.
        for (Index g = 0; g < G; ++g) {
            const auto& grp = centered.groups[g];
            const Index ng = grp.X.rows();
            if (iter == 1 && init_indiv[g].size() > 0) {
                X_joint.middleRows(offsets[g], ng) = grp.X - init_indiv[g];
            } else if (state.T_g[g].cols() > 0) {
                X_joint.middleRows(offsets[g], ng) = grp.X - state.T_g[g] * state.U_g[g];
            } else {
                X_joint.middleRows(offsets[g], ng) = grp.X;
            }
            if (state.T_g[g].cols() > 0)
                Y_joint.segment(offsets[g], ng) = grp.y - state.T_g[g] * state.alpha_g[g];
            else
                Y_joint.segment(offsets[g], ng) = grp.y;
        }

        ObjectiveVectors obj;
        obj.individual.resize(G);

        if (K > 0) {
            CrConstraints cons;
            cons.weight_orth.resize(p, 0);
            cons.score_orth.resize(n, 0);
            if (options.constraints == ConstraintMode::Identifiability) {
                Index kc = 0, ks = 0;
                for (Index g = 0; g < G; ++g) {
                    kc += state.W_g[g].cols();
                    ks += state.T_g[g].cols();
                }
                cons.weight_orth.resize(p, kc);
                cons.score_orth = MatrixXd::Zero(n, ks);
                Index cw = 0, cs = 0;
                for (Index g = 0; g < G; ++g) {
                    const Index kg = state.W_g[g].cols();
                    if (kg == 0) continue;
                    cons.weight_orth.middleCols(cw, kg) = state.W_g[g];
                    cons.score_orth.block(offsets[g], cs, state.T_g[g].rows(), kg) = state.T_g[g];
                    cw += kg;
                    cs += kg;
                }
            }
            Extraction ext = extract_directions(X_joint, Y_joint, gamma, K, cons);
            detail::check_exhaustion(ext, "joint stage");
            if (ext.count() < K) model.truncated = true;
            model.pinv_used = model.pinv_used || ext.pinv_used;
            for (const auto& dir : ext.directions)
                model.max_fp_residual = std::max(model.max_fp_residual, dir.fp_residual);
            state.W = ext.W;
            state.S = X_joint * state.W;
            state.U = detail::loading_of(state.W);
            state.alpha = detail::regress(state.S, Y_joint);
        }
        obj.joint = objective_vector(X_joint, Y_joint, state.W, gamma);

        for (Index g = 0; g < G; ++g) {
            const auto& grp = centered.groups[g];
            const Index ng = grp.X.rows();
            const MatrixXd Sg = state.S.middleRows(offsets[g], ng);
            const MatrixXd X_ind =
                state.W.cols() > 0 ? MatrixXd(grp.X - Sg * state.U) : grp.X;
            const VectorXd Y_ind =
                state.W.cols() > 0 ? VectorXd(grp.y - Sg * state.alpha) : grp.y;

            if (K_g[g] > 0) {
                CrConstraints cons;
                cons.weight_orth = state.W;
                cons.score_orth = Sg;
                Extraction ext = extract_directions(X_ind, Y_ind, gamma, K_g[g], cons);
                detail::check_exhaustion(ext, "group " + std::to_string(g + 1) + " stage");
                if (ext.count() < K_g[g]) model.truncated = true;
                model.pinv_used = model.pinv_used || ext.pinv_used;
                for (const auto& dir : ext.directions)
                    model.max_fp_residual = std::max(model.max_fp_residual, dir.fp_residual);
                state.W_g[g] = ext.W;
                state.T_g[g] = X_ind * state.W_g[g];
                state.U_g[g] = detail::loading_of(state.W_g[g]);
                state.alpha_g[g] = detail::regress(state.T_g[g], Y_ind);
            }
            obj.individual[g] = objective_vector(X_ind, Y_ind, state.W_g[g], gamma);
        }

        model.history.push_back(obj);
        model.n_iter = iter;
        if (model.history.size() >= 2) {
            const auto& prev = model.history[model.history.size() - 2];
            if (shapes_match(prev, obj) && converged(prev, obj, options.tol)) {
                model.converged = true;
                break;
            }
        }
    }

    model.W = state.W;
    model.W_g = state.W_g;
    model.U = state.U;
    model.U_g = state.U_g;
    model.alpha = state.alpha;
    model.alpha_g = state.alpha_g;
    model.S = state.S;
    model.T_g = state.T_g;
    return model;
}

inline JicoModel fit(const GroupedDataset& dataset, Index K, Index K_g_all, double gamma,
                     const FitOptions& options = {}) {
    return fit(dataset, K, std::vector<Index>(dataset.groups.size(), K_g_all), gamma, options);
}

// Prediction for new rows of one group: center with the stored means, then
// y_mean + X W alpha + X W_g alpha_g.
inline VectorXd predict(const JicoModel& model, const MatrixXd& X_new, Index group) {
    if (group < 0 || group >= model.n_groups()) throw Error("predict: group index out of range");
    if (X_new.cols() != model.centering.x_means.size())
        throw DimensionError("predict: X has " + std::to_string(X_new.cols()) +
                             " columns, model expects " +
                             std::to_string(model.centering.x_means.size()));
    const MatrixXd Xc = X_new.rowwise() - model.centering.x_means.transpose();
    VectorXd yhat = VectorXd::Constant(X_new.rows(), model.centering.y_mean);
    if (model.W.cols() > 0) yhat += (Xc * model.W) * model.alpha;
    const auto& Wg = model.W_g[static_cast<std::size_t>(group)];
    if (Wg.cols() > 0) yhat += (Xc * Wg) * model.alpha_g[static_cast<std::size_t>(group)];
    return yhat;
}

// The estimated joint/individual structure of each group's (centered) data
// and response: J_g = X_g W (W'W)^{-1} W', A_g the analogue on the joint
// residual, J_Y = S_g alpha, A_Y = T_g alpha_g.
struct GroupDecomposition {
    MatrixXd J;   // n_g x p
    MatrixXd A;   // n_g x p
    VectorXd J_Y; // n_g
    VectorXd A_Y; // n_g
};

inline std::vector<GroupDecomposition> decompose(const JicoModel& model,
                                                 const GroupedDataset& dataset) {
    dataset.validate();
    if (dataset.n_groups() != model.n_groups())
        throw DimensionError("decompose: dataset group count differs from model");
    std::vector<GroupDecomposition> out;
    for (Index g = 0; g < dataset.n_groups(); ++g) {
        const MatrixXd Xc =
            dataset.groups[g].X.rowwise() - model.centering.x_means.transpose();
        GroupDecomposition dec;
        const Index ng = Xc.rows();
        if (model.W.cols() > 0) {
            const MatrixXd Sg = Xc * model.W;
            dec.J = Sg * model.U;
            dec.J_Y = Sg * model.alpha;
        } else {
            dec.J = MatrixXd::Zero(ng, Xc.cols());
            dec.J_Y = VectorXd::Zero(ng);
        }
        const auto& Wg = model.W_g[static_cast<std::size_t>(g)];
        if (Wg.cols() > 0) {
            const MatrixXd X_ind = Xc - dec.J;
            const MatrixXd Tg = X_ind * Wg;
            dec.A = Tg * model.U_g[static_cast<std::size_t>(g)];
            dec.A_Y = Tg * model.alpha_g[static_cast<std::size_t>(g)];
        } else {
            dec.A = MatrixXd::Zero(ng, Xc.cols());
            dec.A_Y = VectorXd::Zero(ng);
        }
        out.push_back(std::move(dec));
    }
    return out;
}

// Numerical check of the identifiability conditions W'W_g = 0 and
// W'X_g'X_g W_g = 0 plus score orthogonality, evaluated with the
// Corollary-style scores S_g = X_g W, T_g = X_g W_g.
struct IdentifiabilityReport {
    std::vector<double> weight_orth;      // max |W' W_g| per group
    std::vector<double> colspace_orth;    // max |W' X_g'X_g W_g| / ||X_g||_F^2
    std::vector<double> score_orth;       // max |S_g' T_g| / (||S_g|| ||T_g||)
    double max_weight_orth = 0.0;
    double max_colspace_orth = 0.0;
    double max_score_orth = 0.0;
};

inline IdentifiabilityReport identifiability_report(const JicoModel& model,
                                                    const GroupedDataset& dataset) {
    dataset.validate();
    IdentifiabilityReport rep;
    for (Index g = 0; g < dataset.n_groups(); ++g) {
        const auto& Wg = model.W_g[static_cast<std::size_t>(g)];
        double w_orth = 0.0, c_orth = 0.0, s_orth = 0.0;
        if (model.W.cols() > 0 && Wg.cols() > 0) {
            const MatrixXd Xc =
                dataset.groups[g].X.rowwise() - model.centering.x_means.transpose();
            w_orth = (model.W.transpose() * Wg).cwiseAbs().maxCoeff();
            const MatrixXd Sg = Xc * model.W;
            const MatrixXd Tg = Xc * Wg;
            c_orth = (Sg.transpose() * Tg).cwiseAbs().maxCoeff() / Xc.squaredNorm();
            const double denom = Sg.norm() * Tg.norm();
            if (denom > 0.0) s_orth = (Sg.transpose() * Tg).cwiseAbs().maxCoeff() / denom;
        }
        rep.weight_orth.push_back(w_orth);
        rep.colspace_orth.push_back(c_orth);
        rep.score_orth.push_back(s_orth);
        rep.max_weight_orth = std::max(rep.max_weight_orth, w_orth);
        rep.max_colspace_orth = std::max(rep.max_colspace_orth, c_orth);
        rep.max_score_orth = std::max(rep.max_score_orth, s_orth);
    }
    return rep;
}

// In-sample groupwise and pooled mean squared errors of a fitted model.
struct GroupMse {
    std::vector<double> per_group;
    double overall = 0.0;
};

inline GroupMse mse_of(const JicoModel& model, const GroupedDataset& dataset) {
    GroupMse out;
    double sum = 0.0;
    Index n = 0;
    for (Index g = 0; g < dataset.n_groups(); ++g) {
        const VectorXd pred = predict(model, dataset.groups[g].X, g);
        const double sq = (pred - dataset.groups[g].y).squaredNorm();
        out.per_group.push_back(sq / static_cast<double>(pred.size()));
        sum += sq;
        n += pred.size();
    }
    out.overall = sum / static_cast<double>(n);
    return out;
}

// Multi-start: cross-validate each initialization strategy, keep the one with
// the smallest CV MSE, and refit on the full data with it.
struct StrategyReport {
    InitStrategy strategy;
    double cv_mse = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    std::string error;
    ObjectiveVectors final_objectives;
    bool converged = false;
};

struct MultiStartResult {
    JicoModel model;
    std::vector<StrategyReport> reports;
    std::size_t best = 0;
};

inline MultiStartResult multi_start_fit(const GroupedDataset& dataset, Index K,
                                        const std::vector<Index>& K_g, double gamma,
                                        const std::vector<InitStrategy>& strategies,
                                        int cv_folds, std::uint64_t seed,
                                        const FitOptions& base_options = {}) {
    if (strategies.empty()) throw Error("multi_start_fit: no strategies given");
    const auto folds = kfold_split(dataset, cv_folds, seed);

    MultiStartResult result;
    std::vector<std::optional<JicoModel>> full_fits(strategies.size());

    for (std::size_t s = 0; s < strategies.size(); ++s) {
        StrategyReport rep;
        rep.strategy = strategies[s];
        FitOptions opts = base_options;
        opts.init = strategies[s];
        try {
            double sq_sum = 0.0;
            Index n_total = 0;
            for (const auto& [train, valid] : folds) {
                const JicoModel m = fit(train, K, K_g, gamma, opts);
                for (Index g = 0; g < valid.n_groups(); ++g) {
                    const VectorXd pred = predict(m, valid.groups[g].X, g);
                    sq_sum += (pred - valid.groups[g].y).squaredNorm();
                    n_total += pred.size();
                }
            }
            rep.cv_mse = sq_sum / static_cast<double>(n_total);
            const JicoModel full = fit(dataset, K, K_g, gamma, opts);
            rep.final_objectives = full.history.back();
            rep.converged = full.converged;
            full_fits[s] = full;
        } catch (const Error& e) {
            rep.failed = true;
            rep.error = e.what();
        }
        result.reports.push_back(std::move(rep));
    }

    bool any = false;
    double best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        if (result.reports[s].failed) continue;
        if (!any || result.reports[s].cv_mse < best_mse) {
            any = true;
            best_mse = result.reports[s].cv_mse;
            result.best = s;
        }
    }
    if (!any) {
        std::string msg = "multi_start_fit: all strategies failed:";
        for (const auto& r : result.reports) msg += " [" + r.strategy.name() + ": " + r.error + "]";
        throw FitError(msg);
    }
    result.model = *full_fits[result.best];
    return result;
}

}  // namespace jico
