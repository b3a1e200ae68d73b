#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "jico/errors.hpp"

namespace jico {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// gamma is exposed to users as a = gamma/(gamma+1) in [0,1]; a = 1 maps to
// gamma = +infinity (the PCR end of the spectrum).
inline double gamma_from_a(double a) {
    if (a < 0.0 || a > 1.0) throw Error("a must lie in [0,1]");
    if (a == 1.0) return std::numeric_limits<double>::infinity();
    return a / (1.0 - a);
}

inline double a_from_gamma(double gamma) {
    if (std::isinf(gamma)) return 1.0;
    if (gamma < 0.0) throw Error("gamma must be nonnegative");
    return gamma / (gamma + 1.0);
}

// Orthogonality constraints of the unified CR problem: candidate directions w
// must satisfy weight_orth' w = 0 and score_orth' X_hat w = 0. Either block
// may have zero columns.
struct CrConstraints {
    MatrixXd weight_orth;  // p x K_c
    MatrixXd score_orth;   // n x K_s
};

// SVD-reduced quantities the direction solver operates on. With
// X_hat = X (I - proj(weight_orth)) = left * diag(sing) * V', directions are
// sought as w = V z, which makes weight_orth' w = 0 automatic.
struct ReducedCrProblem {
    MatrixXd V;            // p x m, orthonormal columns
    VectorXd sing;         // m singular values, decreasing and positive
    MatrixXd left;         // n x m, orthonormal columns
    VectorXd e_diag;       // m, sing squared (the diagonal of E-tilde)
    VectorXd d;            // m, V' X_hat' Y
    MatrixXd score_block;  // m x K_s, diag(sing) * left' * score_orth
    Index m = 0;

    MatrixXd reconstruct() const { return left * sing.asDiagonal() * V.transpose(); }
};

// Singular values below this fraction of the largest are truncated; keeps the
// reduced system well conditioned.
inline constexpr double kRankTol = 1e-10;

inline ReducedCrProblem reduce(const MatrixXd& X, const VectorXd& Y,
                               const CrConstraints& constraints = {}) {
    if (Y.size() != X.rows()) throw DimensionError("reduce: Y length does not match X rows");

    MatrixXd X_hat = X;
    if (constraints.weight_orth.cols() > 0) {
        if (constraints.weight_orth.rows() != X.cols())
            throw DimensionError("reduce: weight constraints have wrong row count");
        // Project out col(weight_orth) via a rank-revealing QR basis.
        Eigen::ColPivHouseholderQR<MatrixXd> qr(constraints.weight_orth);
        const Index r = qr.rank();
        if (r > 0) {
            MatrixXd Q = qr.householderQ() * MatrixXd::Identity(X.cols(), r);
            X_hat.noalias() -= (X * Q) * Q.transpose();
        }
    }

    Eigen::BDCSVD<MatrixXd> svd(X_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    if (smax <= 1e-12 * std::max(1e-300, X.norm()))
        throw DegenerateProjectionError("degenerate projection: constraints removed all signal");

    Index m = 0;
    while (m < sv.size() && sv(m) >= kRankTol * smax) ++m;

    ReducedCrProblem rp;
    rp.m = m;
    rp.V = svd.matrixV().leftCols(m);
    rp.left = svd.matrixU().leftCols(m);
    rp.sing = sv.head(m);
    rp.e_diag = rp.sing.array().square();
    rp.d = rp.sing.asDiagonal() * (rp.left.transpose() * Y);
    if (constraints.score_orth.cols() > 0) {
        if (constraints.score_orth.rows() != X.rows())
            throw DimensionError("reduce: score constraints have wrong row count");
        rp.score_block = rp.sing.asDiagonal() * (rp.left.transpose() * constraints.score_orth);
    } else {
        rp.score_block.resize(m, 0);
    }
    return rp;
}

// One CR weight direction in both reduced (z) and original (w = V z)
// coordinates. rho = z'Ez, tau = z'd; objective is tau^2 rho^(gamma-1)
// (variance alone when gamma is infinite). fp_residual is the relative
// fixed-point residual, zero for closed-form endpoints.
struct CrDirection {
    VectorXd z;
    VectorXd w;
    double rho = 0.0;
    double tau = 0.0;
    double objective = 0.0;
    double fp_residual = 0.0;
};

struct FixedPointCandidate {
    double rho = 0.0;
    VectorXd z;
    double residual = 0.0;  // |z'Ez - rho| / rho
};

struct FixedPointOptions {
    int n_starts = 16;
    int max_iter = 200;
    double rel_tol = 1e-11;     // convergence target on |f(rho)|/rho
    double accept_tol = 1e-10;  // candidates must satisfy this bound
};

namespace detail {

// z(rho) up to normalization, in the scaled form that avoids rho^gamma
// overflow: with A = gamma rho^{g-1} I + (1-gamma) rho^{g-2} E and q =
// rho^{g-1} d, the normalized M q direction equals the same expression with
// A replaced by diag(gamma rho + (1-gamma) e_i) and q by d.
inline VectorXd cr_direction_unnormalized(double rho, double gamma, const VectorXd& e_diag,
                                          const VectorXd& d, const MatrixXd& B,
                                          bool* pinv_used = nullptr) {
    const Index m = e_diag.size();
    VectorXd g(m);
    const double scale = std::max(std::abs(gamma) * rho, e_diag.maxCoeff());
    for (Index i = 0; i < m; ++i) {
        double gi = gamma * rho + (1.0 - gamma) * e_diag(i);
        if (std::abs(gi) < 1e-14 * scale) gi = (gi >= 0.0 ? 1.0 : -1.0) * 1e-14 * scale;
        g(i) = gi;
    }
    VectorXd u = d.array() / g.array();
    if (B.cols() > 0) {
        const MatrixXd Bg = g.cwiseInverse().asDiagonal() * B;  // A^{-1} B, scaled
        const MatrixXd C = B.transpose() * Bg;                  // B' A^{-1} B
        const VectorXd rhs = B.transpose() * u;
        Eigen::LDLT<MatrixXd> ldlt(C);
        VectorXd eta;
        if (ldlt.info() == Eigen::Success) {
            eta = ldlt.solve(rhs);
        }
        const bool bad = ldlt.info() != Eigen::Success ||
                         (C * eta - rhs).norm() > 1e-6 * (rhs.norm() + 1e-300);
        if (bad) {
            // (B'A^{-1}B) is singular; fall back to the pseudo-inverse and flag it.
            eta = C.completeOrthogonalDecomposition().solve(rhs);
            if (pinv_used) *pinv_used = true;
        }
        u -= Bg * eta;
    }
    return u;
}

inline double objective_value(double tau, double rho, double gamma) {
    if (std::isinf(gamma)) return rho;
    if (gamma == 0.0) return tau * tau / rho;
    return tau * tau * std::pow(rho, gamma - 1.0);
}

}  // namespace detail

// Enumerates fixed points of rho = z(rho)' E z(rho) for finite gamma not in
// {0, 1}. Starts on a log-spaced rho grid; each start runs damped Newton with
// a bisection fallback once a sign change is bracketed. All converged fixed
// points are returned; the caller keeps the objective-maximal one.
inline std::vector<FixedPointCandidate> fixed_point_candidates(
    const VectorXd& e_diag, const VectorXd& d, const MatrixXd& B, double gamma,
    const FixedPointOptions& opt = {}, bool* pinv_used = nullptr) {
    const double lam_max = e_diag.maxCoeff();
    const double lam_min = e_diag.minCoeff();
    const double lo = lam_min * 1e-2;
    const double hi = lam_max;
    const double floor_rho = lo * 1e-4;
    const double cap_rho = hi * 10.0;

    const auto f_of = [&](double rho) -> double {
        VectorXd u = detail::cr_direction_unnormalized(rho, gamma, e_diag, d, B, pinv_used);
        const double norm = u.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) return std::numeric_limits<double>::quiet_NaN();
        u /= norm;
        return u.dot(e_diag.asDiagonal() * u) - rho;
    };

    std::vector<FixedPointCandidate> found;
    std::vector<double> last_residuals;

    for (int s = 0; s < opt.n_starts; ++s) {
        const double t = opt.n_starts == 1 ? 0.0 : static_cast<double>(s) / (opt.n_starts - 1);
        double rho = lo * std::pow(hi / lo, t);
        double pos_rho = std::numeric_limits<double>::quiet_NaN();  // f > 0 here
        double neg_rho = std::numeric_limits<double>::quiet_NaN();  // f < 0 here
        bool converged = false;
        double fr = std::numeric_limits<double>::quiet_NaN();

        for (int it = 0; it < opt.max_iter; ++it) {
            fr = f_of(rho);
            if (std::isfinite(fr)) {
                if (fr > 0.0) pos_rho = rho;
                else if (fr < 0.0) neg_rho = rho;
                if (std::abs(fr) <= opt.rel_tol * rho) {
                    converged = true;
                    break;
                }
            }
            double next = std::numeric_limits<double>::quiet_NaN();
            if (std::isfinite(fr)) {
                const double h = rho * 1e-6;
                const double f2 = f_of(rho + h);
                const double deriv = (f2 - fr) / h;
                if (std::isfinite(deriv) && deriv != 0.0) next = rho - fr / deriv;
            }
            const bool have_bracket = std::isfinite(pos_rho) && std::isfinite(neg_rho);
            const double blo = have_bracket ? std::min(pos_rho, neg_rho) : floor_rho;
            const double bhi = have_bracket ? std::max(pos_rho, neg_rho) : cap_rho;
            if (!std::isfinite(next) || next <= blo || next >= bhi) {
                if (have_bracket) {
                    next = 0.5 * (pos_rho + neg_rho);  // bisection fallback
                } else if (std::isfinite(fr)) {
                    next = std::clamp(rho * (fr > 0.0 ? 1.9 : 0.55), floor_rho, cap_rho);
                } else {
                    next = std::clamp(rho * 1.37, floor_rho, cap_rho);
                }
            }
            if (next == rho) break;
            rho = next;
        }
        if (!converged && std::isfinite(fr)) {
            // One more chance: accept if we are already below the hard bound.
            converged = std::abs(fr) <= opt.accept_tol * rho;
        }
        if (converged) {
            bool duplicate = false;
            for (const auto& c : found)
                if (std::abs(c.rho - rho) <= 1e-8 * std::max(c.rho, rho)) duplicate = true;
            if (!duplicate) {
                VectorXd u = detail::cr_direction_unnormalized(rho, gamma, e_diag, d, B, pinv_used);
                u /= u.norm();
                FixedPointCandidate cand;
                cand.rho = rho;
                cand.z = u;
                cand.residual = std::abs(u.dot(e_diag.asDiagonal() * u) - rho) / rho;
                found.push_back(std::move(cand));
            }
        } else {
            last_residuals.push_back(std::isfinite(fr) ? fr : std::numeric_limits<double>::quiet_NaN());
        }
    }

    if (found.empty()) {
        std::ostringstream msg;
        msg << "fixed point failure: no start converged (gamma=" << gamma << "); grid=[" << lo
            << "," << hi << "], residuals=";
        for (double r : last_residuals) msg << r << " ";
        throw FixedPointError(msg.str());
    }
    return found;
}

namespace detail {

// Orthonormal basis of the null space of B' (the feasible reduced space).
inline MatrixXd null_space_basis(const MatrixXd& B, Index m) {
    if (B.cols() == 0) return MatrixXd::Identity(m, m);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(B);
    const Index r = qr.rank();
    if (r >= m) return MatrixXd(m, 0);
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(m, m);
    return Q.rightCols(m - r);
}

}  // namespace detail

// Solves the reduced CR problem for one direction. Z_prev holds the z
// coordinates of previously extracted directions (enforced E-orthogonal).
// Dispatch: gamma = 0, 1, infinity use closed forms through the null-space
// basis of the constraints; other gamma uses the fixed-point solve.
inline CrDirection solve_direction(const ReducedCrProblem& rp, double gamma,
                                   const MatrixXd& Z_prev, bool* pinv_used = nullptr) {
    const Index m = rp.m;
    MatrixXd B(m, Z_prev.cols() + rp.score_block.cols());
    if (Z_prev.cols() > 0) B.leftCols(Z_prev.cols()) = rp.e_diag.asDiagonal() * Z_prev;
    if (rp.score_block.cols() > 0) B.rightCols(rp.score_block.cols()) = rp.score_block;

    if (B.cols() >= m)
        throw RankExhaustedError("rank exhausted: " + std::to_string(B.cols()) +
                                 " constraints in a rank-" + std::to_string(m) + " problem");

    CrDirection dir;

    if (std::isinf(gamma)) {
        const MatrixXd P = detail::null_space_basis(B, m);
        if (P.cols() == 0) throw RankExhaustedError("rank exhausted: empty feasible space");
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(P.transpose() * rp.e_diag.asDiagonal() * P);
        dir.z = P * es.eigenvectors().col(P.cols() - 1);
    } else if (gamma == 0.0 || gamma == 1.0) {
        const MatrixXd P = detail::null_space_basis(B, m);
        if (P.cols() == 0) throw RankExhaustedError("rank exhausted: empty feasible space");
        const VectorXd pd = P.transpose() * rp.d;
        if (pd.norm() <= 1e-10 * rp.d.norm())
            throw DegenerateDirectionError(
                "degenerate direction: response orthogonal to feasible space");
        VectorXd v;
        if (gamma == 0.0) {
            const MatrixXd PEP = P.transpose() * rp.e_diag.asDiagonal() * P;
            v = PEP.ldlt().solve(pd);
        } else {
            v = pd;
        }
        dir.z = P * v;
        dir.z /= dir.z.norm();
    } else {
        // Finite gamma, not 0 or 1: enumerate fixed points, keep the best.
        const MatrixXd P = detail::null_space_basis(B, m);
        if (P.cols() == 0) throw RankExhaustedError("rank exhausted: empty feasible space");
        if ((P.transpose() * rp.d).norm() <= 1e-10 * rp.d.norm())
            throw DegenerateDirectionError(
                "degenerate direction: response orthogonal to feasible space");
        const auto candidates = fixed_point_candidates(rp.e_diag, rp.d, B, gamma, {}, pinv_used);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : candidates) {
            const double obj = detail::objective_value(c.z.dot(rp.d), c.rho, gamma);
            if (obj > best) {
                best = obj;
                dir.z = c.z;
                dir.fp_residual = c.residual;
            }
        }
    }

    dir.z /= dir.z.norm();
    dir.rho = dir.z.dot(rp.e_diag.asDiagonal() * dir.z);
    dir.tau = dir.z.dot(rp.d);
    if (std::isinf(gamma)) {
        dir.w = rp.V * dir.z;
        // tau is irrelevant at the PCR end; fix the sign by the largest entry of w.
        Index imax = 0;
        dir.w.cwiseAbs().maxCoeff(&imax);
        if (dir.w(imax) < 0.0) {
            dir.w = -dir.w;
            dir.z = -dir.z;
            dir.tau = -dir.tau;
        }
    } else {
        if (dir.tau < 0.0) {
            dir.z = -dir.z;
            dir.tau = -dir.tau;
        }
        dir.w = rp.V * dir.z;
    }
    dir.objective = detail::objective_value(dir.tau, dir.rho, gamma);
    return dir;
}

enum class ExtractWarning { None, Degenerate, RankExhausted };

struct Extraction {
    MatrixXd W;  // p x K' extracted weight directions
    std::vector<CrDirection> directions;
    ExtractWarning warning = ExtractWarning::None;
    Index requested = 0;
    bool pinv_used = false;

    Index count() const { return W.cols(); }
};

// Sequentially extracts up to `count` CR directions for (X, Y) under the
// given constraints. Stops early (with a warning recorded) when the rank is
// exhausted or the response degenerates; other failures propagate.
inline Extraction extract_directions(const MatrixXd& X, const VectorXd& Y, double gamma,
                                     Index count, const CrConstraints& constraints = {}) {
    Extraction out;
    out.requested = count;
    out.W.resize(X.cols(), 0);
    if (count == 0) return out;

    const ReducedCrProblem rp = reduce(X, Y, constraints);
    MatrixXd Z(rp.m, 0);
    for (Index k = 0; k < count; ++k) {
        try {
            CrDirection dir = solve_direction(rp, gamma, Z, &out.pinv_used);
            Z.conservativeResize(rp.m, k + 1);
            Z.col(k) = dir.z;
            out.W.conservativeResize(X.cols(), k + 1);
            out.W.col(k) = dir.w;
            out.directions.push_back(std::move(dir));
        } catch (const DegenerateDirectionError&) {
            out.warning = ExtractWarning::Degenerate;
            break;
        } catch (const RankExhaustedError&) {
            out.warning = ExtractWarning::RankExhausted;
            break;
        }
    }
    return out;
}

}  // namespace jico
