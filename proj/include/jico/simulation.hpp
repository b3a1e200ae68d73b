#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "jico/baselines.hpp"
#include "jico/grouped_data.hpp"
#include "jico/jico.hpp"
#include "jico/rng.hpp"

namespace jico {

// The data generating mechanisms of the benchmark suite. All draw X_g with
// i.i.d. standard normal entries and build Y_g = alpha X_g w + alpha_g X_g w_g
// + noise, with w and w_g constructed from the training X so that w'w_g = 0:
//   Pcr       w = top eigenvector of X'X, w_g = top eigenvector of the
//             projected group covariance.
//   Pls       w averages the top n/2 eigenvectors, w_g the top n_g/2.
//   OlsGlobal / OlsGroup  same averaging with q = n, q_g = n_g; only one of
//             alpha, alpha_g is nonzero.
enum class Setting { Pcr, Pls, OlsGlobal, OlsGroup };

inline std::string setting_name(Setting s) {
    switch (s) {
        case Setting::Pcr: return "pcr";
        case Setting::Pls: return "pls";
        case Setting::OlsGlobal: return "ols-a";
        case Setting::OlsGroup: return "ols-b";
    }
    return "?";
}

struct SimulationSpec {
    Setting setting = Setting::Pcr;
    Index G = 2;
    Index p = 200;
    std::vector<Index> n_train = {50, 50};
    std::vector<Index> n_test = {50, 50};
    double alpha = 1.0;
    double alpha_g = 1.0;
    double noise_var = 0.04;
    Index q = 0;    // 0 = per-setting default
    Index q_g = 0;
    int reps = 50;
    std::uint64_t seed = 0;

    static SimulationSpec for_setting(Setting s) {
        SimulationSpec spec;
        spec.setting = s;
        switch (s) {
            case Setting::Pcr: spec.alpha = 1.0; spec.alpha_g = 1.0; break;
            case Setting::Pls: spec.alpha = 1.0; spec.alpha_g = 0.5; break;
            case Setting::OlsGlobal: spec.alpha = 1.0; spec.alpha_g = 0.0; break;
            case Setting::OlsGroup: spec.alpha = 0.0; spec.alpha_g = 1.0; break;
        }
        return spec;
    }

    Index train_total() const {
        Index n = 0;
        for (Index v : n_train) n += v;
        return n;
    }

    void validate() const {
        if (G < 1 || static_cast<Index>(n_train.size()) != G ||
            static_cast<Index>(n_test.size()) != G)
            throw Error("simulation spec: group sizes must match G");
        if (noise_var <= 0.0) throw Error("simulation spec: noise variance must be positive");
        if (q > p || q_g > p) throw Error("simulation spec: q and q_g cannot exceed p");
    }
};

struct Replicate {
    GroupedDataset train;
    GroupedDataset test;
    VectorXd w;                  // joint weight used to generate Y
    std::vector<VectorXd> w_g;   // individual weights
};

namespace detail {

inline MatrixXd draw_normal_matrix(Index rows, Index cols, NormalStream& stream) {
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) M(i, j) = stream.normal();
    return M;
}

// Top right-singular vectors of X, each with its largest-magnitude entry made
// positive so that replications are reproducible.
inline MatrixXd top_right_vectors(const MatrixXd& X, Index q) {
    Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinV);
    MatrixXd V = svd.matrixV().leftCols(q);
    for (Index j = 0; j < V.cols(); ++j) {
        Index imax = 0;
        V.col(j).cwiseAbs().maxCoeff(&imax);
        if (V(imax, j) < 0.0) V.col(j) = -V.col(j);
    }
    return V;
}

inline VectorXd averaged_eigvec(const MatrixXd& X, Index q) {
    const MatrixXd V = top_right_vectors(X, q);
    return V * VectorXd::Constant(q, 1.0 / std::sqrt(static_cast<double>(q)));
}

}  // namespace detail

// Generates one training/test replicate. The latent weights are constructed
// from the training X and reused for the test responses.
inline Replicate gen_replicate(const SimulationSpec& spec, int rep_index) {
    spec.validate();
    const Index G = spec.G;
    Replicate out;

    std::vector<MatrixXd> Xtrain(G);
    for (Index g = 0; g < G; ++g) {
        NormalStream s(spec.seed, static_cast<std::uint64_t>(rep_index),
                       static_cast<std::uint64_t>(g), StreamPurpose::TrainX);
        Xtrain[g] = detail::draw_normal_matrix(spec.n_train[g], spec.p, s);
    }
    MatrixXd X(spec.train_total(), spec.p);
    {
        Index row = 0;
        for (Index g = 0; g < G; ++g) {
            X.middleRows(row, Xtrain[g].rows()) = Xtrain[g];
            row += Xtrain[g].rows();
        }
    }

    const Index n = spec.train_total();
    Index q = spec.q, q_g_default = spec.q_g;
    switch (spec.setting) {
        case Setting::Pcr: q = q > 0 ? q : 1; break;
        case Setting::Pls: q = q > 0 ? q : n / 2; break;
        case Setting::OlsGlobal:
        case Setting::OlsGroup: q = q > 0 ? q : n; break;
    }
    q = std::min(q, std::min(spec.p, n));
    out.w = spec.setting == Setting::Pcr ? detail::top_right_vectors(X, 1).col(0)
                                         : detail::averaged_eigvec(X, q);

    out.w_g.resize(G);
    for (Index g = 0; g < G; ++g) {
        const MatrixXd Xg_proj = Xtrain[g] - (Xtrain[g] * out.w) * out.w.transpose();
        Index qg = q_g_default;
        switch (spec.setting) {
            case Setting::Pcr: qg = qg > 0 ? qg : 1; break;
            case Setting::Pls: qg = qg > 0 ? qg : spec.n_train[g] / 2; break;
            case Setting::OlsGlobal:
            case Setting::OlsGroup: qg = qg > 0 ? qg : spec.n_train[g]; break;
        }
        qg = std::min(qg, std::min(spec.p, spec.n_train[g]));
        out.w_g[g] = spec.setting == Setting::Pcr
                         ? detail::top_right_vectors(Xg_proj, 1).col(0)
                         : detail::averaged_eigvec(Xg_proj, qg);
    }

    const double sd = std::sqrt(spec.noise_var);
    for (Index g = 0; g < G; ++g) {
        NormalStream noise(spec.seed, static_cast<std::uint64_t>(rep_index),
                           static_cast<std::uint64_t>(g), StreamPurpose::TrainNoise);
        Group grp;
        grp.X = std::move(Xtrain[g]);
        grp.y = spec.alpha * (grp.X * out.w) + spec.alpha_g * (grp.X * out.w_g[g]);
        for (Index i = 0; i < grp.y.size(); ++i) grp.y[i] += sd * noise.normal();
        grp.label = "g" + std::to_string(g + 1);
        out.train.groups.push_back(std::move(grp));
    }
    for (Index g = 0; g < G; ++g) {
        NormalStream sx(spec.seed, static_cast<std::uint64_t>(rep_index),
                        static_cast<std::uint64_t>(g), StreamPurpose::TestX);
        NormalStream noise(spec.seed, static_cast<std::uint64_t>(rep_index),
                           static_cast<std::uint64_t>(g), StreamPurpose::TestNoise);
        Group grp;
        grp.X = detail::draw_normal_matrix(spec.n_test[g], spec.p, sx);
        grp.y = spec.alpha * (grp.X * out.w) + spec.alpha_g * (grp.X * out.w_g[g]);
        for (Index i = 0; i < grp.y.size(); ++i) grp.y[i] += sd * noise.normal();
        grp.label = "g" + std::to_string(g + 1);
        out.test.groups.push_back(std::move(grp));
    }
    return out;
}

// A benchmark entry: a label plus a train-then-predict callable returning one
// prediction vector per test group.
struct BenchmarkMethod {
    std::string label;
    std::function<std::vector<VectorXd>(const GroupedDataset&, const GroupedDataset&)> run;
};

inline BenchmarkMethod jico_method(double a, Index K, Index K_g, std::string label = {}) {
    BenchmarkMethod m;
    if (label.empty())
        label = "JICO a=" + std::to_string(a) + " K=" + std::to_string(K) + " Kg=" +
                std::to_string(K_g);
    m.label = std::move(label);
    m.run = [a, K, K_g](const GroupedDataset& train, const GroupedDataset& test) {
        const JicoModel model = fit(train, K, K_g, gamma_from_a(a));
        std::vector<VectorXd> preds;
        for (Index g = 0; g < test.n_groups(); ++g)
            preds.push_back(predict(model, test.groups[g].X, g));
        return preds;
    };
    return m;
}

inline BenchmarkMethod baseline_method(const BaselineOptions& opt, std::string label) {
    BenchmarkMethod m;
    m.label = std::move(label);
    m.run = [opt](const GroupedDataset& train, const GroupedDataset& test) {
        const BaselineModel model = fit_baseline(train, opt);
        std::vector<VectorXd> preds;
        for (Index g = 0; g < test.n_groups(); ++g)
            preds.push_back(predict_baseline(model, test.groups[g].X, g));
        return preds;
    };
    return m;
}

struct MethodSummary {
    std::string label;
    std::vector<double> group_mse;     // mean over replications
    std::vector<double> group_se;
    double overall_mse = 0.0;          // pooled per replication, then averaged
    double overall_se = 0.0;
    int n_ok = 0;
    int n_failed = 0;
};

struct BenchmarkReport {
    std::vector<MethodSummary> methods;
    int reps = 0;
};

namespace detail {

inline std::pair<double, double> mean_se(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN()};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() == 1) return {mean, 0.0};
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace detail

// Runs every method on `reps` independent replicates and aggregates per-group
// and pooled test MSEs (mean and standard error across replications).
inline BenchmarkReport run_benchmark(const SimulationSpec& spec,
                                     const std::vector<BenchmarkMethod>& methods, int reps) {
    spec.validate();
    BenchmarkReport report;
    report.reps = reps;

    std::vector<std::vector<std::vector<double>>> group_mse(
        methods.size(), std::vector<std::vector<double>>(spec.G));
    std::vector<std::vector<double>> overall_mse(methods.size());
    std::vector<int> failures(methods.size(), 0);

    for (int r = 0; r < reps; ++r) {
        const Replicate rep = gen_replicate(spec, r);
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            try {
                const auto preds = methods[mi].run(rep.train, rep.test);
                double sq = 0.0;
                Index n = 0;
                for (Index g = 0; g < spec.G; ++g) {
                    const double gsq =
                        (preds[static_cast<std::size_t>(g)] - rep.test.groups[g].y).squaredNorm();
                    group_mse[mi][g].push_back(gsq /
                                               static_cast<double>(rep.test.groups[g].y.size()));
                    sq += gsq;
                    n += rep.test.groups[g].y.size();
                }
                overall_mse[mi].push_back(sq / static_cast<double>(n));
            } catch (const Error&) {
                ++failures[mi];
            }
        }
    }

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        MethodSummary s;
        s.label = methods[mi].label;
        for (Index g = 0; g < spec.G; ++g) {
            const auto [m, se] = detail::mean_se(group_mse[mi][g]);
            s.group_mse.push_back(m);
            s.group_se.push_back(se);
        }
        const auto [m, se] = detail::mean_se(overall_mse[mi]);
        s.overall_mse = m;
        s.overall_se = se;
        s.n_ok = static_cast<int>(overall_mse[mi].size());
        s.n_failed = failures[mi];
        report.methods.push_back(std::move(s));
    }
    return report;
}

// Rank combinations for the MSE-vs-a curves.
struct RankCombo {
    Index K = 0;
    Index K_g = 0;
    std::string label() const {
        return "K=" + std::to_string(K) + ",Kg=" + std::to_string(K_g);
    }
};

struct CurvePoint {
    RankCombo combo;
    double a = 0.0;
    double mean_mse = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    int n_ok = 0;
    int n_failed = 0;
};

// Test MSE as a function of a = gamma/(gamma+1) for each rank combination;
// the CSV of this table reproduces the benchmark figures.
inline std::vector<CurvePoint> mse_curve(const SimulationSpec& spec,
                                         const std::vector<RankCombo>& combos,
                                         const std::vector<double>& a_grid, int reps) {
    spec.validate();
    std::vector<std::vector<std::vector<double>>> cell_mse(
        combos.size(), std::vector<std::vector<double>>(a_grid.size()));
    std::vector<std::vector<int>> cell_failed(combos.size(),
                                              std::vector<int>(a_grid.size(), 0));

    for (int r = 0; r < reps; ++r) {
        const Replicate rep = gen_replicate(spec, r);
        for (std::size_t ci = 0; ci < combos.size(); ++ci) {
            for (std::size_t ai = 0; ai < a_grid.size(); ++ai) {
                try {
                    const JicoModel model =
                        fit(rep.train, combos[ci].K, combos[ci].K_g, gamma_from_a(a_grid[ai]));
                    double sq = 0.0;
                    Index n = 0;
                    for (Index g = 0; g < spec.G; ++g) {
                        sq += (predict(model, rep.test.groups[g].X, g) - rep.test.groups[g].y)
                                  .squaredNorm();
                        n += rep.test.groups[g].y.size();
                    }
                    cell_mse[ci][ai].push_back(sq / static_cast<double>(n));
                } catch (const Error&) {
                    ++cell_failed[ci][ai];
                }
            }
        }
    }

    std::vector<CurvePoint> out;
    for (std::size_t ci = 0; ci < combos.size(); ++ci) {
        for (std::size_t ai = 0; ai < a_grid.size(); ++ai) {
            CurvePoint pt;
            pt.combo = combos[ci];
            pt.a = a_grid[ai];
            const auto [m, se] = detail::mean_se(cell_mse[ci][ai]);
            pt.mean_mse = m;
            pt.std_error = se;
            pt.n_ok = static_cast<int>(cell_mse[ci][ai].size());
            pt.n_failed = cell_failed[ci][ai];
            out.push_back(std::move(pt));
        }
    }
    return out;
}

}  // namespace jico
