#pragma once

// Motion-adaptive SHOE: an RBF-kernel SVM (one-against-one over walk, run,
// stair) classifies the trailing 200-sample window and selects the SHOE
// threshold for that motion.

#include "zupt/detectors.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <random>

namespace zupt {

inline constexpr int kMotionWindowLength = 200;
inline constexpr int kMotionFeatureSize = kMotionWindowLength * 6;

/// Time-major features [ax ay az wx wy wz] per timestep. The accelerometer
/// values and gyro values are each scaled to unit norm as a group (an all-zero
/// group is left at zero).
struct MotionWindow {
    Eigen::VectorXd features;
};

inline MotionWindow make_motion_window(const ImuSequence& seq, std::size_t k, const std::optional<Mat3>& rotate = {}) {
    if (k + kMotionWindowLength > seq.size())
        fail("make_motion_window: window [" + std::to_string(k) + ", " + std::to_string(k + kMotionWindowLength) +
             ") overruns sequence of length " + std::to_string(seq.size()));
    MotionWindow w;
    w.features.resize(kMotionFeatureSize);
    double na = 0.0, ng = 0.0;
    for (int i = 0; i < kMotionWindowLength; ++i) {
        const auto& s = seq[k + static_cast<std::size_t>(i)];
        const Vec3 a = rotate ? Vec3(*rotate * s.accel) : s.accel;
        const Vec3 g = rotate ? Vec3(*rotate * s.gyro) : s.gyro;
        w.features.segment<3>(6 * i) = a;
        w.features.segment<3>(6 * i + 3) = g;
        na += a.squaredNorm();
        ng += g.squaredNorm();
    }
    na = std::sqrt(na);
    ng = std::sqrt(ng);
    for (int i = 0; i < kMotionWindowLength; ++i) {
        if (na > 0.0) w.features.segment<3>(6 * i) /= na;
        if (ng > 0.0) w.features.segment<3>(6 * i + 3) /= ng;
    }
    return w;
}

inline double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
    return std::exp(-gamma * (x - y).squaredNorm());
}

struct SvmConfig {
    double gamma = 0.001;  // RBF coefficient
    double c = 1.0;
    double tolerance = 1e-3;  // KKT violation at which SMO stops
    long max_iterations = 10'000'000;

    void validate() const {
        if (!(gamma > 0.0)) fail("SvmConfig: gamma must be positive");
        if (!(c > 0.0)) fail("SvmConfig: C must be positive");
        if (!(tolerance > 0.0)) fail("SvmConfig: tolerance must be positive");
    }
};

/// One binary machine: f(x) = sum_i coef_i k(sv_i, x) - rho, positive means
/// `positive` wins the vote. coef has one entry per row of the model's
/// shared support-vector matrix.
struct SvmMachine {
    Motion positive = Motion::walk;
    Motion negative = Motion::run;
    Eigen::VectorXd coef;
    double rho = 0.0;
    long iterations = 0;
};

struct SvmModel {
    double gamma = 0.001;
    double c = 1.0;
    std::vector<Motion> classes;           // sorted by Motion order
    Eigen::MatrixXd support_vectors;       // one row per support vector
    std::vector<SvmMachine> machines;      // one per class pair
};

namespace svm_detail {

struct BinaryResult {
    Eigen::VectorXd alpha;
    double rho = 0.0;
    long iterations = 0;
};

/// SMO with second-order working-set selection on a precomputed kernel.
/// Dual: min 0.5 a'Qa - e'a, 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.
inline BinaryResult smo(const Eigen::MatrixXd& k, const std::vector<int>& y, const SvmConfig& cfg) {
    const auto n = static_cast<Eigen::Index>(y.size());
    constexpr double tau = 1e-12;
    const double c = cfg.c;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
    auto yi = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };

    long iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (yi(t) > 0 ? alpha[t] < c : alpha[t] > 0.0) {
                const double v = -yi(t) * grad[t];
                if (v >= gmax) {
                    gmax = v;
                    i = t;
                }
            }
        }
        if (i < 0) break;
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!(yi(t) > 0 ? alpha[t] > 0.0 : alpha[t] < c)) continue;
            const double v = -yi(t) * grad[t];
            gmax2 = std::max(gmax2, -v);
            const double diff = gmax - v;
            if (diff > 0.0) {
                double quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if (quad <= 0.0) quad = tau;
                const double obj = -diff * diff / quad;
                if (obj <= best) {
                    best = obj;
                    j = t;
                }
            }
        }
        if (gmax + gmax2 < cfg.tolerance || j < 0) break;

        const double ai = alpha[i], aj = alpha[j];
        double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if (quad <= 0.0) quad = tau;
        if (y[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(j)]) {
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
            }
            if (diff > 0.0) {
                if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
            } else {
                if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
            }
        } else {
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
            } else {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
            }
            if (sum > c) {
                if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
            } else {
                if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
            }
        }
        const double dai = alpha[i] - ai, daj = alpha[j] - aj;
        for (Eigen::Index t = 0; t < n; ++t)
            grad[t] += yi(t) * (yi(i) * k(t, i) * dai + yi(j) * k(t, j) * daj);
    }

    // Bias from free vectors, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = yi(t) * grad[t];
        if (alpha[t] >= c) {
            if (yi(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (yi(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    BinaryResult out;
    out.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    out.alpha = std::move(alpha);
    out.iterations = iter;
    return out;
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& x, double gamma) {
    const Eigen::VectorXd sq = x.rowwise().squaredNorm();
    Eigen::MatrixXd k = x * x.transpose();
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j)
            k(i, j) = std::exp(-gamma * std::max(0.0, sq[i] + sq[j] - 2.0 * k(i, j)));
    return k;
}

}  // namespace svm_detail

inline SvmModel train_svm(std::span<const MotionWindow> samples, std::span<const Motion> labels,
                          const SvmConfig& cfg = {}) {
    cfg.validate();
    if (samples.size() != labels.size()) fail("train_svm: sample and label counts differ");
    std::map<Motion, int> count;
    for (auto m : labels) ++count[m];
    if (count.size() < 2) fail("train_svm: need at least 2 motion classes");
    for (const auto& [m, n] : count)
        if (n < 2) fail(std::string("train_svm: class '") + to_string(m) + "' has fewer than 2 samples");

    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd x(n, kMotionFeatureSize);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& f = samples[static_cast<std::size_t>(i)].features;
        if (f.size() != kMotionFeatureSize) fail("train_svm: feature vector has the wrong length");
        x.row(i) = f.transpose();
    }
    const Eigen::MatrixXd k = svm_detail::gram(x, cfg.gamma);

    SvmModel model;
    model.gamma = cfg.gamma;
    model.c = cfg.c;
    for (const auto& [m, _] : count) model.classes.push_back(m);

    struct Raw {
        Motion pos, neg;
        std::vector<Eigen::Index> idx;
        svm_detail::BinaryResult res;
        std::vector<int> y;
    };
    std::vector<Raw> raw;
    for (std::size_t a = 0; a < model.classes.size(); ++a) {
        for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
            Raw r{model.classes[a], model.classes[b], {}, {}, {}};
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto m = labels[static_cast<std::size_t>(i)];
                if (m == r.pos || m == r.neg) {
                    r.idx.push_back(i);
                    r.y.push_back(m == r.pos ? 1 : -1);
                }
            }
            const auto sz = static_cast<Eigen::Index>(r.idx.size());
            Eigen::MatrixXd kk(sz, sz);
            for (Eigen::Index p = 0; p < sz; ++p)
                for (Eigen::Index q = 0; q < sz; ++q) kk(p, q) = k(r.idx[static_cast<std::size_t>(p)], r.idx[static_cast<std::size_t>(q)]);
            r.res = svm_detail::smo(kk, r.y, cfg);
            raw.push_back(std::move(r));
        }
    }

    // Shared support-vector set: every sample with a non-zero multiplier in any machine.
    std::vector<Eigen::Index> sv_row(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> sv_src;
    for (const auto& r : raw)
        for (std::size_t p = 0; p < r.idx.size(); ++p)
            if (r.res.alpha[static_cast<Eigen::Index>(p)] > 0.0 && sv_row[static_cast<std::size_t>(r.idx[p])] < 0) {
                sv_row[static_cast<std::size_t>(r.idx[p])] = 0;
                sv_src.push_back(r.idx[p]);
            }
    std::sort(sv_src.begin(), sv_src.end());
    model.support_vectors.resize(static_cast<Eigen::Index>(sv_src.size()), kMotionFeatureSize);
    for (std::size_t s = 0; s < sv_src.size(); ++s) {
        sv_row[static_cast<std::size_t>(sv_src[s])] = static_cast<Eigen::Index>(s);
        model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(sv_src[s]);
    }
    for (const auto& r : raw) {
        SvmMachine m;
        m.positive = r.pos;
        m.negative = r.neg;
        m.rho = r.res.rho;
        m.iterations = r.res.iterations;
        m.coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sv_src.size()));
        for (std::size_t p = 0; p < r.idx.size(); ++p) {
            const double a = r.res.alpha[static_cast<Eigen::Index>(p)];
            if (a > 0.0) m.coef[sv_row[static_cast<std::size_t>(r.idx[p])]] = a * r.y[p];
        }
        model.machines.push_back(std::move(m));
    }
    return model;
}

/// Decision value of every machine, in model.machines order.
inline std::vector<double> svm_decision_values(const SvmModel& model, const MotionWindow& w) {
    if (w.features.size() != model.support_vectors.cols()) fail("classify_motion: feature length does not match model");
    const Eigen::VectorXd d2 =
        (model.support_vectors.rowwise() - w.features.transpose()).rowwise().squaredNorm();
    const Eigen::VectorXd kv = (-model.gamma * d2).array().exp();
    std::vector<double> out;
    for (const auto& m : model.machines) out.push_back(m.coef.dot(kv) - m.rho);
    return out;
}

/// Ranking used to settle vote ties: walk, then stair, then run.
inline int tie_rank(Motion m) {
    switch (m) {
        case Motion::walk: return 0;
        case Motion::stair: return 1;
        case Motion::run: return 2;
    }
    return 3;
}

inline Motion classify_motion(const SvmModel& model, const MotionWindow& w) {
    if (model.machines.empty()) fail("classify_motion: model has no machines");
    const auto dv = svm_decision_values(model, w);
    std::map<Motion, int> votes;
    for (auto c : model.classes) votes[c] = 0;
    for (std::size_t i = 0; i < dv.size(); ++i) ++votes[dv[i] > 0.0 ? model.machines[i].positive : model.machines[i].negative];
    Motion best = model.classes.front();
    int best_votes = -1;
    for (const auto& [m, v] : votes)
        if (v > best_votes || (v == best_votes && tie_rank(m) < tie_rank(best))) {
            best = m;
            best_votes = v;
        }
    return best;
}

struct ThresholdTable {
    std::map<Motion, double> gamma{{Motion::walk, 1e7}, {Motion::run, 3.5e8}, {Motion::stair, 1e7}};

    static ThresholdTable uniform(double g) {
        ThresholdTable t;
        for (auto& [_, v] : t.gamma) v = g;
        return t;
    }

    double at(Motion m) const {
        const auto it = gamma.find(m);
        if (it == gamma.end()) fail(std::string("ThresholdTable: no threshold for ") + to_string(m));
        return it->second;
    }

    void validate() const {
        for (auto m : {Motion::walk, Motion::run, Motion::stair})
            if (!(at(m) > 0.0)) fail("ThresholdTable: thresholds must be positive");
    }
};

struct AdaptiveOptions {
    int cadence = 50;  // samples between classifications
    int window = kMotionWindowLength;
};

struct AdaptiveResult {
    StationaryFlags flags;
    std::vector<double> statistic;
    std::vector<double> threshold;  // per sample
    std::vector<Motion> motion;     // per sample
};

/// Until the first full window is available the walk threshold applies.
/// Afterwards the class of the trailing window [e-200, e) is held for the
/// `cadence` samples starting at e.
inline AdaptiveResult adaptive_detect(const ImuSequence& seq, const SvmModel& model, const ThresholdTable& table,
                                      const ShoeParams& params, const AdaptiveOptions& opt = {}) {
    table.validate();
    params.validate();
    if (opt.window != kMotionWindowLength) fail("adaptive_detect: window must be 200 samples");
    if (opt.cadence < 1) fail("adaptive_detect: cadence must be >= 1");
    if (seq.size() < static_cast<std::size_t>(opt.window)) fail("adaptive_detect: sequence shorter than 200 samples");

    AdaptiveResult out;
    out.statistic = statistic_trace(seq, DetectorKind::shoe, params);
    const std::size_t n = seq.size();
    out.flags.resize(n);
    out.threshold.resize(n);
    out.motion.resize(n);
    Motion current = Motion::walk;
    const auto w = static_cast<std::size_t>(opt.window);
    const auto cad = static_cast<std::size_t>(opt.cadence);
    for (std::size_t k = 0; k < n; ++k) {
        if (k >= w && (k - w) % cad == 0) current = classify_motion(model, make_motion_window(seq, k - w));
        out.motion[k] = current;
        out.threshold[k] = table.at(current);
        out.flags[k] = out.statistic[k] < out.threshold[k] ? 1 : 0;
    }
    return out;
}

/// Draws `count` windows at uniformly random offsets, each under an
/// independent Haar-random rotation when `rotate` is set.
template <class Engine>
std::vector<MotionWindow> sample_motion_windows(const ImuSequence& seq, int count, Engine& rng, bool rotate) {
    if (seq.size() < kMotionWindowLength) fail("sample_motion_windows: sequence shorter than 200 samples");
    std::uniform_int_distribution<std::size_t> start(0, seq.size() - kMotionWindowLength);
    std::vector<MotionWindow> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        const std::size_t k = start(rng);
        std::optional<Mat3> r;
        if (rotate) r = random_rotation(rng);
        out.push_back(make_motion_window(seq, k, r));
    }
    return out;
}

inline nlohmann::json to_json(const SvmModel& m) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "svm";
    j["gamma"] = m.gamma;
    j["c"] = m.c;
    j["classes"] = nlohmann::json::array();
    for (auto c : m.classes) j["classes"].push_back(to_string(c));
    j["n_support"] = m.support_vectors.rows();
    j["feature_size"] = m.support_vectors.cols();
    std::vector<double> sv(m.support_vectors.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        sv.data(), m.support_vectors.rows(), m.support_vectors.cols()) = m.support_vectors;
    j["support_vectors"] = sv;
    j["machines"] = nlohmann::json::array();
    for (const auto& mc : m.machines) {
        j["machines"].push_back({{"positive", to_string(mc.positive)},
                                 {"negative", to_string(mc.negative)},
                                 {"rho", mc.rho},
                                 {"coef", std::vector<double>(mc.coef.data(), mc.coef.data() + mc.coef.size())}});
    }
    return j;
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1) fail("svm model: unsupported schema_version");
        if (j.at("kind").get<std::string>() != "svm") fail("svm model: not an SVM model file");
        SvmModel m;
        m.gamma = j.at("gamma").get<double>();
        m.c = j.at("c").get<double>();
        for (const auto& c : j.at("classes")) m.classes.push_back(motion_from_string(c.get<std::string>()));
        const auto rows = j.at("n_support").get<Eigen::Index>();
        const auto cols = j.at("feature_size").get<Eigen::Index>();
        const auto sv = j.at("support_vectors").get<std::vector<double>>();
        if (cols != kMotionFeatureSize || static_cast<Eigen::Index>(sv.size()) != rows * cols)
            fail("svm model: support_vectors shape mismatch");
        m.support_vectors = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            sv.data(), rows, cols);
        for (const auto& mj : j.at("machines")) {
            SvmMachine mc;
            mc.positive = motion_from_string(mj.at("positive").get<std::string>());
            mc.negative = motion_from_string(mj.at("negative").get<std::string>());
            mc.rho = mj.at("rho").get<double>();
            const auto coef = mj.at("coef").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(coef.size()) != rows) fail("svm model: coefficient length mismatch");
            mc.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), rows);
            m.machines.push_back(std::move(mc));
        }
        if (!(m.gamma > 0.0)) fail("svm model: gamma must be positive");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string("svm model: ") + e.what());
    }
}

}  // namespace zupt
