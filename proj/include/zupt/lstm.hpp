#pragma once

// Stacked-LSTM zero-velocity classifier. Input: a 100 x 6 window of IMU
// samples; output: softmax over (zero velocity, moving) for the final
// timestep. Training is full BPTT with Adam, in double precision.
//
// Gate order in the stacked weight matrices is i, f, g, o.

#include "zupt/augment.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

namespace zupt {

inline constexpr int kLstmWindow = 100;

struct LstmLayer {
    Eigen::MatrixXd w_ih;  // 4H x in
    Eigen::MatrixXd w_hh;  // 4H x H
    Eigen::VectorXd b;     // 4H
};

struct LstmModel {
    int input_size = 6;
    int hidden = 80;
    std::vector<LstmLayer> layers;
    Eigen::MatrixXd fc_w;  // 2 x H
    Eigen::Vector2d fc_b = Eigen::Vector2d::Zero();
    Eigen::Matrix<double, 6, 1> input_scale = Eigen::Matrix<double, 6, 1>::Ones();
    std::uint64_t seed = 0;

    int num_layers() const { return static_cast<int>(layers.size()); }

    std::size_t parameter_count() const {
        std::size_t n = static_cast<std::size_t>(fc_w.size() + fc_b.size());
        for (const auto& l : layers) n += static_cast<std::size_t>(l.w_ih.size() + l.w_hh.size() + l.b.size());
        return n;
    }

    void validate() const {
        if (input_size != 6) fail("LstmModel: input size must be 6");
        if (hidden < 1 || layers.empty()) fail("LstmModel: need at least one layer and one unit");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& ly = layers[l];
            const Eigen::Index in = l == 0 ? input_size : hidden;
            if (ly.w_ih.rows() != 4 * hidden || ly.w_ih.cols() != in || ly.w_hh.rows() != 4 * hidden ||
                ly.w_hh.cols() != hidden || ly.b.size() != 4 * hidden)
                fail("LstmModel: inconsistent shapes in layer " + std::to_string(l));
            if (!ly.w_ih.allFinite() || !ly.w_hh.allFinite() || !ly.b.allFinite())
                fail("LstmModel: non-finite parameters in layer " + std::to_string(l));
        }
        if (fc_w.rows() != 2 || fc_w.cols() != hidden) fail("LstmModel: inconsistent output layer shape");
        if (!fc_w.allFinite() || !fc_b.allFinite() || !input_scale.allFinite()) fail("LstmModel: non-finite parameters");
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) initialisation with the forget-gate
    /// bias shifted by +1.
    static LstmModel init(int layers, int hidden, std::uint64_t seed) {
        if (layers < 1 || hidden < 1) fail("LstmModel: need at least one layer and one unit");
        LstmModel m;
        m.hidden = hidden;
        m.seed = seed;
        std::mt19937_64 rng(seed);
        const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
        std::uniform_real_distribution<double> u(-k, k);
        auto fill = [&](Eigen::MatrixXd& w) {
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
        };
        for (int l = 0; l < layers; ++l) {
            LstmLayer ly;
            ly.w_ih.resize(4 * hidden, l == 0 ? 6 : hidden);
            ly.w_hh.resize(4 * hidden, hidden);
            Eigen::MatrixXd b(4 * hidden, 1);
            fill(ly.w_ih);
            fill(ly.w_hh);
            fill(b);
            ly.b = b.col(0);
            ly.b.segment(hidden, hidden).array() += 1.0;
            m.layers.push_back(std::move(ly));
        }
        m.fc_w.resize(2, hidden);
        fill(m.fc_w);
        Eigen::MatrixXd fb(2, 1);
        fill(fb);
        m.fc_b = fb.col(0);
        return m;
    }
};

/// Flat views over all parameters in a fixed order, used by the optimiser,
/// gradient checks and serialisation.
struct LstmParamRef {
    std::string name;
    double* data;
    Eigen::Index size;
};

inline std::vector<LstmParamRef> parameter_refs(LstmModel& m) {
    std::vector<LstmParamRef> out;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& ly = m.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        out.push_back({p + "w_ih", ly.w_ih.data(), ly.w_ih.size()});
        out.push_back({p + "w_hh", ly.w_hh.data(), ly.w_hh.size()});
        out.push_back({p + "b", ly.b.data(), ly.b.size()});
    }
    out.push_back({"fc.w", m.fc_w.data(), m.fc_w.size()});
    out.push_back({"fc.b", m.fc_b.data(), m.fc_b.size()});
    return out;
}

/// Model with every parameter zeroed and the same shapes as `m`.
inline LstmModel zeros_like(const LstmModel& m) {
    LstmModel z = m;
    for (auto& r : parameter_refs(z)) std::fill(r.data, r.data + r.size, 0.0);
    return z;
}

struct LstmOutput {
    double p_zero = 0.5;
    double p_move = 0.5;
};

namespace lstm_detail {

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

struct LayerCache {
    std::vector<Eigen::MatrixXd> i, f, g, o, c, tc, h;  // per timestep, H x B
};

struct BatchCache {
    std::vector<Eigen::MatrixXd> x;  // scaled input per timestep, 6 x B
    std::vector<LayerCache> layers;
    Eigen::MatrixXd logits;  // 2 x B
    Eigen::MatrixXd prob;    // 2 x B
};

/// Forward pass over a batch of equally long windows (columns are samples).
inline BatchCache forward_batch(const LstmModel& m, std::span<const ImuWindow* const> xs, bool keep) {
    const auto bsz = static_cast<Eigen::Index>(xs.size());
    const auto steps = static_cast<std::size_t>(xs.front()->rows());
    const Eigen::Index h = m.hidden;
    BatchCache cache;
    cache.x.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        cache.x[t].resize(6, bsz);
        for (Eigen::Index b = 0; b < bsz; ++b)
            cache.x[t].col(b) = xs[static_cast<std::size_t>(b)]->row(static_cast<Eigen::Index>(t)).transpose().cwiseProduct(m.input_scale);
    }
    cache.layers.resize(m.layers.size());
    std::vector<Eigen::MatrixXd> below = cache.x;
    Eigen::MatrixXd h_last;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& ly = m.layers[l];
        auto& lc = cache.layers[l];
        Eigen::MatrixXd hp = Eigen::MatrixXd::Zero(h, bsz), cp = Eigen::MatrixXd::Zero(h, bsz);
        std::vector<Eigen::MatrixXd> out(steps);
        if (keep) {
            for (auto* v : {&lc.i, &lc.f, &lc.g, &lc.o, &lc.c, &lc.tc, &lc.h}) v->resize(steps);
        }
        for (std::size_t t = 0; t < steps; ++t) {
            Eigen::MatrixXd a = ly.w_ih * below[t] + ly.w_hh * hp;
            a.colwise() += ly.b;
            Eigen::MatrixXd ig = sigmoid(a.topRows(h));
            Eigen::MatrixXd fg = sigmoid(a.middleRows(h, h));
            Eigen::MatrixXd gg = a.middleRows(2 * h, h).array().tanh().matrix();
            Eigen::MatrixXd og = sigmoid(a.bottomRows(h));
            Eigen::MatrixXd c = fg.cwiseProduct(cp) + ig.cwiseProduct(gg);
            Eigen::MatrixXd tc = c.array().tanh().matrix();
            Eigen::MatrixXd hn = og.cwiseProduct(tc);
            if (keep) {
                lc.i[t] = std::move(ig);
                lc.f[t] = std::move(fg);
                lc.g[t] = std::move(gg);
                lc.o[t] = std::move(og);
                lc.c[t] = c;
                lc.tc[t] = std::move(tc);
                lc.h[t] = hn;
            }
            cp = std::move(c);
            hp = hn;
            out[t] = std::move(hn);
        }
        h_last = hp;
        below = std::move(out);
    }
    cache.logits = m.fc_w * h_last;
    cache.logits.colwise() += m.fc_b;
    cache.prob.resize(2, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
        const double mx = cache.logits.col(b).maxCoeff();
        const Eigen::Vector2d e = (cache.logits.col(b).array() - mx).exp();
        cache.prob.col(b) = e / e.sum();
    }
    if (!cache.prob.allFinite()) fail("lstm_forward: non-finite activations");
    return cache;
}

}  // namespace lstm_detail

inline LstmOutput lstm_forward(const LstmModel& m, const ImuWindow& x) {
    if (x.rows() < 1) fail("lstm_forward: empty window");
    const ImuWindow* p = &x;
    const auto c = lstm_detail::forward_batch(m, std::span<const ImuWindow* const>(&p, 1), false);
    return {c.prob(0, 0), c.prob(1, 0)};
}

/// Binary cross-entropy on p_zero with y = 1 meaning stationary. p is
/// clamped into [1e-12, 1 - 1e-12]; `clamped` reports whether that happened.
inline double cross_entropy(std::span<const int> y, std::span<const double> p, bool* clamped = nullptr) {
    if (y.size() != p.size() || y.empty()) fail("cross_entropy: need equally sized, non-empty inputs");
    constexpr double eps = 1e-12;
    bool any = false;
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double pi = p[i];
        if (pi < eps || pi > 1.0 - eps) {
            // An exact 0 or 1 that agrees with the label contributes nothing.
            if (!((pi >= 1.0 && y[i] == 1) || (pi <= 0.0 && y[i] == 0))) any = true;
            pi = std::clamp(pi, eps, 1.0 - eps);
        }
        sum += y[i] ? std::log(pi) : std::log(1.0 - pi);
    }
    if (clamped) *clamped = any;
    return -sum / static_cast<double>(y.size());
}

struct TrainSample {
    ImuWindow x;  // kLstmWindow x 6
    int y = 0;    // 1 = stationary at the final timestep
};

struct GradientResult {
    LstmModel grad;  // same shapes as the model
    double loss = 0.0;
};

namespace lstm_detail {

/// Summed (not averaged) loss and gradient of one chunk.
inline GradientResult chunk_gradient(const LstmModel& m, std::span<const ImuWindow* const> xs, std::span<const int> ys) {
    const auto bsz = static_cast<Eigen::Index>(xs.size());
    const auto cache = forward_batch(m, xs, true);
    const Eigen::Index h = m.hidden;
    const std::size_t steps = cache.x.size();
    GradientResult out;
    out.grad = zeros_like(m);

    Eigen::MatrixXd dlogit(2, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
        const double y = ys[static_cast<std::size_t>(b)];
        const double p = cache.prob(0, b);
        const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
        out.loss -= y > 0 ? std::log(pc) : std::log(1.0 - pc);
        dlogit(0, b) = p - y;
        dlogit(1, b) = y - p;
    }
    const auto& top = cache.layers.back();
    out.grad.fc_w = dlogit * top.h.back().transpose();
    out.grad.fc_b = dlogit.rowwise().sum();

    // dh arriving from above at every timestep (only the last one for the top layer).
    std::vector<Eigen::MatrixXd> dh_in(steps, Eigen::MatrixXd::Zero(h, bsz));
    dh_in.back() = m.fc_w.transpose() * dlogit;
    for (std::size_t li = m.layers.size(); li-- > 0;) {
        const auto& ly = m.layers[li];
        const auto& lc = cache.layers[li];
        auto& gl = out.grad.layers[li];
        const auto& below = li == 0 ? cache.x : cache.layers[li - 1].h;
        std::vector<Eigen::MatrixXd> dx(steps);
        Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h, bsz), dc_next = Eigen::MatrixXd::Zero(h, bsz);
        Eigen::MatrixXd da(4 * h, bsz);
        for (std::size_t t = steps; t-- > 0;) {
            const Eigen::MatrixXd dh = dh_in[t] + dh_next;
            const Eigen::MatrixXd dc =
                dh.cwiseProduct(lc.o[t]).cwiseProduct((1.0 - lc.tc[t].array().square()).matrix()) + dc_next;
            const Eigen::MatrixXd c_prev = t > 0 ? lc.c[t - 1] : Eigen::MatrixXd::Zero(h, bsz);
            const Eigen::MatrixXd h_prev = t > 0 ? lc.h[t - 1] : Eigen::MatrixXd::Zero(h, bsz);
            da.topRows(h) = dc.cwiseProduct(lc.g[t]).cwiseProduct(lc.i[t].cwiseProduct((1.0 - lc.i[t].array()).matrix()));
            da.middleRows(h, h) =
                dc.cwiseProduct(c_prev).cwiseProduct(lc.f[t].cwiseProduct((1.0 - lc.f[t].array()).matrix()));
            da.middleRows(2 * h, h) = dc.cwiseProduct(lc.i[t]).cwiseProduct((1.0 - lc.g[t].array().square()).matrix());
            da.bottomRows(h) =
                dh.cwiseProduct(lc.tc[t]).cwiseProduct(lc.o[t].cwiseProduct((1.0 - lc.o[t].array()).matrix()));
            gl.w_ih.noalias() += da * below[t].transpose();
            gl.w_hh.noalias() += da * h_prev.transpose();
            gl.b += da.rowwise().sum();
            if (li > 0) dx[t] = ly.w_ih.transpose() * da;
            dh_next = ly.w_hh.transpose() * da;
            dc_next = dc.cwiseProduct(lc.f[t]);
        }
        if (li > 0) dh_in = std::move(dx);
    }
    return out;
}

inline void add_into(LstmModel& acc, LstmModel& g) {
    auto a = parameter_refs(acc);
    auto b = parameter_refs(g);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < a[i].size; ++j) a[i].data[j] += b[i].data[j];
}

/// Splits `n` items into fixed chunks, evaluates them on up to `workers`
/// threads and hands results back in chunk order.
template <class Fn>
void for_chunks(std::size_t n, std::size_t chunk, int workers, Fn&& fn) {
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    if (workers <= 1 || nchunks <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t c; (c = next.fetch_add(1)) < nchunks;) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        });
    for (auto& t : pool) t.join();
}

}  // namespace lstm_detail

inline constexpr std::size_t kGradientChunk = 32;

/// Mean loss and gradient over the batch. The batch is processed in chunks
/// of 32 windows whose sums are added in chunk order, so the result does
/// not depend on `workers`.
inline GradientResult gradient(const LstmModel& m, std::span<const TrainSample> batch, int workers = 1) {
    if (batch.empty()) fail("gradient: empty batch");
    m.validate();
    std::vector<const ImuWindow*> xs;
    std::vector<int> ys;
    for (const auto& s : batch) {
        if (s.x.rows() != batch.front().x.rows()) fail("gradient: windows in a batch must have equal length");
        xs.push_back(&s.x);
        ys.push_back(s.y);
    }
    const std::size_t nchunks = (batch.size() + kGradientChunk - 1) / kGradientChunk;
    std::vector<GradientResult> parts(nchunks);
    lstm_detail::for_chunks(batch.size(), kGradientChunk, workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        parts[c] = lstm_detail::chunk_gradient(m, std::span<const ImuWindow* const>(xs.data() + lo, hi - lo),
                                               std::span<const int>(ys.data() + lo, hi - lo));
    });
    GradientResult out = std::move(parts.front());
    for (std::size_t c = 1; c < nchunks; ++c) {
        lstm_detail::add_into(out.grad, parts[c].grad);
        out.loss += parts[c].loss;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (auto& r : parameter_refs(out.grad)) {
        for (Eigen::Index j = 0; j < r.size; ++j) r.data[j] *= inv;
        if (!std::all_of(r.data, r.data + r.size, [](double v) { return std::isfinite(v); }))
            fail("gradient: non-finite gradient in " + r.name);
    }
    return out;
}

/// p_zero for every window, evaluated in chunks.
inline std::vector<double> predict_zero(const LstmModel& m, std::span<const ImuWindow* const> xs, int workers = 1) {
    std::vector<double> p(xs.size());
    lstm_detail::for_chunks(xs.size(), 256, workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
        const auto c = lstm_detail::forward_batch(m, xs.subspan(lo, hi - lo), false);
        for (std::size_t i = lo; i < hi; ++i) p[i] = c.prob(0, static_cast<Eigen::Index>(i - lo));
    });
    return p;
}

inline double dataset_loss(const LstmModel& m, std::span<const TrainSample> data, int workers = 1) {
    std::vector<const ImuWindow*> xs;
    std::vector<int> ys;
    for (const auto& s : data) {
        xs.push_back(&s.x);
        ys.push_back(s.y);
    }
    return cross_entropy(ys, predict_zero(m, xs, workers));
}

struct TrainConfig {
    int layers = 6;
    int hidden = 80;
    int epochs = 300;
    double learning_rate = 1e-3;
    int batch_size = 256;
    double gate = 0.85;
    std::uint64_t seed = 0;
    bool augment_rotation = true;
    bool augment_scale = true;
    double max_rotation = 10.0 * std::numbers::pi / 180.0;  // rad
    double scale_min = 0.9;
    double scale_max = 1.1;
    double validation_fraction = 0.15;  // used when no validation set is given
    int workers = 1;

    void validate() const {
        if (layers < 1 || hidden < 1) fail("TrainConfig: layers and hidden must be >= 1");
        if (epochs < 1 || batch_size < 1) fail("TrainConfig: epochs and batch_size must be >= 1");
        if (!(learning_rate > 0.0)) fail("TrainConfig: learning_rate must be positive");
        if (!(gate > 0.5 && gate < 1.0)) fail("TrainConfig: gate must lie in (0.5, 1)");
        if (max_rotation < 0.0 || !(scale_min > 0.0) || scale_max < scale_min) fail("TrainConfig: bad augmentation range");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) fail("TrainConfig: validation_fraction must lie in (0, 1)");
    }
};

struct TrainHistory {
    double initial_train_loss = 0.0;
    std::vector<double> train_loss;       // mean batch loss per epoch
    std::vector<double> validation_loss;  // per epoch
    int best_epoch = -1;
};

namespace lstm_detail {

/// Isotropic per-group scale (accelerometer, gyro) from the RMS vector norm,
/// so rotating the input commutes with scaling.
inline Eigen::Matrix<double, 6, 1> input_scale_of(std::span<const TrainSample> data) {
    double sa = 0.0, sg = 0.0;
    std::size_t n = 0;
    for (const auto& s : data) {
        sa += s.x.leftCols<3>().squaredNorm();
        sg += s.x.rightCols<3>().squaredNorm();
        n += static_cast<std::size_t>(s.x.rows());
    }
    const double ra = std::sqrt(sa / static_cast<double>(n)), rg = std::sqrt(sg / static_cast<double>(n));
    Eigen::Matrix<double, 6, 1> out;
    out.head<3>().setConstant(ra > 0.0 ? 1.0 / ra : 1.0);
    out.tail<3>().setConstant(rg > 0.0 ? 1.0 / rg : 1.0);
    return out;
}

}  // namespace lstm_detail

/// Adam on shuffled mini-batches; returns the parameters with the lowest
/// validation loss seen at the end of any epoch.
inline LstmModel train(std::span<const TrainSample> train_set, std::span<const TrainSample> validation_set,
                       const TrainConfig& cfg, TrainHistory* history = nullptr) {
    cfg.validate();
    if (train_set.empty() || validation_set.empty()) fail("train: empty training or validation set");
    bool pos = false, neg = false;
    for (const auto& s : train_set) (s.y ? pos : neg) = true;
    if (!pos || !neg) fail("train: training set must contain both classes");

    LstmModel model = LstmModel::init(cfg.layers, cfg.hidden, cfg.seed);
    model.input_scale = lstm_detail::input_scale_of(train_set);
    auto params = parameter_refs(model);
    std::vector<Eigen::VectorXd> m1, m2;
    for (const auto& r : params) {
        m1.push_back(Eigen::VectorXd::Zero(r.size));
        m2.push_back(Eigen::VectorXd::Zero(r.size));
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    TrainHistory hist;
    hist.initial_train_loss = dataset_loss(model, train_set, cfg.workers);
    LstmModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    long step = 0;
    std::uniform_real_distribution<double> scale(cfg.scale_min, cfg.scale_max);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TrainSample> batch;
            batch.reserve(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                TrainSample s = train_set[order[i]];
                if (cfg.augment_rotation) s.x = rotate_sample(s.x, random_small_rotation(rng, cfg.max_rotation));
                if (cfg.augment_scale) s.x = scale_sample(s.x, scale(rng));
                batch.push_back(std::move(s));
            }
            auto g = gradient(model, batch, cfg.workers);
            if (!std::isfinite(g.loss))
                diverge("train: loss is NaN at epoch " + std::to_string(epoch) + ", batch starting at " + std::to_string(lo));
            loss_sum += g.loss * static_cast<double>(batch.size());
            seen += batch.size();

            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            auto grads = parameter_refs(g.grad);
            for (std::size_t p = 0; p < params.size(); ++p) {
                for (Eigen::Index j = 0; j < params[p].size; ++j) {
                    const double gj = grads[p].data[j];
                    m1[p][j] = beta1 * m1[p][j] + (1.0 - beta1) * gj;
                    m2[p][j] = beta2 * m2[p][j] + (1.0 - beta2) * gj * gj;
                    params[p].data[j] -= cfg.learning_rate * (m1[p][j] / c1) / (std::sqrt(m2[p][j] / c2) + eps);
                }
            }
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(seen));
        const double val = dataset_loss(model, validation_set, cfg.workers);
        hist.validation_loss.push_back(val);
        if (val < best_val) {
            best_val = val;
            best = model;
            hist.best_epoch = epoch;
        }
    }
    if (history) *history = std::move(hist);
    return best;
}

/// Holds out a seeded random `validation_fraction` of the data for model
/// selection.
inline LstmModel train(std::span<const TrainSample> dataset, const TrainConfig& cfg, TrainHistory* history = nullptr) {
    cfg.validate();
    if (dataset.size() < 2) fail("train: need at least 2 samples");
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto nval = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::round(cfg.validation_fraction * static_cast<double>(dataset.size()))), 1,
        dataset.size() - 1);
    std::vector<TrainSample> tr, va;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < nval ? va : tr).push_back(dataset[idx[i]]);
    return train(tr, va, cfg, history);
}

/// Window ending at k for every k >= 99; flag iff the zero-velocity class
/// wins and p_zero >= gate. Earlier samples are flagged 0.
inline StationaryFlags classify(const LstmModel& model, const ImuSequence& seq, double gate = 0.85,
                                std::vector<double>* p_zero = nullptr, int workers = 1) {
    model.validate();
    if (seq.size() < kLstmWindow) fail("classify: sequence shorter than 100 samples");
    const ImuWindow all = to_window(seq.samples());
    std::vector<ImuWindow> windows;
    windows.reserve(seq.size() - kLstmWindow + 1);
    for (std::size_t k = kLstmWindow - 1; k < seq.size(); ++k)
        windows.push_back(all.middleRows(static_cast<Eigen::Index>(k + 1 - kLstmWindow), kLstmWindow));
    std::vector<const ImuWindow*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    const auto p = predict_zero(model, ptrs, workers);
    StationaryFlags flags(seq.size(), 0);
    if (p_zero) p_zero->assign(seq.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const std::size_t k = i + kLstmWindow - 1;
        flags[k] = (p[i] > 1.0 - p[i] && p[i] >= gate) ? 1 : 0;
        if (p_zero) (*p_zero)[k] = p[i];
    }
    return flags;
}

/// Random windows from a labelled trial; the label is the ground-truth flag
/// at the window's final sample.
template <class Engine>
std::vector<TrainSample> make_train_samples(const TrialRecord& trial, int count, Engine& rng) {
    if (!trial.gt_zv) fail("make_train_samples: trial has no zero-velocity labels");
    if (trial.imu.size() < kLstmWindow) fail("make_train_samples: trial shorter than 100 samples");
    const ImuWindow all = to_window(trial.imu.samples());
    std::uniform_int_distribution<std::size_t> end(kLstmWindow - 1, trial.imu.size() - 1);
    std::vector<TrainSample> out;
    for (int i = 0; i < count; ++i) {
        const std::size_t k = end(rng);
        out.push_back({all.middleRows(static_cast<Eigen::Index>(k + 1 - kLstmWindow), kLstmWindow), (*trial.gt_zv)[k] ? 1 : 0});
    }
    return out;
}

inline nlohmann::json to_json(const LstmModel& m) {
    auto mm = m;
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "lstm";
    j["input_size"] = m.input_size;
    j["hidden"] = m.hidden;
    j["layers"] = m.num_layers();
    j["window"] = kLstmWindow;
    j["gate_order"] = "i,f,g,o";
    j["seed"] = m.seed;
    j["input_scale"] = std::vector<double>(m.input_scale.data(), m.input_scale.data() + 6);
    nlohmann::json params = nlohmann::json::object();
    for (const auto& r : parameter_refs(mm)) params[r.name] = std::vector<double>(r.data, r.data + r.size);
    j["parameters"] = params;
    return j;
}

inline LstmModel lstm_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1) fail("lstm model: unsupported schema_version");
        if (j.at("kind").get<std::string>() != "lstm") fail("lstm model: not an LSTM model file");
        if (j.at("input_size").get<int>() != 6) fail("lstm model: input_size must be 6");
        LstmModel m = LstmModel::init(j.at("layers").get<int>(), j.at("hidden").get<int>(), j.at("seed").get<std::uint64_t>());
        const auto scale = j.at("input_scale").get<std::vector<double>>();
        if (scale.size() != 6) fail("lstm model: input_scale must have 6 entries");
        m.input_scale = Eigen::Map<const Eigen::Matrix<double, 6, 1>>(scale.data());
        const auto& params = j.at("parameters");
        for (auto& r : parameter_refs(m)) {
            const auto v = params.at(r.name).get<std::vector<double>>();
            if (static_cast<Eigen::Index>(v.size()) != r.size) fail("lstm model: wrong size for " + r.name);
            std::copy(v.begin(), v.end(), r.data);
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string("lstm model: ") + e.what());
    }
}

}  // namespace zupt
