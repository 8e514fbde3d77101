#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "haven/config.hpp"
#include "haven/rng.hpp"
#include "haven/tactics.hpp"

namespace haven {

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

struct NetworkShape {
    int input_dim = kFeatureDim;
    int d_model = 64;
    int heads = 2;
    int layers = 2;
    int d_ff = 128;
    int k = 3;

    [[nodiscard]] static NetworkShape from(const NetworkConfig& c) {
        return NetworkShape{kFeatureDim, c.d_model, c.heads, c.layers, c.d_ff, c.k};
    }
    [[nodiscard]] int head_dim() const { return d_model / heads; }
    void validate() const {
        if (input_dim <= 0 || d_model <= 0 || heads <= 0 || layers < 0 || d_ff <= 0 || k < 1) {
            throw std::invalid_argument("network shape: dimensions must be positive");
        }
        if (d_model % heads != 0) {
            throw std::invalid_argument("network shape: d_model must be divisible by heads");
        }
    }
    bool operator==(const NetworkShape&) const = default;
};

struct TensorInfo {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    [[nodiscard]] std::size_t size() const { return rows * cols; }
};

struct LayerOffsets {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

/// Offsets of every tensor in the flat parameter vector. The order here is
/// the checkpoint order: input projection, positional encodings, per-layer
/// blocks, final norm, output head.
struct ParamLayout {
    std::size_t in_w = 0, in_b = 0, pos = 0;
    std::vector<LayerOffsets> layers;
    std::size_t lnf_g = 0, lnf_b = 0, out_w = 0, out_b = 0;
    std::size_t total = 0;
    std::vector<TensorInfo> tensors;

    explicit ParamLayout(const NetworkShape& s) {
        s.validate();
        const auto d = static_cast<std::size_t>(s.d_model);
        const auto f = static_cast<std::size_t>(s.d_ff);
        auto add = [&](const std::string& name, std::size_t rows, std::size_t cols) {
            tensors.push_back({name, total, rows, cols});
            const std::size_t off = total;
            total += rows * cols;
            return off;
        };
        in_w = add("input.weight", static_cast<std::size_t>(s.input_dim), d);
        in_b = add("input.bias", 1, d);
        pos = add("positional", static_cast<std::size_t>(s.k), d);
        for (int l = 0; l < s.layers; ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            LayerOffsets o{};
            o.ln1_g = add(p + "norm1.gain", 1, d);
            o.ln1_b = add(p + "norm1.bias", 1, d);
            o.wq = add(p + "attn.query.weight", d, d);
            o.bq = add(p + "attn.query.bias", 1, d);
            o.wk = add(p + "attn.key.weight", d, d);
            o.bk = add(p + "attn.key.bias", 1, d);
            o.wv = add(p + "attn.value.weight", d, d);
            o.bv = add(p + "attn.value.bias", 1, d);
            o.wo = add(p + "attn.output.weight", d, d);
            o.bo = add(p + "attn.output.bias", 1, d);
            o.ln2_g = add(p + "norm2.gain", 1, d);
            o.ln2_b = add(p + "norm2.bias", 1, d);
            o.w1 = add(p + "ff.hidden.weight", d, f);
            o.b1 = add(p + "ff.hidden.bias", 1, f);
            o.w2 = add(p + "ff.output.weight", f, d);
            o.b2 = add(p + "ff.output.bias", 1, d);
            layers.push_back(o);
        }
        lnf_g = add("final_norm.gain", 1, d);
        lnf_b = add("final_norm.bias", 1, d);
        out_w = add("head.weight", d, 1);
        out_b = add("head.bias", 1, 1);
    }
};

/// All network weights as one flat vector addressed through `ParamLayout`.
/// Gradients use the same type.
class NetworkParams {
public:
    NetworkParams() : NetworkParams(NetworkShape{}) {}
    explicit NetworkParams(const NetworkShape& shape) : shape_(shape), layout_(shape), data_(layout_.total, 0.0) {}

    /// Weights uniform in +-1/sqrt(fan_in), biases zero, norm gains one.
    [[nodiscard]] static NetworkParams initialized(const NetworkShape& shape, std::uint64_t seed) {
        NetworkParams p(shape);
        Rng rng = Rng::stream(seed, "dtqn_init");
        for (const auto& t : p.layout_.tensors) {
            const bool is_gain = t.name.ends_with("gain");
            const bool is_bias = t.name.ends_with("bias");
            auto span = p.tensor(t);
            if (is_gain) {
                std::fill(span.begin(), span.end(), 1.0);
            } else if (is_bias) {
                std::fill(span.begin(), span.end(), 0.0);
            } else {
                const std::size_t fan_in = t.name == "positional" ? t.cols : t.rows;
                const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                for (auto& v : span) {
                    v = rng.uniform(-bound, bound);
                }
            }
        }
        return p;
    }

    [[nodiscard]] const NetworkShape& shape() const { return shape_; }
    [[nodiscard]] const ParamLayout& layout() const { return layout_; }
    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] const double* at(std::size_t off) const { return data_.data() + off; }
    [[nodiscard]] double* at(std::size_t off) { return data_.data() + off; }
    [[nodiscard]] std::span<double> tensor(const TensorInfo& t) { return {data_.data() + t.offset, t.size()}; }
    [[nodiscard]] std::span<const double> tensor(const TensorInfo& t) const {
        return {data_.data() + t.offset, t.size()};
    }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }
    bool operator==(const NetworkParams& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    NetworkShape shape_;
    ParamLayout layout_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace detail {

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}
    double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
};

inline constexpr double kNormEps = 1e-5;

/// out = in * W + b, W stored (in.cols x n_out) row-major.
inline Mat linear(const Mat& in, const double* w, const double* b, int n_out) {
    Mat out(in.rows, n_out);
    for (int r = 0; r < in.rows; ++r) {
        double* o = out.row(r);
        for (int j = 0; j < n_out; ++j) {
            o[j] = b[j];
        }
        const double* x = in.row(r);
        for (int i = 0; i < in.cols; ++i) {
            const double xi = x[i];
            const double* wr = w + static_cast<std::size_t>(i) * n_out;
            for (int j = 0; j < n_out; ++j) {
                o[j] += xi * wr[j];
            }
        }
    }
    return out;
}

/// Accumulates dW, db and (optionally) d_in for out = in * W + b.
inline void linear_backward(const Mat& in, const Mat& d_out, const double* w, double* dw, double* db, Mat* d_in) {
    const int n_out = d_out.cols;
    for (int r = 0; r < in.rows; ++r) {
        const double* x = in.row(r);
        const double* g = d_out.row(r);
        for (int j = 0; j < n_out; ++j) {
            db[j] += g[j];
        }
        for (int i = 0; i < in.cols; ++i) {
            double* dwr = dw + static_cast<std::size_t>(i) * n_out;
            const double xi = x[i];
            const double* wr = w + static_cast<std::size_t>(i) * n_out;
            double acc = 0.0;
            for (int j = 0; j < n_out; ++j) {
                dwr[j] += xi * g[j];
                acc += wr[j] * g[j];
            }
            if (d_in != nullptr) {
                (*d_in)(r, i) += acc;
            }
        }
    }
}

struct NormCache {
    Mat xhat;
    std::vector<double> rstd;
};

inline Mat layer_norm(const Mat& x, const double* g, const double* b, NormCache& cache) {
    Mat out(x.rows, x.cols);
    cache.xhat = Mat(x.rows, x.cols);
    cache.rstd.assign(static_cast<std::size_t>(x.rows), 0.0);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double mean = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            mean += xr[j];
        }
        mean /= x.cols;
        double var = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            var += (xr[j] - mean) * (xr[j] - mean);
        }
        var /= x.cols;
        const double rstd = 1.0 / std::sqrt(var + kNormEps);
        cache.rstd[static_cast<std::size_t>(r)] = rstd;
        for (int j = 0; j < x.cols; ++j) {
            const double xh = (xr[j] - mean) * rstd;
            cache.xhat(r, j) = xh;
            out(r, j) = xh * g[j] + b[j];
        }
    }
    return out;
}

/// Accumulates into dg, db and d_in.
inline void layer_norm_backward(const Mat& d_out, const NormCache& cache, const double* g, double* dg, double* db,
                                Mat& d_in) {
    const int n = d_out.cols;
    for (int r = 0; r < d_out.rows; ++r) {
        const double* go = d_out.row(r);
        const double* xh = cache.xhat.row(r);
        double mean_dxh = 0.0;
        double mean_dxh_xh = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dxh = go[j] * g[j];
            dg[j] += go[j] * xh[j];
            db[j] += go[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
        }
        mean_dxh /= n;
        mean_dxh_xh /= n;
        const double rstd = cache.rstd[static_cast<std::size_t>(r)];
        for (int j = 0; j < n; ++j) {
            const double dxh = go[j] * g[j];
            d_in(r, j) += rstd * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

}  // namespace detail

struct LayerCache {
    detail::Mat h_in;
    detail::NormCache norm1;
    detail::Mat a, q, key, value;
    /// Attention probabilities, [head][query row][key row]; zero above the diagonal.
    std::vector<double> probs;
    detail::Mat ctx, h_mid;
    detail::NormCache norm2;
    detail::Mat c, pre, act;
};

struct ForwardCache {
    detail::Mat x;
    std::vector<LayerCache> layers;
    detail::Mat h_final;
    detail::NormCache norm_final;
    detail::Mat z;
    /// k x 1 network output.
    std::vector<double> output;
};

/// Causal transformer over the k x 16 sequence; row j attends to rows <= j.
[[nodiscard]] inline ForwardCache forward(const NetworkParams& params, const ObservationSequence& X) {
    using detail::Mat;
    const NetworkShape& s = params.shape();
    const ParamLayout& L = params.layout();
    if (X.rows() != s.k) {
        throw std::invalid_argument("dtqn forward: sequence has " + std::to_string(X.rows()) + " rows, network expects " +
                                    std::to_string(s.k));
    }
    const int k = s.k;
    const int d = s.d_model;
    const int dh = s.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ForwardCache cache;
    cache.x = Mat(k, s.input_dim);
    std::copy(X.data().begin(), X.data().end(), cache.x.v.begin());

    Mat h = detail::linear(cache.x, params.at(L.in_w), params.at(L.in_b), d);
    const double* pos = params.at(L.pos);
    for (std::size_t i = 0; i < h.v.size(); ++i) {
        h.v[i] += pos[i];
    }

    cache.layers.resize(static_cast<std::size_t>(s.layers));
    for (int l = 0; l < s.layers; ++l) {
        const LayerOffsets& o = L.layers[static_cast<std::size_t>(l)];
        LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
        lc.h_in = h;
        lc.a = detail::layer_norm(h, params.at(o.ln1_g), params.at(o.ln1_b), lc.norm1);
        lc.q = detail::linear(lc.a, params.at(o.wq), params.at(o.bq), d);
        lc.key = detail::linear(lc.a, params.at(o.wk), params.at(o.bk), d);
        lc.value = detail::linear(lc.a, params.at(o.wv), params.at(o.bv), d);
        lc.probs.assign(static_cast<std::size_t>(s.heads * k * k), 0.0);
        lc.ctx = Mat(k, d);
        for (int hd = 0; hd < s.heads; ++hd) {
            const int off = hd * dh;
            for (int i = 0; i < k; ++i) {
                double* p = lc.probs.data() + (static_cast<std::size_t>(hd) * k + i) * k;
                double max_s = -std::numeric_limits<double>::infinity();
                for (int j = 0; j <= i; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < dh; ++t) {
                        acc += lc.q(i, off + t) * lc.key(j, off + t);
                    }
                    p[j] = acc * scale;
                    max_s = std::max(max_s, p[j]);
                }
                double sum = 0.0;
                for (int j = 0; j <= i; ++j) {
                    p[j] = std::exp(p[j] - max_s);
                    sum += p[j];
                }
                for (int j = 0; j <= i; ++j) {
                    p[j] /= sum;
                    for (int t = 0; t < dh; ++t) {
                        lc.ctx(i, off + t) += p[j] * lc.value(j, off + t);
                    }
                }
            }
        }
        Mat attn = detail::linear(lc.ctx, params.at(o.wo), params.at(o.bo), d);
        lc.h_mid = h;
        for (std::size_t i = 0; i < attn.v.size(); ++i) {
            lc.h_mid.v[i] += attn.v[i];
        }
        lc.c = detail::layer_norm(lc.h_mid, params.at(o.ln2_g), params.at(o.ln2_b), lc.norm2);
        lc.pre = detail::linear(lc.c, params.at(o.w1), params.at(o.b1), s.d_ff);
        lc.act = Mat(k, s.d_ff);
        for (std::size_t i = 0; i < lc.pre.v.size(); ++i) {
            lc.act.v[i] = detail::gelu(lc.pre.v[i]);
        }
        Mat ff = detail::linear(lc.act, params.at(o.w2), params.at(o.b2), d);
        h = lc.h_mid;
        for (std::size_t i = 0; i < ff.v.size(); ++i) {
            h.v[i] += ff.v[i];
        }
    }
    cache.h_final = h;
    cache.z = detail::layer_norm(h, params.at(L.lnf_g), params.at(L.lnf_b), cache.norm_final);
    Mat y = detail::linear(cache.z, params.at(L.out_w), params.at(L.out_b), 1);
    cache.output = y.v;
    return cache;
}

/// Q-value of the sequence: the last output row.
[[nodiscard]] inline double q_value(const NetworkParams& params, const ObservationSequence& X) {
    return forward(params, X).output.back();
}

/// Gradient of sum_r upstream[r] * output[r] with respect to every parameter.
[[nodiscard]] inline NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                                            std::span<const double> upstream) {
    using detail::Mat;
    const NetworkShape& s = params.shape();
    const ParamLayout& L = params.layout();
    const int k = s.k;
    const int d = s.d_model;
    const int dh = s.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    if (upstream.size() != static_cast<std::size_t>(k) || cache.output.size() != static_cast<std::size_t>(k)) {
        throw std::invalid_argument("dtqn backward: upstream gradient / cache shape mismatch");
    }

    NetworkParams grad(s);
    Mat dy(k, 1);
    std::copy(upstream.begin(), upstream.end(), dy.v.begin());

    Mat dz(k, d);
    detail::linear_backward(cache.z, dy, params.at(L.out_w), grad.at(L.out_w), grad.at(L.out_b), &dz);
    Mat dh_res(k, d);
    detail::layer_norm_backward(dz, cache.norm_final, params.at(L.lnf_g), grad.at(L.lnf_g), grad.at(L.lnf_b), dh_res);

    for (int l = s.layers - 1; l >= 0; --l) {
        const LayerOffsets& o = L.layers[static_cast<std::size_t>(l)];
        const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];

        // feed-forward branch: h_out = h_mid + W2 gelu(W1 norm2(h_mid))
        Mat d_act(k, s.d_ff);
        detail::linear_backward(lc.act, dh_res, params.at(o.w2), grad.at(o.w2), grad.at(o.b2), &d_act);
        Mat d_pre(k, s.d_ff);
        for (std::size_t i = 0; i < d_pre.v.size(); ++i) {
            d_pre.v[i] = d_act.v[i] * detail::gelu_grad(lc.pre.v[i]);
        }
        Mat dc(k, d);
        detail::linear_backward(lc.c, d_pre, params.at(o.w1), grad.at(o.w1), grad.at(o.b1), &dc);
        Mat dh_mid = dh_res;
        detail::layer_norm_backward(dc, lc.norm2, params.at(o.ln2_g), grad.at(o.ln2_g), grad.at(o.ln2_b), dh_mid);

        // attention branch: h_mid = h_in + Wo attn(norm1(h_in))
        Mat d_ctx(k, d);
        detail::linear_backward(lc.ctx, dh_mid, params.at(o.wo), grad.at(o.wo), grad.at(o.bo), &d_ctx);
        Mat dq(k, d);
        Mat dk(k, d);
        Mat dv(k, d);
        std::vector<double> dp(static_cast<std::size_t>(k));
        for (int hd = 0; hd < s.heads; ++hd) {
            const int off = hd * dh;
            for (int i = 0; i < k; ++i) {
                const double* p = lc.probs.data() + (static_cast<std::size_t>(hd) * k + i) * k;
                double dot = 0.0;
                for (int j = 0; j <= i; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < dh; ++t) {
                        acc += d_ctx(i, off + t) * lc.value(j, off + t);
                        dv(j, off + t) += p[j] * d_ctx(i, off + t);
                    }
                    dp[static_cast<std::size_t>(j)] = acc;
                    dot += p[j] * acc;
                }
                for (int j = 0; j <= i; ++j) {
                    const double ds = p[j] * (dp[static_cast<std::size_t>(j)] - dot) * scale;
                    for (int t = 0; t < dh; ++t) {
                        dq(i, off + t) += ds * lc.key(j, off + t);
                        dk(j, off + t) += ds * lc.q(i, off + t);
                    }
                }
            }
        }
        Mat da(k, d);
        detail::linear_backward(lc.a, dq, params.at(o.wq), grad.at(o.wq), grad.at(o.bq), &da);
        detail::linear_backward(lc.a, dk, params.at(o.wk), grad.at(o.wk), grad.at(o.bk), &da);
        detail::linear_backward(lc.a, dv, params.at(o.wv), grad.at(o.wv), grad.at(o.bv), &da);
        dh_res = dh_mid;
        detail::layer_norm_backward(da, lc.norm1, params.at(o.ln1_g), grad.at(o.ln1_g), grad.at(o.ln1_b), dh_res);
    }

    double* dpos = grad.at(L.pos);
    for (std::size_t i = 0; i < dh_res.v.size(); ++i) {
        dpos[i] += dh_res.v[i];
    }
    detail::linear_backward(cache.x, dh_res, params.at(L.in_w), grad.at(L.in_w), grad.at(L.in_b), nullptr);
    return grad;
}

/// Gradient of q_value scaled by `upstream` (entry k of the output).
[[nodiscard]] inline NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, double upstream) {
    std::vector<double> up(static_cast<std::size_t>(params.shape().k), 0.0);
    up.back() = upstream;
    return backward(params, cache, up);
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double lr_, double b1 = 0.9, double b2 = 0.999, double e = 1e-8)
        : m(n, 0.0), v(n, 0.0), lr(lr_), beta1(b1), beta2(b2), eps(e) {}

    [[nodiscard]] static AdamState from(const NetworkParams& p, const TrainConfig& t) {
        return AdamState(p.size(), t.lr, t.beta1, t.beta2, t.adam_eps);
    }

    void apply(NetworkParams& params, const NetworkParams& grad) {
        if (m.size() != params.size() || grad.size() != params.size()) {
            throw std::invalid_argument("adam: state does not match parameters");
        }
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        auto p = params.data();
        auto g = grad.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
    bool operator==(const AdamState&) const = default;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainStepResult {
    /// 0.5 (q - target)^2 before the update.
    double loss = 0.0;
    double q = 0.0;
};

/// One Adam step on 0.5 (Q(X) - target)^2.
inline TrainStepResult train_step(NetworkParams& params, AdamState& adam, const ObservationSequence& X,
                                  double target) {
    const ForwardCache cache = forward(params, X);
    const double q = cache.output.back();
    const double err = q - target;
    const double loss = 0.5 * err * err;
    if (!std::isfinite(loss)) {
        throw TrainingDiverged("train_step: non-finite loss (q=" + std::to_string(q) +
                               ", target=" + std::to_string(target) + ")");
    }
    const NetworkParams grad = backward(params, cache, err);
    adam.apply(params, grad);
    return {loss, q};
}

/// Discounted roll-up of the executed low-level rewards, bootstrapped with
/// gamma^steps_elapsed * next_max_q unless terminal.
[[nodiscard]] inline double td_target(std::span<const double> rewards, double gamma, bool terminal,
                                      std::optional<double> next_max_q, int steps_elapsed) {
    if (terminal == next_max_q.has_value()) {
        throw std::invalid_argument("td_target: provide next_max_q exactly when non-terminal");
    }
    double ret = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        ret += discount * r;
        discount *= gamma;
    }
    if (!terminal) {
        // Iterated product, same rounding as the roll-up above.
        double boot = 1.0;
        for (int i = 0; i < steps_elapsed; ++i) {
            boot *= gamma;
        }
        ret += boot * *next_max_q;
    }
    return ret;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// Fills q_value of every unmasked candidate from its sequence.
inline void score_candidates(const NetworkParams& params, std::vector<Candidate>& candidates,
                             std::span<const FeatureVector16> history, SequenceMode mode) {
    for (auto& c : candidates) {
        if (c.masked) {
            c.q_value.reset();
            continue;
        }
        c.q_value = q_value(params, build_sequence(c.features, history, params.shape().k, mode));
    }
}

[[nodiscard]] inline double max_q(const std::vector<Candidate>& candidates) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
        if (!c.masked && c.q_value) {
            best = std::max(best, *c.q_value);
        }
    }
    if (!std::isfinite(best)) {
        throw std::invalid_argument("max_q: no scored candidate");
    }
    return best;
}

/// Epsilon-greedy over unmasked, already-scored candidates. Greedy ties go to
/// the lowest index. Consumes one uniform draw, plus one more when exploring.
[[nodiscard]] inline std::size_t select_subgoal(const std::vector<Candidate>& candidates, double epsilon, Rng& rng) {
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].masked) {
            valid.push_back(i);
        }
    }
    if (valid.empty()) {
        throw std::invalid_argument("select_subgoal: every candidate is masked");
    }
    if (rng.uniform() < epsilon) {
        return valid[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(valid.size()) - 1))];
    }
    std::size_t best = valid.front();
    for (std::size_t i : valid) {
        if (!candidates[i].q_value) {
            throw std::invalid_argument("select_subgoal: unmasked candidate was not scored");
        }
        if (*candidates[i].q_value > *candidates[best].q_value) {
            best = i;
        }
    }
    return best;
}

/// Scores then selects.
[[nodiscard]] inline std::size_t select_subgoal(const NetworkParams& params, std::vector<Candidate>& candidates,
                                                std::span<const FeatureVector16> history, SequenceMode mode,
                                                double epsilon, Rng& rng) {
    score_candidates(params, candidates, history, mode);
    return select_subgoal(candidates, epsilon, rng);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointSchema = 1;
inline constexpr char kCheckpointMagic[8] = {'H', 'A', 'V', 'E', 'N', 'C', 'K', 'P'};

struct Checkpoint {
    NetworkParams params;
    AdamState adam;
    std::uint64_t episode = 0;
    /// Resolved configuration of the run that produced the weights (JSON).
    std::string config_json;
};

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }
    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw std::runtime_error("checkpoint: truncated file");
        }
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint64_t checksum(std::span<const std::uint8_t> b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto c : b) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Layout (all little-endian): magic[8], u32 schema, u32 x6 shape
/// (input_dim, d_model, heads, layers, d_ff, k), u64 episode, u64 adam step,
/// f64 x4 (lr, beta1, beta2, eps), u64 config length + bytes, u64 n, then
/// n f64 parameters, n f64 first moments, n f64 second moments, and a
/// trailing u64 FNV-1a checksum of everything before it.
[[nodiscard]] inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.u32(kCheckpointSchema);
    const auto& s = ckpt.params.shape();
    for (int v : {s.input_dim, s.d_model, s.heads, s.layers, s.d_ff, s.k}) {
        w.u32(static_cast<std::uint32_t>(v));
    }
    w.u64(ckpt.episode);
    w.u64(ckpt.adam.step);
    w.f64(ckpt.adam.lr);
    w.f64(ckpt.adam.beta1);
    w.f64(ckpt.adam.beta2);
    w.f64(ckpt.adam.eps);
    w.u64(ckpt.config_json.size());
    w.raw(ckpt.config_json.data(), ckpt.config_json.size());
    const std::size_t n = ckpt.params.size();
    const bool has_moments = ckpt.adam.m.size() == n && ckpt.adam.v.size() == n;
    w.u64(n);
    for (double v : ckpt.params.data()) {
        w.f64(v);
    }
    for (std::size_t i = 0; i < n; ++i) {
        w.f64(has_moments ? ckpt.adam.m[i] : 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        w.f64(has_moments ? ckpt.adam.v[i] : 0.0);
    }
    w.u64(detail::checksum(w.bytes));
    return w.bytes;
}

[[nodiscard]] inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kCheckpointMagic) + 12) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    detail::ByteReader r(bytes);
    char magic[8];
    r.raw(magic, sizeof(magic));
    const std::uint32_t schema = r.u32();
    if (schema != kCheckpointSchema) {
        throw std::runtime_error("checkpoint: schema version " + std::to_string(schema) + " unsupported");
    }
    NetworkShape s;
    s.input_dim = static_cast<int>(r.u32());
    s.d_model = static_cast<int>(r.u32());
    s.heads = static_cast<int>(r.u32());
    s.layers = static_cast<int>(r.u32());
    s.d_ff = static_cast<int>(r.u32());
    s.k = static_cast<int>(r.u32());
    s.validate();
    Checkpoint ckpt{NetworkParams(s), AdamState{}, 0, {}};
    ckpt.episode = r.u64();
    ckpt.adam.step = r.u64();
    ckpt.adam.lr = r.f64();
    ckpt.adam.beta1 = r.f64();
    ckpt.adam.beta2 = r.f64();
    ckpt.adam.eps = r.f64();
    const std::uint64_t cfg_len = r.u64();
    if (cfg_len > r.remaining()) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    ckpt.config_json.resize(cfg_len);
    r.raw(ckpt.config_json.data(), cfg_len);
    const std::uint64_t n = r.u64();
    if (n != ckpt.params.size()) {
        throw std::runtime_error("checkpoint: parameter count does not match shape");
    }
    if (r.remaining() != (3 * n + 1) * 8) {
        throw std::runtime_error("checkpoint: truncated or oversized file");
    }
    for (auto& v : ckpt.params.data()) {
        v = r.f64();
    }
    ckpt.adam.m.resize(n);
    ckpt.adam.v.resize(n);
    for (auto& v : ckpt.adam.m) {
        v = r.f64();
    }
    for (auto& v : ckpt.adam.v) {
        v = r.f64();
    }
    const std::size_t body = r.position();
    const std::uint64_t stored = r.u64();
    if (stored != detail::checksum(bytes.subspan(0, body))) {
        throw std::runtime_error("checkpoint: checksum mismatch (corrupt file)");
    }
    return ckpt;
}

/// Writes via a temporary file and rename so an interrupted save never
/// replaces a good checkpoint.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const auto bytes = encode_checkpoint(ckpt);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("checkpoint: cannot write " + tmp);
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw std::runtime_error("checkpoint: write failed for " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("checkpoint: cannot move into place: " + path);
    }
}

[[nodiscard]] inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

/// Throws unless the checkpoint was trained with exactly `expected`.
inline void require_shape(const Checkpoint& ckpt, const NetworkShape& expected) {
    if (!(ckpt.params.shape() == expected)) {
        const auto& s = ckpt.params.shape();
        throw std::runtime_error("checkpoint: network shape mismatch (checkpoint k=" + std::to_string(s.k) +
                                 ", d_model=" + std::to_string(s.d_model) + "; run expects k=" +
                                 std::to_string(expected.k) + ", d_model=" + std::to_string(expected.d_model) + ")");
    }
}

}  // namespace haven
