#include "diffroll/model.hpp"

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace diffroll {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr int kTimeMlpDim = 512;  // the projected (B,512) embedding width

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
T silu(T x) {
    return x * sigmoid(x);
}

template <typename T>
T dsilu(T x) {
    const T s = sigmoid(x);
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
void add_bias_rows(mat<T>& y, const std::vector<T>& b) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < y.rows; ++i) {
        T* row = y.row(i);
        const T bv = b[static_cast<size_t>(i)];
        for (int j = 0; j < y.cols; ++j) row[j] += bv;
    }
}

template <typename T>
void rowsum_add(const mat<T>& dy, std::vector<T>& db) {
    for (int i = 0; i < dy.rows; ++i) {
        const T* row = dy.row(i);
        T acc = T(0);
        for (int j = 0; j < dy.cols; ++j) acc += row[j];
        db[static_cast<size_t>(i)] += acc;
    }
}

// y = w @ x + b, where w is [C_out x C_in] and x is [C_in x tau].
template <typename T>
void conv1x1(const Tensor<T>& w, const Tensor<T>& b, const mat<T>& x, mat<T>& y) {
    const int c_out = w.shape[0];
    Workspace<T>::ensure(y, c_out, x.cols);
    y.fill(T(0));
    gemm(c_out, x.cols, x.rows, w.w.data(), x.rows, x.data(), x.cols, y.data(), y.cols);
    add_bias_rows(y, b.w);
}

// Expanded convolution input: row (ci*k + tap) holds h[ci] shifted by
// (tap - k/2) * dilation with zero fill outside [0, tau).
template <typename T>
void im2col(const mat<T>& h, int kernel, int dilation, mat<T>& col) {
    const int c = h.rows, tau = h.cols;
    const int half = kernel / 2;
    Workspace<T>::ensure(col, c * kernel, tau);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int r = 0; r < c * kernel; ++r) {
        const int ci = r / kernel;
        const int tap = r % kernel;
        const int shift = (tap - half) * dilation;
        T* dst = col.row(r);
        const T* src = h.row(ci);
        const int lo = std::max(0, -shift);
        const int hi = std::min(tau, tau - shift);
        for (int j = 0; j < std::min(lo, tau); ++j) dst[j] = T(0);
        for (int j = std::max(hi, 0); j < tau; ++j) dst[j] = T(0);
        if (lo < hi) std::memcpy(dst + lo, src + lo + shift,
                                 static_cast<size_t>(hi - lo) * sizeof(T));
    }
}

// Scatter-add transpose of im2col: dh[ci][j + shift] += dcol[(ci,tap)][j].
template <typename T>
void col2im_add(const mat<T>& dcol, int kernel, int dilation, mat<T>& dh) {
    const int c = dh.rows, tau = dh.cols;
    const int half = kernel / 2;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int ci = 0; ci < c; ++ci) {
        T* dst = dh.row(ci);
        for (int tap = 0; tap < kernel; ++tap) {
            const int shift = (tap - half) * dilation;
            const T* src = dcol.row(ci * kernel + tap);
            const int lo = std::max(0, -shift);
            const int hi = std::min(tau, tau - shift);
            for (int j = lo; j < hi; ++j) dst[j + shift] += src[j];
        }
    }
}

template <typename T>
void transpose_into(const mat<T>& in, mat<T>& out) {
    Workspace<T>::ensure(out, in.cols, in.rows);
    transpose(in.data(), in.rows, in.cols, out.data());
}

}  // namespace

void DenoiserConfig::validate() const {
    check_arg(residual_channels > 0, "DenoiserConfig: residual_channels must be > 0");
    check_arg(num_layers > 0, "DenoiserConfig: num_layers must be > 0");
    check_arg(kernel_size > 0 && kernel_size % 2 == 1,
              "DenoiserConfig: kernel_size must be odd");
    check_arg(!dilation_pattern.empty(), "DenoiserConfig: dilation pattern empty");
    for (const int d : dilation_pattern)
        check_arg(d >= 1, "DenoiserConfig: dilation entries must be >= 1");
    check_arg(mel_bins > 0 && roll_channels > 0, "DenoiserConfig: bad channel counts");
    check_arg(time_embed_dim > 0 && time_embed_dim % 2 == 0,
              "DenoiserConfig: time_embed_dim must be positive and even");
    check_arg(max_timestep >= 1, "DenoiserConfig: max_timestep must be >= 1");
}

int DenoiserConfig::receptive_field_frames() const {
    int rf = 1;
    for (int l = 0; l < num_layers; ++l) rf += (kernel_size - 1) * dilation_for_layer(l);
    return rf;
}

template <typename T>
DiffRollNet<T>::DiffRollNet(DenoiserConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int c = cfg_.residual_channels;
    const int k = cfg_.kernel_size;

    input_w_ = Tensor<T>("input_proj.w", {c, cfg_.roll_channels});
    input_b_ = Tensor<T>("input_proj.b", {c});
    t_fc1_w_ = Tensor<T>("time_mlp.fc1.w", {kTimeMlpDim, cfg_.time_embed_dim});
    t_fc1_b_ = Tensor<T>("time_mlp.fc1.b", {kTimeMlpDim});
    t_fc2_w_ = Tensor<T>("time_mlp.fc2.w", {kTimeMlpDim, kTimeMlpDim});
    t_fc2_b_ = Tensor<T>("time_mlp.fc2.b", {kTimeMlpDim});

    layers_.resize(static_cast<size_t>(cfg_.num_layers));
    for (int l = 0; l < cfg_.num_layers; ++l) {
        Layer& L = layers_[static_cast<size_t>(l)];
        const std::string p = "layers." + std::to_string(l) + ".";
        L.time_proj_w = Tensor<T>(p + "time_proj.w", {c, kTimeMlpDim});
        L.time_proj_b = Tensor<T>(p + "time_proj.b", {c});
        L.mel_proj_w = Tensor<T>(p + "mel_proj.w", {c, cfg_.mel_bins});
        L.mel_proj_b = Tensor<T>(p + "mel_proj.b", {c});
        L.dil_conv_w = Tensor<T>(p + "dil_conv.w", {2 * c, c, k});
        L.dil_conv_b = Tensor<T>(p + "dil_conv.b", {2 * c});
        L.res_skip_w = Tensor<T>(p + "res_skip.w", {2 * c, c});
        L.res_skip_b = Tensor<T>(p + "res_skip.b", {2 * c});
        L.dilation = cfg_.dilation_for_layer(l);
    }

    head1_w_ = Tensor<T>("head.conv1.w", {c, c});
    head1_b_ = Tensor<T>("head.conv1.b", {c});
    head2_w_ = Tensor<T>("head.conv2.w", {cfg_.roll_channels, c});
    head2_b_ = Tensor<T>("head.conv2.b", {cfg_.roll_channels});

    build_registry();
    init_params(seed);
}

template <typename T>
DiffRollNet<T>::DiffRollNet(const DiffRollNet& o)
    : cfg_(o.cfg_),
      input_w_(o.input_w_),
      input_b_(o.input_b_),
      t_fc1_w_(o.t_fc1_w_),
      t_fc1_b_(o.t_fc1_b_),
      t_fc2_w_(o.t_fc2_w_),
      t_fc2_b_(o.t_fc2_b_),
      layers_(o.layers_),
      head1_w_(o.head1_w_),
      head1_b_(o.head1_b_),
      head2_w_(o.head2_w_),
      head2_b_(o.head2_b_) {
    build_registry();
}

template <typename T>
DiffRollNet<T>::DiffRollNet(DiffRollNet&& o) noexcept
    : cfg_(std::move(o.cfg_)),
      input_w_(std::move(o.input_w_)),
      input_b_(std::move(o.input_b_)),
      t_fc1_w_(std::move(o.t_fc1_w_)),
      t_fc1_b_(std::move(o.t_fc1_b_)),
      t_fc2_w_(std::move(o.t_fc2_w_)),
      t_fc2_b_(std::move(o.t_fc2_b_)),
      layers_(std::move(o.layers_)),
      head1_w_(std::move(o.head1_w_)),
      head1_b_(std::move(o.head1_b_)),
      head2_w_(std::move(o.head2_w_)),
      head2_b_(std::move(o.head2_b_)) {
    build_registry();
}

template <typename T>
DiffRollNet<T>& DiffRollNet<T>::operator=(const DiffRollNet& o) {
    if (this != &o) {
        DiffRollNet tmp(o);
        *this = std::move(tmp);
    }
    return *this;
}

template <typename T>
DiffRollNet<T>& DiffRollNet<T>::operator=(DiffRollNet&& o) noexcept {
    cfg_ = std::move(o.cfg_);
    input_w_ = std::move(o.input_w_);
    input_b_ = std::move(o.input_b_);
    t_fc1_w_ = std::move(o.t_fc1_w_);
    t_fc1_b_ = std::move(o.t_fc1_b_);
    t_fc2_w_ = std::move(o.t_fc2_w_);
    t_fc2_b_ = std::move(o.t_fc2_b_);
    layers_ = std::move(o.layers_);
    head1_w_ = std::move(o.head1_w_);
    head1_b_ = std::move(o.head1_b_);
    head2_w_ = std::move(o.head2_w_);
    head2_b_ = std::move(o.head2_b_);
    build_registry();
    return *this;
}

template <typename T>
void DiffRollNet<T>::build_registry() {
    registry_.clear();
    registry_.push_back(&input_w_);
    registry_.push_back(&input_b_);
    registry_.push_back(&t_fc1_w_);
    registry_.push_back(&t_fc1_b_);
    registry_.push_back(&t_fc2_w_);
    registry_.push_back(&t_fc2_b_);
    for (Layer& L : layers_) {
        registry_.push_back(&L.time_proj_w);
        registry_.push_back(&L.time_proj_b);
        registry_.push_back(&L.mel_proj_w);
        registry_.push_back(&L.mel_proj_b);
        registry_.push_back(&L.dil_conv_w);
        registry_.push_back(&L.dil_conv_b);
        registry_.push_back(&L.res_skip_w);
        registry_.push_back(&L.res_skip_b);
    }
    registry_.push_back(&head1_w_);
    registry_.push_back(&head1_b_);
    registry_.push_back(&head2_w_);
    registry_.push_back(&head2_b_);
}

template <typename T>
void DiffRollNet<T>::init_params(uint64_t seed) {
    Rng rng(seed);
    auto fan_in_of = [](const Tensor<T>& t) -> int {
        if (t.shape.size() == 3) return t.shape[1] * t.shape[2];
        if (t.shape.size() == 2) return t.shape[1];
        return 0;  // bias: paired with its weight below
    };
    int pending_fan_in = 1;
    for (Tensor<T>* t : registry_) {
        int fan_in = fan_in_of(*t);
        if (fan_in == 0) fan_in = pending_fan_in;  // bias uses its weight's fan-in
        pending_fan_in = fan_in;
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        // Scaled fan-in init. The noisy-roll input starts damped and the mel
        // projections boosted: x_t is noise-dominated for most timesteps on
        // sparse rolls, and an even init lets the noise path drown the
        // conditioner's gradient early on. The output conv starts small (not
        // zero): a zero head blocks gradient flow into the trunk entirely.
        if (t == &input_w_ || t == &input_b_) bound *= 0.2;
        if (t->name.find("mel_proj.w") != std::string::npos) bound *= 3.0;
        if (t == &head2_w_ || t == &head2_b_) bound *= 0.1;
        for (T& v : t->w) v = static_cast<T>(rng.uniform(-bound, bound));
    }
}

template <typename T>
int64_t DiffRollNet<T>::param_count() const {
    int64_t n = 0;
    for (const Tensor<T>* t : registry_) n += static_cast<int64_t>(t->size());
    return n;
}

template <typename T>
Tensor<T>* DiffRollNet<T>::tensor(const std::string& name) {
    for (Tensor<T>* t : registry_)
        if (t->name == name) return t;
    return nullptr;
}

template <typename T>
void DiffRollNet<T>::zero_grad() {
    for (Tensor<T>* t : registry_) std::fill(t->g.begin(), t->g.end(), T(0));
}

template <typename T>
void DiffRollNet<T>::sinusoid(int t, T* out) const {
    const int half = cfg_.time_embed_dim / 2;
    for (int j = 0; j < half; ++j) {
        // Geometric frequency ladder from 1 down to 1e-4.
        const double freq =
            std::pow(10.0, -4.0 * j / std::max(1, half - 1));
        const double arg = static_cast<double>(t) * freq;
        out[j] = static_cast<T>(std::sin(arg));
        out[half + j] = static_cast<T>(std::cos(arg));
    }
}

template <typename T>
void DiffRollNet<T>::time_mlp(const std::vector<int>& t, mat<T>& e_sin, mat<T>& p1,
                              mat<T>& e1, mat<T>& p2, mat<T>& e2) const {
    const int b = static_cast<int>(t.size());
    const int d = cfg_.time_embed_dim;
    e_sin = mat<T>(b, d);
    p1 = mat<T>(b, kTimeMlpDim);
    e1 = mat<T>(b, kTimeMlpDim);
    p2 = mat<T>(b, kTimeMlpDim);
    e2 = mat<T>(b, kTimeMlpDim);
    for (int bi = 0; bi < b; ++bi) sinusoid(t[static_cast<size_t>(bi)], e_sin.row(bi));

    for (int bi = 0; bi < b; ++bi) {
        for (int i = 0; i < kTimeMlpDim; ++i) {
            const T* w = t_fc1_w_.w.data() + static_cast<size_t>(i) * d;
            T acc = t_fc1_b_.w[static_cast<size_t>(i)];
            const T* x = e_sin.row(bi);
            for (int j = 0; j < d; ++j) acc += w[j] * x[j];
            p1.at(bi, i) = acc;
            e1.at(bi, i) = silu(acc);
        }
        for (int i = 0; i < kTimeMlpDim; ++i) {
            const T* w = t_fc2_w_.w.data() + static_cast<size_t>(i) * kTimeMlpDim;
            T acc = t_fc2_b_.w[static_cast<size_t>(i)];
            const T* x = e1.row(bi);
            for (int j = 0; j < kTimeMlpDim; ++j) acc += w[j] * x[j];
            p2.at(bi, i) = acc;
            e2.at(bi, i) = silu(acc);
        }
    }
}

template <typename T>
mat<T> DiffRollNet<T>::time_embedding(const std::vector<int>& t) const {
    for (const int ti : t)
        check_arg(ti >= 1 && ti <= cfg_.max_timestep, "time_embedding: t out of range");
    mat<T> e_sin, p1, e1, p2, e2;
    time_mlp(t, e_sin, p1, e1, p2, e2);
    return e2;
}

template <typename T>
void DiffRollNet<T>::forward(const batch3<T>& x_t, const std::vector<int>& t,
                             const batch3<T>& c_mel, batch3<T>& out, Workspace<T>& ws,
                             ForwardCache<T>* cache) const {
    const int b = x_t.b, tau = x_t.t;
    const int c = cfg_.residual_channels;
    const int k = cfg_.kernel_size;
    const int n_layers = cfg_.num_layers;
    const T inv_sqrt_layers = static_cast<T>(1.0 / std::sqrt(static_cast<double>(n_layers)));

    if (out.b != b || out.c != cfg_.roll_channels || out.t != tau)
        out = batch3<T>(b, cfg_.roll_channels, tau);

    // Time embedding (batched, small).
    mat<T> e_sin, p1, e1, p2, e2;
    time_mlp(t, e_sin, p1, e1, p2, e2);

    if (cache) {
        cache->batch = b;
        cache->tau = tau;
        cache->e_sin = e_sin;
        cache->p1 = p1;
        cache->e1 = e1;
        cache->p2 = p2;
        cache->e2 = e2;
        cache->xs.assign(static_cast<size_t>(b), {});
        cache->h.assign(static_cast<size_t>(b), {});
        cache->ta.assign(static_cast<size_t>(b), {});
        cache->sg.assign(static_cast<size_t>(b), {});
        cache->skip_scaled.assign(static_cast<size_t>(b), {});
        cache->y1.assign(static_cast<size_t>(b), {});
    }

    mat<T> x, skip, xt_item, c_item;
    std::vector<T> tvec(static_cast<size_t>(c));

    for (int bi = 0; bi < b; ++bi) {
        xt_item = mat<T>(x_t.c, tau);
        std::copy(x_t.item(bi), x_t.item(bi) + xt_item.size(), xt_item.v.begin());
        c_item = mat<T>(c_mel.c, tau);
        std::copy(c_mel.item(bi), c_mel.item(bi) + c_item.size(), c_item.v.begin());

        // input projection + relu
        conv1x1(input_w_, input_b_, xt_item, x);
        for (T& v : x.v) v = v > T(0) ? v : T(0);

        Workspace<T>::ensure(skip, c, tau);
        skip.fill(T(0));

        if (cache) {
            cache->xs[static_cast<size_t>(bi)].resize(static_cast<size_t>(n_layers) + 1);
            cache->h[static_cast<size_t>(bi)].resize(static_cast<size_t>(n_layers));
            cache->ta[static_cast<size_t>(bi)].resize(static_cast<size_t>(n_layers));
            cache->sg[static_cast<size_t>(bi)].resize(static_cast<size_t>(n_layers));
            cache->xs[static_cast<size_t>(bi)][0] = x;
        }

        for (int l = 0; l < n_layers; ++l) {
            const Layer& L = layers_[static_cast<size_t>(l)];

            // h = x + time_proj(e2) + mel_proj(c)
            conv1x1(L.mel_proj_w, L.mel_proj_b, c_item, ws.melp);
            for (int i = 0; i < c; ++i) {
                const T* w = L.time_proj_w.w.data() + static_cast<size_t>(i) * kTimeMlpDim;
                T acc = L.time_proj_b.w[static_cast<size_t>(i)];
                for (int j = 0; j < kTimeMlpDim; ++j) acc += w[j] * e2.at(bi, j);
                tvec[static_cast<size_t>(i)] = acc;
            }
            Workspace<T>::ensure(ws.h, c, tau);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                const T* xr = x.row(i);
                const T* mr = ws.melp.row(i);
                T* hr = ws.h.row(i);
                const T tv = tvec[static_cast<size_t>(i)];
                for (int j = 0; j < tau; ++j) hr[j] = xr[j] + mr[j] + tv;
            }

            // gated dilated conv
            im2col(ws.h, k, L.dilation, ws.col);
            Workspace<T>::ensure(ws.rs, 2 * c, tau);
            ws.rs.fill(T(0));
            gemm(2 * c, tau, c * k, L.dil_conv_w.w.data(), c * k, ws.col.data(), tau,
                 ws.rs.data(), tau);
            add_bias_rows(ws.rs, L.dil_conv_b.w);

            Workspace<T>::ensure(ws.za, c, tau);
            Workspace<T>::ensure(ws.sb, c, tau);
            Workspace<T>::ensure(ws.dg, c, tau);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                const T* za = ws.rs.row(i);
                const T* zb = ws.rs.row(c + i);
                T* ta = ws.za.row(i);
                T* sg = ws.sb.row(i);
                T* g = ws.dg.row(i);
                for (int j = 0; j < tau; ++j) {
                    ta[j] = std::tanh(za[j]);
                    sg[j] = sigmoid(zb[j]);
                    g[j] = ta[j] * sg[j];
                }
            }

            // residual / skip split
            conv1x1(L.res_skip_w, L.res_skip_b, ws.dg, ws.drs);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                T* xr = x.row(i);
                T* sk = skip.row(i);
                const T* rr = ws.drs.row(i);
                const T* sr = ws.drs.row(c + i);
                for (int j = 0; j < tau; ++j) {
                    xr[j] = (xr[j] + rr[j]) * static_cast<T>(kInvSqrt2);
                    sk[j] += sr[j];
                }
            }

            if (cache) {
                cache->h[static_cast<size_t>(bi)][static_cast<size_t>(l)] = ws.h;
                cache->ta[static_cast<size_t>(bi)][static_cast<size_t>(l)] = ws.za;
                cache->sg[static_cast<size_t>(bi)][static_cast<size_t>(l)] = ws.sb;
                cache->xs[static_cast<size_t>(bi)][static_cast<size_t>(l) + 1] = x;
            }
        }

        for (T& v : skip.v) v *= inv_sqrt_layers;

        // head: conv1x1 + relu, then the zero-initialized output conv
        conv1x1(head1_w_, head1_b_, skip, ws.y1);
        for (T& v : ws.y1.v) v = v > T(0) ? v : T(0);

        Workspace<T>::ensure(ws.y, cfg_.roll_channels, tau);
        ws.y.fill(T(0));
        gemm(cfg_.roll_channels, tau, c, head2_w_.w.data(), c, ws.y1.data(), tau,
             ws.y.data(), tau);
        add_bias_rows(ws.y, head2_b_.w);
        std::copy(ws.y.v.begin(), ws.y.v.end(), out.item(bi));

        if (cache) {
            cache->skip_scaled[static_cast<size_t>(bi)] = skip;
            cache->y1[static_cast<size_t>(bi)] = ws.y1;
        }
    }
}

template <typename T>
void DiffRollNet<T>::backward(const batch3<T>& x_t, const std::vector<int>& t,
                              const batch3<T>& c_mel, const ForwardCache<T>& cache,
                              const batch3<T>& d_out, Workspace<T>& ws) {
    const int b = cache.batch, tau = cache.tau;
    const int c = cfg_.residual_channels;
    const int k = cfg_.kernel_size;
    const int n_layers = cfg_.num_layers;
    const int d = cfg_.time_embed_dim;
    const T inv_sqrt_layers = static_cast<T>(1.0 / std::sqrt(static_cast<double>(n_layers)));
    (void)t;

    mat<T> de2(b, kTimeMlpDim, T(0));
    std::vector<mat<T>> dx(static_cast<size_t>(b));
    std::vector<mat<T>> dskip(static_cast<size_t>(b));
    mat<T> item_buf, c_item, gT, colT, g_mat;

    // head backward, per item
    for (int bi = 0; bi < b; ++bi) {
        const mat<T>& y1 = cache.y1[static_cast<size_t>(bi)];
        const mat<T>& y = cache.skip_scaled[static_cast<size_t>(bi)];

        Workspace<T>::ensure(ws.dout_item, cfg_.roll_channels, tau);
        std::copy(d_out.item(bi), d_out.item(bi) + ws.dout_item.size(),
                  ws.dout_item.v.begin());

        // head2: out = W @ y1 + b
        transpose_into(y1, ws.colT);
        gemm(cfg_.roll_channels, c, tau, ws.dout_item.data(), tau, ws.colT.data(), c,
             head2_w_.g.data(), c);
        rowsum_add(ws.dout_item, head2_b_.g);

        Workspace<T>::ensure(ws.wT, c, cfg_.roll_channels);
        transpose(head2_w_.w.data(), cfg_.roll_channels, c, ws.wT.data());
        Workspace<T>::ensure(ws.dy1, c, tau);
        ws.dy1.fill(T(0));
        gemm(c, tau, cfg_.roll_channels, ws.wT.data(), cfg_.roll_channels,
             ws.dout_item.data(), tau, ws.dy1.data(), tau);

        // relu gate
        for (size_t i = 0; i < ws.dy1.size(); ++i)
            if (y1.v[i] <= T(0)) ws.dy1.v[i] = T(0);

        // head1: y1_pre = W @ y + b
        transpose_into(y, ws.colT);
        gemm(c, c, tau, ws.dy1.data(), tau, ws.colT.data(), c, head1_w_.g.data(), c);
        rowsum_add(ws.dy1, head1_b_.g);

        Workspace<T>::ensure(ws.wT, c, c);
        transpose(head1_w_.w.data(), c, c, ws.wT.data());
        Workspace<T>::ensure(ws.dy, c, tau);
        ws.dy.fill(T(0));
        gemm(c, tau, c, ws.wT.data(), c, ws.dy1.data(), tau, ws.dy.data(), tau);

        dskip[static_cast<size_t>(bi)] = ws.dy;
        for (T& v : dskip[static_cast<size_t>(bi)].v) v *= inv_sqrt_layers;
        dx[static_cast<size_t>(bi)] = mat<T>(c, tau, T(0));
    }

    // residual layers, outermost over layers so weight transposes are hoisted
    mat<T> wrsT, wdT;
    for (int l = n_layers - 1; l >= 0; --l) {
        Layer& L = layers_[static_cast<size_t>(l)];
        Workspace<T>::ensure(wrsT, c, 2 * c);
        transpose(L.res_skip_w.w.data(), 2 * c, c, wrsT.data());
        Workspace<T>::ensure(wdT, c * k, 2 * c);
        transpose(L.dil_conv_w.w.data(), 2 * c, c * k, wdT.data());

        for (int bi = 0; bi < b; ++bi) {
            const mat<T>& ta = cache.ta[static_cast<size_t>(bi)][static_cast<size_t>(l)];
            const mat<T>& sg = cache.sg[static_cast<size_t>(bi)][static_cast<size_t>(l)];
            const mat<T>& h = cache.h[static_cast<size_t>(bi)][static_cast<size_t>(l)];
            mat<T>& dxb = dx[static_cast<size_t>(bi)];

            // d(res, skip): residual path scaled by 1/sqrt(2), skip path shared
            Workspace<T>::ensure(ws.drs, 2 * c, tau);
            const mat<T>& dsk = dskip[static_cast<size_t>(bi)];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                const T* dxr = dxb.row(i);
                const T* dsr = dsk.row(i);
                T* r0 = ws.drs.row(i);
                T* r1 = ws.drs.row(c + i);
                for (int j = 0; j < tau; ++j) {
                    r0[j] = dxr[j] * static_cast<T>(kInvSqrt2);
                    r1[j] = dsr[j];
                }
            }

            // res_skip conv backward; g recomputed from the cached gate halves
            Workspace<T>::ensure(g_mat, c, tau);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                const T* tr = ta.row(i);
                const T* sr = sg.row(i);
                T* gr = g_mat.row(i);
                for (int j = 0; j < tau; ++j) gr[j] = tr[j] * sr[j];
            }
            transpose_into(g_mat, gT);
            gemm(2 * c, c, tau, ws.drs.data(), tau, gT.data(), c, L.res_skip_w.g.data(),
                 c);
            rowsum_add(ws.drs, L.res_skip_b.g);

            Workspace<T>::ensure(ws.dg, c, tau);
            ws.dg.fill(T(0));
            gemm(c, tau, 2 * c, wrsT.data(), 2 * c, ws.drs.data(), tau, ws.dg.data(),
                 tau);

            // gate backward into dz (reuse drs buffer as dz, same shape)
            Workspace<T>::ensure(ws.dz, 2 * c, tau);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                const T* tr = ta.row(i);
                const T* sr = sg.row(i);
                const T* dgr = ws.dg.row(i);
                T* dza = ws.dz.row(i);
                T* dzb = ws.dz.row(c + i);
                for (int j = 0; j < tau; ++j) {
                    dza[j] = dgr[j] * sr[j] * (T(1) - tr[j] * tr[j]);
                    dzb[j] = dgr[j] * tr[j] * sr[j] * (T(1) - sr[j]);
                }
            }
            rowsum_add(ws.dz, L.dil_conv_b.g);

            // dilated conv backward
            im2col(h, k, L.dilation, ws.col);
            transpose_into(ws.col, colT);
            gemm(2 * c, c * k, tau, ws.dz.data(), tau, colT.data(), c * k,
                 L.dil_conv_w.g.data(), c * k);

            Workspace<T>::ensure(ws.dcol, c * k, tau);
            ws.dcol.fill(T(0));
            gemm(c * k, tau, 2 * c, wdT.data(), 2 * c, ws.dz.data(), tau, ws.dcol.data(),
                 tau);
            Workspace<T>::ensure(ws.dh, c, tau);
            ws.dh.fill(T(0));
            col2im_add(ws.dcol, k, L.dilation, ws.dh);

            // h = x_in + time_proj + mel_proj
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int i = 0; i < c; ++i) {
                T* dxr = dxb.row(i);
                const T* dhr = ws.dh.row(i);
                for (int j = 0; j < tau; ++j)
                    dxr[j] = dxr[j] * static_cast<T>(kInvSqrt2) + dhr[j];
            }

            // time projection: dtvec = rowsum(dh)
            std::vector<T> dtvec(static_cast<size_t>(c));
            for (int i = 0; i < c; ++i) {
                const T* dhr = ws.dh.row(i);
                T acc = T(0);
                for (int j = 0; j < tau; ++j) acc += dhr[j];
                dtvec[static_cast<size_t>(i)] = acc;
            }
            for (int i = 0; i < c; ++i) {
                const T dv = dtvec[static_cast<size_t>(i)];
                T* wg = L.time_proj_w.g.data() + static_cast<size_t>(i) * kTimeMlpDim;
                const T* e2r = cache.e2.row(bi);
                for (int j = 0; j < kTimeMlpDim; ++j) wg[j] += dv * e2r[j];
                L.time_proj_b.g[static_cast<size_t>(i)] += dv;
                T* de2r = de2.row(bi);
                const T* wr = L.time_proj_w.w.data() + static_cast<size_t>(i) * kTimeMlpDim;
                for (int j = 0; j < kTimeMlpDim; ++j) de2r[j] += dv * wr[j];
            }

            // mel projection
            Workspace<T>::ensure(c_item, c_mel.c, tau);
            std::copy(c_mel.item(bi), c_mel.item(bi) + c_item.size(), c_item.v.begin());
            transpose_into(c_item, ws.colT);
            gemm(c, cfg_.mel_bins, tau, ws.dh.data(), tau, ws.colT.data(), cfg_.mel_bins,
                 L.mel_proj_w.g.data(), cfg_.mel_bins);
            rowsum_add(ws.dh, L.mel_proj_b.g);
        }
    }

    // input projection backward
    for (int bi = 0; bi < b; ++bi) {
        mat<T>& dxb = dx[static_cast<size_t>(bi)];
        const mat<T>& x0 = cache.xs[static_cast<size_t>(bi)][0];
        for (size_t i = 0; i < dxb.size(); ++i)
            if (x0.v[i] <= T(0)) dxb.v[i] = T(0);

        Workspace<T>::ensure(item_buf, x_t.c, tau);
        std::copy(x_t.item(bi), x_t.item(bi) + item_buf.size(), item_buf.v.begin());
        transpose_into(item_buf, ws.colT);
        gemm(c, cfg_.roll_channels, tau, dxb.data(), tau, ws.colT.data(),
             cfg_.roll_channels, input_w_.g.data(), cfg_.roll_channels);
        rowsum_add(dxb, input_b_.g);
    }

    // time MLP backward
    for (int bi = 0; bi < b; ++bi) {
        std::vector<T> dp2(static_cast<size_t>(kTimeMlpDim));
        for (int i = 0; i < kTimeMlpDim; ++i)
            dp2[static_cast<size_t>(i)] = de2.at(bi, i) * dsilu(cache.p2.at(bi, i));
        std::vector<T> de1(static_cast<size_t>(kTimeMlpDim), T(0));
        for (int i = 0; i < kTimeMlpDim; ++i) {
            const T dv = dp2[static_cast<size_t>(i)];
            T* wg = t_fc2_w_.g.data() + static_cast<size_t>(i) * kTimeMlpDim;
            const T* wr = t_fc2_w_.w.data() + static_cast<size_t>(i) * kTimeMlpDim;
            for (int j = 0; j < kTimeMlpDim; ++j) {
                wg[j] += dv * cache.e1.at(bi, j);
                de1[static_cast<size_t>(j)] += dv * wr[j];
            }
            t_fc2_b_.g[static_cast<size_t>(i)] += dv;
        }
        for (int i = 0; i < kTimeMlpDim; ++i) {
            const T dp1 = de1[static_cast<size_t>(i)] * dsilu(cache.p1.at(bi, i));
            T* wg = t_fc1_w_.g.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) wg[j] += dp1 * cache.e_sin.at(bi, j);
            t_fc1_b_.g[static_cast<size_t>(i)] += dp1;
        }
    }
}

template <typename T>
batch3<T> DiffRollNet<T>::predict_x0(const batch3<T>& x_t, const std::vector<int>& t,
                                     const batch3<T>& c_mel, Workspace<T>& ws) const {
    check_shape(x_t.c == cfg_.roll_channels, "predict_x0: x_t channel count");
    check_shape(c_mel.c == cfg_.mel_bins, "predict_x0: conditioner bin count");
    check_shape(x_t.b == c_mel.b && x_t.t == c_mel.t,
                "predict_x0: x_t / conditioner shape mismatch");
    check_arg(static_cast<int>(t.size()) == x_t.b, "predict_x0: t batch size");
    for (const int ti : t)
        check_arg(ti >= 1 && ti <= cfg_.max_timestep, "predict_x0: t out of range");

    // Conditioner columns are either real spectrogram ([0,1]) or the sentinel.
    for (int bi = 0; bi < c_mel.b; ++bi) {
        for (int j = 0; j < c_mel.t; ++j) {
            const T first = c_mel.item(bi)[j];
            const bool masked = first == T(-1);
            for (int m = 0; m < c_mel.c; ++m) {
                const T v = c_mel.chan(bi, m)[j];
                if (masked)
                    check_arg(v == T(-1), "predict_x0: partially masked conditioner column");
                else
                    check_arg(v >= T(0) && v <= T(1),
                              "predict_x0: conditioner value outside [0,1]");
            }
        }
    }

    batch3<T> out;
    forward(x_t, t, c_mel, out, ws);
    return out;
}

template class DiffRollNet<float>;
template class DiffRollNet<double>;

}  // namespace diffroll
