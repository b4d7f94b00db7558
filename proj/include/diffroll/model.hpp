#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "diffroll/common.hpp"
#include "diffroll/gemm.hpp"
#include "diffroll/mat.hpp"
#include "diffroll/rng.hpp"

namespace diffroll {

// Architecture of the denoiser f(x_t, t, c_mel) -> x0_hat: a stack of gated
// residual 1D convolutions over the 88-channel roll with a broadcast time
// embedding and a per-layer 1x1 mel projection added to each layer input.
struct DenoiserConfig {
    int residual_channels = 512;
    int num_layers = 15;
    int kernel_size = 9;
    std::vector<int> dilation_pattern = {1};  // cycled across layers
    int mel_bins = 229;
    int roll_channels = 88;
    int time_embed_dim = 128;  // sinusoid width before the learned projections
    int max_timestep = 200;

    void validate() const;
    int dilation_for_layer(int layer) const {
        return dilation_pattern[static_cast<size_t>(layer) % dilation_pattern.size()];
    }
    // 1 + sum over layers of (k - 1) * dilation; the 1x1 stages add nothing.
    int receptive_field_frames() const;

    bool operator==(const DenoiserConfig&) const = default;
};

template <typename T>
struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::vector<T> w;
    std::vector<T> g;

    Tensor() = default;
    Tensor(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
        size_t total = 1;
        for (const int d : shape) total *= static_cast<size_t>(d);
        w.assign(total, T(0));
        g.assign(total, T(0));
    }
    size_t size() const { return w.size(); }
};

// Reusable scratch buffers. Each concurrent forward/backward needs its own
// workspace; parameters themselves are read-only during inference.
template <typename T>
struct Workspace {
    mat<T> col, colT, dcol, wT;
    mat<T> h, za, sb, rs, drs, dg, dz, dh;
    mat<T> y, y1, dy, dy1, dout_item, dx, dxin;
    mat<T> melp;

    static void ensure(mat<T>& m, int rows, int cols) {
        if (m.rows != rows || m.cols != cols) m = mat<T>(rows, cols);
    }
};

// Activations captured during a training forward pass, consumed by backward.
template <typename T>
struct ForwardCache {
    int batch = 0, tau = 0;
    // per item: xs[l] is the input to layer l (xs[0] = post-relu input proj),
    // xs[L] is the final residual output.
    std::vector<std::vector<mat<T>>> xs;
    std::vector<std::vector<mat<T>>> h;    // [b][l] dilated-conv input
    std::vector<std::vector<mat<T>>> ta;   // tanh half of the gate
    std::vector<std::vector<mat<T>>> sg;   // sigmoid half of the gate
    std::vector<mat<T>> skip_scaled;       // y, per item
    std::vector<mat<T>> y1;                // post-relu head hidden, per item
    mat<T> e_sin, p1, e1, p2, e2;          // time-embedding intermediates [B x dim]
};

template <typename T>
class DiffRollNet {
public:
    DiffRollNet(DenoiserConfig cfg, uint64_t seed);

    // The registry holds pointers into member tensors, so copies and moves
    // must rebuild it.
    DiffRollNet(const DiffRollNet& o);
    DiffRollNet(DiffRollNet&& o) noexcept;
    DiffRollNet& operator=(const DiffRollNet& o);
    DiffRollNet& operator=(DiffRollNet&& o) noexcept;

    const DenoiserConfig& config() const { return cfg_; }
    int64_t param_count() const;

    std::vector<Tensor<T>*>& tensors() { return registry_; }
    const std::vector<Tensor<T>*>& tensors() const { return registry_; }
    Tensor<T>* tensor(const std::string& name);

    void zero_grad();

    // Raw forward pass: out[b] = f(x_t[b], t[b], c_mel[b]). Shapes must already
    // agree; use predict_x0 for the validating entry point.
    void forward(const batch3<T>& x_t, const std::vector<int>& t,
                 const batch3<T>& c_mel, batch3<T>& out, Workspace<T>& ws,
                 ForwardCache<T>* cache = nullptr) const;

    // Accumulates parameter gradients for d_out = dL/d_out. forward() must have
    // been called with `cache` on the same inputs.
    void backward(const batch3<T>& x_t, const std::vector<int>& t,
                  const batch3<T>& c_mel, const ForwardCache<T>& cache,
                  const batch3<T>& d_out, Workspace<T>& ws);

    // Validating entry point: checks shapes, t range, and that every
    // conditioner column is either fully in [0,1] or exactly the -1 sentinel.
    batch3<T> predict_x0(const batch3<T>& x_t, const std::vector<int>& t,
                         const batch3<T>& c_mel, Workspace<T>& ws) const;

    // Sinusoid + two silu MLP stages; rows are identical for identical t.
    mat<T> time_embedding(const std::vector<int>& t) const;

private:
    struct Layer {
        Tensor<T> time_proj_w, time_proj_b;
        Tensor<T> mel_proj_w, mel_proj_b;
        Tensor<T> dil_conv_w, dil_conv_b;  // [2C, C, k]
        Tensor<T> res_skip_w, res_skip_b;  // [2C, C]
        int dilation = 1;
    };

    void build_registry();
    void init_params(uint64_t seed);
    void sinusoid(int t, T* out) const;  // writes time_embed_dim values
    void time_mlp(const std::vector<int>& t, mat<T>& e_sin, mat<T>& p1, mat<T>& e1,
                  mat<T>& p2, mat<T>& e2) const;

    DenoiserConfig cfg_;
    Tensor<T> input_w_, input_b_;
    Tensor<T> t_fc1_w_, t_fc1_b_, t_fc2_w_, t_fc2_b_;
    std::vector<Layer> layers_;
    Tensor<T> head1_w_, head1_b_, head2_w_, head2_b_;
    std::vector<Tensor<T>*> registry_;
};

using DiffRollNetF = DiffRollNet<float>;
using DiffRollNetD = DiffRollNet<double>;

extern template class DiffRollNet<float>;
extern template class DiffRollNet<double>;

}  // namespace diffroll
