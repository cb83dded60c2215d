#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hc3l/grid.hpp"
#include "hc3l/rng.hpp"

namespace hc3l::nn {

// Fixed layer vocabulary with hand-written forward and backward passes.
// Feature tensors are [C, H, W]; dense layers operate on rank-1 vectors.
enum class Op {
    input,
    conv3x3,         // stride 1 or 2, padding 1
    upsample2x,      // nearest neighbour
    silu,
    tanh_act,
    group_norm,      // per-channel affine, stats per group
    dense,
    residual_add,
    channel_concat,  // along the channel axis
    time_inject,     // feature map + per-channel vector
};

enum class Mode { train, eval };

struct Node {
    Op op = Op::input;
    int in0 = -1;
    int in1 = -1;
    int stride = 1;  // conv3x3
    int groups = 1;  // group_norm
    int weight = -1;
    int bias = -1;
};

struct ParamStore {
    std::vector<Grid> values;
    std::vector<std::string> names;  // "<layer-index>.<param-name>"
};

// Acyclic sequence of layers with explicit skip topology. Parameters live in
// a store shared between worker clones; activation caches and parameter
// gradients are per-instance, so cloned graphs may run in parallel while the
// parameters stay frozen.
class NetworkGraph {
public:
    NetworkGraph();

    int add_input();
    int conv3x3(int input, std::size_t c_in, std::size_t c_out, int stride,
                RngStream& rng, bool zero_init = false);
    int dense(int input, std::size_t n_in, std::size_t n_out, RngStream& rng,
              bool zero_init = false);
    int group_norm(int input, std::size_t channels, int groups = 4);
    int silu(int input);
    int tanh_act(int input);
    int upsample2x(int input);
    int residual_add(int a, int b);
    int channel_concat(int a, int b);
    int time_inject(int features, int vector);
    void set_output(int node);

    Mode mode() const noexcept { return mode_; }
    void set_mode(Mode m) noexcept { mode_ = m; }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    int output_node() const noexcept { return output_; }
    std::size_t input_count() const noexcept { return inputs_.size(); }

    ParamStore& params() noexcept { return *params_; }
    const ParamStore& params() const noexcept { return *params_; }
    // Total scalar parameter count.
    std::size_t param_count() const;

    const Grid& forward(const std::vector<Grid>& inputs);
    const Grid& output() const;

    // Gradients of every parameter accumulate into param_grads(); returns the
    // gradients with respect to the graph inputs. Requires train mode and a
    // preceding forward (StateError otherwise).
    std::vector<Grid> backward(const Grid& output_grad);

    std::vector<Grid>& param_grads();
    void zero_param_grads();

    // Shares the parameter store; fresh caches and gradients.
    NetworkGraph worker_clone() const;

private:
    int add_param(const std::string& name, Grid value);
    int add_node(Node node);
    void check_built() const;

    std::shared_ptr<ParamStore> params_;
    std::vector<Node> nodes_;
    std::vector<int> inputs_;
    int output_ = -1;
    Mode mode_ = Mode::train;

    // Execution state.
    std::vector<Grid> act_;
    std::vector<Grid> gn_xhat_;
    std::vector<std::vector<double>> gn_invstd_;
    std::vector<Grid> pgrads_;
    bool forward_ran_ = false;
};

// Sinusoidal timestep embedding: pairs (sin(t * w_k), cos(t * w_k)) with
// w_k = 10000^(-2k/dim). Throws std::invalid_argument for odd dim.
Grid time_embedding(int t, std::size_t dim);

// Channel-preserving residual block:
//   x + conv(silu(gn(inject(conv(silu(gn(x)))))))
// with an optional per-block dense head projecting the (already activated)
// time embedding, injected after the first conv.
int add_residual_block(NetworkGraph& g, int x, std::size_t channels, int gn_groups,
                       RngStream& rng, int time_node = -1, std::size_t time_dim = 0);

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay Adam. Moment buffers are lazily initialized from
// the first update call.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const noexcept { return cfg_; }
    long step() const noexcept { return step_; }

    void update(const std::vector<Grid*>& params, const std::vector<const Grid*>& grads);

    // Clears first/second moments for rows [row_begin, row_end) of a rank-2
    // parameter (codebook reseeding).
    void reset_rows(std::size_t param_index, std::size_t row_begin, std::size_t row_end);

private:
    AdamWConfig cfg_;
    std::vector<Grid> m_;
    std::vector<Grid> v_;
    long step_ = 0;
};

}  // namespace hc3l::nn
