#include "hc3l/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hc3l/errors.hpp"

namespace hc3l::nn {

namespace {

constexpr double kGroupNormEps = 1e-5;

void check_rank3(const Grid& g, const char* what) {
    if (g.rank() != 3) throw std::invalid_argument(std::string(what) + ": expected [C,H,W]");
}

// ---- conv3x3 kernels, padding 1, stride 1 or 2 ----------------------------

std::size_t conv_out_dim(std::size_t n, int stride) {
    return (n - 1) / static_cast<std::size_t>(stride) + 1;
}

void conv3x3_forward(const double* x, std::size_t cin, std::size_t h, std::size_t w,
                     const double* wt, const double* bias, std::size_t cout, int stride,
                     double* y, std::size_t ho, std::size_t wo) {
    for (std::size_t co = 0; co < cout; ++co) {
        double b = bias[co];
        double* yc = y + co * ho * wo;
        for (std::size_t i = 0; i < ho * wo; ++i) yc[i] = b;
    }
    for (std::size_t co = 0; co < cout; ++co) {
        double* yc = y + co * ho * wo;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xc = x + ci * h * w;
            const double* wk = wt + (co * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                long yo_lo = ky == 0 ? 1 : 0;
                long ynum = static_cast<long>(h) - ky;
                long yo_hi = std::min<long>(static_cast<long>(ho) - 1,
                                            ynum < 0 ? -1 : ynum / stride);
                for (int kx = 0; kx < 3; ++kx) {
                    double wv = wk[ky * 3 + kx];
                    if (wv == 0.0) continue;
                    long xo_lo = kx == 0 ? 1 : 0;
                    long xnum = static_cast<long>(w) - kx;
                    long xo_hi = std::min<long>(static_cast<long>(wo) - 1,
                                                xnum < 0 ? -1 : xnum / stride);
                    if (stride == 1) {
                        for (long yo = yo_lo; yo <= yo_hi; ++yo) {
                            const double* xrow = xc + (yo + ky - 1) * w + (kx - 1);
                            double* yrow = yc + yo * wo;
                            for (long xo = xo_lo; xo <= xo_hi; ++xo)
                                yrow[xo] += wv * xrow[xo];
                        }
                    } else {
                        for (long yo = yo_lo; yo <= yo_hi; ++yo) {
                            const double* xrow = xc + (yo * 2 + ky - 1) * w + (kx - 1);
                            double* yrow = yc + yo * wo;
                            for (long xo = xo_lo; xo <= xo_hi; ++xo)
                                yrow[xo] += wv * xrow[xo * 2];
                        }
                    }
                }
            }
        }
    }
}

void conv3x3_backward(const double* x, std::size_t cin, std::size_t h, std::size_t w,
                      const double* wt, std::size_t cout, int stride, const double* dy,
                      std::size_t ho, std::size_t wo, double* dx, double* dw, double* db) {
    for (std::size_t co = 0; co < cout; ++co) {
        const double* dyc = dy + co * ho * wo;
        double acc = 0.0;
        for (std::size_t i = 0; i < ho * wo; ++i) acc += dyc[i];
        db[co] += acc;
    }
    for (std::size_t co = 0; co < cout; ++co) {
        const double* dyc = dy + co * ho * wo;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xc = x + ci * h * w;
            double* dxc = dx + ci * h * w;
            const double* wk = wt + (co * cin + ci) * 9;
            double* dwk = dw + (co * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                long yo_lo = ky == 0 ? 1 : 0;
                long ynum = static_cast<long>(h) - ky;
                long yo_hi = std::min<long>(static_cast<long>(ho) - 1,
                                            ynum < 0 ? -1 : ynum / stride);
                for (int kx = 0; kx < 3; ++kx) {
                    double wv = wk[ky * 3 + kx];
                    double acc = 0.0;
                    long xo_lo = kx == 0 ? 1 : 0;
                    long xnum = static_cast<long>(w) - kx;
                    long xo_hi = std::min<long>(static_cast<long>(wo) - 1,
                                                xnum < 0 ? -1 : xnum / stride);
                    if (stride == 1) {
                        for (long yo = yo_lo; yo <= yo_hi; ++yo) {
                            const double* xrow = xc + (yo + ky - 1) * w + (kx - 1);
                            double* dxrow = dxc + (yo + ky - 1) * w + (kx - 1);
                            const double* dyrow = dyc + yo * wo;
                            for (long xo = xo_lo; xo <= xo_hi; ++xo) {
                                acc += xrow[xo] * dyrow[xo];
                                dxrow[xo] += wv * dyrow[xo];
                            }
                        }
                    } else {
                        for (long yo = yo_lo; yo <= yo_hi; ++yo) {
                            const double* xrow = xc + (yo * 2 + ky - 1) * w + (kx - 1);
                            double* dxrow = dxc + (yo * 2 + ky - 1) * w + (kx - 1);
                            const double* dyrow = dyc + yo * wo;
                            for (long xo = xo_lo; xo <= xo_hi; ++xo) {
                                acc += xrow[xo * 2] * dyrow[xo];
                                dxrow[xo * 2] += wv * dyrow[xo];
                            }
                        }
                    }
                    dwk[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

NetworkGraph::NetworkGraph() : params_(std::make_shared<ParamStore>()) {}

int NetworkGraph::add_param(const std::string& name, Grid value) {
    params_->values.push_back(std::move(value));
    params_->names.push_back(name);
    return static_cast<int>(params_->values.size() - 1);
}

int NetworkGraph::add_node(Node node) {
    auto validate_ref = [&](int id) {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw std::invalid_argument("graph node reference out of range");
    };
    if (node.op != Op::input) validate_ref(node.in0);
    if (node.in1 >= 0) validate_ref(node.in1);
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
}

int NetworkGraph::add_input() {
    int id = add_node(Node{});
    inputs_.push_back(id);
    return id;
}

int NetworkGraph::conv3x3(int input, std::size_t c_in, std::size_t c_out, int stride,
                          RngStream& rng, bool zero_init) {
    if (stride != 1 && stride != 2)
        throw std::invalid_argument("conv3x3: stride must be 1 or 2");
    Node n;
    n.op = Op::conv3x3;
    n.in0 = input;
    n.stride = stride;
    int id = static_cast<int>(nodes_.size());
    Grid w({c_out, c_in, 3, 3});
    if (!zero_init) {
        double std = std::sqrt(2.0 / (static_cast<double>(c_in) * 9.0));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = std * rng.next_gaussian();
    }
    n.weight = add_param(std::to_string(id) + ".weight", std::move(w));
    n.bias = add_param(std::to_string(id) + ".bias", Grid({c_out}));
    return add_node(n);
}

int NetworkGraph::dense(int input, std::size_t n_in, std::size_t n_out, RngStream& rng,
                        bool zero_init) {
    Node n;
    n.op = Op::dense;
    n.in0 = input;
    int id = static_cast<int>(nodes_.size());
    Grid w({n_out, n_in});
    if (!zero_init) {
        double std = std::sqrt(2.0 / static_cast<double>(n_in));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = std * rng.next_gaussian();
    }
    n.weight = add_param(std::to_string(id) + ".weight", std::move(w));
    n.bias = add_param(std::to_string(id) + ".bias", Grid({n_out}));
    return add_node(n);
}

int NetworkGraph::group_norm(int input, std::size_t channels, int groups) {
    if (groups < 1 || channels % static_cast<std::size_t>(groups) != 0)
        throw std::invalid_argument("group_norm: groups must divide channels");
    Node n;
    n.op = Op::group_norm;
    n.in0 = input;
    n.groups = groups;
    int id = static_cast<int>(nodes_.size());
    n.weight = add_param(std::to_string(id) + ".gamma", Grid::full({channels}, 1.0));
    n.bias = add_param(std::to_string(id) + ".beta", Grid({channels}));
    return add_node(n);
}

int NetworkGraph::silu(int input) {
    Node n;
    n.op = Op::silu;
    n.in0 = input;
    return add_node(n);
}

int NetworkGraph::tanh_act(int input) {
    Node n;
    n.op = Op::tanh_act;
    n.in0 = input;
    return add_node(n);
}

int NetworkGraph::upsample2x(int input) {
    Node n;
    n.op = Op::upsample2x;
    n.in0 = input;
    return add_node(n);
}

int NetworkGraph::residual_add(int a, int b) {
    Node n;
    n.op = Op::residual_add;
    n.in0 = a;
    n.in1 = b;
    return add_node(n);
}

int NetworkGraph::channel_concat(int a, int b) {
    Node n;
    n.op = Op::channel_concat;
    n.in0 = a;
    n.in1 = b;
    return add_node(n);
}

int NetworkGraph::time_inject(int features, int vector) {
    Node n;
    n.op = Op::time_inject;
    n.in0 = features;
    n.in1 = vector;
    return add_node(n);
}

void NetworkGraph::set_output(int node) {
    if (node < 0 || node >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument("set_output: node out of range");
    output_ = node;
}

void NetworkGraph::check_built() const {
    if (output_ < 0) throw StateError("graph has no output node");
}

std::size_t NetworkGraph::param_count() const {
    std::size_t n = 0;
    for (const Grid& p : params_->values) n += p.size();
    return n;
}

const Grid& NetworkGraph::forward(const std::vector<Grid>& inputs) {
    check_built();
    if (inputs.size() != inputs_.size())
        throw std::invalid_argument("forward: expected " + std::to_string(inputs_.size()) +
                                    " inputs, got " + std::to_string(inputs.size()));
    act_.assign(nodes_.size(), Grid());
    gn_xhat_.assign(nodes_.size(), Grid());
    gn_invstd_.assign(nodes_.size(), {});
    for (std::size_t k = 0; k < inputs_.size(); ++k) act_[inputs_[k]] = inputs[k];

    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        switch (n.op) {
            case Op::input:
                if (act_[id].empty()) throw std::invalid_argument("unbound graph input");
                break;
            case Op::conv3x3: {
                const Grid& x = act_[n.in0];
                check_rank3(x, "conv3x3");
                const Grid& w = params_->values[n.weight];
                const Grid& b = params_->values[n.bias];
                if (x.dim(0) != w.dim(1))
                    throw std::invalid_argument("conv3x3: input channels mismatch");
                std::size_t ho = conv_out_dim(x.dim(1), n.stride);
                std::size_t wo = conv_out_dim(x.dim(2), n.stride);
                Grid y({w.dim(0), ho, wo});
                conv3x3_forward(x.data(), x.dim(0), x.dim(1), x.dim(2), w.data(), b.data(),
                                w.dim(0), n.stride, y.data(), ho, wo);
                act_[id] = std::move(y);
                break;
            }
            case Op::dense: {
                const Grid& x = act_[n.in0];
                if (x.rank() != 1) throw std::invalid_argument("dense: expected rank-1 input");
                const Grid& w = params_->values[n.weight];
                const Grid& b = params_->values[n.bias];
                if (x.dim(0) != w.dim(1))
                    throw std::invalid_argument("dense: input size mismatch");
                Grid y({w.dim(0)});
                for (std::size_t o = 0; o < w.dim(0); ++o) {
                    double acc = b[o];
                    const double* wrow = w.data() + o * w.dim(1);
                    for (std::size_t i = 0; i < w.dim(1); ++i) acc += wrow[i] * x[i];
                    y[o] = acc;
                }
                act_[id] = std::move(y);
                break;
            }
            case Op::group_norm: {
                const Grid& x = act_[n.in0];
                check_rank3(x, "group_norm");
                const Grid& gamma = params_->values[n.weight];
                const Grid& beta = params_->values[n.bias];
                std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
                if (c != gamma.dim(0))
                    throw std::invalid_argument("group_norm: channel mismatch");
                std::size_t groups = static_cast<std::size_t>(n.groups);
                std::size_t cpg = c / groups;
                Grid y(x.shape());
                Grid xhat(x.shape());
                std::vector<double> invstd(groups);
                for (std::size_t g = 0; g < groups; ++g) {
                    const double* xg = x.data() + g * cpg * hw;
                    std::size_t nG = cpg * hw;
                    double mean = 0.0;
                    for (std::size_t i = 0; i < nG; ++i) mean += xg[i];
                    mean /= static_cast<double>(nG);
                    double var = 0.0;
                    for (std::size_t i = 0; i < nG; ++i) {
                        double d = xg[i] - mean;
                        var += d * d;
                    }
                    var /= static_cast<double>(nG);
                    double is = 1.0 / std::sqrt(var + kGroupNormEps);
                    invstd[g] = is;
                    for (std::size_t cc = 0; cc < cpg; ++cc) {
                        std::size_t ch = g * cpg + cc;
                        const double* xr = x.data() + ch * hw;
                        double* hr = xhat.data() + ch * hw;
                        double* yr = y.data() + ch * hw;
                        double ga = gamma[ch], be = beta[ch];
                        for (std::size_t i = 0; i < hw; ++i) {
                            double h = (xr[i] - mean) * is;
                            hr[i] = h;
                            yr[i] = ga * h + be;
                        }
                    }
                }
                act_[id] = std::move(y);
                gn_xhat_[id] = std::move(xhat);
                gn_invstd_[id] = std::move(invstd);
                break;
            }
            case Op::silu: {
                const Grid& x = act_[n.in0];
                Grid y(x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
                act_[id] = std::move(y);
                break;
            }
            case Op::tanh_act: {
                const Grid& x = act_[n.in0];
                Grid y(x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
                act_[id] = std::move(y);
                break;
            }
            case Op::upsample2x: {
                const Grid& x = act_[n.in0];
                check_rank3(x, "upsample2x");
                std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
                Grid y({c, 2 * h, 2 * w});
                for (std::size_t ch = 0; ch < c; ++ch) {
                    for (std::size_t i = 0; i < h; ++i) {
                        const double* xr = x.data() + (ch * h + i) * w;
                        double* y0 = y.data() + (ch * 2 * h + 2 * i) * 2 * w;
                        double* y1 = y0 + 2 * w;
                        for (std::size_t j = 0; j < w; ++j) {
                            double v = xr[j];
                            y0[2 * j] = v;
                            y0[2 * j + 1] = v;
                            y1[2 * j] = v;
                            y1[2 * j + 1] = v;
                        }
                    }
                }
                act_[id] = std::move(y);
                break;
            }
            case Op::residual_add: {
                const Grid& a = act_[n.in0];
                const Grid& b = act_[n.in1];
                if (!a.same_shape(b))
                    throw std::invalid_argument("residual_add: shape mismatch");
                Grid y(a.shape());
                for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
                act_[id] = std::move(y);
                break;
            }
            case Op::channel_concat: {
                const Grid& a = act_[n.in0];
                const Grid& b = act_[n.in1];
                check_rank3(a, "channel_concat");
                check_rank3(b, "channel_concat");
                if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
                    throw std::invalid_argument("channel_concat: spatial mismatch");
                Grid y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
                std::copy(a.data(), a.data() + a.size(), y.data());
                std::copy(b.data(), b.data() + b.size(), y.data() + a.size());
                act_[id] = std::move(y);
                break;
            }
            case Op::time_inject: {
                const Grid& x = act_[n.in0];
                const Grid& v = act_[n.in1];
                check_rank3(x, "time_inject");
                if (v.rank() != 1 || v.dim(0) != x.dim(0))
                    throw std::invalid_argument("time_inject: vector length must equal channels");
                std::size_t hw = x.dim(1) * x.dim(2);
                Grid y(x.shape());
                for (std::size_t ch = 0; ch < x.dim(0); ++ch) {
                    const double* xr = x.data() + ch * hw;
                    double* yr = y.data() + ch * hw;
                    double add = v[ch];
                    for (std::size_t i = 0; i < hw; ++i) yr[i] = xr[i] + add;
                }
                act_[id] = std::move(y);
                break;
            }
        }
    }
    forward_ran_ = true;
    return act_[output_];
}

const Grid& NetworkGraph::output() const {
    if (!forward_ran_) throw StateError("output requested before forward");
    return act_[output_];
}

std::vector<Grid>& NetworkGraph::param_grads() {
    if (pgrads_.size() != params_->values.size()) zero_param_grads();
    return pgrads_;
}

void NetworkGraph::zero_param_grads() {
    pgrads_.resize(params_->values.size());
    for (std::size_t i = 0; i < pgrads_.size(); ++i) {
        if (pgrads_[i].same_shape(params_->values[i])) {
            pgrads_[i].fill(0.0);
        } else {
            pgrads_[i] = Grid(params_->values[i].shape());
        }
    }
}

std::vector<Grid> NetworkGraph::backward(const Grid& output_grad) {
    check_built();
    if (mode_ != Mode::train) throw StateError("backward requires train mode");
    if (!forward_ran_) throw StateError("backward called before forward");
    if (!output_grad.same_shape(act_[output_]))
        throw std::invalid_argument("backward: output gradient shape mismatch");
    if (pgrads_.size() != params_->values.size()) zero_param_grads();

    std::vector<Grid> grads(nodes_.size());
    auto accum = [&](int id, const Grid& delta) {
        if (grads[id].empty()) {
            grads[id] = delta;
        } else {
            for (std::size_t i = 0; i < delta.size(); ++i) grads[id][i] += delta[i];
        }
    };
    grads[output_] = output_grad;

    for (std::size_t r = nodes_.size(); r-- > 0;) {
        int id = static_cast<int>(r);
        if (grads[id].empty()) continue;
        const Node& n = nodes_[id];
        const Grid& dy = grads[id];
        switch (n.op) {
            case Op::input:
                break;
            case Op::conv3x3: {
                const Grid& x = act_[n.in0];
                const Grid& w = params_->values[n.weight];
                Grid dx(x.shape());
                conv3x3_backward(x.data(), x.dim(0), x.dim(1), x.dim(2), w.data(), w.dim(0),
                                 n.stride, dy.data(), dy.dim(1), dy.dim(2), dx.data(),
                                 pgrads_[n.weight].data(), pgrads_[n.bias].data());
                accum(n.in0, dx);
                break;
            }
            case Op::dense: {
                const Grid& x = act_[n.in0];
                const Grid& w = params_->values[n.weight];
                Grid dx(x.shape());
                Grid& dw = pgrads_[n.weight];
                Grid& db = pgrads_[n.bias];
                for (std::size_t o = 0; o < w.dim(0); ++o) {
                    double g = dy[o];
                    db[o] += g;
                    const double* wrow = w.data() + o * w.dim(1);
                    double* dwrow = dw.data() + o * w.dim(1);
                    for (std::size_t i = 0; i < w.dim(1); ++i) {
                        dwrow[i] += g * x[i];
                        dx[i] += wrow[i] * g;
                    }
                }
                accum(n.in0, dx);
                break;
            }
            case Op::group_norm: {
                const Grid& xhat = gn_xhat_[id];
                const auto& invstd = gn_invstd_[id];
                const Grid& gamma = params_->values[n.weight];
                std::size_t c = xhat.dim(0), hw = xhat.dim(1) * xhat.dim(2);
                std::size_t groups = static_cast<std::size_t>(n.groups);
                std::size_t cpg = c / groups;
                Grid dx(xhat.shape());
                Grid& dgamma = pgrads_[n.weight];
                Grid& dbeta = pgrads_[n.bias];
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double* dyr = dy.data() + ch * hw;
                    const double* hr = xhat.data() + ch * hw;
                    double sg = 0.0, sb = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sg += dyr[i] * hr[i];
                        sb += dyr[i];
                    }
                    dgamma[ch] += sg;
                    dbeta[ch] += sb;
                }
                for (std::size_t g = 0; g < groups; ++g) {
                    double nG = static_cast<double>(cpg * hw);
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t cc = 0; cc < cpg; ++cc) {
                        std::size_t ch = g * cpg + cc;
                        const double* dyr = dy.data() + ch * hw;
                        const double* hr = xhat.data() + ch * hw;
                        double ga = gamma[ch];
                        for (std::size_t i = 0; i < hw; ++i) {
                            double dxh = dyr[i] * ga;
                            s1 += dxh;
                            s2 += dxh * hr[i];
                        }
                    }
                    double is = invstd[g];
                    for (std::size_t cc = 0; cc < cpg; ++cc) {
                        std::size_t ch = g * cpg + cc;
                        const double* dyr = dy.data() + ch * hw;
                        const double* hr = xhat.data() + ch * hw;
                        double* dxr = dx.data() + ch * hw;
                        double ga = gamma[ch];
                        for (std::size_t i = 0; i < hw; ++i) {
                            double dxh = dyr[i] * ga;
                            dxr[i] = is * (dxh - s1 / nG - hr[i] * s2 / nG);
                        }
                    }
                }
                accum(n.in0, dx);
                break;
            }
            case Op::silu: {
                const Grid& x = act_[n.in0];
                Grid dx(x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    double s = sigmoid(x[i]);
                    dx[i] = dy[i] * s * (1.0 + x[i] * (1.0 - s));
                }
                accum(n.in0, dx);
                break;
            }
            case Op::tanh_act: {
                const Grid& y = act_[id];
                Grid dx(y.shape());
                for (std::size_t i = 0; i < y.size(); ++i)
                    dx[i] = dy[i] * (1.0 - y[i] * y[i]);
                accum(n.in0, dx);
                break;
            }
            case Op::upsample2x: {
                const Grid& x = act_[n.in0];
                std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
                Grid dx(x.shape());
                for (std::size_t ch = 0; ch < c; ++ch) {
                    for (std::size_t i = 0; i < h; ++i) {
                        double* dxr = dx.data() + (ch * h + i) * w;
                        const double* d0 = dy.data() + (ch * 2 * h + 2 * i) * 2 * w;
                        const double* d1 = d0 + 2 * w;
                        for (std::size_t j = 0; j < w; ++j)
                            dxr[j] = d0[2 * j] + d0[2 * j + 1] + d1[2 * j] + d1[2 * j + 1];
                    }
                }
                accum(n.in0, dx);
                break;
            }
            case Op::residual_add: {
                accum(n.in0, dy);
                accum(n.in1, dy);
                break;
            }
            case Op::channel_concat: {
                const Grid& a = act_[n.in0];
                const Grid& b = act_[n.in1];
                Grid da(a.shape()), db2(b.shape());
                std::copy(dy.data(), dy.data() + a.size(), da.data());
                std::copy(dy.data() + a.size(), dy.data() + a.size() + b.size(), db2.data());
                accum(n.in0, da);
                accum(n.in1, db2);
                break;
            }
            case Op::time_inject: {
                const Grid& v = act_[n.in1];
                std::size_t hw = dy.dim(1) * dy.dim(2);
                Grid dv(v.shape());
                for (std::size_t ch = 0; ch < dy.dim(0); ++ch) {
                    const double* dyr = dy.data() + ch * hw;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) acc += dyr[i];
                    dv[ch] = acc;
                }
                accum(n.in0, dy);
                accum(n.in1, dv);
                break;
            }
        }
    }

    std::vector<Grid> input_grads(inputs_.size());
    for (std::size_t k = 0; k < inputs_.size(); ++k) {
        if (grads[inputs_[k]].empty()) {
            input_grads[k] = Grid(act_[inputs_[k]].shape());
        } else {
            input_grads[k] = std::move(grads[inputs_[k]]);
        }
    }
    return input_grads;
}

NetworkGraph NetworkGraph::worker_clone() const {
    NetworkGraph g;
    g.params_ = params_;
    g.nodes_ = nodes_;
    g.inputs_ = inputs_;
    g.output_ = output_;
    g.mode_ = mode_;
    return g;
}

Grid time_embedding(int t, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0)
        throw std::invalid_argument("time_embedding: dim must be even and positive");
    if (t < 0) throw std::invalid_argument("time_embedding: t must be >= 0");
    Grid e({dim});
    for (std::size_t k = 0; k < dim / 2; ++k) {
        double omega = std::pow(10000.0, -2.0 * static_cast<double>(k) /
                                              static_cast<double>(dim));
        double arg = static_cast<double>(t) * omega;
        e[2 * k] = std::sin(arg);
        e[2 * k + 1] = std::cos(arg);
    }
    return e;
}

int add_residual_block(NetworkGraph& g, int x, std::size_t channels, int gn_groups,
                       RngStream& rng, int time_node, std::size_t time_dim) {
    int h = g.group_norm(x, channels, gn_groups);
    h = g.silu(h);
    h = g.conv3x3(h, channels, channels, 1, rng);
    if (time_node >= 0) {
        int head = g.dense(time_node, time_dim, channels, rng);
        h = g.time_inject(h, head);
    }
    h = g.group_norm(h, channels, gn_groups);
    h = g.silu(h);
    h = g.conv3x3(h, channels, channels, 1, rng);
    return g.residual_add(x, h);
}

void AdamW::update(const std::vector<Grid*>& params, const std::vector<const Grid*>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adamw: params/grads count mismatch");
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Grid* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("adamw: parameter list changed between updates");

    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Grid& theta = *params[p];
        const Grid& g = *grads[p];
        if (!theta.same_shape(g) || !theta.same_shape(m_[p]))
            throw std::invalid_argument("adamw: shape mismatch");
        double* mv = m_[p].data();
        double* vv = v_[p].data();
        double* tv = theta.data();
        const double* gv = g.data();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            mv[i] = cfg_.beta1 * mv[i] + (1.0 - cfg_.beta1) * gv[i];
            vv[i] = cfg_.beta2 * vv[i] + (1.0 - cfg_.beta2) * gv[i] * gv[i];
            double mhat = mv[i] / bc1;
            double vhat = vv[i] / bc2;
            tv[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                cfg_.weight_decay * tv[i]);
        }
    }
}

void AdamW::reset_rows(std::size_t param_index, std::size_t row_begin, std::size_t row_end) {
    if (param_index >= m_.size()) return;
    Grid& m = m_[param_index];
    Grid& v = v_[param_index];
    if (m.rank() != 2) throw std::invalid_argument("reset_rows: rank-2 parameter expected");
    std::size_t cols = m.dim(1);
    for (std::size_t r = row_begin; r < row_end && r < m.dim(0); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m.at(r, c) = 0.0;
            v.at(r, c) = 0.0;
        }
    }
}

}  // namespace hc3l::nn
