#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hc3l/errors.hpp"
#include "hc3l/nn.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace hc3l;
using nn::NetworkGraph;

namespace {

// One-layer graph wrapper for the per-layer checks.
struct LayerFixture {
    NetworkGraph g;
    std::vector<Grid> inputs;
    RngStream rng{123};
};

void check_layer(NetworkGraph& g, const std::vector<Grid>& inputs, double tol = 1e-5) {
    RngStream prng(7);
    g.forward(inputs);
    testutil::ProbeLoss probe(g.output(), prng);
    auto value = [&](const Grid& out) { return probe.value(out); };
    auto grad = [&](const Grid&) { return probe.coeffs; };

    auto pres = testutil::check_param_gradients(g, inputs, value, grad);
    CHECK(pres.max_rel_err < tol);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto ires = testutil::check_input_gradient(g, inputs, k, value, grad);
        CHECK(ires.max_rel_err < tol);
    }
}

}  // namespace

TEST_CASE("silu values and gradient at zero") {
    NetworkGraph g;
    int x = g.add_input();
    g.set_output(g.silu(x));
    Grid in({3}, {0.0, 1.0, -2.0});
    const Grid& out = g.forward({in});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));

    Grid dy({3}, {1.0, 0.0, 0.0});
    Grid dx = g.backward(dy)[0];
    CHECK(dx[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("conv3x3 with a delta kernel is the identity") {
    RngStream rng(1);
    NetworkGraph g;
    int x = g.add_input();
    int c = g.conv3x3(x, 1, 1, 1, rng);
    g.set_output(c);
    Grid& w = g.params().values[0];
    w.fill(0.0);
    w[4] = 1.0;  // center tap
    g.params().values[1].fill(0.0);

    Grid in = testutil::random_grid(rng, {1, 6, 7});
    const Grid& out = g.forward({in});
    CHECK(testutil::max_abs_diff(out, in) == 0.0);
}

TEST_CASE("conv3x3 stride 1 gradients") {
    LayerFixture f;
    int x = f.g.add_input();
    f.g.set_output(f.g.conv3x3(x, 2, 3, 1, f.rng));
    f.inputs.push_back(testutil::random_grid(f.rng, {2, 5, 6}));
    check_layer(f.g, f.inputs);
}

TEST_CASE("conv3x3 stride 2 gradients") {
    LayerFixture f;
    int x = f.g.add_input();
    f.g.set_output(f.g.conv3x3(x, 2, 3, 2, f.rng));
    for (auto hw : std::vector<std::pair<std::size_t, std::size_t>>{{6, 8}, {5, 7}}) {
        f.inputs.assign(1, testutil::random_grid(f.rng, {2, hw.first, hw.second}));
        check_layer(f.g, f.inputs);
    }
}

TEST_CASE("conv3x3 output shapes") {
    RngStream rng(2);
    NetworkGraph g;
    int x = g.add_input();
    g.set_output(g.conv3x3(x, 1, 4, 2, rng));
    CHECK(g.forward({Grid({1, 8, 8})}).shape() == std::vector<std::size_t>{4, 4, 4});
    CHECK(g.forward({Grid({1, 7, 9})}).shape() == std::vector<std::size_t>{4, 4, 5});
}

TEST_CASE("dense gradients") {
    LayerFixture f;
    int x = f.g.add_input();
    f.g.set_output(f.g.dense(x, 6, 4, f.rng));
    f.inputs.push_back(testutil::random_grid(f.rng, {6}));
    check_layer(f.g, f.inputs);
}

TEST_CASE("group_norm normalizes per group before affine") {
    RngStream rng(3);
    NetworkGraph g;
    int x = g.add_input();
    g.set_output(g.group_norm(x, 8, 4));
    Grid in = testutil::random_grid(rng, {8, 6, 6}, -3.0, 5.0);
    const Grid& out = g.forward({in});

    std::size_t hw = 36, cpg = 2;
    for (std::size_t grp = 0; grp < 4; ++grp) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < cpg * hw; ++i) mean += out[grp * cpg * hw + i];
        mean /= static_cast<double>(cpg * hw);
        for (std::size_t i = 0; i < cpg * hw; ++i) {
            double d = out[grp * cpg * hw + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cpg * hw);
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-3);  // eps shifts variance slightly below 1
    }
}

TEST_CASE("group_norm gradients") {
    LayerFixture f;
    int x = f.g.add_input();
    f.g.set_output(f.g.group_norm(x, 4, 2));
    // Shift gamma/beta off their init so their gradient paths are nontrivial.
    for (auto& p : f.g.params().values)
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.1 * (i % 3);
    f.inputs.push_back(testutil::random_grid(f.rng, {4, 4, 5}, -2.0, 2.0));
    check_layer(f.g, f.inputs, 2e-5);
}

TEST_CASE("upsample2x is inverted by 2x2 average pooling") {
    RngStream rng(4);
    NetworkGraph g;
    int x = g.add_input();
    g.set_output(g.upsample2x(x));
    Grid in = testutil::random_grid(rng, {3, 4, 5});
    const Grid& out = g.forward({in});
    REQUIRE(out.shape() == std::vector<std::size_t>{3, 8, 10});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                double avg = (out.at(c, 2 * i, 2 * j) + out.at(c, 2 * i, 2 * j + 1) +
                              out.at(c, 2 * i + 1, 2 * j) + out.at(c, 2 * i + 1, 2 * j + 1)) /
                             4.0;
                CHECK(avg == in.at(c, i, j));
            }
        }
    }
}

TEST_CASE("upsample, tanh, residual, concat, inject gradients") {
    LayerFixture f;
    int a = f.g.add_input();
    int b = f.g.add_input();
    int v = f.g.add_input();
    int up = f.g.upsample2x(a);                       // [2,4,4]
    int th = f.g.tanh_act(up);
    int cat = f.g.channel_concat(th, b);              // [4,4,4]
    int inj = f.g.time_inject(cat, v);                // + vec[4]
    int half = f.g.conv3x3(inj, 4, 2, 2, f.rng);      // [2,2,2]
    int upb = f.g.upsample2x(half);                   // [2,4,4]
    f.g.set_output(f.g.residual_add(th, upb));
    f.inputs = {testutil::random_grid(f.rng, {2, 2, 2}),
                testutil::random_grid(f.rng, {2, 4, 4}),
                testutil::random_grid(f.rng, {4})};
    check_layer(f.g, f.inputs);
}

TEST_CASE("channel_concat backward splits gradients exactly") {
    NetworkGraph g;
    int a = g.add_input();
    int b = g.add_input();
    g.set_output(g.channel_concat(a, b));
    RngStream rng(5);
    Grid ia = testutil::random_grid(rng, {2, 3, 3});
    Grid ib = testutil::random_grid(rng, {1, 3, 3});
    g.forward({ia, ib});
    Grid dy = testutil::random_grid(rng, {3, 3, 3});
    auto grads = g.backward(dy);
    for (std::size_t i = 0; i < ia.size(); ++i) CHECK(grads[0][i] == dy[i]);
    for (std::size_t i = 0; i < ib.size(); ++i) CHECK(grads[1][i] == dy[ia.size() + i]);
}

TEST_CASE("residual block gradients with time injection") {
    LayerFixture f;
    int x = f.g.add_input();
    int t = f.g.add_input();
    int trunk = f.g.dense(t, 6, 6, f.rng);
    trunk = f.g.silu(trunk);
    int out = nn::add_residual_block(f.g, x, 4, 2, f.rng, trunk, 6);
    f.g.set_output(out);
    f.inputs = {testutil::random_grid(f.rng, {4, 4, 4}),
                testutil::random_grid(f.rng, {6})};
    check_layer(f.g, f.inputs, 2e-5);
}

TEST_CASE("backward ordering and mode errors") {
    RngStream rng(6);
    NetworkGraph g;
    int x = g.add_input();
    g.set_output(g.silu(x));
    CHECK_THROWS_AS(g.backward(Grid({1})), StateError);
    g.forward({Grid({3})});
    g.set_mode(nn::Mode::eval);
    CHECK_THROWS_AS(g.backward(Grid({3})), StateError);
    g.set_mode(nn::Mode::train);
    CHECK_NOTHROW(g.backward(Grid({3})));
}

TEST_CASE("time embedding layout and direct evaluation") {
    Grid e0 = nn::time_embedding(0, 8);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(e0[2 * k] == 0.0);
        CHECK(e0[2 * k + 1] == 1.0);
    }

    Grid e = nn::time_embedding(1, 4);
    CHECK(e[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(e[1] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    double w1 = std::pow(10000.0, -0.5);
    CHECK(e[2] == doctest::Approx(std::sin(w1)).epsilon(1e-15));
    CHECK(e[3] == doctest::Approx(std::cos(w1)).epsilon(1e-15));

    // Distinct timesteps give distinct embeddings.
    Grid a = nn::time_embedding(17, 32);
    Grid b = nn::time_embedding(818, 32);
    double dist = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dist += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(dist > 0.0);

    CHECK_THROWS_AS(nn::time_embedding(1, 7), std::invalid_argument);
}

TEST_CASE("adamw single-step oracle and decay branch") {
    // Hand-derived single step: g=1, lr=0.1, eps=1e-8, zero decay gives
    // m_hat = 1, v_hat = 1, so dtheta = -0.1/(1+1e-8).
    nn::AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    nn::AdamW opt(cfg);
    Grid theta({1}, {0.3});
    Grid grad({1}, {1.0});
    opt.update({&theta}, {&grad});
    CHECK(std::abs(theta[0] - (0.3 - 0.1)) < 1e-9);

    // Pure decoupled decay: theta' = theta - lr*wd*theta.
    nn::AdamWConfig dcfg;
    dcfg.lr = 0.1;
    dcfg.weight_decay = 0.01;
    nn::AdamW dopt(dcfg);
    Grid th2({1}, {1.0});
    Grid g0({1}, {0.0});
    dopt.update({&th2}, {&g0});
    CHECK(th2[0] == doctest::Approx(0.999).epsilon(1e-12));

    // Zero gradient and zero decay leave parameters untouched.
    nn::AdamWConfig ncfg;
    ncfg.weight_decay = 0.0;
    nn::AdamW nopt(ncfg);
    Grid th3({2}, {0.5, -0.25});
    Grid g3({2}, {0.0, 0.0});
    nopt.update({&th3}, {&g3});
    CHECK(th3[0] == 0.5);
    CHECK(th3[1] == -0.25);
}

TEST_CASE("adamw is deterministic") {
    auto run = [] {
        nn::AdamW opt;
        Grid theta({4}, {1.0, -1.0, 0.5, 2.0});
        RngStream rng(8);
        for (int i = 0; i < 50; ++i) {
            Grid g = sample_gaussian(rng, {4});
            opt.update({&theta}, {&g});
        }
        return theta;
    };
    CHECK(run() == run());
}

TEST_CASE("worker clones share parameters but not gradients") {
    RngStream rng(9);
    NetworkGraph g;
    int x = g.add_input();
    g.set_output(g.conv3x3(x, 1, 2, 1, rng));
    NetworkGraph w = g.worker_clone();
    CHECK(&g.params() == &w.params());

    Grid in = testutil::random_grid(rng, {1, 4, 4});
    w.zero_param_grads();
    w.forward({in});
    w.backward(Grid::full({2, 4, 4}, 1.0));
    double wsum = 0.0, gsum = 0.0;
    for (auto& p : w.param_grads())
        for (std::size_t i = 0; i < p.size(); ++i) wsum += std::abs(p[i]);
    g.zero_param_grads();
    for (auto& p : g.param_grads())
        for (std::size_t i = 0; i < p.size(); ++i) gsum += std::abs(p[i]);
    CHECK(wsum > 0.0);
    CHECK(gsum == 0.0);
}

TEST_CASE("parameter names follow layer-index.param-name") {
    RngStream rng(10);
    NetworkGraph g;
    int x = g.add_input();
    int c = g.conv3x3(x, 1, 2, 1, rng);
    g.set_output(g.group_norm(c, 2, 2));
    const auto& names = g.params().names;
    REQUIRE(names.size() == 4);
    CHECK(names[0] == "1.weight");
    CHECK(names[1] == "1.bias");
    CHECK(names[2] == "2.gamma");
    CHECK(names[3] == "2.beta");
    CHECK(g.param_count() == 2 * 1 * 9 + 2 + 2 + 2);
}

TEST_CASE("small composed graph passes finite differences") {
    // A miniature of the real networks: conv/gn/silu/res/concat/inject/dense
    // all on one path, under 5k parameters.
    LayerFixture f;
    int x = f.g.add_input();
    int t = f.g.add_input();
    int trunk = f.g.silu(f.g.dense(t, 4, 4, f.rng));
    int h = f.g.conv3x3(x, 2, 4, 1, f.rng);
    h = nn::add_residual_block(f.g, h, 4, 2, f.rng, trunk, 4);
    int skip = h;
    h = f.g.conv3x3(h, 4, 4, 2, f.rng);
    h = f.g.upsample2x(h);
    h = f.g.channel_concat(h, skip);
    h = f.g.conv3x3(h, 8, 2, 1, f.rng);
    f.g.set_output(h);
    CHECK(f.g.param_count() < 5000);
    f.inputs = {testutil::random_grid(f.rng, {2, 4, 4}),
                testutil::random_grid(f.rng, {4})};
    check_layer(f.g, f.inputs, 2e-5);
}
