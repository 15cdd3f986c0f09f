#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "haelt/model.hpp"
#include "support/fd_check.hpp"

using namespace haelt;
using ad::Graph;
using ad::Shape;
using ad::Tensor;
using testsupport::fd_check;

namespace {

Tensor random_input(Shape s, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<double> v(ad::shape_numel(s));
    for (double& x : v) x = scale * rng.normal();
    return Tensor::from_values(std::move(s), std::move(v));
}

void zero_params(std::vector<ad::NamedParam>& params) {
    for (auto& p : params) std::fill(p.tensor.values->begin(), p.tensor.values->end(), 0.0);
}

model::HaeltConfig mini_config(model::Variant v = model::Variant::full) {
    model::HaeltConfig c;
    c.seq_len = 5;
    c.n_features = 4;
    c.resnet_filters = {4};
    c.resnet_kernels = {3};
    c.lstm_units = {8};
    c.embed_dim = 8;
    c.heads = 2;
    c.ff_dim = 8;
    c.encoder_layers = 1;
    c.dropout = {0.2, 0.3, 0.1};
    c.head_hidden = 4;
    c.fusion_hidden = {8};
    c.variant = v;
    return c;
}

}  // namespace

TEST_CASE("resnet block with zero weights and identity shortcut is relu") {
    Rng rng(1);
    std::vector<ad::NamedParam> reg;
    model::ResnetBlock block(3, 3, 3, rng, "block", reg);  // cin == filters: identity shortcut
    CHECK_FALSE(block.project.has_value());
    zero_params(reg);

    Graph g;
    const Tensor x = random_input({2, 6, 3}, 11);
    const Tensor y = block.apply(g, x);
    REQUIRE(y.shape == x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) {
        CHECK((*y.values)[i] == doctest::Approx(std::max(0.0, (*x.values)[i])));
    }
}

TEST_CASE("resnet block preserves the time dimension and projects channels") {
    Rng rng(2);
    std::vector<ad::NamedParam> reg;
    model::ResnetBlock block(3, 7, 5, rng, "block", reg);
    CHECK(block.project.has_value());
    Graph g;
    const Tensor x = random_input({2, 9, 3}, 12);
    const Tensor y = block.apply(g, x);
    CHECK(y.shape == Shape{2, 9, 7});
}

TEST_CASE("resnet block gradient vs finite differences") {
    Rng rng(3);
    std::vector<ad::NamedParam> reg;
    model::ResnetBlock block(2, 3, 3, rng, "block", reg);
    const Tensor x = random_input({2, 5, 2}, 13);
    std::vector<Tensor> params;
    for (auto& p : reg) params.push_back(p.tensor);
    const auto r = fd_check(params, [&](Graph& g) { return g.mean_all(block.apply(g, x)); });
    CHECK(r.max_err < 1e-4);
}

TEST_CASE("temporal attention with one time step returns the value projection") {
    Rng rng(4);
    std::vector<ad::NamedParam> reg;
    model::TemporalAttention attn(3, rng, "attn", reg);
    Graph g;
    const Tensor x = random_input({2, 1, 3}, 14);
    const Tensor out = attn.apply(g, x);
    const Tensor v = attn.v.apply(g, x);
    REQUIRE(out.shape == v.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        CHECK((*out.values)[i] == doctest::Approx((*v.values)[i]).epsilon(1e-12));
    }
}

TEST_CASE("zero query projection gives uniform attention over time") {
    Rng rng(5);
    std::vector<ad::NamedParam> reg;
    model::TemporalAttention attn(3, rng, "attn", reg);
    std::fill(attn.q.w.values->begin(), attn.q.w.values->end(), 0.0);
    std::fill(attn.q.b.values->begin(), attn.q.b.values->end(), 0.0);

    Graph g;
    const int T = 6;
    const Tensor x = random_input({1, T, 3}, 15);
    std::vector<double> weights;
    const Tensor out = attn.apply(g, x, &weights);
    for (const double w : weights) CHECK(w == doctest::Approx(1.0 / T).epsilon(1e-12));

    // every output row equals the mean of the value rows
    const Tensor v = attn.v.apply(g, x);
    for (int f = 0; f < 3; ++f) {
        double mean = 0.0;
        for (int t = 0; t < T; ++t) mean += (*v.values)[t * 3 + f];
        mean /= T;
        for (int t = 0; t < T; ++t) {
            CHECK((*out.values)[t * 3 + f] == doctest::Approx(mean).epsilon(1e-9));
        }
    }
}

TEST_CASE("temporal attention two-step hand case") {
    // d=1, q = k = [1,0], v = [2,4], unit scale: row 0 weights are
    // softmax([1,0]) = [0.7311, 0.2689] and the first output is 2.5378.
    Rng rng(6);
    std::vector<ad::NamedParam> reg;
    model::TemporalAttention attn(1, rng, "attn", reg);
    *attn.q.w.values = {1.0};
    *attn.q.b.values = {0.0};
    *attn.k.w.values = {1.0};
    *attn.k.b.values = {0.0};
    *attn.v.w.values = {-2.0};
    *attn.v.b.values = {4.0};

    Graph g;
    const Tensor x = Tensor::from_values({1, 2, 1}, {1.0, 0.0});
    std::vector<double> weights;
    const Tensor out = attn.apply(g, x, &weights);
    CHECK(weights[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(weights[1] == doctest::Approx(0.2689).epsilon(1e-4));
    CHECK((*out.values)[0] == doctest::Approx(2.5378).epsilon(1e-4));
}

TEST_CASE("attention weight rows are stochastic") {
    Rng rng(7);
    std::vector<ad::NamedParam> reg;
    model::TemporalAttention attn(4, rng, "attn", reg);
    Graph g;
    const int B = 3, T = 5;
    const Tensor x = random_input({B, T, 4}, 16, 2.0);
    std::vector<double> weights;
    attn.apply(g, x, &weights);
    REQUIRE(weights.size() == static_cast<size_t>(B * T * T));
    for (int r = 0; r < B * T; ++r) {
        double sum = 0.0;
        for (int c = 0; c < T; ++c) {
            const double w = weights[static_cast<size_t>(r) * T + c];
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("lstm with all-zero parameters outputs zeros") {
    Rng rng(8);
    std::vector<ad::NamedParam> reg;
    model::LstmLayer lstm(3, 4, rng, "lstm", reg);
    zero_params(reg);
    Graph g;
    const Tensor x = random_input({2, 6, 3}, 17);
    const Tensor h = lstm.apply(g, x, false);
    REQUIRE(h.shape == Shape{2, 4});
    for (const double v : *h.values) CHECK(v == 0.0);
    const Tensor seq = lstm.apply(g, x, true);
    for (const double v : *seq.values) CHECK(v == 0.0);
}

TEST_CASE("single lstm step equals the direct gate evaluation") {
    Rng rng(9);
    std::vector<ad::NamedParam> reg;
    const int in = 3, units = 4;
    model::LstmLayer lstm(in, units, rng, "lstm", reg);
    Graph g;
    const Tensor x = random_input({1, 1, in}, 18);
    const Tensor h = lstm.apply(g, x, false);

    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (int u = 0; u < units; ++u) {
        double zi = (*lstm.b.values)[u];
        double zf = (*lstm.b.values)[units + u];
        double zg = (*lstm.b.values)[2 * units + u];
        double zo = (*lstm.b.values)[3 * units + u];
        for (int f = 0; f < in; ++f) {
            const double xv = (*x.values)[f];
            zi += xv * (*lstm.wx.values)[f * 4 * units + u];
            zf += xv * (*lstm.wx.values)[f * 4 * units + units + u];
            zg += xv * (*lstm.wx.values)[f * 4 * units + 2 * units + u];
            zo += xv * (*lstm.wx.values)[f * 4 * units + 3 * units + u];
        }
        const double c = sig(zi) * std::tanh(zg);  // previous cell is zero
        const double expected = sig(zo) * std::tanh(c);
        CHECK(std::abs((*h.values)[u] - expected) < 1e-12);
    }
}

TEST_CASE("lstm gradient vs finite differences on a 2-step, 3-unit instance") {
    Rng rng(10);
    std::vector<ad::NamedParam> reg;
    model::LstmLayer lstm(2, 3, rng, "lstm", reg);
    const Tensor x = random_input({2, 2, 2}, 19);
    std::vector<Tensor> params;
    for (auto& p : reg) params.push_back(p.tensor);
    const auto r = fd_check(params, [&](Graph& g) { return g.mean_all(lstm.apply(g, x, false)); });
    CHECK(r.max_err < 1e-4);
}

TEST_CASE("single-head encoder attention equals temporal attention") {
    Rng rng(11);
    std::vector<ad::NamedParam> reg;
    const int d = 4;
    model::EncoderLayer enc(d, 1, 8, rng, "enc", reg);
    model::TemporalAttention plain(d, rng, "plain", reg);

    // share q/k/v, make the output projection the identity
    *enc.wq.w.values = *plain.q.w.values;
    *enc.wq.b.values = *plain.q.b.values;
    *enc.wk.w.values = *plain.k.w.values;
    *enc.wk.b.values = *plain.k.b.values;
    *enc.wv.w.values = *plain.v.w.values;
    *enc.wv.b.values = *plain.v.b.values;
    std::fill(enc.wo.w.values->begin(), enc.wo.w.values->end(), 0.0);
    for (int i = 0; i < d; ++i) (*enc.wo.w.values)[i * d + i] = 1.0;
    std::fill(enc.wo.b.values->begin(), enc.wo.b.values->end(), 0.0);

    Graph g;
    const Tensor x = random_input({2, 5, d}, 20);
    const Tensor a = enc.self_attention(g, x);
    const Tensor b = plain.apply(g, x);
    REQUIRE(a.shape == b.shape);
    for (int64_t i = 0; i < a.numel(); ++i) {
        CHECK(std::abs((*a.values)[i] - (*b.values)[i]) < 1e-12);
    }
}

TEST_CASE("layer norm output has zero mean and unit variance pre-affine") {
    Rng rng(12);
    std::vector<ad::NamedParam> reg;
    model::LayerNormParams ln(6, "ln", reg);  // gamma 1, beta 0
    Graph g;
    const Tensor x = random_input({4, 6}, 21, 3.0);
    const Tensor y = g.layer_norm(x, ln.gamma, ln.beta);
    for (int r = 0; r < 4; ++r) {
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 6; ++c) mean += (*y.values)[r * 6 + c];
        mean /= 6.0;
        for (int c = 0; c < 6; ++c) {
            const double d = (*y.values)[r * 6 + c] - mean;
            var += d * d;
        }
        var /= 6.0;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("encoder gradient vs finite differences (embed 4, heads 2, time 3)") {
    Rng rng(13);
    std::vector<ad::NamedParam> reg;
    model::EncoderLayer enc(4, 2, 6, rng, "enc", reg);
    const Tensor x = random_input({2, 3, 4}, 22);
    std::vector<Tensor> params;
    for (auto& p : reg) params.push_back(p.tensor);
    const auto r = fd_check(params, [&](Graph& g) {
        return g.mean_all(enc.apply(g, x, 0.0, false, nullptr));
    });
    CHECK(r.max_err < 1e-4);
}

TEST_CASE("forward produces probabilities in (0,1) for every variant") {
    for (const model::Variant v : model::all_variants()) {
        model::Haelt net(mini_config(v), Rng(100));
        Graph g;
        const Tensor x = random_input({3, 5, 4}, 23);
        const model::ModelOutputs out = net.forward(g, x);
        const auto heads = out.heads();
        REQUIRE(heads.size() == net.member_names().size());
        REQUIRE(!heads.empty());
        for (const Tensor& h : heads) {
            for (const double p : *h.values) {
                CHECK(p > 0.0);
                CHECK(p < 1.0);
            }
        }
    }
}

TEST_CASE("every ablation variant has strictly fewer parameters than full") {
    const int64_t full_count = model::Haelt(mini_config(model::Variant::full), Rng(7)).param_count();
    CHECK(full_count > 0);
    for (const model::Variant v : model::all_variants()) {
        if (v == model::Variant::full) continue;
        const int64_t count = model::Haelt(mini_config(v), Rng(7)).param_count();
        CHECK(count > 0);
        CHECK(count < full_count);
    }
}

TEST_CASE("duplicated batch rows produce identical outputs with dropout off") {
    model::Haelt net(mini_config(), Rng(200));
    Rng rng(24);
    std::vector<double> row(5 * 4);
    for (double& v : row) v = rng.normal();
    std::vector<double> batch;
    batch.insert(batch.end(), row.begin(), row.end());
    batch.insert(batch.end(), row.begin(), row.end());
    Graph g;
    const model::ModelOutputs out =
        net.forward(g, Tensor::from_values({2, 5, 4}, std::move(batch)));
    for (const Tensor& h : out.heads()) {
        CHECK((*h.values)[0] == (*h.values)[1]);
    }
}

TEST_CASE("permuting the batch permutes the outputs identically") {
    model::Haelt net(mini_config(), Rng(300));
    const int B = 4;
    Rng rng(25);
    std::vector<std::vector<double>> rows(B, std::vector<double>(5 * 4));
    for (auto& r : rows)
        for (double& v : r) v = rng.normal();

    auto run = [&](const std::vector<int>& order) {
        std::vector<double> batch;
        for (const int i : order) {
            batch.insert(batch.end(), rows[static_cast<size_t>(i)].begin(),
                         rows[static_cast<size_t>(i)].end());
        }
        Graph g;
        const model::ModelOutputs out =
            net.forward(g, Tensor::from_values({B, 5, 4}, std::move(batch)));
        return *out.p_fused->values;
    };
    const std::vector<double> straight = run({0, 1, 2, 3});
    const std::vector<double> shuffled = run({2, 0, 3, 1});
    CHECK(shuffled[0] == straight[2]);
    CHECK(shuffled[1] == straight[0]);
    CHECK(shuffled[2] == straight[3]);
    CHECK(shuffled[3] == straight[1]);
}

TEST_CASE("whole-model gradient check on the miniature full config") {
    model::Haelt net(mini_config(), Rng(400));
    const Tensor x = random_input({2, 5, 4}, 26);
    const std::vector<int> labels{1, 0};
    std::vector<Tensor> params;
    for (auto& p : net.params()) params.push_back(p.tensor);

    const auto r = fd_check(params, [&](Graph& g) {
        const model::ModelOutputs out = net.forward(g, x);
        const auto heads = out.heads();
        Tensor loss;
        for (size_t h = 0; h < heads.size(); ++h) {
            const Tensor l = g.bce_loss(heads[h], labels);
            loss = h == 0 ? l : g.add(loss, l);
        }
        return g.scale(loss, 1.0 / static_cast<double>(heads.size()));
    });
    CHECK(r.checked > 1000);
    CHECK(r.max_err < 1e-4);
}

TEST_CASE("dropout masks are drawn from the seeded stream and alter training output") {
    model::Haelt net(mini_config(), Rng(500));
    const Tensor x = random_input({2, 5, 4}, 27);
    Graph g;
    Rng d1(99), d2(99), d3(100);
    const auto a = net.forward(g, x, true, &d1);
    const auto b = net.forward(g, x, true, &d2);
    const auto c = net.forward(g, x, true, &d3);
    CHECK(*a.p_fused->values == *b.p_fused->values);           // same stream, same masks
    CHECK(*a.p_fused->values != *c.p_fused->values);           // different stream
    const auto eval1 = net.forward(g, x);
    const auto eval2 = net.forward(g, x);
    CHECK(*eval1.p_fused->values == *eval2.p_fused->values);   // inference ignores dropout
}

TEST_CASE("checkpoint round-trips exactly") {
    model::Haelt net(mini_config(), Rng(600));
    const nlohmann::json ckpt = net.checkpoint();
    model::Haelt other(mini_config(), Rng(601));  // different init
    other.load_checkpoint(ckpt);

    const Tensor x = random_input({2, 5, 4}, 28);
    Graph g;
    const auto a = net.forward(g, x);
    const auto b = other.forward(g, x);
    CHECK(*a.p_fused->values == *b.p_fused->values);
    CHECK(*a.p_lstm->values == *b.p_lstm->values);
}

TEST_CASE("config and input validation") {
    model::HaeltConfig bad = mini_config();
    bad.embed_dim = 9;  // not divisible by heads
    CHECK_THROWS_AS(model::Haelt(bad, Rng(1)), UsageError);

    model::Haelt net(mini_config(), Rng(1));
    Graph g;
    const Tensor wrong = random_input({2, 5, 7}, 29);  // feature mismatch
    CHECK_THROWS_AS(net.forward(g, wrong), ad::ShapeError);
}

TEST_CASE("member names follow the variant wiring") {
    using model::Variant;
    auto names = [&](Variant v) { return model::Haelt(mini_config(v), Rng(2)).member_names(); };
    CHECK(names(Variant::full) ==
          std::vector<std::string>{"lstm-head", "transformer-head", "fused-head"});
    CHECK(names(Variant::no_lstm) == std::vector<std::string>{"transformer-head", "fused-head"});
    CHECK(names(Variant::no_transformer) == std::vector<std::string>{"lstm-head", "fused-head"});
    CHECK(names(Variant::lstm_only) == std::vector<std::string>{"lstm-head"});
    CHECK(names(Variant::transformer_only) == std::vector<std::string>{"transformer-head"});
    CHECK(names(Variant::cnn_only) == std::vector<std::string>{"fused-head"});
    CHECK(names(Variant::no_ensemble) == std::vector<std::string>{"fused-head"});
    CHECK(model::Haelt(mini_config(Variant::no_ensemble), Rng(2)).ensemble_active() == false);
    CHECK(model::Haelt(mini_config(Variant::full), Rng(2)).ensemble_active());
}
