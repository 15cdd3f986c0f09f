#include "haelt/model.hpp"

#include <algorithm>
#include <cmath>

namespace haelt::model {

Variant variant_from_string(const std::string& s) {
    for (const Variant v : all_variants()) {
        if (variant_to_string(v) == s) return v;
    }
    throw UsageError("unknown variant '" + s + "'");
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_cnn: return "no_cnn";
        case Variant::no_lstm: return "no_lstm";
        case Variant::no_transformer: return "no_transformer";
        case Variant::no_ensemble: return "no_ensemble";
        case Variant::cnn_only: return "cnn_only";
        case Variant::lstm_only: return "lstm_only";
        case Variant::transformer_only: return "transformer_only";
    }
    throw UsageError("unknown variant value");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v = {
        Variant::full,       Variant::no_cnn,   Variant::no_lstm,   Variant::no_transformer,
        Variant::no_ensemble, Variant::cnn_only, Variant::lstm_only, Variant::transformer_only,
    };
    return v;
}

void HaeltConfig::validate() const {
    if (seq_len <= 0) throw UsageError("config: seq_len must be positive");
    if (n_features <= 0) throw UsageError("config: n_features must be positive");
    if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0) {
        throw UsageError("config: embed_dim " + std::to_string(embed_dim) +
                         " must be divisible by heads " + std::to_string(heads));
    }
    if (resnet_filters.size() != resnet_kernels.size() || resnet_filters.empty()) {
        throw UsageError("config: resnet filters/kernels must be non-empty and aligned");
    }
    for (const int k : resnet_kernels) {
        if (k <= 0 || k % 2 == 0) throw UsageError("config: resnet kernels must be odd");
        if (k > seq_len) throw UsageError("config: resnet kernel exceeds seq_len");
    }
    if (lstm_units.empty()) throw UsageError("config: lstm_units must be non-empty");
    if (dropout.size() != 3) throw UsageError("config: dropout must list 3 rates");
    for (const double d : dropout) {
        if (d < 0.0 || d >= 1.0) throw UsageError("config: dropout rates must be in [0,1)");
    }
    if (head_hidden <= 0 || ff_dim <= 0 || encoder_layers <= 0) {
        throw UsageError("config: layer sizes must be positive");
    }
    if (fusion_hidden.empty()) throw UsageError("config: fusion_hidden must be non-empty");
}

// ---------------------------------------------------------------------------
// init
// ---------------------------------------------------------------------------

namespace {

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(ad::shape_numel(shape));
    for (double& x : v) x = rng.uniform(-limit, limit);
    return Tensor::from_values(std::move(shape), std::move(v), true);
}

// Orthonormal rows via modified Gram-Schmidt on a random normal matrix.
std::vector<double> orthogonal_square(int n, Rng& rng) {
    std::vector<double> m(static_cast<size_t>(n) * n);
    for (double& x : m) x = rng.normal();
    for (int i = 0; i < n; ++i) {
        double* ri = m.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < i; ++j) {
            const double* rj = m.data() + static_cast<size_t>(j) * n;
            double dot = 0.0;
            for (int c = 0; c < n; ++c) dot += ri[c] * rj[c];
            for (int c = 0; c < n; ++c) ri[c] -= dot * rj[c];
        }
        double norm = 0.0;
        for (int c = 0; c < n; ++c) norm += ri[c] * ri[c];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            for (int c = 0; c < n; ++c) ri[c] = rng.normal();
            --i;
            continue;
        }
        for (int c = 0; c < n; ++c) ri[c] /= norm;
    }
    return m;
}

void register_param(std::vector<ad::NamedParam>& reg, const std::string& name, const Tensor& t) {
    reg.push_back(ad::NamedParam{name, t});
}

}  // namespace

Dense::Dense(int in, int out, Rng& rng, const std::string& name, std::vector<ad::NamedParam>& reg) {
    w = glorot({in, out}, in, out, rng);
    b = Tensor::zeros({out}, true);
    register_param(reg, name + ".w", w);
    register_param(reg, name + ".b", b);
}

Tensor Dense::apply(Graph& g, const Tensor& x) const { return g.add_bias(g.matmul(x, w), b); }

Conv1d::Conv1d(int kernel, int cin, int cout, Rng& rng, const std::string& name,
               std::vector<ad::NamedParam>& reg) {
    w = glorot({kernel, cin, cout}, kernel * cin, kernel * cout, rng);
    b = Tensor::zeros({cout}, true);
    register_param(reg, name + ".w", w);
    register_param(reg, name + ".b", b);
}

Tensor Conv1d::apply(Graph& g, const Tensor& x) const { return g.conv1d(x, w, b); }

ResnetBlock::ResnetBlock(int cin, int filters, int kernel, Rng& rng, const std::string& name,
                         std::vector<ad::NamedParam>& reg) {
    conv1 = Conv1d(kernel, cin, filters, rng, name + ".conv1", reg);
    conv2 = Conv1d(kernel, filters, filters, rng, name + ".conv2", reg);
    if (cin != filters) project = Conv1d(1, cin, filters, rng, name + ".project", reg);
}

Tensor ResnetBlock::apply(Graph& g, const Tensor& x) const {
    Tensor y = conv2.apply(g, g.relu(conv1.apply(g, x)));
    const Tensor shortcut = project ? project->apply(g, x) : x;
    return g.relu(g.add(y, shortcut));
}

TemporalAttention::TemporalAttention(int d, Rng& rng, const std::string& name,
                                     std::vector<ad::NamedParam>& reg)
    : dim(d) {
    q = Dense(d, d, rng, name + ".q", reg);
    k = Dense(d, d, rng, name + ".k", reg);
    v = Dense(d, d, rng, name + ".v", reg);
}

Tensor TemporalAttention::apply(Graph& g, const Tensor& x,
                                std::vector<double>* attention_out) const {
    const Tensor qs = q.apply(g, x);
    const Tensor ks = k.apply(g, x);
    const Tensor vs = v.apply(g, x);
    Tensor scores = g.scale(g.bmm(qs, g.transpose12(ks)), 1.0 / std::sqrt(static_cast<double>(dim)));
    Tensor weights = g.softmax_last(scores);
    if (attention_out) *attention_out = *weights.values;
    return g.bmm(weights, vs);
}

LstmLayer::LstmLayer(int in, int n_units, Rng& rng, const std::string& name,
                     std::vector<ad::NamedParam>& reg)
    : units(n_units) {
    wx = glorot({in, 4 * units}, in, 4 * units, rng);
    // orthogonal per gate block, forget-gate bias 1
    std::vector<double> rec(static_cast<size_t>(units) * 4 * units);
    for (int gate = 0; gate < 4; ++gate) {
        const std::vector<double> q = orthogonal_square(units, rng);
        for (int i = 0; i < units; ++i)
            for (int j = 0; j < units; ++j)
                rec[static_cast<size_t>(i) * 4 * units + gate * units + j] =
                    q[static_cast<size_t>(i) * units + j];
    }
    wh = Tensor::from_values({units, 4 * units}, std::move(rec), true);
    std::vector<double> bias(static_cast<size_t>(4) * units, 0.0);
    for (int j = units; j < 2 * units; ++j) bias[static_cast<size_t>(j)] = 1.0;
    b = Tensor::from_values({4 * units}, std::move(bias), true);
    register_param(reg, name + ".wx", wx);
    register_param(reg, name + ".wh", wh);
    register_param(reg, name + ".b", b);
}

Tensor LstmLayer::apply(Graph& g, const Tensor& x, bool return_sequence) const {
    if (x.shape.size() != 3) {
        throw ad::ShapeError("lstm: input must be [B,T,F], got " + ad::shape_str(x.shape));
    }
    const int batch = x.shape[0], t_len = x.shape[1];
    Tensor h = Tensor::zeros({batch, units});
    Tensor c = Tensor::zeros({batch, units});
    std::vector<Tensor> states;
    states.reserve(static_cast<size_t>(t_len));
    for (int t = 0; t < t_len; ++t) {
        const Tensor xt = g.slice_time(x, t);
        Tensor z = g.add_bias(g.add(g.matmul(xt, wx), g.matmul(h, wh)), b);
        const Tensor gi = g.sigmoid(g.slice_last(z, 0, units));
        const Tensor gf = g.sigmoid(g.slice_last(z, units, units));
        const Tensor gc = g.tanh_op(g.slice_last(z, 2 * units, units));
        const Tensor go = g.sigmoid(g.slice_last(z, 3 * units, units));
        c = g.add(g.mul(gf, c), g.mul(gi, gc));
        h = g.mul(go, g.tanh_op(c));
        if (return_sequence) states.push_back(h);
    }
    return return_sequence ? g.stack_time(states) : h;
}

LayerNormParams::LayerNormParams(int d, const std::string& name,
                                 std::vector<ad::NamedParam>& reg) {
    gamma = Tensor::full({d}, 1.0, true);
    beta = Tensor::zeros({d}, true);
    register_param(reg, name + ".gamma", gamma);
    register_param(reg, name + ".beta", beta);
}

EncoderLayer::EncoderLayer(int embed, int n_heads, int ff, Rng& rng, const std::string& name,
                           std::vector<ad::NamedParam>& reg)
    : heads(n_heads), dim(embed) {
    wq = Dense(embed, embed, rng, name + ".attn.q", reg);
    wk = Dense(embed, embed, rng, name + ".attn.k", reg);
    wv = Dense(embed, embed, rng, name + ".attn.v", reg);
    wo = Dense(embed, embed, rng, name + ".attn.out", reg);
    ln1 = LayerNormParams(embed, name + ".ln1", reg);
    ln2 = LayerNormParams(embed, name + ".ln2", reg);
    ff1 = Dense(embed, ff, rng, name + ".ff1", reg);
    ff2 = Dense(ff, embed, rng, name + ".ff2", reg);
}

Tensor EncoderLayer::self_attention(Graph& g, const Tensor& x) const {
    const Tensor qs = wq.apply(g, x);
    const Tensor ks = wk.apply(g, x);
    const Tensor vs = wv.apply(g, x);
    const int dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor ctx;
    for (int hd = 0; hd < heads; ++hd) {
        const Tensor qh = g.slice_last(qs, hd * dh, dh);
        const Tensor kh = g.slice_last(ks, hd * dh, dh);
        const Tensor vh = g.slice_last(vs, hd * dh, dh);
        const Tensor weights = g.softmax_last(g.scale(g.bmm(qh, g.transpose12(kh)), scale));
        const Tensor ctx_h = g.bmm(weights, vh);
        ctx = hd == 0 ? ctx_h : g.concat_last(ctx, ctx_h);
    }
    return wo.apply(g, ctx);
}

Tensor EncoderLayer::apply(Graph& g, const Tensor& x, double drop_rate, bool training,
                           Rng* drop_rng) const {
    Tensor attn = self_attention(g, x);
    attn = maybe_dropout(g, attn, drop_rate, training, drop_rng);
    const Tensor x1 = g.layer_norm(g.add(x, attn), ln1.gamma, ln1.beta);
    Tensor ff = ff2.apply(g, g.relu(ff1.apply(g, x1)));
    ff = maybe_dropout(g, ff, drop_rate, training, drop_rng);
    return g.layer_norm(g.add(x1, ff), ln2.gamma, ln2.beta);
}

Tensor maybe_dropout(Graph& g, const Tensor& x, double rate, bool training, Rng* rng) {
    if (!training || rate <= 0.0 || rng == nullptr) return x;
    const double keep = 1.0 - rate;
    auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    for (double& m : *mask) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
    return g.dropout_apply(x, mask);
}

std::vector<double> sinusoidal_encoding(int t_len, int embed) {
    std::vector<double> pe(static_cast<size_t>(t_len) * embed);
    for (int t = 0; t < t_len; ++t) {
        for (int i = 0; i < embed; ++i) {
            const double angle =
                t / std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(embed));
            pe[static_cast<size_t>(t) * embed + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

// ---------------------------------------------------------------------------
// Haelt
// ---------------------------------------------------------------------------

std::vector<Tensor> ModelOutputs::heads() const {
    std::vector<Tensor> out;
    if (p_lstm) out.push_back(*p_lstm);
    if (p_transformer) out.push_back(*p_transformer);
    if (p_fused) out.push_back(*p_fused);
    return out;
}

std::vector<std::vector<double>> ModelOutputs::head_probs() const {
    std::vector<std::vector<double>> out;
    for (const Tensor& h : heads()) out.push_back(*h.values);
    return out;
}

bool Haelt::has_cnn() const {
    switch (cfg_.variant) {
        case Variant::no_cnn:
        case Variant::lstm_only:
        case Variant::transformer_only: return false;
        default: return true;
    }
}

bool Haelt::has_attention() const {
    switch (cfg_.variant) {
        case Variant::cnn_only:
        case Variant::lstm_only:
        case Variant::transformer_only: return false;
        default: return true;
    }
}

bool Haelt::has_lstm() const {
    switch (cfg_.variant) {
        case Variant::no_lstm:
        case Variant::cnn_only:
        case Variant::transformer_only: return false;
        default: return true;
    }
}

bool Haelt::has_transformer() const {
    switch (cfg_.variant) {
        case Variant::no_transformer:
        case Variant::cnn_only:
        case Variant::lstm_only: return false;
        default: return true;
    }
}

bool Haelt::has_fusion() const {
    switch (cfg_.variant) {
        case Variant::cnn_only:
        case Variant::lstm_only:
        case Variant::transformer_only: return false;
        default: return true;
    }
}

bool Haelt::has_branch_heads() const {
    // Without the ensemble the per-branch heads have no consumer; only the
    // fused pathway is wired.
    return cfg_.variant != Variant::no_ensemble;
}

std::vector<std::string> Haelt::member_names() const {
    std::vector<std::string> names;
    if (has_lstm() && has_branch_heads()) names.push_back("lstm-head");
    if (has_transformer() && has_branch_heads()) names.push_back("transformer-head");
    if (has_fusion() || cfg_.variant == Variant::cnn_only) names.push_back("fused-head");
    return names;
}

bool Haelt::ensemble_active() const {
    return cfg_.variant != Variant::no_ensemble && member_names().size() >= 2;
}

Haelt::Haelt(HaeltConfig cfg, Rng init_rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = init_rng.fork("model-init");

    int trunk_dim = cfg_.n_features;
    if (has_cnn()) {
        int cin = cfg_.n_features;
        for (size_t i = 0; i < cfg_.resnet_filters.size(); ++i) {
            resnet_.emplace_back(cin, cfg_.resnet_filters[i], cfg_.resnet_kernels[i], rng,
                                 "resnet." + std::to_string(i), params_);
            cin = cfg_.resnet_filters[i];
        }
        trunk_dim = cin;
    }
    if (has_attention()) {
        attention_.emplace(trunk_dim, rng, "attention", params_);
    }

    int lstm_out_dim = 0;
    if (has_lstm()) {
        int in = trunk_dim;
        for (size_t i = 0; i < cfg_.lstm_units.size(); ++i) {
            lstm_.emplace_back(in, cfg_.lstm_units[i], rng, "lstm." + std::to_string(i), params_);
            in = cfg_.lstm_units[i];
        }
        lstm_out_dim = in;
        if (has_branch_heads()) {
            lstm_head1_.emplace(lstm_out_dim, cfg_.head_hidden, rng, "head.lstm.0", params_);
            lstm_head2_.emplace(cfg_.head_hidden, 1, rng, "head.lstm.1", params_);
        }
    }
    if (has_transformer()) {
        t_in_proj_.emplace(trunk_dim, cfg_.embed_dim, rng, "transformer.in_proj", params_);
        for (int i = 0; i < cfg_.encoder_layers; ++i) {
            encoders_.emplace_back(cfg_.embed_dim, cfg_.heads, cfg_.ff_dim, rng,
                                   "transformer.enc" + std::to_string(i), params_);
        }
        pos_encoding_ = sinusoidal_encoding(cfg_.seq_len, cfg_.embed_dim);
        if (has_branch_heads()) {
            tr_head1_.emplace(cfg_.embed_dim, cfg_.head_hidden, rng, "head.transformer.0", params_);
            tr_head2_.emplace(cfg_.head_hidden, 1, rng, "head.transformer.1", params_);
        }
    }
    if (has_fusion()) {
        int in = (has_lstm() ? lstm_out_dim : 0) + (has_transformer() ? cfg_.embed_dim : 0);
        for (size_t i = 0; i < cfg_.fusion_hidden.size(); ++i) {
            fusion_.emplace_back(in, cfg_.fusion_hidden[i], rng, "fusion." + std::to_string(i),
                                 params_);
            in = cfg_.fusion_hidden[i];
        }
        fusion_.emplace_back(in, 1, rng, "fusion.out", params_);
    }
    if (cfg_.variant == Variant::cnn_only) {
        cnn_head1_.emplace(trunk_dim, cfg_.head_hidden, rng, "head.cnn.0", params_);
        cnn_head2_.emplace(cfg_.head_hidden, 1, rng, "head.cnn.1", params_);
    }
}

Tensor Haelt::branch_head(Graph& g, const Tensor& x, const Dense& h1, const Dense& h2) const {
    return g.sigmoid(h2.apply(g, g.relu(h1.apply(g, x))));
}

Tensor Haelt::positional(int batch) const {
    const size_t plane = pos_encoding_.size();
    std::vector<double> tiled(static_cast<size_t>(batch) * plane);
    for (int b = 0; b < batch; ++b) {
        std::copy(pos_encoding_.begin(), pos_encoding_.end(),
                  tiled.begin() + static_cast<size_t>(b) * plane);
    }
    return Tensor::from_values({batch, cfg_.seq_len, cfg_.embed_dim}, std::move(tiled));
}

ModelOutputs Haelt::forward(Graph& g, const Tensor& x, bool training, Rng* dropout_rng,
                            std::vector<double>* attention_out) const {
    if (x.shape.size() != 3 || x.shape[1] != cfg_.seq_len || x.shape[2] != cfg_.n_features) {
        throw ad::ShapeError("forward: batch must be [B," + std::to_string(cfg_.seq_len) + "," +
                             std::to_string(cfg_.n_features) + "], got " + ad::shape_str(x.shape));
    }
    const int batch = x.shape[0];

    Tensor trunk = x;
    for (const ResnetBlock& block : resnet_) {
        trunk = block.apply(g, trunk);
        trunk = maybe_dropout(g, trunk, cfg_.dropout[0], training, dropout_rng);
    }
    if (attention_) trunk = attention_->apply(g, trunk, attention_out);

    std::optional<Tensor> lstm_out;
    if (has_lstm()) {
        Tensor cur = trunk;
        for (size_t i = 0; i < lstm_.size(); ++i) {
            const bool last = i + 1 == lstm_.size();
            cur = lstm_[i].apply(g, cur, !last);
            cur = maybe_dropout(g, cur, cfg_.dropout[1], training, dropout_rng);
        }
        lstm_out = cur;
    }

    std::optional<Tensor> tr_out;
    if (has_transformer()) {
        Tensor z = t_in_proj_->apply(g, trunk);
        z = g.add(z, positional(batch));
        for (const EncoderLayer& enc : encoders_) {
            z = enc.apply(g, z, cfg_.dropout[2], training, dropout_rng);
        }
        tr_out = g.mean_time(z);
    }

    ModelOutputs out;
    if (lstm_out && has_branch_heads()) {
        out.p_lstm = branch_head(g, *lstm_out, *lstm_head1_, *lstm_head2_);
    }
    if (tr_out && has_branch_heads()) {
        out.p_transformer = branch_head(g, *tr_out, *tr_head1_, *tr_head2_);
    }

    if (has_fusion()) {
        Tensor fused_in;
        if (lstm_out && tr_out) {
            fused_in = g.concat_last(*lstm_out, *tr_out);
        } else {
            fused_in = lstm_out ? *lstm_out : *tr_out;
        }
        Tensor cur = fused_in;
        for (size_t i = 0; i + 1 < fusion_.size(); ++i) cur = g.relu(fusion_[i].apply(g, cur));
        out.p_fused = g.sigmoid(fusion_.back().apply(g, cur));
    } else if (cfg_.variant == Variant::cnn_only) {
        out.p_fused = branch_head(g, g.mean_time(trunk), *cnn_head1_, *cnn_head2_);
    }
    return out;
}

int64_t Haelt::param_count() const {
    int64_t n = 0;
    for (const ad::NamedParam& p : params_) n += p.tensor.numel();
    return n;
}

void Haelt::zero_grads() {
    for (ad::NamedParam& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> Haelt::snapshot_weights() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(params_.size());
    for (const ad::NamedParam& p : params_) snap.push_back(*p.tensor.values);
    return snap;
}

void Haelt::restore_weights(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != params_.size()) throw NumericError("restore_weights: snapshot mismatch");
    for (size_t i = 0; i < params_.size(); ++i) {
        if (snap[i].size() != params_[i].tensor.values->size()) {
            throw NumericError("restore_weights: size mismatch for '" + params_[i].name + "'");
        }
        *params_[i].tensor.values = snap[i];
    }
}

nlohmann::json Haelt::checkpoint() const {
    nlohmann::json params = nlohmann::json::object();
    for (const ad::NamedParam& p : params_) {
        params[p.name] = {{"shape", p.tensor.shape}, {"values", *p.tensor.values}};
    }
    return {{"variant", variant_to_string(cfg_.variant)}, {"params", params}};
}

void Haelt::load_checkpoint(const nlohmann::json& j) {
    const auto& params = j.at("params");
    for (ad::NamedParam& p : params_) {
        if (!params.contains(p.name)) {
            throw DataError("checkpoint: missing parameter '" + p.name + "'");
        }
        const auto& entry = params.at(p.name);
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape != p.tensor.shape) {
            throw DataError("checkpoint: shape mismatch for '" + p.name + "'");
        }
        const auto values = entry.at("values").get<std::vector<double>>();
        if (values.size() != p.tensor.values->size()) {
            throw DataError("checkpoint: value count mismatch for '" + p.name + "'");
        }
        *p.tensor.values = values;
    }
}

}  // namespace haelt::model
