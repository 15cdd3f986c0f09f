#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "haelt/adam.hpp"
#include "haelt/errors.hpp"
#include "haelt/rng.hpp"
#include "haelt/tensor.hpp"

namespace haelt::model {

using ad::Graph;
using ad::Tensor;

enum class Variant {
    full,
    no_cnn,
    no_lstm,
    no_transformer,
    no_ensemble,
    cnn_only,
    lstm_only,
    transformer_only,
};

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);
const std::vector<Variant>& all_variants();

struct HaeltConfig {
    int seq_len = 30;
    int n_features = 0;
    std::vector<int> resnet_filters = {64, 128};
    std::vector<int> resnet_kernels = {3, 5};
    std::vector<int> lstm_units = {128, 64, 32};
    int embed_dim = 64;
    int heads = 4;
    int ff_dim = 128;
    int encoder_layers = 2;
    std::vector<double> dropout = {0.2, 0.3, 0.1};  // resnet, lstm, transformer
    int head_hidden = 32;
    std::vector<int> fusion_hidden = {64, 32};
    Variant variant = Variant::full;

    void validate() const;  // throws UsageError on config errors
};

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

struct Dense {
    Tensor w, b;
    Dense() = default;
    Dense(int in, int out, Rng& rng, const std::string& name, std::vector<ad::NamedParam>& reg);
    Tensor apply(Graph& g, const Tensor& x) const;
};

struct Conv1d {
    Tensor w, b;  // w: [K, Cin, Cout]
    Conv1d() = default;
    Conv1d(int kernel, int cin, int cout, Rng& rng, const std::string& name,
           std::vector<ad::NamedParam>& reg);
    Tensor apply(Graph& g, const Tensor& x) const;
};

// relu(conv2(relu(conv1(x))) + project(x)); project is a 1x1 conv when the
// channel counts differ, identity otherwise. Time length is preserved.
struct ResnetBlock {
    Conv1d conv1, conv2;
    std::optional<Conv1d> project;
    ResnetBlock() = default;
    ResnetBlock(int cin, int filters, int kernel, Rng& rng, const std::string& name,
                std::vector<ad::NamedParam>& reg);
    Tensor apply(Graph& g, const Tensor& x) const;
};

// Single-head scaled dot-product attention over time with learned Q/K/V
// projections. Scores are scaled by 1/sqrt(d).
struct TemporalAttention {
    Dense q, k, v;
    int dim = 0;
    TemporalAttention() = default;
    TemporalAttention(int d, Rng& rng, const std::string& name, std::vector<ad::NamedParam>& reg);
    // attention_out, when set, receives the [B,T,T] row-stochastic weights.
    Tensor apply(Graph& g, const Tensor& x, std::vector<double>* attention_out = nullptr) const;
};

// Standard LSTM cell (input/forget/cell/output gate order), orthogonal
// recurrent init, forget-gate bias 1.
struct LstmLayer {
    Tensor wx, wh, b;
    int units = 0;
    LstmLayer() = default;
    LstmLayer(int in, int units, Rng& rng, const std::string& name,
              std::vector<ad::NamedParam>& reg);
    // [B,T,in] -> [B,T,units] (return_sequence) or last hidden [B,units]
    Tensor apply(Graph& g, const Tensor& x, bool return_sequence) const;
};

struct LayerNormParams {
    Tensor gamma, beta;
    LayerNormParams() = default;
    LayerNormParams(int d, const std::string& name, std::vector<ad::NamedParam>& reg);
};

// Post-norm transformer encoder layer: multi-head self-attention, residual +
// layer norm, position-wise feed-forward, residual + layer norm.
struct EncoderLayer {
    Dense wq, wk, wv, wo;
    LayerNormParams ln1, ln2;
    Dense ff1, ff2;
    int heads = 0;
    int dim = 0;
    EncoderLayer() = default;
    EncoderLayer(int embed, int n_heads, int ff, Rng& rng, const std::string& name,
                 std::vector<ad::NamedParam>& reg);
    Tensor self_attention(Graph& g, const Tensor& x) const;
    Tensor apply(Graph& g, const Tensor& x, double drop_rate, bool training, Rng* drop_rng) const;
};

Tensor maybe_dropout(Graph& g, const Tensor& x, double rate, bool training, Rng* rng);

// Sinusoidal positional encoding, [T*E] row-major.
std::vector<double> sinusoidal_encoding(int t_len, int embed);

// ---------------------------------------------------------------------------
// the network
// ---------------------------------------------------------------------------

// Probabilities per predictive pathway, each [B,1]; presence depends on the
// variant.
struct ModelOutputs {
    std::optional<Tensor> p_lstm;
    std::optional<Tensor> p_transformer;
    std::optional<Tensor> p_fused;

    std::vector<Tensor> heads() const;
    std::vector<std::vector<double>> head_probs() const;  // values per head
};

class Haelt {
public:
    Haelt(HaeltConfig cfg, Rng init_rng);

    // x: [B, seq_len, n_features]. Dropout is active only when training and a
    // dropout rng is supplied.
    ModelOutputs forward(Graph& g, const Tensor& x, bool training = false,
                         Rng* dropout_rng = nullptr,
                         std::vector<double>* attention_out = nullptr) const;

    std::vector<ad::NamedParam>& params() { return params_; }
    const std::vector<ad::NamedParam>& params() const { return params_; }
    int64_t param_count() const;
    void zero_grads();

    const HaeltConfig& config() const { return cfg_; }

    bool has_cnn() const;
    bool has_attention() const;
    bool has_lstm() const;
    bool has_transformer() const;
    bool has_fusion() const;
    bool has_branch_heads() const;
    // Head ids in canonical order, restricted to those the variant wires.
    std::vector<std::string> member_names() const;
    bool ensemble_active() const;

    std::vector<std::vector<double>> snapshot_weights() const;
    void restore_weights(const std::vector<std::vector<double>>& snap);

    nlohmann::json checkpoint() const;
    void load_checkpoint(const nlohmann::json& j);

private:
    Tensor branch_head(Graph& g, const Tensor& x, const Dense& h1, const Dense& h2) const;
    Tensor positional(int batch) const;

    HaeltConfig cfg_;
    std::vector<ad::NamedParam> params_;

    std::vector<ResnetBlock> resnet_;
    std::optional<TemporalAttention> attention_;
    std::vector<LstmLayer> lstm_;
    std::optional<Dense> t_in_proj_;
    std::vector<EncoderLayer> encoders_;
    std::vector<double> pos_encoding_;

    std::optional<Dense> lstm_head1_, lstm_head2_;
    std::optional<Dense> tr_head1_, tr_head2_;
    std::optional<Dense> cnn_head1_, cnn_head2_;
    std::vector<Dense> fusion_;
};

}  // namespace haelt::model
