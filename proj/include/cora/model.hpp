#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cora/adapter.hpp"
#include "cora/extraction.hpp"
#include "cora/matrix.hpp"

namespace cora {

struct ModelDims {
    std::size_t vocab_size = 0;
    std::size_t d_model = 0;
    std::size_t d_k = 0;
    std::size_t d_ff = 0;
    std::size_t seq_len = 0;  // maximum sequence length accepted by forward

    bool operator==(const ModelDims&) const = default;
};

// Single-head, single-block causal transformer: embedding, softmax attention
// over the stacked Q/K/V weights (optionally adapted), a tanh feed-forward
// layer, and an output projection. No layer norm, dropout, or biases.
struct ToyTransformer {
    ModelDims dims;
    Matrix embed;                    // vocab x d_model
    StackedAttentionWeights attn;    // base W0, (3*d_model) x d_k
    std::optional<Adapter> adapter;  // low-rank update on attn, if attached
    Matrix ffn_w1;                   // d_k x d_ff
    Matrix ffn_w2;                   // d_ff x d_model
    Matrix out_proj;                 // d_model x vocab
};

// Base weights drawn Normal(0, 1/sqrt(d_model)); no adapter attached.
ToyTransformer make_base_model(const ModelDims& dims, std::uint64_t seed);

// Effective stacked attention weights (base plus adapter update, if any).
Matrix model_attention_weights(const ToyTransformer& model);

struct QkvBlocks {
    Matrix w_q, w_k, w_v;
};

// Three equal vertical slices in Q, K, V order.
QkvBlocks split_heads(const Matrix& w);

// Everything backward needs, captured during forward.
struct ForwardCache {
    ModelDims dims;
    std::vector<int> tokens;
    Matrix x;       // L x d_model token embeddings
    Matrix w_q, w_k, w_v;
    Matrix q, k, v;
    Matrix attn_p;  // L x L causal softmax weights
    Matrix h;       // L x d_k attention output
    Matrix a1;      // L x d_ff tanh activations
    Matrix z2;      // L x d_model
    Matrix probs;   // L x vocab
};

struct ForwardResult {
    Matrix probs;  // per-position probability rows
    ForwardCache cache;
};

ForwardResult forward(const ToyTransformer& model, const std::vector<int>& tokens);

// Gradients per trainable block; absent entries mark frozen blocks.
struct GradientSet {
    std::optional<Matrix> embed;
    std::optional<Matrix> attn_w0;
    std::optional<Matrix> adapter_a;
    std::optional<Matrix> adapter_b;
    std::optional<Matrix> ffn_w1;
    std::optional<Matrix> ffn_w2;
    std::optional<Matrix> out_proj;
};

struct TrainableMask {
    bool embed = false;
    bool attn_base = false;
    bool ffn = false;
    bool out_proj = false;
    bool adapter_a = true;
    bool adapter_b = true;  // ignored when the adapter is frozen or absent
};

// Full-model mask used when no adapter is attached (base fine-tuning).
TrainableMask full_model_mask();

struct BackwardResult {
    double loss = 0.0;
    GradientSet grads;
};

// Mean token cross-entropy over positions with target >= 0; targets of -1
// are ignored. The cache must come from a forward on the same model.
BackwardResult backward(const ToyTransformer& model, const ForwardCache& cache,
                        const std::vector<int>& targets, const TrainableMask& mask);

// Loss/accuracy of one (tokens, targets) pair without gradients.
struct EvalStats {
    double loss_sum = 0.0;       // summed over counted positions
    std::size_t positions = 0;   // counted positions
    std::size_t correct = 0;     // argmax matches target
};

EvalStats evaluate_sequence(const ToyTransformer& model, const std::vector<int>& tokens,
                            const std::vector<int>& targets);

}  // namespace cora
