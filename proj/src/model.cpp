#include "cora/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cora/rng.hpp"

namespace cora {
namespace {

void check_dims(const ModelDims& dims) {
    if (dims.vocab_size < 2) throw std::invalid_argument("model: vocab_size must be >= 2");
    if (dims.d_model == 0 || dims.d_k == 0 || dims.d_ff == 0 || dims.seq_len == 0)
        throw std::invalid_argument("model: d_model, d_k, d_ff, seq_len must be positive");
}

// Row-wise softmax over the first `limit` columns; the rest stay zero.
void masked_softmax_row(double* row, std::size_t limit) {
    double m = row[0];
    for (std::size_t j = 1; j < limit; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < limit; ++j) {
        row[j] = std::exp(row[j] - m);
        sum += row[j];
    }
    for (std::size_t j = 0; j < limit; ++j) row[j] /= sum;
}

}  // namespace

ToyTransformer make_base_model(const ModelDims& dims, std::uint64_t seed) {
    check_dims(dims);
    Rng rng(seed);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
    ToyTransformer model;
    model.dims = dims;
    model.embed = random_normal(dims.vocab_size, dims.d_model, rng, stddev);
    model.attn = StackedAttentionWeights::from_stacked(
        random_normal(3 * dims.d_model, dims.d_k, rng, stddev));
    model.ffn_w1 = random_normal(dims.d_k, dims.d_ff, rng, stddev);
    model.ffn_w2 = random_normal(dims.d_ff, dims.d_model, rng, stddev);
    model.out_proj = random_normal(dims.d_model, dims.vocab_size, rng, stddev);
    return model;
}

Matrix model_attention_weights(const ToyTransformer& model) {
    if (!model.adapter) return model.attn.stacked();
    AdaptedWeights aw{model.attn, *model.adapter};
    return effective_weight(aw);
}

QkvBlocks split_heads(const Matrix& w) {
    if (w.rows() % 3 != 0)
        throw std::invalid_argument("split_heads: row count " + std::to_string(w.rows()) +
                                    " is not divisible by 3");
    const std::size_t d = w.rows() / 3;
    return QkvBlocks{row_slice(w, 0, d), row_slice(w, d, 2 * d), row_slice(w, 2 * d, 3 * d)};
}

ForwardResult forward(const ToyTransformer& model, const std::vector<int>& tokens) {
    check_dims(model.dims);
    const std::size_t L = tokens.size();
    if (L == 0) throw std::invalid_argument("forward: empty token sequence");
    if (L > model.dims.seq_len)
        throw std::invalid_argument("forward: sequence length " + std::to_string(L) +
                                    " exceeds seq_len " + std::to_string(model.dims.seq_len));
    for (std::size_t i = 0; i < L; ++i) {
        if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= model.dims.vocab_size)
            throw std::invalid_argument("forward: token " + std::to_string(tokens[i]) +
                                        " at position " + std::to_string(i) +
                                        " outside vocab of size " +
                                        std::to_string(model.dims.vocab_size));
    }
    if (model.embed.rows() != model.dims.vocab_size || model.embed.cols() != model.dims.d_model)
        throw std::invalid_argument("forward: embed shape " + model.embed.shape_str() +
                                    " does not match dims");

    ForwardCache cache;
    cache.dims = model.dims;
    cache.tokens = tokens;

    cache.x = Matrix(L, model.dims.d_model);
    for (std::size_t i = 0; i < L; ++i) {
        const double* src = model.embed.row_ptr(static_cast<std::size_t>(tokens[i]));
        double* dst = cache.x.row_ptr(i);
        for (std::size_t j = 0; j < model.dims.d_model; ++j) dst[j] = src[j];
    }

    const Matrix w_eff = model_attention_weights(model);
    QkvBlocks qkv = split_heads(w_eff);
    cache.w_q = std::move(qkv.w_q);
    cache.w_k = std::move(qkv.w_k);
    cache.w_v = std::move(qkv.w_v);

    cache.q = matmul(cache.x, cache.w_q);
    cache.k = matmul(cache.x, cache.w_k);
    cache.v = matmul(cache.x, cache.w_v);

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(model.dims.d_k));
    cache.attn_p = Matrix(L, L);
    for (std::size_t i = 0; i < L; ++i) {
        double* row = cache.attn_p.row_ptr(i);
        const double* qi = cache.q.row_ptr(i);
        for (std::size_t j = 0; j <= i; ++j) {
            const double* kj = cache.k.row_ptr(j);
            double dot = 0.0;
            for (std::size_t t = 0; t < model.dims.d_k; ++t) dot += qi[t] * kj[t];
            row[j] = dot * inv_sqrt_dk;
        }
        masked_softmax_row(row, i + 1);
    }

    cache.h = matmul(cache.attn_p, cache.v);

    Matrix z1 = matmul(cache.h, model.ffn_w1);
    cache.a1 = Matrix(L, model.dims.d_ff);
    for (std::size_t i = 0; i < z1.rows() * z1.cols(); ++i)
        cache.a1.data()[i] = std::tanh(z1.data()[i]);

    cache.z2 = matmul(cache.a1, model.ffn_w2);
    cache.probs = matmul(cache.z2, model.out_proj);
    for (std::size_t i = 0; i < L; ++i)
        masked_softmax_row(cache.probs.row_ptr(i), model.dims.vocab_size);

    ForwardResult result;
    result.probs = cache.probs;
    result.cache = std::move(cache);
    return result;
}

TrainableMask full_model_mask() {
    TrainableMask mask;
    mask.embed = true;
    mask.attn_base = true;
    mask.ffn = true;
    mask.out_proj = true;
    mask.adapter_a = false;
    mask.adapter_b = false;
    return mask;
}

BackwardResult backward(const ToyTransformer& model, const ForwardCache& cache,
                        const std::vector<int>& targets, const TrainableMask& mask) {
    if (!(cache.dims == model.dims))
        throw std::invalid_argument("backward: cache dims do not match model dims");
    const std::size_t L = cache.tokens.size();
    if (targets.size() != L)
        throw std::invalid_argument("backward: targets length " + std::to_string(targets.size()) +
                                    " does not match sequence length " + std::to_string(L));

    std::size_t counted = 0;
    for (int t : targets) {
        if (t >= 0) {
            if (static_cast<std::size_t>(t) >= model.dims.vocab_size)
                throw std::invalid_argument("backward: target " + std::to_string(t) +
                                            " outside vocab of size " +
                                            std::to_string(model.dims.vocab_size));
            ++counted;
        } else if (t != -1) {
            throw std::invalid_argument("backward: negative target " + std::to_string(t) +
                                        " (only -1 marks an ignored position)");
        }
    }
    if (counted == 0)
        throw std::invalid_argument("backward: every target is the ignore index -1");

    const double inv_count = 1.0 / static_cast<double>(counted);
    BackwardResult result;

    // dL/dlogits = (probs - onehot(target)) / counted, zero on ignored rows.
    Matrix dlogits(L, model.dims.vocab_size);
    for (std::size_t i = 0; i < L; ++i) {
        if (targets[i] < 0) continue;
        const double* p = cache.probs.row_ptr(i);
        double* g = dlogits.row_ptr(i);
        const std::size_t t = static_cast<std::size_t>(targets[i]);
        result.loss -= std::log(std::max(p[t], 1e-300)) * inv_count;
        for (std::size_t j = 0; j < model.dims.vocab_size; ++j) g[j] = p[j] * inv_count;
        g[t] -= inv_count;
    }

    const bool adapter_a_on = mask.adapter_a && model.adapter.has_value();
    const bool adapter_b_on =
        mask.adapter_b && model.adapter.has_value() && !model.adapter->b_frozen;
    const bool need_dw = mask.attn_base || adapter_a_on || adapter_b_on;
    const bool need_attn = need_dw || mask.embed;
    const bool need_dz1 = mask.ffn || need_attn;

    if (mask.out_proj) result.grads.out_proj = matmul(transpose(cache.z2), dlogits);
    if (!need_dz1) return result;

    Matrix dz2 = matmul(dlogits, transpose(model.out_proj));
    if (mask.ffn) result.grads.ffn_w2 = matmul(transpose(cache.a1), dz2);

    // dZ1 = dA1 * (1 - tanh^2), reusing the dA1 buffer.
    Matrix dz1 = matmul(dz2, transpose(model.ffn_w2));
    for (std::size_t i = 0; i < dz1.rows() * dz1.cols(); ++i) {
        const double a = cache.a1.data()[i];
        dz1.data()[i] *= 1.0 - a * a;
    }
    if (mask.ffn) result.grads.ffn_w1 = matmul(transpose(cache.h), dz1);
    if (!need_attn) return result;

    Matrix dh = matmul(dz1, transpose(model.ffn_w1));
    Matrix dp = matmul(dh, transpose(cache.v));
    Matrix dv = matmul(transpose(cache.attn_p), dh);

    // Causal softmax backward: ds_ij = p_ij * (dp_ij - sum_l dp_il p_il), j <= i.
    Matrix ds(L, L);
    for (std::size_t i = 0; i < L; ++i) {
        const double* p = cache.attn_p.row_ptr(i);
        const double* dpi = dp.row_ptr(i);
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) dot += dpi[j] * p[j];
        double* out = ds.row_ptr(i);
        for (std::size_t j = 0; j <= i; ++j) out[j] = p[j] * (dpi[j] - dot);
    }

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(model.dims.d_k));
    Matrix dq = scale(matmul(ds, cache.k), inv_sqrt_dk);
    Matrix dk = scale(matmul(transpose(ds), cache.q), inv_sqrt_dk);

    if (need_dw) {
        Matrix xt = transpose(cache.x);
        std::vector<const Matrix*> parts;
        Matrix dwq = matmul(xt, dq);
        Matrix dwk = matmul(xt, dk);
        Matrix dwv = matmul(xt, dv);
        parts = {&dwq, &dwk, &dwv};
        Matrix dw = vstack(parts);
        if (mask.attn_base) result.grads.attn_w0 = dw;
        if (adapter_a_on)
            result.grads.adapter_a =
                scale(matmul(dw, transpose(model.adapter->b)), model.adapter->scale);
        if (adapter_b_on)
            result.grads.adapter_b =
                scale(matmul(transpose(model.adapter->a), dw), model.adapter->scale);
    }

    if (mask.embed) {
        Matrix dx = matmul(dq, transpose(cache.w_q));
        add_in_place(dx, matmul(dk, transpose(cache.w_k)));
        add_in_place(dx, matmul(dv, transpose(cache.w_v)));
        Matrix dembed(model.dims.vocab_size, model.dims.d_model);
        for (std::size_t i = 0; i < L; ++i) {
            double* dst = dembed.row_ptr(static_cast<std::size_t>(cache.tokens[i]));
            const double* src = dx.row_ptr(i);
            for (std::size_t j = 0; j < model.dims.d_model; ++j) dst[j] += src[j];
        }
        result.grads.embed = std::move(dembed);
    }

    return result;
}

EvalStats evaluate_sequence(const ToyTransformer& model, const std::vector<int>& tokens,
                            const std::vector<int>& targets) {
    if (targets.size() != tokens.size())
        throw std::invalid_argument("evaluate_sequence: targets length does not match tokens");
    ForwardResult fr = forward(model, tokens);
    EvalStats stats;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (targets[i] < 0) continue;
        const double* p = fr.probs.row_ptr(i);
        const std::size_t t = static_cast<std::size_t>(targets[i]);
        if (t >= model.dims.vocab_size)
            throw std::invalid_argument("evaluate_sequence: target outside vocab");
        stats.loss_sum -= std::log(std::max(p[t], 1e-300));
        ++stats.positions;
        std::size_t best = 0;
        for (std::size_t j = 1; j < model.dims.vocab_size; ++j)
            if (p[j] > p[best]) best = j;
        if (best == t) ++stats.correct;
    }
    return stats;
}

}  // namespace cora
