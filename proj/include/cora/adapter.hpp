#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cora/extraction.hpp"
#include "cora/matrix.hpp"

namespace cora {

enum class InitMode {
    lora_zero_b,        // B = 0, the standard low-rank adapter start
    cora_common_basis,  // B = extracted common basis rows
    ablate_zeros,       // B = 0, kept frozen
    ablate_ones,        // B = all ones
    ablate_random,      // B ~ Normal(0, 1/sqrt(d_k))
};

std::string to_string(InitMode m);
InitMode init_mode_from_string(const std::string& s);

// Low-rank adapter (A, B) over a stacked attention block:
// effective weight = W0 + scale * A * B, A is (3*d_model) x r, B is r x d_k.
struct Adapter {
    Matrix a;
    Matrix b;
    std::size_t rank = 0;
    double scale = 1.0;
    bool b_frozen = false;
    InitMode init_mode = InitMode::lora_zero_b;
    std::uint64_t seed = 0;
};

struct AdapterShape {
    std::size_t stacked_rows = 0;  // 3 * d_model
    std::size_t d_k = 0;
};

// A is always Normal(0, 1/sqrt(r)) from `seed`; B per mode. `basis` holds
// the extracted basis rows (r x d_k), required exactly for
// cora_common_basis.
Adapter init_adapter(InitMode mode, AdapterShape shape, std::size_t r, std::uint64_t seed,
                     const std::optional<Matrix>& basis = std::nullopt, double scale = 1.0,
                     bool b_frozen = false);

struct AdaptedWeights {
    StackedAttentionWeights base;
    Adapter adapter;
};

Matrix effective_weight(const AdaptedWeights& aw);

// Folds the low-rank update into the base weights.
StackedAttentionWeights merge_adapter(const AdaptedWeights& aw);

struct ParamCounts {
    std::size_t a_params = 0;
    std::size_t b_params = 0;
    std::size_t trainable = 0;
    std::size_t total = 0;
};

ParamCounts trainable_parameter_count(const Adapter& adapter);

// Fraction of adapter parameters saved by freezing B; 0.5 exactly when
// 3*d_model == d_k.
double frozen_b_saving_ratio(const Adapter& adapter);

}  // namespace cora
