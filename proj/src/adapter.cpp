#include "cora/adapter.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cora/rng.hpp"

namespace cora {

std::string to_string(InitMode m) {
    switch (m) {
        case InitMode::lora_zero_b: return "lora_zero_b";
        case InitMode::cora_common_basis: return "cora_common_basis";
        case InitMode::ablate_zeros: return "ablate_zeros";
        case InitMode::ablate_ones: return "ablate_ones";
        case InitMode::ablate_random: return "ablate_random";
    }
    throw std::logic_error("to_string(InitMode): unreachable");
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "lora_zero_b") return InitMode::lora_zero_b;
    if (s == "cora_common_basis") return InitMode::cora_common_basis;
    if (s == "ablate_zeros") return InitMode::ablate_zeros;
    if (s == "ablate_ones") return InitMode::ablate_ones;
    if (s == "ablate_random") return InitMode::ablate_random;
    throw std::invalid_argument("unknown adapter init mode '" + s + "'");
}

Adapter init_adapter(InitMode mode, AdapterShape shape, std::size_t r, std::uint64_t seed,
                     const std::optional<Matrix>& basis, double scale, bool b_frozen) {
    if (shape.stacked_rows == 0 || shape.d_k == 0 || r == 0) {
        throw std::invalid_argument("init_adapter: shape and rank must be >= 1");
    }
    if (scale < 0.0) {
        throw std::invalid_argument("init_adapter: scale must be >= 0");
    }
    if (mode == InitMode::cora_common_basis) {
        if (!basis.has_value()) {
            throw std::invalid_argument("init_adapter: cora_common_basis requires basis rows");
        }
        if (basis->rows() != r || basis->cols() != shape.d_k) {
            std::ostringstream os;
            os << "init_adapter: basis shape " << basis->shape_str() << " does not match rank "
               << r << " x d_k " << shape.d_k;
            throw std::invalid_argument(os.str());
        }
    } else if (basis.has_value()) {
        throw std::invalid_argument("init_adapter: basis given but mode is " + to_string(mode));
    }

    Adapter ad;
    ad.rank = r;
    ad.scale = scale;
    ad.b_frozen = b_frozen;
    ad.init_mode = mode;
    ad.seed = seed;

    Rng rng(seed);
    ad.a = random_normal(shape.stacked_rows, r, rng, 1.0 / std::sqrt(static_cast<double>(r)));
    switch (mode) {
        case InitMode::lora_zero_b:
        case InitMode::ablate_zeros:
            ad.b = Matrix(r, shape.d_k);
            break;
        case InitMode::cora_common_basis:
            ad.b = *basis;
            break;
        case InitMode::ablate_ones:
            ad.b = Matrix(r, shape.d_k);
            for (double& v : ad.b.data()) {
                v = 1.0;
            }
            break;
        case InitMode::ablate_random:
            ad.b = random_normal(r, shape.d_k, rng, 1.0 / std::sqrt(static_cast<double>(shape.d_k)));
            break;
    }
    return ad;
}

Matrix effective_weight(const AdaptedWeights& aw) {
    const Matrix& w0 = aw.base.stacked();
    const Adapter& ad = aw.adapter;
    if (ad.a.rows() != w0.rows() || ad.b.cols() != w0.cols() || ad.a.cols() != ad.b.rows() ||
        ad.a.cols() != ad.rank) {
        throw std::invalid_argument("effective_weight: adapter (" + ad.a.shape_str() + ")*(" +
                                    ad.b.shape_str() + ") incompatible with base " + w0.shape_str());
    }
    Matrix w = w0;
    if (ad.scale != 0.0) {
        axpy_in_place(w, ad.scale, matmul(ad.a, ad.b));
    }
    return w;
}

StackedAttentionWeights merge_adapter(const AdaptedWeights& aw) {
    return StackedAttentionWeights::from_stacked(effective_weight(aw));
}

ParamCounts trainable_parameter_count(const Adapter& adapter) {
    ParamCounts c;
    c.a_params = adapter.a.rows() * adapter.a.cols();
    c.b_params = adapter.b.rows() * adapter.b.cols();
    c.total = c.a_params + c.b_params;
    c.trainable = adapter.b_frozen ? c.a_params : c.total;
    return c;
}

double frozen_b_saving_ratio(const Adapter& adapter) {
    const ParamCounts c = trainable_parameter_count(adapter);
    return static_cast<double>(c.b_params) / static_cast<double>(c.total);
}

}  // namespace cora
