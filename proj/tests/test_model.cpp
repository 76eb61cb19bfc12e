#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cora/adapter.hpp"
#include "cora/matrix.hpp"
#include "cora/model.hpp"
#include "cora/rng.hpp"
#include "support/grad_check.hpp"
#include "support/oracles.hpp"
#include "support/reference_model.hpp"

using namespace cora;

namespace {

const ModelDims kDims{11, 8, 6, 5, 8};

ToyTransformer small_model(std::uint64_t seed) { return make_base_model(kDims, seed); }

}  // namespace

TEST_CASE("all-zero weights produce the uniform distribution everywhere") {
    ToyTransformer model = small_model(1);
    model.embed = Matrix(11, 8);
    model.attn = StackedAttentionWeights::from_stacked(Matrix(24, 6));
    model.ffn_w1 = Matrix(6, 5);
    model.ffn_w2 = Matrix(5, 8);
    model.out_proj = Matrix(8, 11);
    const Matrix probs = forward(model, {0, 1, 2}).probs;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 11; ++j)
            CHECK(probs(i, j) == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("a zero-b adapter leaves the base forward unchanged") {
    ToyTransformer base = small_model(2);
    ToyTransformer adapted = base;
    adapted.adapter = init_adapter(InitMode::lora_zero_b, {24, 6}, 3, 9);
    const std::vector<int> tokens{5, 0, 10, 3};
    CHECK(bit_equal(forward(adapted, tokens).probs, forward(base, tokens).probs));
}

TEST_CASE("forward matches the clean-room oracle with and without an adapter") {
    const std::vector<int> tokens{3, 1, 4, 1, 5, 9};
    ToyTransformer model = small_model(3);
    CHECK(max_abs_diff(forward(model, tokens).probs,
                       oracle::reference_forward_probs(model, tokens)) <= 1e-10);

    model.adapter = init_adapter(InitMode::ablate_random, {24, 6}, 3, 4, std::nullopt, 0.8);
    CHECK(max_abs_diff(forward(model, tokens).probs,
                       oracle::reference_forward_probs(model, tokens)) <= 1e-10);
}

TEST_CASE("probability rows are non-negative and sum to one") {
    ToyTransformer model = small_model(5);
    const Matrix probs = forward(model, {0, 4, 7, 2, 10, 1, 6, 8}).probs;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            CHECK(probs(i, j) >= 0.0);
            sum += probs(i, j);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("causality: outputs at position t ignore later tokens") {
    ToyTransformer model = small_model(6);
    std::vector<int> tokens{2, 7, 1, 9, 4};
    const Matrix before = forward(model, tokens).probs;
    tokens[4] = 3;
    tokens[3] = 8;
    const Matrix after = forward(model, tokens).probs;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 11; ++j) CHECK(before(i, j) == after(i, j));
    // The perturbed positions themselves do change.
    double moved = 0.0;
    for (std::size_t j = 0; j < 11; ++j) moved += std::abs(before(3, j) - after(3, j));
    CHECK(moved > 0.0);
}

TEST_CASE("forward is deterministic and validates input") {
    ToyTransformer model = small_model(7);
    const std::vector<int> tokens{1, 2, 3};
    CHECK(bit_equal(forward(model, tokens).probs, forward(model, tokens).probs));
    CHECK_THROWS_AS(forward(model, {}), std::invalid_argument);
    CHECK_THROWS_AS(forward(model, {0, 1, 2, 3, 4, 5, 6, 7, 8}), std::invalid_argument);
    try {
        forward(model, {1, 11, 2});
        FAIL("expected a token range error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("position 1") != std::string::npos);
    }
}

TEST_CASE("split_heads slices equally and concatenation restores the input") {
    Rng rng(8);
    const Matrix w = random_normal(6, 4, rng, 1.0);
    const QkvBlocks blocks = split_heads(w);
    CHECK(blocks.w_q.rows() == 2);
    CHECK(bit_equal(blocks.w_q, row_slice(w, 0, 2)));
    CHECK(bit_equal(blocks.w_k, row_slice(w, 2, 4)));
    CHECK(bit_equal(blocks.w_v, row_slice(w, 4, 6)));
    CHECK(bit_equal(vstack({&blocks.w_q, &blocks.w_k, &blocks.w_v}), w));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const Matrix& part = i < 2 ? blocks.w_q : i < 4 ? blocks.w_k : blocks.w_v;
            CHECK(part(i % 2, j) == w(i, j));
        }
    CHECK_THROWS_AS(split_heads(random_normal(7, 4, rng, 1.0)), std::invalid_argument);
}

TEST_CASE("backward loss matches the reference cross-entropy") {
    ToyTransformer model = small_model(9);
    const std::vector<int> tokens{4, 2, 8, 0, 6};
    const std::vector<int> targets{-1, -1, 5, 1, 7};
    const ForwardResult fr = forward(model, tokens);
    const BackwardResult br = backward(model, fr.cache, targets, full_model_mask());
    CHECK(br.loss == doctest::Approx(oracle::reference_loss(model, tokens, targets)).epsilon(1e-12));
    CHECK(br.grads.embed.has_value());
    CHECK(br.grads.attn_w0.has_value());
    CHECK(!br.grads.adapter_a.has_value());
}

TEST_CASE("gradients match central differences on every block across seeds") {
    // vocab 7, d_model 6, r 2; all blocks trainable including unfrozen b.
    const ModelDims dims{7, 6, 9, 5, 8};
    const std::vector<int> tokens{3, 1, 4, 0, 5, 2};
    const std::vector<int> targets{-1, 2, 6, 0, -1, 3};
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        ToyTransformer model = make_base_model(dims, seed);
        model.adapter = init_adapter(InitMode::ablate_random, {18, 9}, 2, seed + 100);
        TrainableMask mask;
        mask.embed = true;
        mask.attn_base = true;
        mask.ffn = true;
        mask.out_proj = true;
        const auto report = oracle::check_gradients(model, mask, tokens, targets, 1e-5);
        INFO("worst block: " << report.worst_block);
        CHECK(report.max_rel_err <= 1e-4);
    }
}

TEST_CASE("adapter-only gradients also pass the finite-difference check") {
    const ModelDims dims{7, 6, 9, 5, 8};
    ToyTransformer model = make_base_model(dims, 21);
    Rng rng(22);
    model.adapter = init_adapter(InitMode::cora_common_basis, {18, 9}, 2, 23,
                                 oracle::orthonormal_rows(random_normal(2, 9, rng, 1.0)));
    const std::vector<int> tokens{0, 6, 2, 4};
    const std::vector<int> targets{1, -1, 3, 5};
    const auto report = oracle::check_gradients(model, TrainableMask{}, tokens, targets, 1e-5);
    INFO("worst block: " << report.worst_block);
    CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("near-perfect predictions give near-zero gradients") {
    // Hand-built scalar pipeline whose output logit gap is ~122 nats, so the
    // target probability is 1 within 1e-50 and the loss sits at a stationary
    // point numerically.
    const ModelDims dims{2, 1, 1, 1, 4};
    ToyTransformer model = make_base_model(dims, 31);
    model.embed = Matrix(2, 1, {1.0, 1.0});
    model.attn = StackedAttentionWeights::from_stacked(Matrix(3, 1, {0.0, 0.0, 1.0}));
    model.ffn_w1 = Matrix(1, 1, {1.0});
    model.ffn_w2 = Matrix(1, 1, {1.0});
    model.out_proj = Matrix(1, 2, {80.0, -80.0});

    const std::vector<int> tokens{0, 1, 0};
    const std::vector<int> targets{0, 0, 0};
    const ForwardResult fr = forward(model, tokens);
    CHECK(fr.probs(0, 0) >= 1.0 - 1e-9);
    const BackwardResult br = backward(model, fr.cache, targets, full_model_mask());
    CHECK(br.loss <= 1e-9);
    CHECK(max_abs(*br.grads.embed) <= 1e-9);
    CHECK(max_abs(*br.grads.attn_w0) <= 1e-9);
    CHECK(max_abs(*br.grads.ffn_w1) <= 1e-9);
    CHECK(max_abs(*br.grads.ffn_w2) <= 1e-9);
    CHECK(max_abs(*br.grads.out_proj) <= 1e-9);
}

TEST_CASE("zero frozen b kills the adapter-a gradient exactly") {
    ToyTransformer model = small_model(41);
    model.adapter = init_adapter(InitMode::ablate_zeros, {24, 6}, 3, 42, std::nullopt, 1.0, true);
    const std::vector<int> tokens{1, 5, 9};
    const std::vector<int> targets{5, 9, 1};
    const ForwardResult fr = forward(model, tokens);
    const BackwardResult br = backward(model, fr.cache, targets, TrainableMask{});
    REQUIRE(br.grads.adapter_a.has_value());
    CHECK(!br.grads.adapter_b.has_value());
    CHECK(max_abs(*br.grads.adapter_a) == 0.0);
}

TEST_CASE("frozen masks drop their gradient entries") {
    ToyTransformer model = small_model(51);
    model.adapter = init_adapter(InitMode::ablate_random, {24, 6}, 3, 52, std::nullopt, 1.0, true);
    const std::vector<int> tokens{1, 5};
    const std::vector<int> targets{5, 1};
    const ForwardResult fr = forward(model, tokens);
    const BackwardResult br = backward(model, fr.cache, targets, TrainableMask{});
    CHECK(!br.grads.embed.has_value());
    CHECK(!br.grads.attn_w0.has_value());
    CHECK(!br.grads.ffn_w1.has_value());
    CHECK(!br.grads.out_proj.has_value());
    CHECK(br.grads.adapter_a.has_value());
    CHECK(!br.grads.adapter_b.has_value());  // frozen despite mask default
}

TEST_CASE("backward validates targets") {
    ToyTransformer model = small_model(61);
    const std::vector<int> tokens{1, 2, 3};
    const ForwardResult fr = forward(model, tokens);
    CHECK_THROWS_AS(backward(model, fr.cache, {1, 2}, full_model_mask()), std::invalid_argument);
    CHECK_THROWS_AS(backward(model, fr.cache, {-1, -1, -1}, full_model_mask()),
                    std::invalid_argument);
    CHECK_THROWS_AS(backward(model, fr.cache, {1, 2, 11}, full_model_mask()),
                    std::invalid_argument);
}

TEST_CASE("evaluate_sequence counts losses and argmax hits") {
    ToyTransformer model = small_model(71);
    const std::vector<int> tokens{2, 9, 4, 7};
    const std::vector<int> targets{-1, 3, -1, 8};
    const EvalStats stats = evaluate_sequence(model, tokens, targets);
    CHECK(stats.positions == 2);
    CHECK(stats.correct <= 2);

    const Matrix probs = forward(model, tokens).probs;
    double expected = -std::log(probs(1, 3)) - std::log(probs(3, 8));
    CHECK(stats.loss_sum == doctest::Approx(expected).epsilon(1e-12));

    std::size_t hits = 0;
    for (std::size_t pos : {std::size_t{1}, std::size_t{3}}) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < 11; ++j)
            if (probs(pos, j) > probs(pos, best)) best = j;
        if (static_cast<int>(best) == targets[pos]) ++hits;
    }
    CHECK(stats.correct == hits);
}

TEST_CASE("base model drawing is seeded and shaped") {
    const ToyTransformer a = make_base_model(kDims, 123);
    const ToyTransformer b = make_base_model(kDims, 123);
    const ToyTransformer c = make_base_model(kDims, 124);
    CHECK(bit_equal(a.embed, b.embed));
    CHECK(bit_equal(a.attn.stacked(), b.attn.stacked()));
    CHECK(!bit_equal(a.embed, c.embed));
    CHECK(a.embed.rows() == 11);
    CHECK(a.attn.stacked().rows() == 24);
    CHECK(a.ffn_w1.cols() == 5);
    CHECK(a.out_proj.cols() == 11);
    CHECK(!a.adapter.has_value());
    CHECK_THROWS_AS(make_base_model({1, 4, 4, 4, 4}, 1), std::invalid_argument);
}
