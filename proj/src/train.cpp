#include "cora/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "cora/extraction.hpp"
#include "cora/rng.hpp"

namespace cora {
namespace {

// Seed streams so that adapter init, batch draws, and eval sets never share
// random state.
constexpr std::uint64_t kAdapterStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kProbeStream = 4;

struct BlockRef {
    const char* name;
    Matrix* param;
    std::optional<Matrix> GradientSet::* grad;
};

// Trainable blocks in a fixed update order; a frozen adapter B is excluded.
std::vector<BlockRef> trainable_blocks(ToyTransformer& model, const TrainableMask& mask) {
    std::vector<BlockRef> blocks;
    if (mask.embed) blocks.push_back({"embed", &model.embed, &GradientSet::embed});
    if (mask.attn_base)
        blocks.push_back({"attn_w0", &model.attn.mutable_stacked(), &GradientSet::attn_w0});
    if (model.adapter) {
        if (mask.adapter_a)
            blocks.push_back({"adapter_a", &model.adapter->a, &GradientSet::adapter_a});
        if (mask.adapter_b && !model.adapter->b_frozen)
            blocks.push_back({"adapter_b", &model.adapter->b, &GradientSet::adapter_b});
    }
    if (mask.ffn) {
        blocks.push_back({"ffn_w1", &model.ffn_w1, &GradientSet::ffn_w1});
        blocks.push_back({"ffn_w2", &model.ffn_w2, &GradientSet::ffn_w2});
    }
    if (mask.out_proj) blocks.push_back({"out_proj", &model.out_proj, &GradientSet::out_proj});
    return blocks;
}

void accumulate(std::optional<Matrix>& into, std::optional<Matrix>&& g) {
    if (!g) return;
    if (!into)
        into = std::move(*g);
    else
        add_in_place(*into, *g);
}

void check_fit_config(const FitConfig& cfg) {
    validate_task_spec(cfg.task);
    if (cfg.batch_size == 0) throw std::invalid_argument("fit: batch_size must be positive");
    if (cfg.eval_every == 0) throw std::invalid_argument("fit: eval_every must be positive");
    if (cfg.eval_samples == 0) throw std::invalid_argument("fit: eval_samples must be positive");
    if (!(cfg.optimizer.lr > 0.0)) throw std::invalid_argument("fit: lr must be positive");
    if (cfg.clip_norm < 0.0) throw std::invalid_argument("fit: clip_norm must be >= 0");
    if (cfg.optimizer.kind != "sgd" && cfg.optimizer.kind != "adam")
        throw std::invalid_argument("fit: unknown optimizer \"" + cfg.optimizer.kind +
                                    "\" (expected sgd or adam)");
}

}  // namespace

const std::vector<Regime>& all_regimes() {
    static const std::vector<Regime> regimes{
        Regime::lora,
        Regime::cora_fb,
        Regime::cora_tb,
        Regime::ablate_zeros_frozen,
        Regime::ablate_ones_frozen,
        Regime::ablate_random_frozen,
    };
    return regimes;
}

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::lora: return "lora";
        case Regime::cora_fb: return "cora_fb";
        case Regime::cora_tb: return "cora_tb";
        case Regime::ablate_zeros_frozen: return "ablate_zeros_frozen";
        case Regime::ablate_ones_frozen: return "ablate_ones_frozen";
        case Regime::ablate_random_frozen: return "ablate_random_frozen";
    }
    throw std::logic_error("to_string: unknown Regime");
}

Regime regime_from_string(const std::string& name) {
    for (Regime regime : all_regimes())
        if (name == to_string(regime)) return regime;
    throw std::invalid_argument(
        "unknown regime \"" + name +
        "\" (expected lora, cora_fb, cora_tb, ablate_zeros_frozen, ablate_ones_frozen, or "
        "ablate_random_frozen)");
}

bool regime_freezes_b(Regime regime) {
    switch (regime) {
        case Regime::lora:
        case Regime::cora_tb:
            return false;
        case Regime::cora_fb:
        case Regime::ablate_zeros_frozen:
        case Regime::ablate_ones_frozen:
        case Regime::ablate_random_frozen:
            return true;
    }
    throw std::logic_error("regime_freezes_b: unknown Regime");
}

bool regime_uses_basis(Regime regime) {
    return regime == Regime::cora_fb || regime == Regime::cora_tb;
}

InitMode regime_init_mode(Regime regime) {
    switch (regime) {
        case Regime::lora: return InitMode::lora_zero_b;
        case Regime::cora_fb:
        case Regime::cora_tb:
            return InitMode::cora_common_basis;
        case Regime::ablate_zeros_frozen: return InitMode::ablate_zeros;
        case Regime::ablate_ones_frozen: return InitMode::ablate_ones;
        case Regime::ablate_random_frozen: return InitMode::ablate_random;
    }
    throw std::logic_error("regime_init_mode: unknown Regime");
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.kind != "sgd" && cfg_.kind != "adam")
        throw std::invalid_argument("optimizer: unknown kind \"" + cfg_.kind +
                                    "\" (expected sgd or adam)");
    if (!(cfg_.lr > 0.0)) throw std::invalid_argument("optimizer: lr must be positive");
}

void Optimizer::apply(const std::string& name, Matrix& param, const Matrix& grad) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols())
        throw std::invalid_argument("optimizer: gradient shape " + grad.shape_str() +
                                    " does not match parameter " + name + " " +
                                    param.shape_str());
    if (cfg_.kind == "sgd") {
        axpy_in_place(param, -cfg_.lr, grad);
        return;
    }
    BlockState& s = state_[name];
    if (s.t == 0) {
        s.m = Matrix(grad.rows(), grad.cols());
        s.v = Matrix(grad.rows(), grad.cols());
    }
    ++s.t;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    const std::size_t n = grad.rows() * grad.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad.data()[i];
        double& m = s.m.data()[i];
        double& v = s.v.data()[i];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double m_hat = m / corr1;
        const double v_hat = v / corr2;
        param.data()[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
}

std::pair<double, double> evaluate_dataset(const ToyTransformer& model, const Dataset& data) {
    if (data.samples.empty())
        throw std::invalid_argument("evaluate_dataset: dataset is empty");
    double loss_sum = 0.0;
    std::size_t positions = 0, correct = 0;
    for (const Sample& s : data.samples) {
        EvalStats stats = evaluate_sequence(model, s.tokens, s.targets);
        loss_sum += stats.loss_sum;
        positions += stats.positions;
        correct += stats.correct;
    }
    if (positions == 0)
        throw std::invalid_argument("evaluate_dataset: no counted positions in dataset");
    const double denom = static_cast<double>(positions);
    return {loss_sum / denom, static_cast<double>(correct) / denom};
}

RunMetrics fit(ToyTransformer& model, const TrainableMask& mask, const FitConfig& cfg) {
    check_fit_config(cfg);

    std::vector<BlockRef> blocks = trainable_blocks(model, mask);
    if (blocks.empty()) throw std::invalid_argument("fit: no trainable blocks under this mask");

    const Dataset eval_set = generate_dataset(cfg.task, cfg.eval_samples, Split::eval,
                                              mix_seed(cfg.seed, kEvalStream));
    const Dataset probe_set = generate_dataset(cfg.task, cfg.eval_samples, Split::train,
                                               mix_seed(cfg.seed, kProbeStream));
    Rng batch_rng(mix_seed(cfg.seed, kBatchStream));
    Optimizer opt(cfg.optimizer);

    RunMetrics metrics;
    metrics.trainable_params = 0;
    for (const BlockRef& b : blocks)
        metrics.trainable_params += b.param->rows() * b.param->cols();

    const auto emit_row = [&](std::size_t step) {
        auto [probe_loss, probe_acc] = evaluate_dataset(model, probe_set);
        (void)probe_acc;
        auto [eval_loss, eval_acc] = evaluate_dataset(model, eval_set);
        metrics.rows.push_back(
            MetricsRow{step, probe_loss, eval_loss, eval_acc, metrics.trainable_params});
    };

    emit_row(0);
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        GradientSet total;
        double batch_loss = 0.0;
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
            Sample s = draw_sample(cfg.task, Split::train, batch_rng);
            ForwardResult fr = forward(model, s.tokens);
            BackwardResult br = backward(model, fr.cache, s.targets, mask);
            batch_loss += br.loss;
            accumulate(total.embed, std::move(br.grads.embed));
            accumulate(total.attn_w0, std::move(br.grads.attn_w0));
            accumulate(total.adapter_a, std::move(br.grads.adapter_a));
            accumulate(total.adapter_b, std::move(br.grads.adapter_b));
            accumulate(total.ffn_w1, std::move(br.grads.ffn_w1));
            accumulate(total.ffn_w2, std::move(br.grads.ffn_w2));
            accumulate(total.out_proj, std::move(br.grads.out_proj));
        }
        batch_loss *= inv_batch;
        if (!std::isfinite(batch_loss))
            throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                     " (non-finite loss)");

        double sq_norm = 0.0;
        for (const BlockRef& b : blocks) {
            std::optional<Matrix>& g = total.*(b.grad);
            if (!g)
                throw std::logic_error(std::string("fit: missing gradient for block ") + b.name);
            scale_in_place(*g, inv_batch);
            const double fn = frobenius_norm(*g);
            sq_norm += fn * fn;
        }
        const double grad_norm = std::sqrt(sq_norm);
        if (!std::isfinite(grad_norm))
            throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                     " (non-finite gradient norm)");
        if (cfg.clip_norm > 0.0 && grad_norm > cfg.clip_norm) {
            const double shrink = cfg.clip_norm / grad_norm;
            for (const BlockRef& b : blocks) scale_in_place(*(total.*(b.grad)), shrink);
        }

        for (const BlockRef& b : blocks) opt.apply(b.name, *b.param, *(total.*(b.grad)));

        if (step % cfg.eval_every == 0 || step == cfg.steps) emit_row(step);
    }

    metrics.wall_steps = cfg.steps;
    metrics.final_eval_loss = metrics.rows.back().eval_loss;
    metrics.final_eval_accuracy = metrics.rows.back().eval_accuracy;
    metrics.best_eval_loss = metrics.rows.front().eval_loss;
    for (const MetricsRow& row : metrics.rows)
        metrics.best_eval_loss = std::min(metrics.best_eval_loss, row.eval_loss);
    return metrics;
}

RunResult run_training(const TrainConfig& cfg, const ToyTransformer& base,
                       const std::optional<Matrix>& basis) {
    if (base.adapter)
        throw std::invalid_argument("run_training: base model already carries an adapter");
    if (cfg.rank == 0) throw std::invalid_argument("run_training: rank must be positive");
    if (regime_uses_basis(cfg.regime) && !basis)
        throw std::invalid_argument("run_training: regime " + to_string(cfg.regime) +
                                    " requires an extracted basis");
    if (!regime_uses_basis(cfg.regime) && basis)
        throw std::invalid_argument("run_training: regime " + to_string(cfg.regime) +
                                    " does not take a basis");

    RunResult result;
    result.model = base;
    const AdapterShape shape{base.attn.stacked().rows(), base.attn.stacked().cols()};
    result.model.adapter = init_adapter(regime_init_mode(cfg.regime), shape, cfg.rank,
                                        mix_seed(cfg.fit.seed, kAdapterStream), basis,
                                        cfg.adapter_scale, regime_freezes_b(cfg.regime));

    TrainableMask mask;
    mask.adapter_a = true;
    mask.adapter_b = true;
    if (cfg.train_base) {
        mask.embed = true;
        mask.attn_base = true;
        mask.ffn = true;
        mask.out_proj = true;
    }
    result.metrics = fit(result.model, mask, cfg.fit);
    return result;
}

std::vector<SweepCell> rank_sweep(const SweepConfig& cfg, const ToyTransformer& base,
                                  const Matrix& merged_w0) {
    if (cfg.regimes.empty()) throw std::invalid_argument("rank_sweep: no regimes given");
    if (cfg.ranks.empty()) throw std::invalid_argument("rank_sweep: no ranks given");
    if (cfg.seeds.empty()) throw std::invalid_argument("rank_sweep: no seeds given");

    std::vector<SweepCell> cells;
    cells.reserve(cfg.regimes.size() * cfg.ranks.size() * cfg.seeds.size());
    for (Regime regime : cfg.regimes) {
        for (std::size_t rank : cfg.ranks) {
            std::optional<Matrix> basis;
            std::string basis_error;
            if (regime_uses_basis(regime)) {
                try {
                    basis = extract_common_basis_svd(merged_w0, rank).b;
                } catch (const std::exception& e) {
                    basis_error = e.what();
                }
            }
            for (std::uint64_t seed : cfg.seeds) {
                SweepCell cell;
                cell.regime = regime;
                cell.rank = rank;
                cell.seed = seed;
                if (!basis_error.empty()) {
                    cell.error = basis_error;
                    cells.push_back(std::move(cell));
                    continue;
                }
                try {
                    TrainConfig tc = cfg.base;
                    tc.regime = regime;
                    tc.rank = rank;
                    tc.fit.seed = seed;
                    RunResult rr = run_training(tc, base, basis);
                    cell.metrics = std::move(rr.metrics);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

double regime_mean_final_loss(const std::vector<SweepCell>& cells, Regime regime) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const SweepCell& c : cells) {
        if (c.regime != regime || !c.error.empty()) continue;
        sum += c.metrics.final_eval_loss;
        ++n;
    }
    if (n == 0)
        throw std::invalid_argument("regime_mean_final_loss: no successful cells for regime " +
                                    to_string(regime));
    return sum / static_cast<double>(n);
}

}  // namespace cora
