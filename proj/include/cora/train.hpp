#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cora/adapter.hpp"
#include "cora/matrix.hpp"
#include "cora/model.hpp"
#include "cora/tasks.hpp"

namespace cora {

// Adapter regimes under comparison. The three ablations keep B frozen at a
// fixed fill instead of the extracted basis.
enum class Regime {
    lora,
    cora_fb,
    cora_tb,
    ablate_zeros_frozen,
    ablate_ones_frozen,
    ablate_random_frozen,
};

// All six, in the fixed reporting order.
const std::vector<Regime>& all_regimes();

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

// True for regimes whose B matrix never receives updates.
bool regime_freezes_b(Regime regime);

// True for regimes that substitute the extracted common basis for B.
bool regime_uses_basis(Regime regime);

InitMode regime_init_mode(Regime regime);

struct OptimizerConfig {
    std::string kind = "adam";  // "sgd" or "adam"
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const OptimizerConfig&) const = default;
};

// Per-block optimizer state; frozen blocks never appear in it.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    // In-place update of one named parameter block.
    void apply(const std::string& name, Matrix& param, const Matrix& grad);

    const OptimizerConfig& config() const { return cfg_; }
    std::size_t tracked_blocks() const { return state_.size(); }

private:
    struct BlockState {
        Matrix m, v;
        std::size_t t = 0;
    };
    OptimizerConfig cfg_;
    std::map<std::string, BlockState> state_;
};

struct FitConfig {
    TaskSpec task;
    std::size_t steps = 0;  // 0 is allowed: only the initial eval row is produced
    std::size_t batch_size = 0;
    std::size_t eval_every = 0;
    std::size_t eval_samples = 0;
    OptimizerConfig optimizer;
    double clip_norm = 0.0;  // 0 disables gradient clipping
    std::uint64_t seed = 0;

    bool operator==(const FitConfig&) const = default;
};

struct MetricsRow {
    std::size_t step = 0;
    double train_loss = 0.0;  // loss on a fixed probe set from the train split
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
    std::size_t trainable_params = 0;  // constant across a run
};

struct RunMetrics {
    std::vector<MetricsRow> rows;  // strictly increasing in step
    double best_eval_loss = 0.0;
    double final_eval_loss = 0.0;
    double final_eval_accuracy = 0.0;
    std::size_t trainable_params = 0;
    std::size_t wall_steps = 0;  // optimizer steps actually taken
};

// Average loss / accuracy of the model over a dataset.
std::pair<double, double> evaluate_dataset(const ToyTransformer& model, const Dataset& data);

// Mini-batch training loop. Metrics rows are emitted at step 0, every
// eval_every steps, and after the final step. Throws if the loss or any
// gradient stops being finite, naming the step.
RunMetrics fit(ToyTransformer& model, const TrainableMask& mask, const FitConfig& cfg);

struct TrainConfig {
    Regime regime = Regime::lora;
    std::size_t rank = 0;
    double adapter_scale = 1.0;
    bool train_base = false;  // also update embed / attn base / ffn / out_proj
    FitConfig fit;

    bool operator==(const TrainConfig&) const = default;
};

struct RunResult {
    ToyTransformer model;
    RunMetrics metrics;
};

// Attaches a fresh adapter to a copy of the base model per the regime and
// trains it. `basis` is required exactly for the regimes that use it.
RunResult run_training(const TrainConfig& cfg, const ToyTransformer& base,
                       const std::optional<Matrix>& basis);

struct SweepCell {
    Regime regime = Regime::lora;
    std::size_t rank = 0;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    std::string error;  // empty on success; failed cells keep their row
};

struct SweepConfig {
    std::vector<Regime> regimes;
    std::vector<std::size_t> ranks;
    std::vector<std::uint64_t> seeds;
    TrainConfig base;  // regime, rank, and seed are overridden per cell
};

// Runs every (regime, rank, seed) cell in a fixed order: regimes outer,
// then ranks, then seeds. `merged_w0` feeds per-rank basis extraction for
// the regimes that need it.
std::vector<SweepCell> rank_sweep(const SweepConfig& cfg, const ToyTransformer& base,
                                  const Matrix& merged_w0);

// Mean of final eval losses over a regime's successful cells.
double regime_mean_final_loss(const std::vector<SweepCell>& cells, Regime regime);

}  // namespace cora
