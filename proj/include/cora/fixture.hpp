#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cora/extraction.hpp"
#include "cora/model.hpp"
#include "cora/tasks.hpp"
#include "cora/train.hpp"

namespace cora {

// Recipe for building a reusable ensemble: pretrain one base model on the
// source task, then fully fine-tune one copy per pool task.
struct FixtureConfig {
    ModelDims dims{16, 16, 32, 32, 8};
    TaskKind source_task = TaskKind::copy_offset;
    std::vector<TaskKind> pool{TaskKind::copy, TaskKind::reverse, TaskKind::modular_add,
                               TaskKind::sort_tokens, TaskKind::copy_offset};
    std::size_t input_len = 3;  // modular_add always uses its required length of 2
    std::size_t members = 5;    // pool tasks are cycled when members exceeds the pool
    std::size_t pretrain_steps = 1500;
    std::size_t fine_tune_steps = 1200;
    std::size_t batch_size = 32;
    std::size_t eval_every = 300;
    std::size_t eval_samples = 128;
    OptimizerConfig optimizer;
    double clip_norm = 1.0;
    std::uint64_t seed = 11;

    bool operator==(const FixtureConfig&) const = default;
};

struct EnsembleFixture {
    ToyTransformer base;
    std::vector<ToyTransformer> member_models;
    Ensemble ensemble;  // member attention weights, labeled by task
};

// Task spec a pool member trains on.
TaskSpec pool_task_spec(const FixtureConfig& cfg, TaskKind kind);

// Base model after pretraining on the source task (all blocks trained).
ToyTransformer make_pretrained_base(const FixtureConfig& cfg);

// Hex digest of the config; cache file names embed it so stale files are
// never reused after a config change.
std::string fixture_cache_key(const FixtureConfig& cfg);

// Builds (or loads from cache_dir, if non-empty) the base and all members.
EnsembleFixture build_ensemble_fixture(const FixtureConfig& cfg, const std::string& cache_dir);

// Cache directory resolution: explicit flag wins, then the CORA_CACHE_DIR
// environment variable, then the fallback; empty disables caching.
std::string resolve_cache_dir(const std::string& flag_value, const std::string& fallback);

}  // namespace cora
