#include "cora/fixture.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "cora/checkpoint.hpp"
#include "cora/rng.hpp"

namespace cora {
namespace {

constexpr std::uint64_t kBaseInitStream = 10;
constexpr std::uint64_t kPretrainStream = 50;
constexpr std::uint64_t kMemberStream = 100;

FitConfig member_fit_config(const FixtureConfig& cfg, const TaskSpec& task,
                            std::uint64_t stream) {
    FitConfig fc;
    fc.task = task;
    fc.steps = cfg.fine_tune_steps;
    fc.batch_size = cfg.batch_size;
    fc.eval_every = cfg.eval_every;
    fc.eval_samples = cfg.eval_samples;
    fc.optimizer = cfg.optimizer;
    fc.clip_norm = cfg.clip_norm;
    fc.seed = mix_seed(cfg.seed, stream);
    return fc;
}

void check_fixture_config(const FixtureConfig& cfg) {
    if (cfg.pool.empty()) throw std::invalid_argument("fixture: pool must not be empty");
    if (cfg.members == 0) throw std::invalid_argument("fixture: members must be positive");
    if (cfg.pretrain_steps == 0 || cfg.fine_tune_steps == 0)
        throw std::invalid_argument("fixture: step counts must be positive");
    for (TaskKind kind : cfg.pool) validate_task_spec(pool_task_spec(cfg, kind));
    validate_task_spec(pool_task_spec(cfg, cfg.source_task));
}

std::string member_label(const FixtureConfig& cfg, std::size_t index) {
    return to_string(cfg.pool[index % cfg.pool.size()]) + "#" + std::to_string(index);
}

}  // namespace

TaskSpec pool_task_spec(const FixtureConfig& cfg, TaskKind kind) {
    TaskSpec spec;
    spec.kind = kind;
    spec.vocab_size = cfg.dims.vocab_size;
    spec.input_len = kind == TaskKind::modular_add ? 2 : cfg.input_len;
    return spec;
}

ToyTransformer make_pretrained_base(const FixtureConfig& cfg) {
    check_fixture_config(cfg);
    ToyTransformer base = make_base_model(cfg.dims, mix_seed(cfg.seed, kBaseInitStream));
    FitConfig fc = member_fit_config(cfg, pool_task_spec(cfg, cfg.source_task), kPretrainStream);
    fc.steps = cfg.pretrain_steps;
    fit(base, full_model_mask(), fc);
    return base;
}

std::string fixture_cache_key(const FixtureConfig& cfg) {
    std::ostringstream os;
    os << "v1|" << cfg.dims.vocab_size << "," << cfg.dims.d_model << "," << cfg.dims.d_k << ","
       << cfg.dims.d_ff << "," << cfg.dims.seq_len << "|" << to_string(cfg.source_task) << "|";
    for (TaskKind kind : cfg.pool) os << to_string(kind) << ",";
    os << "|" << cfg.input_len << "|" << cfg.members << "|" << cfg.pretrain_steps << "|"
       << cfg.fine_tune_steps << "|" << cfg.batch_size << "|" << cfg.eval_every << "|"
       << cfg.eval_samples << "|" << cfg.optimizer.kind << "," << cfg.optimizer.lr << ","
       << cfg.optimizer.beta1 << "," << cfg.optimizer.beta2 << "," << cfg.optimizer.eps << "|"
       << cfg.clip_norm << "|" << cfg.seed;
    const std::string canon = os.str();

    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream hex;
    hex << std::hex;
    hex.width(16);
    hex.fill('0');
    hex << h;
    return hex.str();
}

EnsembleFixture build_ensemble_fixture(const FixtureConfig& cfg, const std::string& cache_dir) {
    check_fixture_config(cfg);

    namespace fs = std::filesystem;
    const std::string key = fixture_cache_key(cfg);
    const bool caching = !cache_dir.empty();
    std::vector<std::string> paths;
    if (caching) {
        fs::create_directories(cache_dir);
        paths.push_back((fs::path(cache_dir) / ("base_" + key + ".ckpt")).string());
        for (std::size_t i = 0; i < cfg.members; ++i)
            paths.push_back(
                (fs::path(cache_dir) / ("member_" + std::to_string(i) + "_" + key + ".ckpt"))
                    .string());
    }

    EnsembleFixture fx;
    bool cache_hit = caching;
    if (caching)
        for (const std::string& p : paths)
            if (!fs::exists(p)) cache_hit = false;

    if (cache_hit) {
        fx.base = model_from_checkpoint(load_checkpoint(paths[0]));
        for (std::size_t i = 0; i < cfg.members; ++i)
            fx.member_models.push_back(model_from_checkpoint(load_checkpoint(paths[i + 1])));
    } else {
        fx.base = make_pretrained_base(cfg);
        for (std::size_t i = 0; i < cfg.members; ++i) {
            ToyTransformer member = fx.base;
            const TaskSpec task = pool_task_spec(cfg, cfg.pool[i % cfg.pool.size()]);
            fit(member, full_model_mask(), member_fit_config(cfg, task, kMemberStream + i));
            fx.member_models.push_back(std::move(member));
        }
        if (caching) {
            save_checkpoint(paths[0], model_to_checkpoint(fx.base, "base"));
            for (std::size_t i = 0; i < cfg.members; ++i)
                save_checkpoint(paths[i + 1],
                                model_to_checkpoint(fx.member_models[i], member_label(cfg, i)));
        }
    }

    for (std::size_t i = 0; i < cfg.members; ++i) {
        fx.ensemble.members.push_back(fx.member_models[i].attn);
        fx.ensemble.source_labels.push_back(member_label(cfg, i));
    }
    validate_ensemble(fx.ensemble);
    return fx;
}

std::string resolve_cache_dir(const std::string& flag_value, const std::string& fallback) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CORA_CACHE_DIR")) return env;
    return fallback;
}

}  // namespace cora
