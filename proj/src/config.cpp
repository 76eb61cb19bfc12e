#include "cora/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cora {
namespace {

using nlohmann::json;

void check_keys(const json& j, const char* scope, std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw std::runtime_error(std::string("config: ") + scope + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed)
            if (key == a) known = true;
        if (!known)
            throw std::runtime_error("config: unknown key \"" + key + "\" in " + scope);
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_dims(const json& j, ModelDims& dims) {
    check_keys(j, "dims", {"vocab_size", "d_model", "d_k", "d_ff", "seq_len"});
    read_field(j, "vocab_size", dims.vocab_size);
    read_field(j, "d_model", dims.d_model);
    read_field(j, "d_k", dims.d_k);
    read_field(j, "d_ff", dims.d_ff);
    read_field(j, "seq_len", dims.seq_len);
}

void read_optimizer(const json& j, const char* scope, OptimizerConfig& opt) {
    check_keys(j, scope, {"kind", "lr", "beta1", "beta2", "eps"});
    read_field(j, "kind", opt.kind);
    read_field(j, "lr", opt.lr);
    read_field(j, "beta1", opt.beta1);
    read_field(j, "beta2", opt.beta2);
    read_field(j, "eps", opt.eps);
}

json optimizer_to_json(const OptimizerConfig& opt) {
    return json{{"kind", opt.kind},
                {"lr", opt.lr},
                {"beta1", opt.beta1},
                {"beta2", opt.beta2},
                {"eps", opt.eps}};
}

}  // namespace

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.task.kind = TaskKind::copy;
    cfg.task.vocab_size = cfg.dims.vocab_size;
    cfg.task.input_len = 3;

    cfg.train.regime = Regime::lora;
    cfg.train.rank = 8;
    cfg.train.adapter_scale = 1.0;
    cfg.train.train_base = false;
    cfg.train.fit.task = cfg.task;
    cfg.train.fit.steps = 2000;
    cfg.train.fit.batch_size = 32;
    cfg.train.fit.eval_every = 100;
    cfg.train.fit.eval_samples = 256;
    cfg.train.fit.optimizer = OptimizerConfig{};
    cfg.train.fit.clip_norm = 1.0;
    cfg.train.fit.seed = 7;

    cfg.fixture.dims = cfg.dims;
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.task.vocab_size != cfg.dims.vocab_size)
        throw std::runtime_error("config: task vocab_size " + std::to_string(cfg.task.vocab_size) +
                                 " does not match dims vocab_size " +
                                 std::to_string(cfg.dims.vocab_size));
    if (!(cfg.fixture.dims == cfg.dims))
        throw std::runtime_error("config: fixture dims must match top-level dims");
    if (!(cfg.train.fit.task == cfg.task))
        throw std::runtime_error("config: train task must match top-level task");
    for (double t : cfg.extraction.thresholds)
        if (!(t > 0.0 && t <= 1.0))
            throw std::runtime_error("config: extraction threshold " + std::to_string(t) +
                                     " outside (0, 1]");
    if (cfg.extraction.rank == 0)
        throw std::runtime_error("config: extraction rank must be positive");
}

ExperimentConfig parse_config(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("config: input is not valid JSON");
    check_keys(j, "top level", {"dims", "task", "train", "extraction", "fixture"});

    ExperimentConfig cfg = default_experiment_config();
    if (j.contains("dims")) read_dims(j.at("dims"), cfg.dims);

    if (j.contains("task")) {
        const json& t = j.at("task");
        check_keys(t, "task", {"kind", "input_len"});
        std::string kind = to_string(cfg.task.kind);
        read_field(t, "kind", kind);
        cfg.task.kind = task_kind_from_string(kind);
        read_field(t, "input_len", cfg.task.input_len);
    }
    cfg.task.vocab_size = cfg.dims.vocab_size;

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train",
                   {"regime", "rank", "adapter_scale", "train_base", "steps", "batch_size",
                    "eval_every", "eval_samples", "optimizer", "clip_norm", "seed"});
        std::string regime = to_string(cfg.train.regime);
        read_field(t, "regime", regime);
        cfg.train.regime = regime_from_string(regime);
        read_field(t, "rank", cfg.train.rank);
        read_field(t, "adapter_scale", cfg.train.adapter_scale);
        read_field(t, "train_base", cfg.train.train_base);
        read_field(t, "steps", cfg.train.fit.steps);
        read_field(t, "batch_size", cfg.train.fit.batch_size);
        read_field(t, "eval_every", cfg.train.fit.eval_every);
        read_field(t, "eval_samples", cfg.train.fit.eval_samples);
        if (t.contains("optimizer"))
            read_optimizer(t.at("optimizer"), "train.optimizer", cfg.train.fit.optimizer);
        read_field(t, "clip_norm", cfg.train.fit.clip_norm);
        read_field(t, "seed", cfg.train.fit.seed);
    }
    cfg.train.fit.task = cfg.task;

    if (j.contains("extraction")) {
        const json& e = j.at("extraction");
        check_keys(e, "extraction", {"method", "rank", "thresholds"});
        std::string method = to_string(cfg.extraction.method);
        read_field(e, "method", method);
        cfg.extraction.method = basis_method_from_string(method);
        read_field(e, "rank", cfg.extraction.rank);
        read_field(e, "thresholds", cfg.extraction.thresholds);
    }

    if (j.contains("fixture")) {
        const json& f = j.at("fixture");
        check_keys(f, "fixture",
                   {"source_task", "pool", "input_len", "members", "pretrain_steps",
                    "fine_tune_steps", "batch_size", "eval_every", "eval_samples", "optimizer",
                    "clip_norm", "seed"});
        std::string source = to_string(cfg.fixture.source_task);
        read_field(f, "source_task", source);
        cfg.fixture.source_task = task_kind_from_string(source);
        if (f.contains("pool")) {
            cfg.fixture.pool.clear();
            for (const auto& name : f.at("pool"))
                cfg.fixture.pool.push_back(task_kind_from_string(name.get<std::string>()));
        }
        read_field(f, "input_len", cfg.fixture.input_len);
        read_field(f, "members", cfg.fixture.members);
        read_field(f, "pretrain_steps", cfg.fixture.pretrain_steps);
        read_field(f, "fine_tune_steps", cfg.fixture.fine_tune_steps);
        read_field(f, "batch_size", cfg.fixture.batch_size);
        read_field(f, "eval_every", cfg.fixture.eval_every);
        read_field(f, "eval_samples", cfg.fixture.eval_samples);
        if (f.contains("optimizer"))
            read_optimizer(f.at("optimizer"), "fixture.optimizer", cfg.fixture.optimizer);
        read_field(f, "clip_norm", cfg.fixture.clip_norm);
        read_field(f, "seed", cfg.fixture.seed);
    }
    cfg.fixture.dims = cfg.dims;

    validate_config(cfg);
    return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    validate_config(cfg);
    json j;
    j["dims"] = json{{"vocab_size", cfg.dims.vocab_size},
                     {"d_model", cfg.dims.d_model},
                     {"d_k", cfg.dims.d_k},
                     {"d_ff", cfg.dims.d_ff},
                     {"seq_len", cfg.dims.seq_len}};
    j["task"] = json{{"kind", to_string(cfg.task.kind)}, {"input_len", cfg.task.input_len}};
    j["train"] = json{{"regime", to_string(cfg.train.regime)},
                      {"rank", cfg.train.rank},
                      {"adapter_scale", cfg.train.adapter_scale},
                      {"train_base", cfg.train.train_base},
                      {"steps", cfg.train.fit.steps},
                      {"batch_size", cfg.train.fit.batch_size},
                      {"eval_every", cfg.train.fit.eval_every},
                      {"eval_samples", cfg.train.fit.eval_samples},
                      {"optimizer", optimizer_to_json(cfg.train.fit.optimizer)},
                      {"clip_norm", cfg.train.fit.clip_norm},
                      {"seed", cfg.train.fit.seed}};
    j["extraction"] = json{{"method", to_string(cfg.extraction.method)},
                           {"rank", cfg.extraction.rank},
                           {"thresholds", cfg.extraction.thresholds}};
    json pool = json::array();
    for (TaskKind kind : cfg.fixture.pool) pool.push_back(to_string(kind));
    j["fixture"] = json{{"source_task", to_string(cfg.fixture.source_task)},
                        {"pool", pool},
                        {"input_len", cfg.fixture.input_len},
                        {"members", cfg.fixture.members},
                        {"pretrain_steps", cfg.fixture.pretrain_steps},
                        {"fine_tune_steps", cfg.fixture.fine_tune_steps},
                        {"batch_size", cfg.fixture.batch_size},
                        {"eval_every", cfg.fixture.eval_every},
                        {"eval_samples", cfg.fixture.eval_samples},
                        {"optimizer", optimizer_to_json(cfg.fixture.optimizer)},
                        {"clip_norm", cfg.fixture.clip_norm},
                        {"seed", cfg.fixture.seed}};
    return j.dump(2) + "\n";
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void save_config_file(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("config: cannot open " + path + " for writing");
    out << serialize_config(cfg);
    if (!out) throw std::runtime_error("config: write failed for " + path);
}

}  // namespace cora
