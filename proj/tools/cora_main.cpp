#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cora/checkpoint.hpp"
#include "cora/config.hpp"
#include "cora/extraction.hpp"
#include "cora/fixture.hpp"
#include "cora/io.hpp"
#include "cora/rng.hpp"
#include "cora/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cora;

struct CommonArgs {
    std::string config_path;
    std::string cache_dir_flag;
    std::string out_dir = "out";
};

ExperimentConfig load_cfg(const CommonArgs& common) {
    if (common.config_path.empty()) return default_experiment_config();
    return load_config_file(common.config_path);
}

std::string cache_dir_of(const CommonArgs& common) {
    return resolve_cache_dir(common.cache_dir_flag, ".cora_cache");
}

void ensure_out_dir(const CommonArgs& common) { fs::create_directories(common.out_dir); }

std::string out_path(const CommonArgs& common, const std::string& name) {
    return (fs::path(common.out_dir) / name).string();
}

void add_common(CLI::App* sub, CommonArgs& common) {
    sub->add_option("--config", common.config_path, "JSON config file (defaults when omitted)");
    sub->add_option("--cache-dir", common.cache_dir_flag,
                    "fixture cache directory (else $CORA_CACHE_DIR, else .cora_cache)");
    sub->add_option("--out", common.out_dir, "output directory")->capture_default_str();
}

Matrix merged_from_fixture(const EnsembleFixture& fx) { return merge_ensemble(fx.ensemble); }

int cmd_fixture(const CommonArgs& common) {
    ExperimentConfig cfg = load_cfg(common);
    EnsembleFixture fx = build_ensemble_fixture(cfg.fixture, cache_dir_of(common));
    std::cout << "fixture " << fixture_cache_key(cfg.fixture) << " ready: base + "
              << fx.member_models.size() << " members\n";
    for (const std::string& label : fx.ensemble.source_labels)
        std::cout << "  member " << label << "\n";
    return 0;
}

int cmd_extract(const CommonArgs& common, const std::optional<std::string>& method_flag,
                const std::optional<std::size_t>& rank_flag) {
    ExperimentConfig cfg = load_cfg(common);
    if (method_flag) cfg.extraction.method = basis_method_from_string(*method_flag);
    if (rank_flag) cfg.extraction.rank = *rank_flag;

    EnsembleFixture fx = build_ensemble_fixture(cfg.fixture, cache_dir_of(common));
    const Matrix merged = merged_from_fixture(fx);
    const CommonBasis basis = cfg.extraction.method == BasisMethod::svd
                                  ? extract_common_basis_svd(merged, cfg.extraction.rank)
                                  : extract_common_basis_pca(merged, cfg.extraction.rank);

    ensure_out_dir(common);
    const std::string name = "basis_" + to_string(basis.method) + "_r" +
                             std::to_string(basis.rank) + ".ckpt";
    save_checkpoint(out_path(common, name), basis_to_checkpoint(basis));
    std::cout << "basis method=" << to_string(basis.method) << " rank=" << basis.rank
              << " variance_captured=" << format_double(basis.variance_captured) << "\n"
              << "wrote " << out_path(common, name) << "\n";
    return 0;
}

int cmd_variance_report(const CommonArgs& common) {
    ExperimentConfig cfg = load_cfg(common);
    EnsembleFixture fx = build_ensemble_fixture(cfg.fixture, cache_dir_of(common));
    const Matrix merged = merged_from_fixture(fx);

    ensure_out_dir(common);
    const auto rows = variance_report(merged, cfg.extraction.thresholds);
    const auto curves = variance_curves(merged);
    write_text_atomic(out_path(common, "variance_report.csv"), variance_report_csv(rows));
    write_text_atomic(out_path(common, "variance_curves.csv"), variance_curves_csv(curves));
    for (const auto& row : rows)
        std::cout << to_string(row.method) << " threshold=" << format_double(row.threshold)
                  << " components=" << row.count << "\n";
    std::cout << "wrote " << out_path(common, "variance_report.csv") << " and "
              << out_path(common, "variance_curves.csv") << "\n";
    return 0;
}

int cmd_train(const CommonArgs& common, const std::optional<std::string>& regime_flag,
              const std::optional<std::size_t>& rank_flag,
              const std::optional<std::string>& task_flag,
              const std::optional<std::size_t>& steps_flag,
              const std::optional<std::uint64_t>& seed_flag) {
    ExperimentConfig cfg = load_cfg(common);
    if (regime_flag) cfg.train.regime = regime_from_string(*regime_flag);
    if (rank_flag) cfg.train.rank = *rank_flag;
    if (task_flag) {
        cfg.task.kind = task_kind_from_string(*task_flag);
        if (cfg.task.kind == TaskKind::modular_add) cfg.task.input_len = 2;
        cfg.train.fit.task = cfg.task;
    }
    if (steps_flag) cfg.train.fit.steps = *steps_flag;
    if (seed_flag) cfg.train.fit.seed = *seed_flag;

    EnsembleFixture fx = build_ensemble_fixture(cfg.fixture, cache_dir_of(common));
    std::optional<Matrix> basis;
    if (regime_uses_basis(cfg.train.regime))
        basis = extract_common_basis_svd(merged_from_fixture(fx), cfg.train.rank).b;

    RunResult rr = run_training(cfg.train, fx.base, basis);

    ensure_out_dir(common);
    const std::string stem = to_string(cfg.train.regime) + "_r" + std::to_string(cfg.train.rank);
    write_text_atomic(out_path(common, "train_metrics_" + stem + ".csv"),
                      metrics_csv(rr.metrics));
    save_checkpoint(out_path(common, "model_" + stem + ".ckpt"),
                    model_to_checkpoint(rr.model, stem));

    const ParamCounts counts = trainable_parameter_count(*rr.model.adapter);
    std::cout << "regime=" << to_string(cfg.train.regime) << " rank=" << cfg.train.rank
              << " task=" << to_string(cfg.task.kind)
              << " final_eval_loss=" << format_double(rr.metrics.final_eval_loss)
              << " final_eval_accuracy=" << format_double(rr.metrics.final_eval_accuracy)
              << " trainable_params=" << rr.metrics.trainable_params
              << " adapter_total=" << counts.total
              << " b_param_fraction=" << format_double(frozen_b_saving_ratio(*rr.model.adapter))
              << "\n";
    return 0;
}

std::vector<Regime> parse_regime_list(const std::string& csv) {
    std::vector<Regime> out;
    std::string item;
    std::istringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(regime_from_string(item));
    }
    if (out.empty()) throw std::runtime_error("no regimes given");
    return out;
}

int run_cells(const CommonArgs& common, ExperimentConfig& cfg, const std::vector<Regime>& regimes,
              const std::vector<std::size_t>& ranks, const std::vector<std::uint64_t>& seeds,
              const std::string& stem) {
    EnsembleFixture fx = build_ensemble_fixture(cfg.fixture, cache_dir_of(common));
    SweepConfig sc;
    sc.regimes = regimes;
    sc.ranks = ranks;
    sc.seeds = seeds;
    sc.base = cfg.train;
    const std::vector<SweepCell> cells = rank_sweep(sc, fx.base, merged_from_fixture(fx));

    ensure_out_dir(common);
    write_text_atomic(out_path(common, stem + "_metrics.csv"), sweep_metrics_csv(cells));
    write_text_atomic(out_path(common, stem + "_summary.csv"), sweep_summary_csv(cells));
    for (const SweepCell& c : cells) {
        std::cout << to_string(c.regime) << " r=" << c.rank << " seed=" << c.seed;
        if (c.error.empty())
            std::cout << " eval_loss=" << format_double(c.metrics.final_eval_loss)
                      << " eval_acc=" << format_double(c.metrics.final_eval_accuracy)
                      << " params=" << c.metrics.trainable_params << "\n";
        else
            std::cout << " error=" << c.error << "\n";
    }
    for (Regime regime : regimes) {
        try {
            std::cout << "mean_final_eval_loss " << to_string(regime) << " "
                      << format_double(regime_mean_final_loss(cells, regime)) << "\n";
        } catch (const std::exception&) {
            std::cout << "mean_final_eval_loss " << to_string(regime) << " n/a\n";
        }
    }
    std::cout << "wrote " << out_path(common, stem + "_metrics.csv") << " and "
              << out_path(common, stem + "_summary.csv") << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& regimes_csv,
              const std::vector<std::size_t>& ranks, const std::vector<std::uint64_t>& seeds,
              const std::optional<std::string>& task_flag) {
    ExperimentConfig cfg = load_cfg(common);
    if (task_flag) {
        cfg.task.kind = task_kind_from_string(*task_flag);
        if (cfg.task.kind == TaskKind::modular_add) cfg.task.input_len = 2;
        cfg.train.fit.task = cfg.task;
    }
    return run_cells(common, cfg, parse_regime_list(regimes_csv), ranks, seeds, "sweep");
}

int cmd_ablate(const CommonArgs& common, const std::optional<std::size_t>& rank_flag,
               const std::vector<std::uint64_t>& seeds,
               const std::optional<std::string>& task_flag) {
    ExperimentConfig cfg = load_cfg(common);
    if (task_flag) {
        cfg.task.kind = task_kind_from_string(*task_flag);
        if (cfg.task.kind == TaskKind::modular_add) cfg.task.input_len = 2;
        cfg.train.fit.task = cfg.task;
    }
    const std::size_t rank = rank_flag ? *rank_flag : cfg.extraction.rank;
    return run_cells(common, cfg, all_regimes(), {rank}, seeds, "ablate");
}

int cmd_export_csv(const std::string& ckpt_path, std::string out_file) {
    if (out_file.empty()) out_file = ckpt_path + ".csv";
    const Checkpoint c = load_checkpoint(ckpt_path);
    write_text_atomic(out_file, checkpoint_csv(c));
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& model_path,
             const std::optional<std::string>& task_flag, std::size_t samples,
             const std::optional<std::uint64_t>& seed_flag) {
    ExperimentConfig cfg = load_cfg(common);
    if (task_flag) {
        cfg.task.kind = task_kind_from_string(*task_flag);
        if (cfg.task.kind == TaskKind::modular_add) cfg.task.input_len = 2;
    }
    const std::uint64_t seed = seed_flag ? *seed_flag : cfg.train.fit.seed;

    ToyTransformer model = model_from_checkpoint(load_checkpoint(model_path));
    if (model.dims.vocab_size != cfg.task.vocab_size)
        throw std::runtime_error("eval: model vocab " + std::to_string(model.dims.vocab_size) +
                                 " does not match task vocab " +
                                 std::to_string(cfg.task.vocab_size));
    const Dataset data = generate_dataset(cfg.task, samples, Split::eval, mix_seed(seed, 3));
    auto [loss, acc] = evaluate_dataset(model, data);

    nlohmann::json out{{"task", to_string(cfg.task.kind)},
                       {"samples", samples},
                       {"eval_loss", loss},
                       {"eval_accuracy", acc}};
    std::cout << out.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank adapter lab: shared-basis extraction and training regimes"};
    app.require_subcommand(1);

    CommonArgs common;
    std::optional<std::string> method_flag, regime_flag, task_flag;
    std::optional<std::size_t> rank_flag, steps_flag;
    std::optional<std::uint64_t> seed_flag;
    std::string regimes_csv = "lora,cora_fb,cora_tb";
    std::vector<std::size_t> ranks{8, 16, 32};
    std::vector<std::uint64_t> seeds{1};
    std::string model_path;
    std::string ckpt_path;
    std::string csv_out;
    std::size_t eval_samples = 512;

    CLI::App* fixture = app.add_subcommand("fixture", "build or load the cached model ensemble");
    add_common(fixture, common);

    CLI::App* extract = app.add_subcommand("extract", "extract a shared basis from the ensemble");
    add_common(extract, common);
    extract->add_option("--method", method_flag, "svd or pca");
    extract->add_option("--rank", rank_flag, "basis rank");

    CLI::App* variance =
        app.add_subcommand("variance-report", "component counts and cumulative curves");
    add_common(variance, common);

    CLI::App* train = app.add_subcommand("train", "train one adapter regime on a task");
    add_common(train, common);
    train->add_option("--regime", regime_flag,
                      "lora, cora_fb, cora_tb, ablate_zeros_frozen, ablate_ones_frozen, "
                      "ablate_random_frozen");
    train->add_option("--rank", rank_flag, "adapter rank");
    train->add_option("--task", task_flag,
                      "copy, reverse, modular_add, sort_tokens, copy_offset");
    train->add_option("--steps", steps_flag, "training steps");
    train->add_option("--seed", seed_flag, "training seed");

    CLI::App* sweep = app.add_subcommand("sweep", "train a regime x rank x seed grid");
    add_common(sweep, common);
    sweep->add_option("--regimes", regimes_csv, "comma-separated regimes")
        ->capture_default_str();
    sweep->add_option("--ranks", ranks, "ranks to sweep")->capture_default_str();
    sweep->add_option("--seeds", seeds, "seeds to sweep")->capture_default_str();
    sweep->add_option("--task", task_flag, "task override");

    CLI::App* ablate =
        app.add_subcommand("ablate", "run every regime at one rank, including frozen-B fills");
    add_common(ablate, common);
    ablate->add_option("--rank", rank_flag, "adapter rank");
    ablate->add_option("--seeds", seeds, "seeds to run")->capture_default_str();
    ablate->add_option("--task", task_flag, "task override");

    CLI::App* export_csv =
        app.add_subcommand("export-csv", "dump a checkpoint's blocks as block,row,col,value CSV");
    export_csv->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    export_csv->add_option("--out", csv_out, "output CSV path (default <checkpoint>.csv)");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a model checkpoint on a task");
    add_common(eval, common);
    eval->add_option("--model", model_path, "model checkpoint path")->required();
    eval->add_option("--task", task_flag, "task override");
    eval->add_option("--samples", eval_samples, "eval sample count")->capture_default_str();
    eval->add_option("--seed", seed_flag, "eval sampling seed");

    if (argc <= 1) {
        std::cout << app.help();
        return 1;
    }
    CLI11_PARSE(app, argc, argv);

    try {
        if (fixture->parsed()) return cmd_fixture(common);
        if (extract->parsed()) return cmd_extract(common, method_flag, rank_flag);
        if (variance->parsed()) return cmd_variance_report(common);
        if (train->parsed())
            return cmd_train(common, regime_flag, rank_flag, task_flag, steps_flag, seed_flag);
        if (sweep->parsed()) return cmd_sweep(common, regimes_csv, ranks, seeds, task_flag);
        if (ablate->parsed()) return cmd_ablate(common, rank_flag, seeds, task_flag);
        if (export_csv->parsed()) return cmd_export_csv(ckpt_path, csv_out);
        if (eval->parsed()) return cmd_eval(common, model_path, task_flag, eval_samples, seed_flag);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
