// amrvit: desk-scale lab for semi-supervised automatic modulation
// recognition. One config file drives data synthesis/ingestion, ViT
// pretraining, semi-supervised fine-tuning, CNN/ResNet baselines,
// evaluation, and report emission.

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "amrvit/config.hpp"
#include "amrvit/eval.hpp"
#include "amrvit/report.hpp"
#include "amrvit/selfcheck.hpp"
#include "amrvit/train.hpp"

namespace fs = std::filesystem;
using namespace amrvit;

namespace {

void apply_thread_cap() {
    if (const char* env = std::getenv("AMRVIT_THREADS")) {
        const int n = std::max(1, std::atoi(env));
        Eigen::setNbThreads(n);
    } else {
        Eigen::setNbThreads(1);
    }
}

struct CommonArgs {
    std::string config_path;
    std::string scenario;
    double label_fraction = -1.0;
    int64_t seed = -1;
    std::string out;
    std::string checkpoint;
    int freeze_encoder = -1;  // -1 unset, 0/1 override
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "run configuration JSON");
    if (config_required) opt->required();
    cmd->add_option("--scenario", args.scenario, "recon | recon+contrastive | contrastive");
    cmd->add_option("--label-fraction", args.label_fraction, "labeled fraction of the train split (0,1]");
    cmd->add_option("--seed", args.seed, "training seed override");
    cmd->add_option("--out", args.out, "output directory override");
    cmd->add_option("--checkpoint", args.checkpoint, "checkpoint path");
    cmd->add_option("--freeze-encoder", args.freeze_encoder, "1: train only the classifier head");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_run_config(args.config_path);
    if (!args.scenario.empty()) {
        scenario_from_name(args.scenario);
        cfg.training.scenario = args.scenario;
    }
    if (args.label_fraction > 0.0) cfg.training.label_fraction = args.label_fraction;
    if (args.seed >= 0) cfg.training.seed = static_cast<uint64_t>(args.seed);
    if (!args.out.empty()) cfg.output_dir = args.out;
    if (args.freeze_encoder >= 0) cfg.training.freeze_encoder = args.freeze_encoder != 0;
    return cfg;
}

// Every run freezes its resolved configuration (including the seed) next to
// its outputs.
void freeze_config(const RunConfig& cfg, const std::string& command) {
    fs::create_directories(cfg.output_dir);
    json j = to_json(cfg);
    j["command"] = command;
    std::ofstream out(cfg.output_dir + "/resolved_config.json");
    out << j.dump(2) << "\n";
}

std::string default_dataset_path(const RunConfig& cfg) {
    return cfg.data.dataset_path.empty() ? cfg.output_dir + "/dataset.amrd" : cfg.data.dataset_path;
}

Dataset obtain_dataset(const RunConfig& cfg) {
    if (!cfg.data.dataset_path.empty()) return load_dataset(cfg.data.dataset_path);
    if (cfg.data.source == "synthetic") return build_synthetic_dataset(cfg.synth_config());
    if (cfg.data.source == "rml") {
        Rng rng(cfg.data.seed);
        return load_rml(cfg.data.rml_path, cfg.data.rml_class_map, cfg.rml_request(), rng);
    }
    throw std::runtime_error("data.source is 'file' but data.dataset_path is empty");
}

// split + stratified label masking, deterministic in the config seeds
Dataset prepare_dataset(const RunConfig& cfg, bool mask_labels) {
    Dataset ds = obtain_dataset(cfg);
    ds = split_dataset(std::move(ds), {cfg.training.split.train, cfg.training.split.val, cfg.training.split.test},
                       cfg.training.split.seed);
    if (mask_labels && cfg.training.label_fraction < 1.0)
        ds = label_mask(std::move(ds), cfg.training.label_fraction,
                        mix_seed(cfg.training.seed, 0x6d61736bULL));
    return ds;
}

json checkpoint_config(const RunConfig& cfg, const Dataset& ds) {
    json j = to_json(cfg)["model"];
    json out;
    out["vit"] = j;
    out["class_names"] = ds.class_names;
    return out;
}

void require_vit_match(const json& ck_config, const ViTConfig& want) {
    if (!ck_config.contains("vit")) throw std::runtime_error("checkpoint has no ViT configuration");
    const auto& v = ck_config.at("vit");
    const auto mismatch = [&](const char* key, auto value) {
        std::ostringstream os;
        os << "checkpoint ViT config mismatch at " << key << ": checkpoint " << v.at(key) << ", config "
           << value;
        return std::runtime_error(os.str());
    };
    if (v.at("input_len").get<int>() != want.input_len) throw mismatch("input_len", want.input_len);
    if (v.at("patch_w").get<int>() != want.patch_w) throw mismatch("patch_w", want.patch_w);
    if (v.at("embed_dim").get<int>() != want.embed_dim) throw mismatch("embed_dim", want.embed_dim);
    if (v.at("layers").get<int>() != want.layers) throw mismatch("layers", want.layers);
    if (v.at("heads").get<int>() != want.heads) throw mismatch("heads", want.heads);
    if (v.at("mlp_dim").get<int>() != want.mlp_dim) throw mismatch("mlp_dim", want.mlp_dim);
    if (v.at("proj_dim").get<int>() != want.proj_dim) throw mismatch("proj_dim", want.proj_dim);
    if (v.at("num_classes").get<int>() != want.num_classes) throw mismatch("num_classes", want.num_classes);
    if (v.at("decoder_from_tokens").get<bool>() != want.decoder_from_tokens)
        throw mismatch("decoder_from_tokens", want.decoder_from_tokens);
}

int cmd_gen_data(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "gen-data");
    const SynthConfig sc = cfg.synth_config();
    Dataset ds = build_synthetic_dataset(sc);
    const std::string path = default_dataset_path(cfg);
    save_dataset(ds, sc.snr_list_db, sc.frames_per_cell, sc.frame_len, path);
    std::cout << "wrote " << ds.size() << " frames (" << ds.class_names.size() << " classes x "
              << sc.snr_list_db.size() << " SNR levels x " << sc.frames_per_cell << ") to " << path << "\n";
    return 0;
}

int cmd_load_data(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "load-data");
    Rng rng(cfg.data.seed);
    Dataset ds = load_rml(cfg.data.rml_path, cfg.data.rml_class_map, cfg.rml_request(), rng);
    std::vector<int> levels;
    for (const auto& s : ds.samples)
        if (std::find(levels.begin(), levels.end(), s.snr_db) == levels.end()) levels.push_back(s.snr_db);
    std::sort(levels.begin(), levels.end());
    const std::string path = default_dataset_path(cfg);
    save_dataset(ds, levels, cfg.data.rml_per_cell, cfg.data.frame_len, path);
    std::cout << "loaded " << ds.size() << " frames from " << cfg.data.rml_path << " into " << path << "\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "pretrain");
    Dataset ds = prepare_dataset(cfg, false);
    const Scenario scenario = scenario_from_name(cfg.training.scenario);
    TrainConfig tc = cfg.train_config(false);
    const TrainResult res = pretrain(ds, scenario, cfg.model, tc);
    const std::string stem = cfg.output_dir + "/pretrain_" + cfg.training.scenario;
    save_checkpoint(res.params, "vit", checkpoint_config(cfg, ds), stem + ".ckpt");
    write_history_csv(res.history, stem + "_history.csv");
    std::cout << "pretrained " << cfg.training.scenario << " for " << res.history.size()
              << " epochs; final loss " << res.history.back().total << "\n"
              << "checkpoint: " << stem << ".ckpt\n";
    return 0;
}

int cmd_finetune(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "finetune");
    Dataset ds = prepare_dataset(cfg, true);
    const std::string ck_path = args.checkpoint.empty()
                                    ? cfg.output_dir + "/pretrain_" + cfg.training.scenario + ".ckpt"
                                    : args.checkpoint;
    const Checkpoint ck = load_checkpoint(ck_path);
    if (ck.model_kind != "vit") throw std::runtime_error("finetune needs a ViT checkpoint, got " + ck.model_kind);
    require_vit_match(ck.config, cfg.model);
    TrainConfig tc = cfg.train_config(true);
    const TrainResult res = finetune(ds, cfg.model, ck.params, tc);
    const std::string stem = cfg.output_dir + "/finetune";
    save_checkpoint(res.params, "vit", checkpoint_config(cfg, ds), stem + ".ckpt");
    write_history_csv(res.history, stem + "_history.csv");
    std::cout << "fine-tuned for " << res.history.size() << " epochs";
    if (res.best_epoch >= 0)
        std::cout << "; best val acc " << res.history[res.best_epoch].val_acc << " at epoch " << res.best_epoch;
    std::cout << "\ncheckpoint: " << stem << ".ckpt\n";
    return 0;
}

int cmd_train_baseline(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "train-baseline");
    Dataset ds = prepare_dataset(cfg, true);
    const ModelKind kind = model_kind_from_name(cfg.baseline.kind);
    const ModelSpec spec = cfg.model_spec(kind);
    TrainConfig tc = cfg.train_config(true);
    const TrainResult res = train_supervised(kind, ds, spec, tc);
    const std::string stem = cfg.output_dir + "/baseline_" + cfg.baseline.kind;
    save_checkpoint(res.params, cfg.baseline.kind, checkpoint_config(cfg, ds), stem + ".ckpt");
    write_history_csv(res.history, stem + "_history.csv");
    std::cout << "trained " << cfg.baseline.kind << " baseline for " << res.history.size() << " epochs\n"
              << "checkpoint: " << stem << ".ckpt\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "evaluate");
    if (args.checkpoint.empty()) throw std::runtime_error("evaluate requires --checkpoint");
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const ModelKind kind = model_kind_from_name(ck.model_kind);
    const ModelSpec spec = cfg.model_spec(kind);
    if (kind == ModelKind::vit) require_vit_match(ck.config, cfg.model);
    Dataset ds = prepare_dataset(cfg, false);
    const MetricsRecord rec = evaluate(spec, ck.params, ds, Split::test);
    write_metrics_csv(rec, ds.class_names, cfg.output_dir);
    std::cout << "test accuracy " << rec.overall << " over " << rec.total << " samples\n"
              << "metrics CSVs in " << cfg.output_dir << "\n";
    return 0;
}

int cmd_export_embeddings(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    freeze_config(cfg, "export-embeddings");
    if (args.checkpoint.empty()) throw std::runtime_error("export-embeddings requires --checkpoint");
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    if (ck.model_kind != "vit") throw std::runtime_error("embeddings need a ViT checkpoint");
    require_vit_match(ck.config, cfg.model);
    Dataset ds = prepare_dataset(cfg, false);
    const std::string path = cfg.output_dir + "/embeddings.csv";
    export_embeddings(cfg.model, ck.params, ds, Split::test, path);
    std::cout << "wrote " << ds.count(Split::test) << " embedding rows to " << path << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_dir) {
    const AggregateReport agg = aggregate_runs(runs);
    write_report(agg, out_dir);
    std::cout << "aggregated " << agg.runs.size() << " runs: overall " << agg.overall.mean << " +/- "
              << agg.overall.std << "\nreport in " << out_dir << "\n";
    return 0;
}

int cmd_selfcheck() {
    const SelfCheckResult grads = selfcheck_gradients();
    const SelfCheckResult augs = selfcheck_augmentations();
    for (const auto& line : grads.lines) std::cout << line << "\n";
    for (const auto& line : augs.lines) std::cout << line << "\n";
    const bool ok = grads.pass && augs.pass;
    std::cout << (ok ? "selfcheck PASS" : "selfcheck FAIL") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();
    CLI::App app{"desk-scale semi-supervised automatic modulation recognition lab"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::string> report_runs;
    std::string report_out = "report";

    auto* gen = app.add_subcommand("gen-data", "synthesize a balanced modulated I/Q dataset");
    add_common(gen, args);
    auto* load = app.add_subcommand("load-data", "subsample an RML2018-format container into a dataset");
    add_common(load, args);
    auto* pre = app.add_subcommand("pretrain", "unsupervised ViT pretraining for one scenario");
    add_common(pre, args);
    auto* fine = app.add_subcommand("finetune", "semi-supervised fine-tuning from a pretrain checkpoint");
    add_common(fine, args);
    auto* base = app.add_subcommand("train-baseline", "supervised CNN/ResNet/ViT reference training");
    add_common(base, args);
    auto* eval = app.add_subcommand("evaluate", "test-split metrics for a checkpoint");
    add_common(eval, args);
    auto* emb = app.add_subcommand("export-embeddings", "CSV of pooled encoder embeddings");
    add_common(emb, args);
    auto* rep = app.add_subcommand("report", "aggregate metrics CSVs over runs into mean +/- std tables");
    rep->add_option("--runs", report_runs, "run directories (evaluate outputs)")->required()->expected(-1);
    rep->add_option("--out", report_out, "report output directory");
    auto* self = app.add_subcommand("selfcheck", "gradient checks and augmentation invariants");
    (void)self;

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(args);
        if (load->parsed()) return cmd_load_data(args);
        if (pre->parsed()) return cmd_pretrain(args);
        if (fine->parsed()) return cmd_finetune(args);
        if (base->parsed()) return cmd_train_baseline(args);
        if (eval->parsed()) return cmd_evaluate(args);
        if (emb->parsed()) return cmd_export_embeddings(args);
        if (rep->parsed()) return cmd_report(report_runs, report_out);
        if (self->parsed()) return cmd_selfcheck();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
