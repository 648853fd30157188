#pragma once

#include <json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/augment.hpp"
#include "amrvit/baselines.hpp"
#include "amrvit/dataset.hpp"
#include "amrvit/losses.hpp"
#include "amrvit/rml.hpp"
#include "amrvit/train.hpp"
#include "amrvit/vit.hpp"

namespace amrvit {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    if (!j.is_object()) throw std::invalid_argument("config: " + path + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw std::invalid_argument("config: unknown key " + path + "." + key);
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config: bad value type for key " + key);
    }
}

}  // namespace detail

struct DataConfig {
    std::string source = "synthetic";  // synthetic | rml | file
    std::string dataset_path;          // record file written by gen-data / load-data
    std::vector<std::string> schemes;  // empty = all 16
    std::vector<int> snr_list_db;      // empty = -2..20 dB step 2
    int frames_per_cell = 100;
    int frame_len = 512;
    int samples_per_symbol = 8;
    double max_freq_offset = 0.01;
    uint64_t seed = 1;
    std::string rml_path;
    std::string rml_class_map;
    int rml_snr_min = -2;
    int rml_snr_max = 20;
    int rml_per_cell = 0;
    std::string rml_reduce = "truncate";  // truncate | decimate
};

struct SplitConfig {
    double train = 0.7, val = 0.1, test = 0.2;
    uint64_t seed = 7;
};

struct TrainingConfig {
    std::string scenario = "recon";
    double label_fraction = 0.1;
    uint64_t seed = 1;
    std::vector<uint64_t> seeds;  // multi-seed protocols
    int pretrain_epochs = 40;
    int finetune_epochs = 40;
    int batch_size = 128;
    double base_lr = 0.001;
    int lr_step = 15;
    double lr_gamma = 0.90;
    double weight_decay = 0.0;
    double alpha = 1.0, beta = 1.0, w_recon = 1.0, w_contrast = 1.0;
    double finetune_alpha = 0.0;
    double temperature = 0.5;
    double pseudo_threshold = 0.8;
    double pseudo_weight = 0.5;
    int pseudo_warmup = 5;
    std::string pseudo_refresh = "batch";  // batch | epoch
    bool pseudo_enabled = true;
    bool freeze_encoder = false;
    bool augment = true;
    SplitConfig split;
};

struct BaselineConfig {
    std::string kind = "cnn";  // cnn | resnet | vit
    int input_len = 512;
    int cnn_fc1 = 4060;
    int resnet_fc1 = 256;
};

struct EvalConfig {
    long per_snr_cap = 0;  // 0 = use every sample per level
};

struct RunConfig {
    std::string output_dir = "out";
    DataConfig data;
    AugmentParams augmentation;
    ViTConfig model;
    TrainingConfig training;
    BaselineConfig baseline;
    EvalConfig evaluation;

    std::vector<int> snr_list() const {
        if (!data.snr_list_db.empty()) return data.snr_list_db;
        std::vector<int> out;
        for (int s = -2; s <= 20; s += 2) out.push_back(s);
        return out;
    }

    SynthConfig synth_config() const {
        SynthConfig c;
        for (const auto& name : data.schemes) c.schemes.push_back(scheme_from_name(name));
        c.snr_list_db = snr_list();
        c.frames_per_cell = data.frames_per_cell;
        c.frame_len = data.frame_len;
        c.samples_per_symbol = data.samples_per_symbol;
        c.max_freq_offset = data.max_freq_offset;
        c.seed = data.seed;
        return c;
    }

    RmlRequest rml_request() const {
        RmlRequest r;
        r.class_names = data.schemes.empty() ? std::vector<std::string>(scheme_names().begin(), scheme_names().end())
                                             : data.schemes;
        r.snr_min_db = data.rml_snr_min;
        r.snr_max_db = data.rml_snr_max;
        r.per_cell = data.rml_per_cell;
        r.reduce = data.rml_reduce == "decimate" ? RmlRequest::Reduce::decimate : RmlRequest::Reduce::truncate;
        r.target_len = data.frame_len;
        return r;
    }

    TrainConfig train_config(bool for_finetune) const {
        TrainConfig c;
        c.epochs = for_finetune ? training.finetune_epochs : training.pretrain_epochs;
        c.batch_size = training.batch_size;
        c.seed = training.seed;
        c.scenario = scenario_from_name(training.scenario);
        c.label_fraction = training.label_fraction;
        c.schedule = LrSchedule{training.base_lr, training.lr_step, training.lr_gamma};
        c.weight_decay = training.weight_decay;
        c.weights = LossWeights{training.alpha, training.beta, training.w_recon, training.w_contrast};
        c.finetune_alpha = training.finetune_alpha;
        c.temperature = training.temperature;
        c.pseudo = PseudoConfig{training.pseudo_threshold, training.pseudo_weight, training.pseudo_warmup,
                                training.pseudo_refresh == "epoch"};
        c.pseudo_enabled = training.pseudo_enabled;
        c.freeze_encoder = training.freeze_encoder;
        c.augment = training.augment;
        c.aug = augmentation;
        return c;
    }

    ModelSpec model_spec(ModelKind kind) const {
        ModelSpec spec;
        spec.kind = kind;
        spec.vit = model;
        spec.cnn = CnnConfig{baseline.input_len, baseline.cnn_fc1, {512, 256, 80}, 0.2, model.num_classes};
        spec.resnet =
            ResNetConfig{baseline.input_len, 32, 5, baseline.resnet_fc1, {128, 128}, 0.3, model.num_classes};
        return spec;
    }
};

inline RunConfig parse_run_config(const json& j) {
    detail::check_keys(j, {"output_dir", "data", "augmentation", "model", "training", "baseline", "evaluation"},
                       "$");
    RunConfig cfg;
    cfg.output_dir = detail::get_or(j, "output_dir", cfg.output_dir);

    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::check_keys(d,
                           {"source", "dataset_path", "schemes", "snr_list_db", "frames_per_cell", "frame_len",
                            "samples_per_symbol", "max_freq_offset", "seed", "rml"},
                           "data");
        auto& c = cfg.data;
        c.source = detail::get_or(d, "source", c.source);
        if (c.source != "synthetic" && c.source != "rml" && c.source != "file")
            throw std::invalid_argument("config: data.source must be synthetic, rml, or file");
        c.dataset_path = detail::get_or(d, "dataset_path", c.dataset_path);
        c.schemes = detail::get_or(d, "schemes", c.schemes);
        for (const auto& s : c.schemes) scheme_from_name(s);  // validate names
        c.snr_list_db = detail::get_or(d, "snr_list_db", c.snr_list_db);
        c.frames_per_cell = detail::get_or(d, "frames_per_cell", c.frames_per_cell);
        c.frame_len = detail::get_or(d, "frame_len", c.frame_len);
        c.samples_per_symbol = detail::get_or(d, "samples_per_symbol", c.samples_per_symbol);
        c.max_freq_offset = detail::get_or(d, "max_freq_offset", c.max_freq_offset);
        c.seed = detail::get_or(d, "seed", c.seed);
        if (d.contains("rml")) {
            const auto& r = d.at("rml");
            detail::check_keys(r, {"path", "class_map", "snr_min_db", "snr_max_db", "per_cell", "reduce"},
                               "data.rml");
            c.rml_path = detail::get_or(r, "path", c.rml_path);
            c.rml_class_map = detail::get_or(r, "class_map", c.rml_class_map);
            c.rml_snr_min = detail::get_or(r, "snr_min_db", c.rml_snr_min);
            c.rml_snr_max = detail::get_or(r, "snr_max_db", c.rml_snr_max);
            c.rml_per_cell = detail::get_or(r, "per_cell", c.rml_per_cell);
            c.rml_reduce = detail::get_or(r, "reduce", c.rml_reduce);
            if (c.rml_reduce != "truncate" && c.rml_reduce != "decimate")
                throw std::invalid_argument("config: data.rml.reduce must be truncate or decimate");
        }
    }

    if (j.contains("augmentation")) {
        const auto& a = j.at("augmentation");
        detail::check_keys(
            a, {"noise_sigma", "scale_sigma", "mw_knots", "mw_sigma", "tw_knots", "tw_sigma", "enabled_kinds"},
            "augmentation");
        auto& c = cfg.augmentation;
        c.noise_sigma = detail::get_or(a, "noise_sigma", c.noise_sigma);
        c.scale_sigma = detail::get_or(a, "scale_sigma", c.scale_sigma);
        c.mw_knots = detail::get_or(a, "mw_knots", c.mw_knots);
        c.mw_sigma = detail::get_or(a, "mw_sigma", c.mw_sigma);
        c.tw_knots = detail::get_or(a, "tw_knots", c.tw_knots);
        c.tw_sigma = detail::get_or(a, "tw_sigma", c.tw_sigma);
        if (a.contains("enabled_kinds"))
            for (const auto& name : a.at("enabled_kinds").get<std::vector<std::string>>())
                c.enabled.push_back(augment_kind_from_name(name));
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::check_keys(m,
                           {"input_len", "patch_w", "embed_dim", "layers", "heads", "mlp_dim", "proj_dim",
                            "dropout", "num_classes", "decoder_from_tokens"},
                           "model");
        auto& c = cfg.model;
        c.input_len = detail::get_or(m, "input_len", c.input_len);
        c.patch_w = detail::get_or(m, "patch_w", c.patch_w);
        c.embed_dim = detail::get_or(m, "embed_dim", c.embed_dim);
        c.layers = detail::get_or(m, "layers", c.layers);
        c.heads = detail::get_or(m, "heads", c.heads);
        c.mlp_dim = detail::get_or(m, "mlp_dim", c.mlp_dim);
        c.proj_dim = detail::get_or(m, "proj_dim", c.proj_dim);
        c.dropout = detail::get_or(m, "dropout", c.dropout);
        c.num_classes = detail::get_or(m, "num_classes", c.num_classes);
        c.decoder_from_tokens = detail::get_or(m, "decoder_from_tokens", c.decoder_from_tokens);
        c.validate();
    }

    if (j.contains("training")) {
        const auto& t = j.at("training");
        detail::check_keys(t,
                           {"scenario", "label_fraction", "seed", "seeds", "pretrain_epochs", "finetune_epochs",
                            "batch_size", "base_lr", "lr_step", "lr_gamma", "weight_decay", "alpha", "beta",
                            "w_recon", "w_contrast", "finetune_alpha", "temperature", "pseudo",
                            "freeze_encoder", "augment", "split"},
                           "training");
        auto& c = cfg.training;
        c.scenario = detail::get_or(t, "scenario", c.scenario);
        scenario_from_name(c.scenario);
        c.label_fraction = detail::get_or(t, "label_fraction", c.label_fraction);
        if (c.label_fraction <= 0.0 || c.label_fraction > 1.0)
            throw std::invalid_argument("config: training.label_fraction must be in (0, 1]");
        c.seed = detail::get_or(t, "seed", c.seed);
        c.seeds = detail::get_or(t, "seeds", c.seeds);
        c.pretrain_epochs = detail::get_or(t, "pretrain_epochs", c.pretrain_epochs);
        c.finetune_epochs = detail::get_or(t, "finetune_epochs", c.finetune_epochs);
        c.batch_size = detail::get_or(t, "batch_size", c.batch_size);
        c.base_lr = detail::get_or(t, "base_lr", c.base_lr);
        c.lr_step = detail::get_or(t, "lr_step", c.lr_step);
        c.lr_gamma = detail::get_or(t, "lr_gamma", c.lr_gamma);
        c.weight_decay = detail::get_or(t, "weight_decay", c.weight_decay);
        c.alpha = detail::get_or(t, "alpha", c.alpha);
        c.beta = detail::get_or(t, "beta", c.beta);
        c.w_recon = detail::get_or(t, "w_recon", c.w_recon);
        c.w_contrast = detail::get_or(t, "w_contrast", c.w_contrast);
        c.finetune_alpha = detail::get_or(t, "finetune_alpha", c.finetune_alpha);
        c.temperature = detail::get_or(t, "temperature", c.temperature);
        if (t.contains("pseudo")) {
            const auto& p = t.at("pseudo");
            detail::check_keys(p, {"threshold", "weight", "warmup_epochs", "refresh", "enabled"},
                               "training.pseudo");
            c.pseudo_threshold = detail::get_or(p, "threshold", c.pseudo_threshold);
            c.pseudo_weight = detail::get_or(p, "weight", c.pseudo_weight);
            c.pseudo_warmup = detail::get_or(p, "warmup_epochs", c.pseudo_warmup);
            c.pseudo_refresh = detail::get_or(p, "refresh", c.pseudo_refresh);
            c.pseudo_enabled = detail::get_or(p, "enabled", c.pseudo_enabled);
            if (c.pseudo_refresh != "batch" && c.pseudo_refresh != "epoch")
                throw std::invalid_argument("config: training.pseudo.refresh must be batch or epoch");
        }
        c.freeze_encoder = detail::get_or(t, "freeze_encoder", c.freeze_encoder);
        c.augment = detail::get_or(t, "augment", c.augment);
        if (t.contains("split")) {
            const auto& s = t.at("split");
            detail::check_keys(s, {"train", "val", "test", "seed"}, "training.split");
            c.split.train = detail::get_or(s, "train", c.split.train);
            c.split.val = detail::get_or(s, "val", c.split.val);
            c.split.test = detail::get_or(s, "test", c.split.test);
            c.split.seed = detail::get_or(s, "seed", c.split.seed);
        }
    }

    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        detail::check_keys(b, {"kind", "input_len", "cnn_fc1", "resnet_fc1"}, "baseline");
        auto& c = cfg.baseline;
        c.kind = detail::get_or(b, "kind", c.kind);
        model_kind_from_name(c.kind);
        c.input_len = detail::get_or(b, "input_len", c.input_len);
        c.cnn_fc1 = detail::get_or(b, "cnn_fc1", c.cnn_fc1);
        c.resnet_fc1 = detail::get_or(b, "resnet_fc1", c.resnet_fc1);
    }

    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        detail::check_keys(e, {"per_snr_cap"}, "evaluation");
        cfg.evaluation.per_snr_cap = detail::get_or(e, "per_snr_cap", cfg.evaluation.per_snr_cap);
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: JSON parse error in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

// Full resolved form, written next to every run's outputs.
inline json to_json(const RunConfig& c) {
    json aug_kinds = json::array();
    for (auto k : c.augmentation.kinds()) aug_kinds.push_back(augment_kind_name(k));
    return json{
        {"output_dir", c.output_dir},
        {"data",
         {{"source", c.data.source},
          {"dataset_path", c.data.dataset_path},
          {"schemes", c.data.schemes},
          {"snr_list_db", c.snr_list()},
          {"frames_per_cell", c.data.frames_per_cell},
          {"frame_len", c.data.frame_len},
          {"samples_per_symbol", c.data.samples_per_symbol},
          {"max_freq_offset", c.data.max_freq_offset},
          {"seed", c.data.seed},
          {"rml",
           {{"path", c.data.rml_path},
            {"class_map", c.data.rml_class_map},
            {"snr_min_db", c.data.rml_snr_min},
            {"snr_max_db", c.data.rml_snr_max},
            {"per_cell", c.data.rml_per_cell},
            {"reduce", c.data.rml_reduce}}}}},
        {"augmentation",
         {{"noise_sigma", c.augmentation.noise_sigma},
          {"scale_sigma", c.augmentation.scale_sigma},
          {"mw_knots", c.augmentation.mw_knots},
          {"mw_sigma", c.augmentation.mw_sigma},
          {"tw_knots", c.augmentation.tw_knots},
          {"tw_sigma", c.augmentation.tw_sigma},
          {"enabled_kinds", aug_kinds}}},
        {"model",
         {{"input_len", c.model.input_len},
          {"patch_w", c.model.patch_w},
          {"embed_dim", c.model.embed_dim},
          {"layers", c.model.layers},
          {"heads", c.model.heads},
          {"mlp_dim", c.model.mlp_dim},
          {"proj_dim", c.model.proj_dim},
          {"dropout", c.model.dropout},
          {"num_classes", c.model.num_classes},
          {"decoder_from_tokens", c.model.decoder_from_tokens}}},
        {"training",
         {{"scenario", c.training.scenario},
          {"label_fraction", c.training.label_fraction},
          {"seed", c.training.seed},
          {"seeds", c.training.seeds},
          {"pretrain_epochs", c.training.pretrain_epochs},
          {"finetune_epochs", c.training.finetune_epochs},
          {"batch_size", c.training.batch_size},
          {"base_lr", c.training.base_lr},
          {"lr_step", c.training.lr_step},
          {"lr_gamma", c.training.lr_gamma},
          {"weight_decay", c.training.weight_decay},
          {"alpha", c.training.alpha},
          {"beta", c.training.beta},
          {"w_recon", c.training.w_recon},
          {"w_contrast", c.training.w_contrast},
          {"finetune_alpha", c.training.finetune_alpha},
          {"temperature", c.training.temperature},
          {"pseudo",
           {{"threshold", c.training.pseudo_threshold},
            {"weight", c.training.pseudo_weight},
            {"warmup_epochs", c.training.pseudo_warmup},
            {"refresh", c.training.pseudo_refresh},
            {"enabled", c.training.pseudo_enabled}}},
          {"freeze_encoder", c.training.freeze_encoder},
          {"augment", c.training.augment},
          {"split",
           {{"train", c.training.split.train},
            {"val", c.training.split.val},
            {"test", c.training.split.test},
            {"seed", c.training.split.seed}}}}},
        {"baseline",
         {{"kind", c.baseline.kind},
          {"input_len", c.baseline.input_len},
          {"cnn_fc1", c.baseline.cnn_fc1},
          {"resnet_fc1", c.baseline.resnet_fc1}}},
        {"evaluation", {{"per_snr_cap", c.evaluation.per_snr_cap}}}};
}

}  // namespace amrvit
