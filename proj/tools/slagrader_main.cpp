// slagrader: train, decode, calibrate, and evaluate spoken-language
// proficiency graders over synthetic or externally produced features.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "sla/error.hpp"
#include "sla/evaluate.hpp"
#include "sla/format.hpp"
#include "sla/metrics.hpp"
#include "sla/rng.hpp"
#include "sla/storage.hpp"
#include "sla/synth.hpp"
#include "sla/train.hpp"

namespace fs = std::filesystem;
using namespace sla;

namespace {

int g_exit_code = 0;

// ---------------------------------------------------------------------
// run manifests

using KV = std::vector<std::pair<std::string, std::string>>;

void write_run_manifest(const std::string& path, const std::string& subcommand,
                        const KV& config, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "# slagrader run manifest\n";
  out << "# subcommand: " << subcommand << "\n";
  out << "# reuse with: slagrader " << subcommand << " --config " << path
      << "\n";
  for (const auto& [k, v] : config) out << k << '=' << v << '\n';
  for (const auto& p : inputs) {
    out << "# input " << p << " fnv1a=" << fnv1a_file(p) << '\n';
  }
  for (const auto& p : outputs) {
    out << "# output " << p << " fnv1a=" << fnv1a_file(p) << '\n';
  }
}

// ---------------------------------------------------------------------
// shared plumbing

SplitData load_split_data(const std::string& corpus, const std::string& name,
                          const GradeScale& scale) {
  fs::path base(corpus);
  auto manifest = (base / (name + ".manifest.tsv")).string();
  auto features_path = (base / (name + ".features.bin")).string();
  SplitData data;
  data.split = parse_manifest(manifest, name, features_path, scale);
  data.features = read_features(features_path);
  auto violations = validate_split(data.split, data.features.rows, scale);
  if (!violations.empty()) {
    throw DomainError(manifest + ": record '" + violations[0].response_id +
                      "': " + violations[0].rule);
  }
  return data;
}

DatasetSplit filter_part(const DatasetSplit& split, int part) {
  if (part == 0) return split;
  DatasetSplit out;
  out.name = split.name;
  out.feature_file = split.feature_file;
  for (const auto& rec : split.records) {
    if (rec.part == part) out.records.push_back(rec);
  }
  if (out.records.empty()) {
    throw DomainError("split '" + split.name + "' has no records for part " +
                      std::to_string(part));
  }
  return out;
}

std::vector<int> parts_present(const DatasetSplit& split) {
  std::set<int> seen;
  for (const auto& rec : split.records) seen.insert(rec.part);
  return {seen.begin(), seen.end()};
}

std::string data_tag(const std::string& corpus, const std::string& split) {
  return fs::path(corpus).lexically_normal().string() + "/" + split;
}

// Train-config flags shared by train/xeval/xtask.
struct TrainFlags {
  std::string head = "fa";
  int epochs = 2;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double warmup = 0.1;
  std::size_t hidden = 32;
  std::uint64_t seed = 0;

  void attach(CLI::App* app, int default_epochs, double default_lr) {
    epochs = default_epochs;
    lr = default_lr;
    app->add_option("--head", head, "grader head: ce|fa|reg")
        ->check(CLI::IsMember({"ce", "fa", "reg"}))
        ->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str();
    app->add_option("--lr", lr, "base learning rate")->capture_default_str();
    app->add_option("--weight-decay", weight_decay)->capture_default_str();
    app->add_option("--warmup", warmup, "warmup fraction of total steps")
        ->capture_default_str();
    app->add_option("--hidden", hidden, "hidden layer width (0 = linear)")
        ->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
  }

  TrainConfig to_config() const {
    TrainConfig cfg;
    cfg.head = head_kind_from_name(head);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.base_lr = lr;
    cfg.weight_decay = weight_decay;
    cfg.warmup_fraction = warmup;
    cfg.hidden_dim = hidden;
    cfg.seed = seed;
    return cfg;
  }

  KV config_kv() const {
    return {{"head", head},
            {"epochs", std::to_string(epochs)},
            {"batch-size", std::to_string(batch_size)},
            {"lr", format_g17(lr)},
            {"weight-decay", format_g17(weight_decay)},
            {"warmup", format_g17(warmup)},
            {"hidden", std::to_string(hidden)},
            {"seed", std::to_string(seed)}};
  }

  std::map<std::string, std::string> model_meta(int part) const {
    return {{"seed", std::to_string(seed)},
            {"part", std::to_string(part)},
            {"epochs", std::to_string(epochs)},
            {"batch_size", std::to_string(batch_size)},
            {"base_lr", format_g17(lr)},
            {"weight_decay", format_g17(weight_decay)},
            {"warmup_fraction", format_g17(warmup)}};
  }
};

std::map<int, GraderModel> train_models_per_part(const SplitData& train_data,
                                                 const std::vector<int>& parts,
                                                 const TrainFlags& flags) {
  std::map<int, GraderModel> models;
  for (int part : parts) {
    auto filtered = filter_part(train_data.split, part);
    std::cerr << "training part " << part << " (" << filtered.records.size()
              << " responses)\n";
    models[part] =
        train(filtered, train_data.features, flags.to_config()).model;
  }
  return models;
}

DecodeMode resolve_mode(const std::string& mode_flag,
                        const GraderModel& model) {
  if (mode_flag.empty()) {
    return model.head == HeadKind::REG ? DecodeMode::Reg : DecodeMode::Soft;
  }
  return decode_mode_from_name(mode_flag);
}

int resolve_part(int part_flag, const LoadedModel& loaded) {
  if (part_flag >= 0) return part_flag;
  auto it = loaded.meta.find("part");
  return it == loaded.meta.end() ? 0 : parse_int(it->second, "part");
}

// ---------------------------------------------------------------------
// subcommands

void add_synth(CLI::App& app) {
  auto* sub = app.add_subcommand("synth", "generate a synthetic corpus");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto opts = std::make_shared<SynthConfig>();
  auto out_dir = std::make_shared<std::string>();
  auto parts = std::make_shared<std::string>("1,2,3,4,5");
  auto chunks = std::make_shared<std::string>("3:2,4:2");
  auto dir_seed = std::make_shared<std::int64_t>(-1);
  sub->add_option("--out", *out_dir, "output directory")->required();
  sub->add_option("--train", opts->train_submissions)->capture_default_str();
  sub->add_option("--dev", opts->dev_submissions)->capture_default_str();
  sub->add_option("--test", opts->test_submissions)->capture_default_str();
  sub->add_option("--parts", *parts, "comma-separated part numbers")
      ->capture_default_str();
  sub->add_option("--chunks", *chunks, "per-part chunk counts, e.g. 3:2,4:2")
      ->capture_default_str();
  sub->add_option("--dim", opts->dim)->capture_default_str();
  sub->add_option("--shared-weight", opts->shared_weight)
      ->capture_default_str();
  sub->add_option("--part-weight", opts->part_weight)->capture_default_str();
  sub->add_option("--feature-noise", opts->feature_noise)
      ->capture_default_str();
  sub->add_option("--annotator-noise", opts->annotator_noise)
      ->capture_default_str();
  sub->add_option("--seed", opts->seed)->capture_default_str();
  sub->add_option("--direction-seed", *dir_seed,
                  "share signal directions across corpora (-1 = use --seed)")
      ->capture_default_str();

  sub->callback([=]() {
    opts->parts.clear();
    for (const auto& tok : split(*parts, ',')) {
      opts->parts.push_back(parse_int(tok, "part"));
    }
    opts->chunks_per_part.clear();
    if (!chunks->empty()) {
      for (const auto& tok : split(*chunks, ',')) {
        auto pair = split(tok, ':');
        if (pair.size() != 2) {
          throw DomainError("invalid --chunks entry '" + tok + "'");
        }
        opts->chunks_per_part[parse_int(pair[0], "part")] =
            parse_int(pair[1], "chunk count");
      }
    }
    if (*dir_seed >= 0) {
      opts->direction_seed = static_cast<std::uint64_t>(*dir_seed);
    }
    auto corpus = generate(*opts);
    write_corpus(corpus, *out_dir);
    std::cerr << describe(*opts);

    KV kv = {{"out", *out_dir},
             {"train", std::to_string(opts->train_submissions)},
             {"dev", std::to_string(opts->dev_submissions)},
             {"test", std::to_string(opts->test_submissions)},
             {"parts", *parts},
             {"chunks", *chunks},
             {"dim", std::to_string(opts->dim)},
             {"shared-weight", format_g17(opts->shared_weight)},
             {"part-weight", format_g17(opts->part_weight)},
             {"feature-noise", format_g17(opts->feature_noise)},
             {"annotator-noise", format_g17(opts->annotator_noise)},
             {"seed", std::to_string(opts->seed)},
             {"direction-seed", std::to_string(*dir_seed)}};
    std::vector<std::string> outputs;
    for (const char* split_name : {"train", "dev", "test"}) {
      fs::path base(*out_dir);
      outputs.push_back(
          (base / (std::string(split_name) + ".features.bin")).string());
      outputs.push_back(
          (base / (std::string(split_name) + ".manifest.tsv")).string());
    }
    write_run_manifest((fs::path(*out_dir) / "synth.run.txt").string(),
                       "synth", kv, {}, outputs);
  });
}

void add_train(CLI::App& app) {
  auto* sub = app.add_subcommand("train", "fit a grader for one part");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto corpus = std::make_shared<std::string>();
  auto part = std::make_shared<int>(0);
  auto out = std::make_shared<std::string>();
  auto flags = std::make_shared<TrainFlags>();
  sub->add_option("--corpus", *corpus, "corpus directory")->required();
  sub->add_option("--part", *part, "part to train on (1..5)")
      ->required()
      ->check(CLI::Range(1, 5));
  sub->add_option("--out", *out, "model file to write")->required();
  flags->attach(sub, 2, 1e-4);

  sub->callback([=]() {
    auto scale = GradeScale::six_level();
    auto train_data = load_split_data(*corpus, "train", scale);
    auto filtered = filter_part(train_data.split, *part);
    auto result =
        train(filtered, train_data.features, flags->to_config(), scale);
    save_model(result.model, *out, flags->model_meta(*part));
    auto log_path = *out + ".trainlog.tsv";
    write_trainlog(result.log, log_path);
    std::cerr << "trained " << flags->head << " head on part " << *part
              << ": epoch losses";
    for (double l : result.log.epoch_mean_loss) {
      std::cerr << ' ' << format_g17(l);
    }
    std::cerr << '\n';

    KV kv = {{"corpus", *corpus}, {"part", std::to_string(*part)}};
    auto train_kv = flags->config_kv();
    kv.insert(kv.end(), train_kv.begin(), train_kv.end());
    kv.emplace_back("out", *out);
    write_run_manifest(*out + ".run.txt", "train", kv,
                       {train_data.split.feature_file}, {*out, log_path});
  });
}

void add_predict(CLI::App& app) {
  auto* sub = app.add_subcommand("predict", "decode a split with a model");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto model_path = std::make_shared<std::string>();
  auto corpus = std::make_shared<std::string>();
  auto split_name = std::make_shared<std::string>("test");
  auto part = std::make_shared<int>(-1);
  auto mode = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto clamp = std::make_shared<bool>(false);
  sub->add_option("--model", *model_path)->required();
  sub->add_option("--corpus", *corpus)->required();
  sub->add_option("--split", *split_name, "train|dev|test")
      ->capture_default_str();
  sub->add_option("--part", *part, "part filter (0 = all, default: model's)");
  sub->add_option("--mode", *mode, "hard|soft|reg (default from head)")
      ->check(CLI::IsMember({"hard", "soft", "reg", ""}));
  sub->add_option("--out", *out, "predictions file to write")->required();
  sub->add_flag("--clamp", *clamp,
                "clamp exported scores into the grade range (score exports "
                "only; never clamp before computing metrics)");

  sub->callback([=]() {
    auto loaded = load_model(*model_path);
    auto data = load_split_data(*corpus, *split_name, loaded.model.scale);
    int use_part = resolve_part(*part, loaded);
    DecodeMode use_mode = resolve_mode(*mode, loaded.model);
    auto preds = predict_split(loaded.model, data, use_mode, use_part);
    if (preds.empty()) {
      throw DomainError("no records to predict for part " +
                        std::to_string(use_part));
    }
    if (*clamp) {
      for (auto& rec : preds) {
        for (double& s : rec.chunk_scores) {
          s = clamp_for_export(s, loaded.model.scale);
        }
        rec.response_score =
            clamp_for_export(rec.response_score, loaded.model.scale);
      }
    }
    write_predictions(preds, *out);
    std::cerr << "wrote " << preds.size() << " predictions to " << *out
              << '\n';

    KV kv = {{"model", *model_path},
             {"corpus", *corpus},
             {"split", *split_name},
             {"part", std::to_string(use_part)},
             {"mode", decode_mode_name(use_mode)},
             {"clamp", *clamp ? "true" : "false"},
             {"out", *out}};
    write_run_manifest(*out + ".run.txt", "predict", kv,
                       {*model_path, data.split.feature_file}, {*out});
  });
}

void add_calibrate(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "calibrate", "fit affine calibration on a model's dev predictions");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto model_path = std::make_shared<std::string>();
  auto corpus = std::make_shared<std::string>();
  auto split_name = std::make_shared<std::string>("dev");
  auto part = std::make_shared<int>(-1);
  auto mode = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  sub->add_option("--model", *model_path)->required();
  sub->add_option("--corpus", *corpus)->required();
  sub->add_option("--split", *split_name)->capture_default_str();
  sub->add_option("--part", *part, "part filter (0 = all, default: model's)");
  sub->add_option("--mode", *mode, "hard|soft|reg (default from head)")
      ->check(CLI::IsMember({"hard", "soft", "reg", ""}));
  sub->add_option("--out", *out, "calibration file to write")->required();

  sub->callback([=]() {
    auto loaded = load_model(*model_path);
    auto data = load_split_data(*corpus, *split_name, loaded.model.scale);
    int use_part = resolve_part(*part, loaded);
    DecodeMode use_mode = resolve_mode(*mode, loaded.model);
    auto preds = predict_split(loaded.model, data, use_mode, use_part);
    auto items = join_items(preds, data.split);
    std::vector<double> p, r;
    for (const auto& item : items) {
      p.push_back(item.pred);
      r.push_back(item.ref);
    }
    auto params = fit_calibration(p, r, data_tag(*corpus, *split_name));
    save_calibration(params, *out);
    std::cerr << "calibration: slope " << format_g17(params.slope)
              << ", intercept " << format_g17(params.intercept)
              << " (n=" << params.n_fit << ")\n";

    KV kv = {{"model", *model_path},
             {"corpus", *corpus},
             {"split", *split_name},
             {"part", std::to_string(use_part)},
             {"mode", decode_mode_name(use_mode)},
             {"out", *out}};
    write_run_manifest(*out + ".run.txt", "calibrate", kv,
                       {*model_path, data.split.feature_file}, {*out});
  });
}

void add_eval(CLI::App& app) {
  auto* sub = app.add_subcommand("eval", "score predictions against a split");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto pred_path = std::make_shared<std::string>();
  auto corpus = std::make_shared<std::string>();
  auto split_name = std::make_shared<std::string>("test");
  auto calib_path = std::make_shared<std::string>();
  auto granularity = std::make_shared<std::string>("response");
  auto name = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto allow_in_sample = std::make_shared<bool>(false);
  sub->add_option("--pred", *pred_path, "predictions file")->required();
  sub->add_option("--corpus", *corpus)->required();
  sub->add_option("--split", *split_name)->capture_default_str();
  sub->add_option("--calib", *calib_path, "calibration file (optional)");
  sub->add_option("--granularity", *granularity)
      ->check(CLI::IsMember({"response", "part", "submission"}))
      ->capture_default_str();
  sub->add_option("--name", *name, "report row label (default: pred stem)");
  sub->add_option("--out", *out, "report stem; writes <stem>.txt and .tsv")
      ->required();
  sub->add_flag("--allow-in-sample", *allow_in_sample,
                "permit evaluating on the calibration's own data");

  sub->callback([=]() {
    auto scale = GradeScale::six_level();
    auto preds = read_predictions(*pred_path);
    auto data = load_split_data(*corpus, *split_name, scale);
    auto items = join_items(preds, data.split);

    std::map<int, CalibrationParams> calibration;
    if (!calib_path->empty()) {
      auto params = load_calibration(*calib_path);
      std::set<int> parts;
      for (const auto& item : items) parts.insert(item.part);
      for (int part : parts) calibration[part] = params;
    }
    EvaluateOptions opts;
    opts.data_tag = data_tag(*corpus, *split_name);
    opts.allow_in_sample = *allow_in_sample;
    auto report = evaluate(items, granularity_from_name(*granularity),
                           calibration, opts);

    std::string label =
        name->empty() ? fs::path(*pred_path).stem().string() : *name;
    std::vector<NamedReport> rows = {{label, report}};
    std::ofstream(*out + ".txt") << render_report(rows);
    std::ofstream(*out + ".tsv") << render_report_tsv(rows);
    std::cerr << render_report(rows);

    KV kv = {{"pred", *pred_path},
             {"corpus", *corpus},
             {"split", *split_name},
             {"calib", *calib_path},
             {"granularity", *granularity},
             {"name", label},
             {"allow-in-sample", *allow_in_sample ? "true" : "false"},
             {"out", *out}};
    std::vector<std::string> inputs = {*pred_path};
    if (!calib_path->empty()) inputs.push_back(*calib_path);
    write_run_manifest(*out + ".run.txt", "eval", kv, inputs,
                       {*out + ".txt", *out + ".tsv"});
  });
}

void add_xeval(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "xeval", "matched and cross-part grader matrix on one corpus");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto corpus = std::make_shared<std::string>();
  auto mode = std::make_shared<std::string>("soft");
  auto out_dir = std::make_shared<std::string>();
  auto flags = std::make_shared<TrainFlags>();
  sub->add_option("--corpus", *corpus)->required();
  sub->add_option("--mode", *mode)
      ->check(CLI::IsMember({"hard", "soft", "reg"}))
      ->capture_default_str();
  sub->add_option("--out", *out_dir, "output directory")->required();
  flags->attach(sub, 8, 0.03);

  sub->callback([=]() {
    auto scale = GradeScale::six_level();
    auto train_data = load_split_data(*corpus, "train", scale);
    auto dev_data = load_split_data(*corpus, "dev", scale);
    auto test_data = load_split_data(*corpus, "test", scale);
    auto parts = parts_present(train_data.split);

    auto models = train_models_per_part(train_data, parts, *flags);
    fs::create_directories(*out_dir);
    std::vector<std::string> outputs;
    for (const auto& [part, model] : models) {
      auto path = (fs::path(*out_dir) /
                   ("model-p" + std::to_string(part) + ".model"))
                      .string();
      save_model(model, path, flags->model_meta(part));
      outputs.push_back(path);
    }

    std::map<int, PartDatasets> datasets;
    for (int part : parts) datasets[part] = PartDatasets{dev_data, test_data};
    auto result =
        cross_part_matrix(models, datasets, decode_mode_from_name(*mode));

    auto txt_path = (fs::path(*out_dir) / "xeval_matrix.txt").string();
    auto tsv_path = (fs::path(*out_dir) / "xeval_matrix.tsv").string();
    std::ofstream(txt_path) << render_matrix(result);
    std::ofstream(tsv_path) << render_matrix_tsv(result);
    outputs.push_back(txt_path);
    outputs.push_back(tsv_path);
    std::cerr << render_matrix(result);

    KV kv = {{"corpus", *corpus}, {"mode", *mode}};
    auto train_kv = flags->config_kv();
    kv.insert(kv.end(), train_kv.begin(), train_kv.end());
    kv.emplace_back("out", *out_dir);
    write_run_manifest((fs::path(*out_dir) / "xeval.run.txt").string(),
                       "xeval", kv, {train_data.split.feature_file}, outputs);
  });
}

void add_xtask(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "xtask", "train on one corpus, evaluate submissions on another");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto train_corpus = std::make_shared<std::string>();
  auto eval_corpus = std::make_shared<std::string>();
  auto parts_csv = std::make_shared<std::string>("1,3,4,5");
  auto mode = std::make_shared<std::string>("soft");
  auto name = std::make_shared<std::string>("xtask");
  auto out_dir = std::make_shared<std::string>();
  auto flags = std::make_shared<TrainFlags>();
  sub->add_option("--train-corpus", *train_corpus)->required();
  sub->add_option("--eval-corpus", *eval_corpus)->required();
  sub->add_option("--parts", *parts_csv, "part subset")->capture_default_str();
  sub->add_option("--mode", *mode)
      ->check(CLI::IsMember({"hard", "soft", "reg"}))
      ->capture_default_str();
  sub->add_option("--name", *name, "report row label")->capture_default_str();
  sub->add_option("--out", *out_dir, "output directory")->required();
  flags->attach(sub, 8, 0.03);

  sub->callback([=]() {
    auto scale = GradeScale::six_level();
    std::vector<int> parts;
    for (const auto& tok : split(*parts_csv, ',')) {
      parts.push_back(parse_int(tok, "part"));
    }
    auto train_data = load_split_data(*train_corpus, "train", scale);
    auto dev_data = load_split_data(*eval_corpus, "dev", scale);
    auto test_data = load_split_data(*eval_corpus, "test", scale);

    auto models = train_models_per_part(train_data, parts, *flags);
    std::map<int, PartDatasets> datasets;
    for (int part : parts) datasets[part] = PartDatasets{dev_data, test_data};
    auto report =
        cross_task_eval(models, datasets, parts, decode_mode_from_name(*mode));

    fs::create_directories(*out_dir);
    std::vector<NamedReport> rows = {{*name, report}};
    auto txt_path = (fs::path(*out_dir) / "xtask_report.txt").string();
    auto tsv_path = (fs::path(*out_dir) / "xtask_report.tsv").string();
    std::ofstream(txt_path) << render_report(rows);
    std::ofstream(tsv_path) << render_report_tsv(rows);
    std::cerr << render_report(rows);

    KV kv = {{"train-corpus", *train_corpus},
             {"eval-corpus", *eval_corpus},
             {"parts", *parts_csv},
             {"mode", *mode},
             {"name", *name}};
    auto train_kv = flags->config_kv();
    kv.insert(kv.end(), train_kv.begin(), train_kv.end());
    kv.emplace_back("out", *out_dir);
    write_run_manifest((fs::path(*out_dir) / "xtask.run.txt").string(),
                       "xtask", kv, {}, {txt_path, tsv_path});
  });
}

void add_gradcheck(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "gradcheck", "finite-difference audit of the analytic gradients");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto head = std::make_shared<std::string>("fa");
  auto seed = std::make_shared<std::uint64_t>(0);
  auto dim = std::make_shared<std::size_t>(16);
  auto hidden = std::make_shared<std::size_t>(32);
  auto batch = std::make_shared<std::size_t>(8);
  auto step = std::make_shared<double>(1e-5);
  auto cases = std::make_shared<int>(20);
  auto out = std::make_shared<std::string>();
  sub->add_option("--head", *head)
      ->check(CLI::IsMember({"ce", "fa", "reg"}))
      ->capture_default_str();
  sub->add_option("--seed", *seed)->capture_default_str();
  sub->add_option("--dim", *dim)->capture_default_str();
  sub->add_option("--hidden", *hidden)->capture_default_str();
  sub->add_option("--batch", *batch)->capture_default_str();
  sub->add_option("--step", *step)->capture_default_str();
  sub->add_option("--cases", *cases)->capture_default_str();
  sub->add_option("--out", *out, "also record the result to a file");

  sub->callback([=]() {
    auto scale = GradeScale::six_level();
    double worst = 0.0;
    for (int c = 0; c < *cases; ++c) {
      auto case_seed = SplitMix64::mix(*seed, static_cast<std::uint64_t>(c));
      auto inst = make_audit_instance(head_kind_from_name(*head), *dim,
                                      *hidden, *batch, scale, case_seed);
      worst = std::max(worst,
                       grad_check(inst.model, inst.inputs, inst.refs, *step));
    }
    std::cout << "max relative error: " << format_g17(worst) << '\n';
    if (!out->empty()) {
      std::ofstream(*out) << "max_relative_error=" << format_g17(worst)
                          << "\nthreshold=1e-06\n";
      KV kv = {{"head", *head},
               {"seed", std::to_string(*seed)},
               {"dim", std::to_string(*dim)},
               {"hidden", std::to_string(*hidden)},
               {"batch", std::to_string(*batch)},
               {"step", format_g17(*step)},
               {"cases", std::to_string(*cases)},
               {"out", *out}};
      write_run_manifest(*out + ".run.txt", "gradcheck", kv, {}, {*out});
    }
    if (!(worst < 1e-6)) {
      std::cerr << "gradient audit FAILED (threshold 1e-6)\n";
      g_exit_code = 2;
    }
  });
}

void add_ingest_logits(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "ingest-logits", "turn externally produced logits into predictions");
  sub->add_option("--config",
                  "key=value config file; explicit flags override it");
  auto logits_path = std::make_shared<std::string>();
  auto mode = std::make_shared<std::string>("soft");
  auto out = std::make_shared<std::string>();
  auto labels = std::make_shared<std::string>("A,B,C,D,E,F");
  auto scores = std::make_shared<std::string>("6,5,4,3,2,1");
  auto grid_step = std::make_shared<double>(0.5);
  sub->add_option("--logits", *logits_path, "tab-separated raw logits file")
      ->required();
  sub->add_option("--mode", *mode)
      ->check(CLI::IsMember({"hard", "soft"}))
      ->capture_default_str();
  sub->add_option("--out", *out, "predictions file to write")->required();
  sub->add_option("--labels", *labels)->capture_default_str();
  sub->add_option("--scores", *scores)->capture_default_str();
  sub->add_option("--grid-step", *grid_step)->capture_default_str();

  sub->callback([=]() {
    std::vector<double> score_values;
    for (const auto& tok : split(*scores, ',')) {
      score_values.push_back(parse_double(tok, "score"));
    }
    GradeScale scale(split(*labels, ','), score_values, *grid_step);
    auto responses = ingest_logits(*logits_path, scale);
    DecodeMode use_mode = decode_mode_from_name(*mode);

    std::vector<PredictionRecord> preds;
    for (const auto& resp : responses) {
      PredictionRecord rec;
      rec.response_id = resp.response_id;
      rec.part = resp.part;
      rec.mode = use_mode;
      double sum = 0.0;
      for (const auto& dist : resp.chunk_dists) {
        double score = use_mode == DecodeMode::Hard
                           ? decode_hard(dist, scale)
                           : decode_soft(dist, scale);
        rec.chunk_scores.push_back(score);
        rec.chunk_probs.push_back(dist.probs);
        sum += score;
      }
      rec.response_score = sum / static_cast<double>(rec.chunk_scores.size());
      preds.push_back(std::move(rec));
    }
    write_predictions(preds, *out);
    std::cerr << "ingested " << preds.size() << " responses\n";

    KV kv = {{"logits", *logits_path},
             {"mode", *mode},
             {"labels", *labels},
             {"scores", *scores},
             {"grid-step", format_g17(*grid_step)},
             {"out", *out}};
    write_run_manifest(*out + ".run.txt", "ingest-logits", kv, {*logits_path},
                       {*out});
  });
}

// Merges a --config file into the argument list: every key=value line
// becomes "--key value" unless the flag was given explicitly, so the
// command line always wins. Run manifests are valid config files.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  auto given = [&args](const std::string& key) {
    std::string full = "--" + key;
    for (const auto& a : args) {
      if (a == full || a.rfind(full + "=", 0) == 0) return true;
    }
    return false;
  };

  std::ifstream in(config_path);
  if (!in) throw FormatError("cannot open config file '" + config_path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(config_path + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + line + "'");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "config" || given(key)) continue;
    if (value == "true") {
      args.push_back("--" + key);
    } else if (value != "false") {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spoken-language assessment grader toolkit"};
  app.require_subcommand(1);
  add_synth(app);
  add_train(app);
  add_predict(app);
  add_calibrate(app);
  add_eval(app);
  add_xeval(app);
  add_xtask(app);
  add_gradcheck(app);
  add_ingest_logits(app);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return g_exit_code;
}
