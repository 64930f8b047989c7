#include "cli.hpp"

#include "wristloc/checkpoint.hpp"
#include "wristloc/dataset.hpp"
#include "wristloc/errors.hpp"
#include "wristloc/evaluation.hpp"
#include "wristloc/image.hpp"
#include "wristloc/routing.hpp"
#include "wristloc/synthworld.hpp"
#include "wristloc/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace wristloc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IOFailure, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOFailure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) fail(ErrorCode::IOFailure, "cannot write " + path.string());
}

template <typename F>
std::string to_text(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

const std::string& required(const RunConfig& c, std::string_view key) {
  const auto& v = c.get(key);
  if (v.empty()) fail(ErrorCode::InvalidConfig, "--" + std::string(key) + " is required");
  return v;
}

data::SplitPlan load_plan(const RunConfig& c, const std::vector<data::FrameRecord>& records) {
  if (!c.get("split").empty()) {
    const fs::path path = c.get("split");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    return data::split_from_json(records, j);
  }
  const auto seed = c.get_u64("seed");
  data::SplitPlan plan;
  plan.split = data::group_split(records, c.get_double("test_fraction"), seed);
  plan.folds = data::group_kfold(plan.split.train_val, c.get_int("folds"), seed);
  return plan;
}

const data::Fold& pick_fold(const RunConfig& c, const data::SplitPlan& plan) {
  const int k = c.get_int("fold");
  if (k < 0 || k >= static_cast<int>(plan.folds.folds.size())) {
    fail(ErrorCode::InvalidConfig, "fold " + std::to_string(k) + " out of range for " +
                                       std::to_string(plan.folds.folds.size()) + " folds");
  }
  return plan.folds.folds[static_cast<std::size_t>(k)];
}

std::vector<data::FrameRecord> concat(const std::vector<data::FrameRecord>& a, const std::vector<data::FrameRecord>& b) {
  auto out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::string history_text(const train::TrainHistory& h, bool with_seconds = true) {
  return to_text([&](std::ostream& s) { h.write_csv(s, with_seconds); });
}

std::vector<Vec3> predict_all(const model::PositionRegressor& m, const train::ExampleSet& ex) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(ex.size()));
  for (Eigen::Index i = 0; i < ex.size(); ++i) out.push_back(m.predict_from_features(ex.features.col(i)));
  return out;
}

// Writes errors.csv, cdf.csv under `dir` with the given stem suffix and
// returns the CDF for plotting.
std::vector<eval::CdfPoint> write_error_outputs(const fs::path& dir, const std::string& suffix,
                                                const eval::ErrorTable& table) {
  write_file(dir / ("errors" + suffix + ".csv"), to_text([&](std::ostream& s) { eval::write_error_csv(s, table); }));
  auto steps = eval::cdf(table.maes());
  write_file(dir / ("cdf" + suffix + ".csv"), to_text([&](std::ostream& s) { eval::write_cdf_csv(s, steps); }));
  return steps;
}

ordered_json summary_json(const eval::ErrorTable& table, const std::vector<eval::CdfPoint>& steps, double marker) {
  auto j = eval::to_json(table.summary);
  j["cdf_marker_mm"] = marker;
  j["cdf_at_marker"] = eval::cdf_at(steps, marker);
  return j;
}

ordered_json analysis_json(const eval::ErrorTable& table, const RunConfig& c, const std::string& source) {
  const double threshold = c.get_double("outlier_threshold");
  ordered_json j;
  j["table"] = {{"source", source}, {"records", table.records.size()}};
  j["summary"] = eval::to_json(table.summary);
  j["hypotheses"] = eval::to_json(eval::hypothesis_report(table, c.get_double("alpha")));
  j["alpha"] = c.get_double("alpha");
  j["spread"] = eval::to_json(eval::coordinate_spread_report(table, c.get_int("histogram_bins")));
  j["outliers"] = {{"threshold_mm", threshold}, {"per_group", eval::to_json(eval::outlier_counts(table, threshold))}};
  return j;
}

void write_analysis(const fs::path& dir, const eval::ErrorTable& table, const RunConfig& c, const std::string& source,
                    std::ostream& out) {
  const auto report = analysis_json(table, c, source);
  const auto spread = eval::coordinate_spread_report(table, c.get_int("histogram_bins"));
  write_file(dir / "report.json", json_text(report));
  write_file(dir / "spread.csv", to_text([&](std::ostream& s) { eval::write_spread_csv(s, spread); }));
  write_file(dir / "violin.svg", eval::violin_svg(spread));
  for (const auto& h : report["hypotheses"]) {
    out << h["hypothesis"].get<std::string>() << ": p_corrected " << fmt("%.4g", h["p_corrected"].get<double>())
        << (h["significant"].get<bool>() ? " significant" : " not significant") << ", larger error "
        << h["larger_error"].get<std::string>() << "\n";
  }
  out << "z spread ratio " << fmt("%.3f", spread.z_spread_ratio) << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_gen_data(const RunConfig& c, std::ostream& out) {
  const int objects = c.get_int("objects");
  const int sequences = c.get_int("sequences");
  if (objects < 1) fail(ErrorCode::InvalidConfig, "objects must be >= 1");
  if (sequences < 1) fail(ErrorCode::InvalidConfig, "sequences must be >= 1");
  const auto m = synth::emit_dataset(c.get("out"), static_cast<std::size_t>(objects),
                                     static_cast<std::size_t>(sequences), c.get_u64("seed"), c.dataset_config());
  out << "wrote " << m.frame_count << " frames in " << m.sequence_count << " sequences of " << m.groups.size()
      << " objects to " << c.get("out") << "\n";
}

void cmd_split(const RunConfig& c, std::ostream& out) {
  const auto records = data::load_dataset(required(c, "data"));
  const auto plan = load_plan(c, records);
  const fs::path dir = c.get("out");
  write_file(dir / "split.json", json_text(data::split_to_json(plan.split, plan.folds)));
  out << "test: " << plan.split.test.size() << " frames in " << plan.split.test_groups.size() << " groups\n";
  for (std::size_t k = 0; k < plan.folds.folds.size(); ++k) {
    const auto& f = plan.folds.folds[k];
    out << "fold " << k << ": " << f.train.size() << " train, " << f.validation.size() << " validation frames\n";
  }
}

template <typename Model, typename TrainFn>
void train_command(const RunConfig& c, std::ostream& out, Model m, TrainFn fit, const std::string& name) {
  const auto records = data::load_dataset(required(c, "data"));
  const auto plan = load_plan(c, records);
  const auto& fold = pick_fold(c, plan);
  const auto tc = c.train_config();
  train::FeatureBank bank{m.backbone()};
  bank.prefetch(concat(fold.train, fold.validation), c.get_int("jobs"));
  const auto history = fit(m, bank.examples(fold.train), bank.examples(fold.validation), tc);
  const fs::path dir = c.get("out");
  fs::create_directories(dir);
  model::save_checkpoint(dir / (name + ".ckpt"), m);
  write_file(dir / "history.csv", history_text(history));
  out << name << ": " << history.epochs.size() << " epochs"
      << (history.stopped_early ? " (plateau)" : "") << ", final validation loss "
      << fmt("%.4f", history.final_validation_loss()) << "\n";
}

void cmd_eval(const RunConfig& c, std::ostream& out) {
  const auto regressor = model::load_regressor(required(c, "checkpoint"));
  const auto records = data::load_dataset(required(c, "data"));
  const auto plan = load_plan(c, records);
  const auto table = eval::evaluate(*regressor, plan.split.test, c.get_int("jobs"));
  const fs::path dir = c.get("out");
  const double marker = c.get_double("cdf_marker");
  const auto steps = write_error_outputs(dir, "", table);
  write_file(dir / "cdf.svg", eval::cdf_svg({{"model", steps}}, marker));
  write_file(dir / "summary.json", json_text(summary_json(table, steps, marker)));
  out << "test frames " << table.summary.count << ", median mae " << fmt("%.3f", table.summary.median_mae)
      << " mm, median euclidean " << fmt("%.3f", table.summary.median_euclidean) << " mm, cdf("
      << fmt("%g", marker) << " mm) " << fmt("%.3f", eval::cdf_at(steps, marker)) << "\n";
}

void cmd_analyze(const RunConfig& c, std::ostream& out) {
  const fs::path path = required(c, "errors");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOFailure, "cannot read " + path.string());
  const auto table = eval::read_error_csv(in);
  write_analysis(c.get("out"), table, c, path.filename().string(), out);
}

void cmd_predict(const std::string& checkpoint, const std::string& image, const std::string& prompt, std::ostream& out) {
  const auto regressor = model::load_regressor(checkpoint);
  const auto raster = read_png(image);
  if (route(prompt).path == RoutePath::GeneralPath) {
    const auto* adapted = dynamic_cast<const model::PositionModel*>(regressor.get());
    if (adapted == nullptr) fail(ErrorCode::RoutingViolation, "a linear probe has no general path");
    out << adapted->general_answer(raster, prompt) << "\n";
    return;
  }
  const Vec3 p = regressor->predict_position(raster, prompt);
  out << fmt("%.3f", p.x()) << ' ' << fmt("%.3f", p.y()) << ' ' << fmt("%.3f", p.z()) << "\n";
}

// Hash of every regular file below `root`, keyed by relative path.
std::string hash_tree(const fs::path& root, std::size_t& files) {
  std::vector<std::pair<std::string, fs::path>> entries;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), root).generic_string(), e.path());
  }
  std::sort(entries.begin(), entries.end());
  std::string listing;
  for (const auto& [rel, full] : entries) listing += rel + '\t' + sha256_file(full) + '\n';
  files = entries.size();
  return sha256_hex(listing);
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

fs::path cmd_pipeline(const RunConfig& c, std::ostream& log) {
  const fs::path out = c.get("out");
  const auto seed = c.get_u64("seed");
  const int jobs = c.get_int("jobs");
  const int objects = c.get_int("objects");
  const int sequences = c.get_int("sequences");
  const auto tc = c.train_config();
  const auto mc = c.model_config();
  const auto dc = c.dataset_config();
  if (objects < 1) fail(ErrorCode::InvalidConfig, "objects must be >= 1");
  if (sequences < 1) fail(ErrorCode::InvalidConfig, "sequences must be >= 1");
  const double marker = c.get_double("cdf_marker");
  fs::create_directories(out);
  write_file(out / "config.txt", c.echo());

  struct Artifact {
    std::string path;
    std::string sha256;
    std::string scope;
  };
  std::vector<Artifact> artifacts;
  auto record = [&](const std::string& rel) { artifacts.push_back({rel, sha256_file(out / rel), "file"}); };
  auto put = [&](const std::string& rel, const std::string& text) {
    write_file(out / rel, text);
    record(rel);
  };

  log << "[1/5] gen-data: " << objects << " objects x " << sequences << " sequences\n";
  const fs::path data_dir = out / "data";
  if (fs::exists(data_dir)) {
    if (!fs::exists(data_dir / "manifest.json")) {
      fail(ErrorCode::IOFailure, data_dir.string() + " exists and is not a dataset; refusing to overwrite");
    }
    fs::remove_all(data_dir);
  }
  synth::emit_dataset(data_dir, static_cast<std::size_t>(objects), static_cast<std::size_t>(sequences), seed, dc);
  std::size_t data_files = 0;
  artifacts.push_back({"data/", hash_tree(data_dir, data_files), "tree"});

  log << "[2/5] split\n";
  const auto records = data::load_dataset(data_dir);
  data::SplitPlan plan;
  plan.split = data::group_split(records, c.get_double("test_fraction"), seed);
  plan.folds = data::group_kfold(plan.split.train_val, c.get_int("folds"), seed);
  put("split.json", json_text(data::split_to_json(plan.split, plan.folds)));

  const model::ToyBackbone backbone(mc.backbone);
  train::FeatureBank bank{backbone};
  bank.prefetch(records, jobs);
  const auto train_val = bank.examples(plan.split.train_val);
  const auto test = bank.examples(plan.split.test);

  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < plan.split.train_val.size(); ++i) index_of[plan.split.train_val[i].image_rel] = i;
  std::vector<Vec3> oof(plan.split.train_val.size(), Vec3::Zero());
  std::optional<model::PositionModel> best_model;
  std::optional<model::LinearProbe> best_probe;
  double best_model_loss = 0.0, best_probe_loss = 0.0;
  std::size_t best_model_fold = 0, best_probe_fold = 0;
  ordered_json fold_results = ordered_json::array();
  std::vector<std::string> model_histories, baseline_histories;
  std::vector<double> ratios;

  const auto& folds = plan.folds.folds;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    log << "[3/5] train fold " << k + 1 << "/" << folds.size() << "\n";
    const auto tr = bank.examples(folds[k].train);
    const auto va = bank.examples(folds[k].validation);
    model::PositionModel m(mc);
    const auto h = train::train(m, tr, va, tc);
    model::LinearProbe p(mc.backbone);
    const auto hb = train::train_baseline(p, tr, va, tc);

    const std::string dir = "folds/fold_" + std::to_string(k) + "/";
    fs::create_directories(out / dir);
    model::save_checkpoint(out / (dir + "model.ckpt"), m);
    record(dir + "model.ckpt");
    model::save_checkpoint(out / (dir + "baseline.ckpt"), p);
    record(dir + "baseline.ckpt");
    for (const auto& [name, hist, list] : {std::tuple{"history_model.csv", &h, &model_histories},
                                           std::tuple{"history_baseline.csv", &hb, &baseline_histories}}) {
      const std::string rel = dir + name;
      write_file(out / rel, history_text(*hist));
      // Wall-clock seconds differ run to run; the hash covers the losses only.
      artifacts.push_back({rel, sha256_hex(history_text(*hist, false)), "losses"});
      list->push_back(rel);
    }

    for (std::size_t i = 0; i < folds[k].validation.size(); ++i) {
      oof[index_of.at(folds[k].validation[i].image_rel)] = m.predict_from_features(va.features.col(static_cast<Eigen::Index>(i)));
    }
    const double ml = h.final_validation_loss();
    const double bl = hb.final_validation_loss();
    ratios.push_back(ml / bl);
    fold_results.push_back({{"fold", k},
                            {"model_epochs", h.epochs.size()},
                            {"baseline_epochs", hb.epochs.size()},
                            {"model_validation_loss", ml},
                            {"baseline_validation_loss", bl},
                            {"ratio", ml / bl}});
    log << "      model " << fmt("%.4f", ml) << ", baseline " << fmt("%.4f", bl) << "\n";
    if (!best_model || ml < best_model_loss) {
      best_model.emplace(m);
      best_model_loss = ml;
      best_model_fold = k;
    }
    if (!best_probe || bl < best_probe_loss) {
      best_probe.emplace(p);
      best_probe_loss = bl;
      best_probe_fold = k;
    }
  }

  log << "[4/5] evaluate on " << plan.split.test.size() << " test frames\n";
  const auto model_table = eval::error_table(plan.split.test, predict_all(*best_model, test));
  const auto probe_table = eval::error_table(plan.split.test, predict_all(*best_probe, test));
  const auto model_cdf = write_error_outputs(out / "eval", "_model", model_table);
  const auto probe_cdf = write_error_outputs(out / "eval", "_baseline", probe_table);
  for (const char* rel : {"eval/errors_model.csv", "eval/cdf_model.csv", "eval/errors_baseline.csv", "eval/cdf_baseline.csv"}) {
    record(rel);
  }
  put("eval/cdf.svg", eval::cdf_svg({{"model", model_cdf}, {"baseline", probe_cdf}}, marker));
  ordered_json summary;
  summary["model"] = summary_json(model_table, model_cdf, marker);
  summary["model"]["fold"] = best_model_fold;
  summary["baseline"] = summary_json(probe_table, probe_cdf, marker);
  summary["baseline"]["fold"] = best_probe_fold;
  summary["folds"] = fold_results;
  summary["median_validation_ratio"] = eval::median(ratios);
  put("eval/summary.json", json_text(summary));

  log << "[5/5] analyze\n";
  // Held-out predictions for every frame: out-of-fold for train/validation
  // groups, the selected model for the test groups.
  std::vector<Vec3> preds = oof;
  const auto test_preds = predict_all(*best_model, test);
  preds.insert(preds.end(), test_preds.begin(), test_preds.end());
  const auto table = eval::error_table(concat(plan.split.train_val, plan.split.test), preds);
  write_file(out / "analysis/errors.csv", to_text([&](std::ostream& s) { eval::write_error_csv(s, table); }));
  record("analysis/errors.csv");
  std::ostringstream lines;
  write_analysis(out / "analysis", table, c, "out_of_fold+test", lines);
  for (const char* rel : {"analysis/report.json", "analysis/spread.csv", "analysis/violin.svg"}) record(rel);
  log << lines.str();

  std::sort(artifacts.begin(), artifacts.end(), [](const Artifact& a, const Artifact& b) { return a.path < b.path; });
  ordered_json manifest;
  manifest["format_version"] = 1;
  ordered_json cfg;
  // Locations and thread count do not affect content.
  for (const auto& k : config_keys()) {
    if (k.key == "out" || k.key == "jobs" || k.key == "data" || k.key == "split" || k.key == "checkpoint" ||
        k.key == "errors" || k.key == "fold") {
      continue;
    }
    cfg[std::string(k.key)] = c.get(k.key);
  }
  manifest["config"] = cfg;
  manifest["stages"] = {"gen-data", "split", "train", "evaluate", "analyze"};
  manifest["dataset"] = {{"objects", objects}, {"frames", records.size()}, {"files", data_files}};
  manifest["histories"] = {{"model", model_histories}, {"baseline", baseline_histories}};
  auto arr = ordered_json::array();
  for (const auto& a : artifacts) arr.push_back({{"path", a.path}, {"sha256", a.sha256}, {"scope", a.scope}});
  manifest["artifacts"] = arr;
  manifest["results"] = {{"test_median_mae_model", model_table.summary.median_mae},
                         {"test_median_mae_baseline", probe_table.summary.median_mae},
                         {"test_cdf_at_marker_model", eval::cdf_at(model_cdf, marker)},
                         {"median_validation_ratio", eval::median(ratios)}};
  const fs::path manifest_path = out / "manifest.json";
  write_file(manifest_path, json_text(manifest));
  return manifest_path;
}

namespace {

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flags;
};

std::string flag_name(std::string_view key) {
  std::string s(key);
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

void add_keys(Command& cmd, std::initializer_list<std::string_view> keys) {
  for (const auto key : keys) {
    const auto& k = *std::find_if(config_keys().begin(), config_keys().end(),
                                  [&](const ConfigKey& c) { return c.key == key; });
    auto& slot = cmd.flag_values[std::string(key)];
    cmd.flags[std::string(key)] =
        cmd.app->add_option(flag_name(key), slot, std::string(k.help))->default_str(std::string(k.default_value));
  }
}

Command make_command(CLI::App& app, const std::string& name, const std::string& help,
                     std::initializer_list<std::string_view> keys) {
  Command cmd;
  cmd.app = app.add_subcommand(name, help);
  cmd.app->add_option("--config", cmd.config_file, "flat key = value config file; flags take precedence");
  add_keys(cmd, {"seed", "out", "jobs"});
  add_keys(cmd, keys);
  return cmd;
}

RunConfig resolve(const Command& cmd, std::ostream& err, bool echo = true) {
  RunConfig c;
  if (!cmd.config_file.empty()) c.load_file(cmd.config_file);
  for (const auto& [key, opt] : cmd.flags) {
    if (opt->count() > 0) c.set(key, cmd.flag_values.at(key));
  }
  if (echo) {
    err << "effective config:\n";
    std::istringstream lines(c.echo());
    for (std::string line; std::getline(lines, line);) err << "  " << line << "\n";
  }
  return c;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object position regression from wrist-camera images and prompts", "wristloc"};
  app.require_subcommand(1);

  auto gen = make_command(app, "gen-data", "render a synthetic dataset",
                          {"objects", "sequences", "multi_object_prob", "unusual_lighting_prob"});
  auto split = make_command(app, "split", "group-aware test split and k folds",
                            {"data", "split", "test_fraction", "folds"});
  const std::initializer_list<std::string_view> train_keys = {
      "data", "split", "test_fraction", "folds", "fold", "epochs", "learning_rate", "momentum",
      "huber_delta", "batch_size", "plateau_patience", "plateau_min_delta", "plateau_relative_delta",
      "max_grad_norm", "weight_decay"};
  auto train_cmd = make_command(app, "train", "train adapters and head on one fold", train_keys);
  add_keys(train_cmd, {"lora_rank", "lora_alpha", "hidden"});
  auto base_cmd = make_command(app, "train-baseline", "train the linear probe on one fold", train_keys);
  auto eval_cmd = make_command(app, "eval", "evaluate a checkpoint on the test split",
                               {"checkpoint", "data", "split", "test_fraction", "folds", "cdf_marker"});
  auto analyze = make_command(app, "analyze", "hypothesis tests, spread and outliers over an error table",
                              {"errors", "outlier_threshold", "alpha", "histogram_bins"});
  std::vector<std::string_view> all;
  for (const auto& k : config_keys()) {
    if (k.key != "seed" && k.key != "out" && k.key != "jobs" && k.key != "data" && k.key != "split" &&
        k.key != "checkpoint" && k.key != "errors" && k.key != "fold") {
      all.push_back(k.key);
    }
  }
  auto pipeline = make_command(app, "pipeline", "gen-data, split, k-fold training, evaluation, analysis", {});
  for (const auto key : all) add_keys(pipeline, {key});

  auto predict = make_command(app, "predict", "position (or general answer) for one image and prompt", {});
  std::string ckpt, image, prompt;
  predict.app->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  predict.app->add_option("--image", image, "PNG image")->required();
  predict.app->add_option("--prompt", prompt, "prompt text")->required();

  auto* route_cmd = app.add_subcommand("route-check", "print which path a prompt takes");
  std::string route_prompt;
  std::string signifier(kDefaultSignifier);
  route_cmd->add_option("prompt", route_prompt, "prompt text")->required();
  route_cmd->add_option("--signifier", signifier, "word that selects the general path")->capture_default_str();

  std::vector<std::string> argv;
  argv.reserve(args.size());
  for (auto it = args.rbegin(); it != args.rend(); ++it) argv.push_back(*it);
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (gen.app->parsed()) {
      cmd_gen_data(resolve(gen, err), out);
    } else if (split.app->parsed()) {
      cmd_split(resolve(split, err), out);
    } else if (train_cmd.app->parsed()) {
      const auto c = resolve(train_cmd, err);
      train_command(c, out, model::PositionModel(c.model_config()), train::train, "model");
    } else if (base_cmd.app->parsed()) {
      const auto c = resolve(base_cmd, err);
      train_command(c, out, model::LinearProbe(model::ModelConfig{}.backbone), train::train_baseline, "baseline");
    } else if (eval_cmd.app->parsed()) {
      cmd_eval(resolve(eval_cmd, err), out);
    } else if (analyze.app->parsed()) {
      cmd_analyze(resolve(analyze, err), out);
    } else if (pipeline.app->parsed()) {
      const auto path = cmd_pipeline(resolve(pipeline, err), err);
      out << path.string() << "\n";
    } else if (predict.app->parsed()) {
      resolve(predict, err, false);
      cmd_predict(ckpt, image, prompt, out);
    } else if (route_cmd->parsed()) {
      out << to_string(route(route_prompt, signifier).path) << "\n";
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[" << to_string(ErrorCode::IOFailure) << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace wristloc::cli
