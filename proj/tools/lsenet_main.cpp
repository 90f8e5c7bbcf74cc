// Command-line front end. Links only the public C API; all functionality
// lives behind the shared library.
#include <lsenet/lsenet.h>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

int exit_code(lsen_status rc) {
  switch (rc) {
    case LSEN_OK: return kExitOk;
    case LSEN_ERR_NUMERIC: return kExitNumeric;
    default: return kExitUsage;
  }
}

int fail(lsen_status rc) {
  std::fprintf(stderr, "error: %s\n", lsen_last_error());
  return exit_code(rc);
}

struct ConfigDeleter {
  void operator()(lsen_config* c) const { lsen_config_destroy(c); }
};
struct ModelDeleter {
  void operator()(lsen_model* m) const { lsen_model_destroy(m); }
};
struct DatasetDeleter {
  void operator()(lsen_dataset* d) const { lsen_dataset_destroy(d); }
};
using ConfigPtr = std::unique_ptr<lsen_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<lsen_model, ModelDeleter>;
using DatasetPtr = std::unique_ptr<lsen_dataset, DatasetDeleter>;

// Options shared by the subcommands; applied onto the config in a fixed
// order: file first, then flag overrides.
struct CommonOpts {
  std::string config_file;
  std::string out_dir;
  std::string seed;
  std::vector<std::string> ablate;
  std::string patch_size, layers;
  int threads = 0;
  bool synthetic = false;
  std::vector<std::string> sets;  // raw key=value overrides
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_file, "key=value config file with [section] headers");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "root seed (split per subsystem)");
  cmd->add_option("--ablate", o.ablate, "disable modules: mff, pie, crd")
      ->check(CLI::IsMember({"mff", "pie", "crd"}));
  cmd->add_option("--patch-size", o.patch_size, "attention patch size");
  cmd->add_option("--layers", o.layers, "encoder/decoder depth");
  cmd->add_option("--device-threads", o.threads, "worker threads (0 = auto)");
  cmd->add_flag("--synthetic", o.synthetic, "use the synthetic generator instead of a dataset");
  cmd->add_option("--set", o.sets, "extra override as section.key=value (repeatable)");
}

lsen_status apply_common(lsen_config* cfg, const CommonOpts& o) {
  lsen_status rc = LSEN_OK;
  if (!o.config_file.empty() && (rc = lsen_config_load_file(cfg, o.config_file.c_str())))
    return rc;
  auto set = [&](const char* key, const std::string& value) -> lsen_status {
    return value.empty() ? LSEN_OK : lsen_config_set(cfg, key, value.c_str());
  };
  if ((rc = set("run.out_dir", o.out_dir))) return rc;
  if ((rc = set("run.seed", o.seed))) return rc;
  if ((rc = set("model.patch_size", o.patch_size))) return rc;
  if ((rc = set("model.layers", o.layers))) return rc;
  for (const auto& mod : o.ablate)
    if ((rc = lsen_config_set(cfg, ("model.enable_" + mod).c_str(), "false"))) return rc;
  if (o.synthetic && (rc = lsen_config_set(cfg, "run.synthetic", "true"))) return rc;
  if (o.threads > 0) {
    if ((rc = lsen_config_set(cfg, "run.threads", std::to_string(o.threads).c_str()))) return rc;
    lsen_set_threads(o.threads);
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return LSEN_ERR_ARGUMENT;
    }
    if ((rc = lsen_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())))
      return rc;
  }
  return lsen_config_finalize(cfg);
}

std::string config_value(lsen_config* cfg, const std::string& section, const std::string& key) {
  // Reads one value back out of the canonical echo.
  std::vector<char> buf(16384);
  if (lsen_config_echo(cfg, buf.data(), buf.size()) != LSEN_OK) return "";
  std::istringstream is(buf.data());
  std::string line, current;
  while (std::getline(is, line)) {
    if (!line.empty() && line.front() == '[' && line.back() == ']')
      current = line.substr(1, line.size() - 2);
    else if (current == section && line.rfind(key + "=", 0) == 0)
      return line.substr(key.size() + 1);
  }
  return "";
}

lsen_status echo_config(lsen_config* cfg, const std::string& out_dir) {
  std::vector<char> buf(16384);
  lsen_status rc = lsen_config_echo(cfg, buf.data(), buf.size());
  if (rc != LSEN_OK) return rc;
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/config.effective.ini", std::ios::trunc);
  os << buf.data();
  return LSEN_OK;
}

// Builds train/val/test datasets either synthetically or from disk.
lsen_status make_splits(lsen_config* cfg, DatasetPtr& train, DatasetPtr& val, DatasetPtr& test) {
  const bool synthetic = config_value(cfg, "run", "synthetic") == "1";
  if (synthetic) {
    const int n_train = std::stoi(config_value(cfg, "synth", "train_count"));
    const int n_val = std::stoi(config_value(cfg, "synth", "val_count"));
    const int n_test = std::stoi(config_value(cfg, "synth", "test_count"));
    lsen_dataset* d = nullptr;
    lsen_status rc;
    if ((rc = lsen_dataset_synth(cfg, n_train, 0, &d))) return rc;
    train.reset(d);
    if ((rc = lsen_dataset_synth(cfg, n_val, n_train, &d))) return rc;
    val.reset(d);
    if ((rc = lsen_dataset_synth(cfg, n_test, n_train + n_val, &d))) return rc;
    test.reset(d);
    return LSEN_OK;
  }
  const std::string root = config_value(cfg, "run", "data_root");
  if (root.empty()) {
    std::fprintf(stderr, "error: no dataset: pass --synthetic or set run.data_root\n");
    return LSEN_ERR_ARGUMENT;
  }
  lsen_dataset* d = nullptr;
  lsen_status rc;
  if ((rc = lsen_dataset_load(root.c_str(), "train", &d))) return rc;
  train.reset(d);
  if ((rc = lsen_dataset_load(root.c_str(), "val", &d))) return rc;
  val.reset(d);
  if ((rc = lsen_dataset_load(root.c_str(), "test", &d))) return rc;
  test.reset(d);
  return LSEN_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lsenet: patch-attention vessel segmentation toolchain"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, predict_opts, summary_opts, gradcheck_opts, synth_opts;

  auto* cmd_train = app.add_subcommand("train", "train a model and report test metrics");
  add_common(cmd_train, train_opts);
  std::string resume;
  cmd_train->add_option("--resume", resume, "checkpoint to resume from");

  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  add_common(cmd_eval, eval_opts);
  std::string eval_ckpt, eval_root, eval_split = "test";
  cmd_eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  cmd_eval->add_option("--data", eval_root, "dataset root directory");
  cmd_eval->add_option("--split", eval_split, "train, val or test");

  auto* cmd_predict = app.add_subcommand("predict", "write probability/mask maps for images");
  add_common(cmd_predict, predict_opts);
  std::string pred_ckpt;
  bool pred_heat = false;
  std::vector<std::string> pred_images;
  cmd_predict->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  cmd_predict->add_flag("--heatmap", pred_heat, "also dump per-layer attention maps");
  cmd_predict->add_option("images", pred_images, "input PNG images")->required();

  auto* cmd_summary = app.add_subcommand("summary", "parameter and FLOP accounting");
  add_common(cmd_summary, summary_opts);
  int sum_h = 224, sum_w = 224;
  cmd_summary->add_option("--height", sum_h, "input height for FLOP accounting");
  cmd_summary->add_option("--width", sum_w, "input width for FLOP accounting");

  auto* cmd_gradcheck = app.add_subcommand("gradcheck", "end-to-end gradient verification");
  add_common(cmd_gradcheck, gradcheck_opts);
  double gc_tolerance = 1e-4;
  cmd_gradcheck->add_option("--tolerance", gc_tolerance, "maximum relative error accepted");

  auto* cmd_synth = app.add_subcommand("synth", "write a synthetic dataset to disk");
  add_common(cmd_synth, synth_opts);

  CLI11_PARSE(app, argc, argv);

  ConfigPtr cfg(lsen_config_create());
  lsen_status rc;

  if (cmd_train->parsed()) {
    if ((rc = apply_common(cfg.get(), train_opts))) return fail(rc);
    const std::string out_dir = config_value(cfg.get(), "run", "out_dir");
    if ((rc = echo_config(cfg.get(), out_dir))) return fail(rc);
    DatasetPtr train, val, test;
    if ((rc = make_splits(cfg.get(), train, val, test))) return fail(rc);
    lsen_model* raw = nullptr;
    if ((rc = lsen_model_build(cfg.get(), &raw))) return fail(rc);
    ModelPtr model(raw);
    std::printf("training: %d train / %d val / %d test samples, %lld parameters\n",
                lsen_dataset_size(train.get()), lsen_dataset_size(val.get()),
                lsen_dataset_size(test.get()),
                static_cast<long long>(lsen_model_param_count(model.get())));
    if ((rc = lsen_train(cfg.get(), model.get(), train.get(), val.get(), out_dir.c_str(),
                         resume.empty() ? nullptr : resume.c_str())))
      return fail(rc);
    // Final report on the test split with the best checkpoint.
    lsen_model* best = nullptr;
    const std::string best_path = out_dir + "/best.ckpt";
    if ((rc = lsen_model_load(best_path.c_str(), &best))) return fail(rc);
    ModelPtr best_model(best);
    char aggregate[512];
    if ((rc = lsen_evaluate(best_model.get(), test.get(), "test",
                            (out_dir + "/metrics_test.csv").c_str(), aggregate,
                            sizeof(aggregate))))
      return fail(rc);
    std::printf("%s\n", aggregate);
    return kExitOk;
  }

  if (cmd_eval->parsed()) {
    if ((rc = apply_common(cfg.get(), eval_opts))) return fail(rc);
    lsen_model* raw = nullptr;
    if ((rc = lsen_model_load(eval_ckpt.c_str(), &raw))) return fail(rc);
    ModelPtr model(raw);
    DatasetPtr data;
    if (eval_root.empty()) eval_root = config_value(cfg.get(), "run", "data_root");
    lsen_dataset* d = nullptr;
    if (config_value(cfg.get(), "run", "synthetic") == "1") {
      const int n = std::stoi(config_value(cfg.get(), "synth", "test_count"));
      const int base = std::stoi(config_value(cfg.get(), "synth", "train_count")) +
                       std::stoi(config_value(cfg.get(), "synth", "val_count"));
      if ((rc = lsen_dataset_synth(cfg.get(), n, base, &d))) return fail(rc);
    } else {
      if (eval_root.empty()) {
        std::fprintf(stderr, "error: eval needs --data (or --synthetic)\n");
        return kExitUsage;
      }
      if ((rc = lsen_dataset_load(eval_root.c_str(), eval_split.c_str(), &d))) return fail(rc);
    }
    data.reset(d);
    const std::string out_dir = config_value(cfg.get(), "run", "out_dir");
    std::filesystem::create_directories(out_dir);
    const std::string csv = out_dir + "/metrics_" + eval_split + ".csv";
    char aggregate[512];
    if ((rc = lsen_evaluate(model.get(), data.get(), eval_split.c_str(), csv.c_str(), aggregate,
                            sizeof(aggregate))))
      return fail(rc);
    std::ifstream echo_rows(csv);
    std::string line;
    while (std::getline(echo_rows, line)) std::printf("%s\n", line.c_str());
    return kExitOk;
  }

  if (cmd_predict->parsed()) {
    if ((rc = apply_common(cfg.get(), predict_opts))) return fail(rc);
    lsen_model* raw = nullptr;
    if ((rc = lsen_model_load(pred_ckpt.c_str(), &raw))) return fail(rc);
    ModelPtr model(raw);
    const std::string out_dir = config_value(cfg.get(), "run", "out_dir");
    std::filesystem::create_directories(out_dir);
    for (const auto& img : pred_images) {
      const std::string stem = std::filesystem::path(img).stem().string();
      const std::string prob = out_dir + "/" + stem + "_prob.png";
      const std::string mask = out_dir + "/" + stem + "_mask.png";
      const std::string heat = out_dir + "/" + stem + "_heatmap";
      if ((rc = lsen_predict(model.get(), img.c_str(), prob.c_str(), mask.c_str(),
                             pred_heat ? heat.c_str() : nullptr)))
        return fail(rc);
      std::printf("%s -> %s, %s\n", img.c_str(), prob.c_str(), mask.c_str());
    }
    return kExitOk;
  }

  if (cmd_summary->parsed()) {
    if ((rc = apply_common(cfg.get(), summary_opts))) return fail(rc);
    lsen_model* raw = nullptr;
    if ((rc = lsen_model_build(cfg.get(), &raw))) return fail(rc);
    ModelPtr model(raw);
    std::vector<char> buf(65536);
    if ((rc = lsen_model_summary(model.get(), sum_h, sum_w, buf.data(), buf.size())))
      return fail(rc);
    std::printf("%s", buf.data());
    return kExitOk;
  }

  if (cmd_gradcheck->parsed()) {
    if ((rc = apply_common(cfg.get(), gradcheck_opts))) return fail(rc);
    const uint64_t seed = std::stoull(config_value(cfg.get(), "run", "seed"));
    double err = 0;
    if ((rc = lsen_grad_check(seed, &err))) return fail(rc);
    std::printf("gradcheck max relative error: %.3e (tolerance %.1e)\n", err, gc_tolerance);
    if (!(err < gc_tolerance)) {
      std::fprintf(stderr, "error: gradient check exceeded tolerance\n");
      return kExitNumeric;
    }
    return kExitOk;
  }

  if (cmd_synth->parsed()) {
    if ((rc = apply_common(cfg.get(), synth_opts))) return fail(rc);
    const std::string out_dir = config_value(cfg.get(), "run", "out_dir");
    if ((rc = echo_config(cfg.get(), out_dir))) return fail(rc);
    DatasetPtr train, val, test;
    lsen_config_set(cfg.get(), "run.synthetic", "true");
    lsen_config_finalize(cfg.get());
    if ((rc = make_splits(cfg.get(), train, val, test))) return fail(rc);
    if ((rc = lsen_dataset_save(train.get(), out_dir.c_str(), "train"))) return fail(rc);
    if ((rc = lsen_dataset_save(val.get(), out_dir.c_str(), "val"))) return fail(rc);
    if ((rc = lsen_dataset_save(test.get(), out_dir.c_str(), "test"))) return fail(rc);
    std::printf("wrote %d/%d/%d train/val/test pairs under %s\n",
                lsen_dataset_size(train.get()), lsen_dataset_size(val.get()),
                lsen_dataset_size(test.get()), out_dir.c_str());
    return kExitOk;
  }

  return kExitUsage;
}
