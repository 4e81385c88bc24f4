// cosmic: train, evaluate and probe the commonsense-aware emotion model.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cosmic/ablation.hpp"
#include "cosmic/checkpoint.hpp"
#include "cosmic/dataset.hpp"
#include "cosmic/gradcheck.hpp"
#include "cosmic/kernels.hpp"
#include "cosmic/synth.hpp"
#include "cosmic/tape.hpp"
#include "cosmic/trainer.hpp"

namespace fs = std::filesystem;
using namespace cosmic;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

// Raised for anything the operator can fix by changing flags or inputs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string manifest;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 1;
  std::size_t hidden = 150;
  std::string mode = "uni";
  std::size_t epochs = 50;
  double lr = 1e-4;
  bool no_speaker_cs = false;
  bool no_listener_cs = false;
  double tolerance = 1e-4;
  int threads = 1;
  std::size_t batch = 1;
  double dropout = 0.0;
  double clip = 0.0;
  bool coarse = false;
  std::string split = "test";
  std::size_t seeds = 1;
  bool inject_fault = false;
  SynthConfig synth;
  std::string format = "jsonl";
};

struct LoadedData {
  Dataset data;
  DatasetManifest manifest;
};

LoadedData load(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("--manifest is required");
  if (!fs::exists(cfg.manifest)) throw ConfigError("manifest not found: " + cfg.manifest);
  try {
    LoadedData d;
    d.manifest = read_manifest(cfg.manifest);
    d.data = load_dataset(d.manifest);
    if (cfg.coarse) d.manifest = regroup_dataset(d.data, d.manifest);
    return d;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

Ablation ablation_of(const RunConfig& cfg) { return {cfg.no_speaker_cs, cfg.no_listener_cs}; }

Mode mode_of(const RunConfig& cfg) {
  try {
    return parse_mode(cfg.mode);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;
  tc.ablation = ablation_of(cfg);
  tc.dropout = cfg.dropout;
  tc.clip_norm = cfg.clip;
  tc.conversations_per_step = cfg.batch;
  tc.threads = cfg.threads;
  return tc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text << '\n';
}

// Only the active subcommand's settings, in a form --config reads back.
std::string effective_config(const CLI::App& app) {
  const auto subs = app.get_subcommands();
  const std::string prefix = subs.empty() ? "" : subs.front()->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  std::string line, out;
  while (std::getline(all, line)) {
    if (line.rfind(prefix, 0) == 0) out += line + '\n';
  }
  return out;
}

fs::path prepare_out(const RunConfig& cfg, const CLI::App& app) {
  if (cfg.out.empty()) return {};
  fs::create_directories(cfg.out);
  write_text(fs::path(cfg.out) / "effective_config.toml", effective_config(app));
  return cfg.out;
}

int cmd_train(const RunConfig& cfg, const CLI::App& app) {
  if (cfg.out.empty() && cfg.checkpoint.empty()) throw ConfigError("train needs --out or --checkpoint");
  const Mode mode = mode_of(cfg);
  LoadedData d = load(cfg);
  const fs::path out = prepare_out(cfg, app);
  const FeatureDims fd = feature_dims(d.data);
  const ModelDims dims{fd.utterance, fd.commonsense, cfg.hidden, d.manifest.num_classes()};

  TrainConfig tc = train_config(cfg);
  tc.on_epoch = [](const EpochRecord& r) {
    if (r.epoch == 0) {
      std::fprintf(stderr, "epoch %3zu  val %.4f\n", r.epoch, r.val_metric);
    } else {
      std::fprintf(stderr, "epoch %3zu  loss %.5f  val %.4f  val_acc %.4f\n", r.epoch, r.train_loss, r.val_metric,
                   r.val_accuracy);
    }
  };
  const TrainResult result = train(CosmicParams::initialized(dims, mode, cfg.seed), d.data, d.manifest, tc);

  const fs::path ckpt = cfg.checkpoint.empty() ? out / "checkpoint.bin" : fs::path(cfg.checkpoint);
  save_checkpoint(ckpt, result.best);
  const std::string metric = d.manifest.headline_metric;
  if (!out.empty()) {
    write_text(out / "history.json", history_to_json(result, metric));
    write_text(out / "val_report.json", to_json(evaluate(result.best, d.data.val, d.manifest, tc.ablation, cfg.threads)));
  }
  std::printf("best epoch %zu, validation %s %.4f, checkpoint %s\n", result.best_epoch, metric.c_str(),
              result.best_metric, ckpt.string().c_str());
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const CLI::App& app) {
  if (cfg.checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  if (!fs::exists(cfg.checkpoint)) throw ConfigError("checkpoint not found: " + cfg.checkpoint);
  LoadedData d = load(cfg);
  const fs::path out = prepare_out(cfg, app);
  CosmicParams params;
  try {
    params = load_checkpoint(cfg.checkpoint);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const std::vector<Conversation>* split = nullptr;
  if (cfg.split == "train") split = &d.data.train;
  if (cfg.split == "val") split = &d.data.val;
  if (cfg.split == "test") split = &d.data.test;
  if (!split) throw ConfigError("--split must be train, val or test");
  if (split->empty()) throw ConfigError(cfg.split + " split is empty");
  const FeatureDims fd = feature_dims(d.data);
  if (params.dims().utterance != fd.utterance || params.dims().commonsense != fd.commonsense ||
      params.dims().classes != d.manifest.num_classes()) {
    throw ConfigError("checkpoint dimensions do not match the dataset");
  }
  const std::string report = to_json(evaluate(params, *split, d.manifest, ablation_of(cfg), cfg.threads));
  std::cout << report << '\n';
  if (!out.empty()) write_text(out / "eval_report.json", report);
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, const CLI::App&) {
  if (cfg.tolerance < 0) throw ConfigError("--tolerance must be non-negative");
  GradCheckConfig gc;
  gc.seed = cfg.seed;
  gc.tolerance = cfg.tolerance;
  gc.mode = mode_of(cfg);
  gc.ablation = ablation_of(cfg);
  ad::debug::inject_backward_fault(cfg.inject_fault);
  const GradCheckReport r = run_gradcheck(gc);
  ad::debug::inject_backward_fault(false);
  for (const TensorCheck& t : r.tensors) {
    std::printf("%-4s %-28s %6zu elems  max rel err %.3e\n", t.passed ? "ok" : "FAIL", t.name.c_str(), t.elements,
                t.max_rel_error);
  }
  std::printf("%s: max relative error %.3e (tolerance %.1e), %.2f s\n", r.passed ? "PASS" : "FAIL",
              r.max_rel_error, cfg.tolerance, r.seconds);
  return r.passed ? kOk : kRuntimeFailure;
}

int cmd_ablate(const RunConfig& cfg, const CLI::App& app) {
  LoadedData d = load(cfg);
  const fs::path out = prepare_out(cfg, app);
  AblationConfig ac;
  ac.train = train_config(cfg);
  ac.hidden = cfg.hidden;
  ac.mode = mode_of(cfg);
  ac.seeds.clear();
  for (std::size_t k = 0; k < cfg.seeds; ++k) ac.seeds.push_back(cfg.seed + k);
  const auto rows = run_ablation(d.data, d.manifest, ac);
  std::cout << format_ablation_table(rows, d.manifest.headline_metric);
  if (!out.empty()) write_text(out / "ablation.json", ablation_to_json(rows, d.manifest.headline_metric));
  return kOk;
}

int cmd_synth(const RunConfig& cfg, const CLI::App& app) {
  if (cfg.out.empty()) throw ConfigError("synth requires --out");
  SynthConfig sc = cfg.synth;
  sc.seed = cfg.seed;
  SynthDataset s;
  try {
    s = synth_generate(sc);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.format == "packed") {
    s.manifest.format = FeatureFormat::packed;
  } else if (cfg.format != "jsonl") {
    throw ConfigError("--format must be jsonl or packed");
  }
  prepare_out(cfg, app);
  write_dataset(cfg.out, s.data, s.manifest);
  std::printf("wrote %zu/%zu/%zu dialogues to %s\n", s.data.train.size(), s.data.val.size(), s.data.test.size(),
              (fs::path(cfg.out) / "manifest.json").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COSMIC conversational emotion recognition"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags override it)");
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig cfg;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_option("--threads", cfg.threads, "OpenMP worker threads (1 = bit-reproducible)")->capture_default_str();
  };
  const auto model_opts = [&](CLI::App* sub) {
    sub->add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)");
    sub->add_option("--hidden", cfg.hidden, "Hidden size of every state")->capture_default_str();
    sub->add_option("--mode", cfg.mode, "uni or bi")->capture_default_str();
    sub->add_flag("--no-speaker-cs", cfg.no_speaker_cs, "Zero the speaker commonsense channels");
    sub->add_flag("--no-listener-cs", cfg.no_listener_cs, "Zero the listener commonsense channels");
    sub->add_flag("--coarse", cfg.coarse, "Evaluate on the manifest's coarse label grouping");
  };
  const auto train_opts = [&](CLI::App* sub) {
    sub->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--batch", cfg.batch, "Conversations per Adam step")->capture_default_str();
    sub->add_option("--dropout", cfg.dropout, "Pre-classifier dropout rate")->capture_default_str();
    sub->add_option("--clip", cfg.clip, "Gradient-norm clip (0 = off)")->capture_default_str();
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train and write the best checkpoint");
  common(train_cmd);
  model_opts(train_cmd);
  train_opts(train_cmd);
  train_cmd->add_option("--checkpoint", cfg.checkpoint, "Checkpoint path (default <out>/checkpoint.bin)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(eval_cmd);
  model_opts(eval_cmd);
  eval_cmd->add_option("--checkpoint", cfg.checkpoint, "Checkpoint to evaluate");
  eval_cmd->add_option("--split", cfg.split, "train, val or test")->capture_default_str();

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  common(grad_cmd);
  grad_cmd->add_option("--tolerance", cfg.tolerance, "Relative error tolerance")->capture_default_str();
  grad_cmd->add_option("--mode", cfg.mode, "uni or bi")->capture_default_str();
  grad_cmd->add_flag("--no-speaker-cs", cfg.no_speaker_cs, "Zero the speaker commonsense channels");
  grad_cmd->add_flag("--no-listener-cs", cfg.no_listener_cs, "Zero the listener commonsense channels");
  grad_cmd->add_flag("--inject-backward-fault", cfg.inject_fault, "Corrupt a backward rule (negative control)")
      ->group("");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Train and compare the four commonsense ablations");
  common(ablate_cmd);
  model_opts(ablate_cmd);
  train_opts(ablate_cmd);
  ablate_cmd->add_option("--seeds", cfg.seeds, "Number of consecutive seeds per setting")->capture_default_str();

  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset and manifest");
  common(synth_cmd);
  synth_cmd->add_option("--train-dialogues", cfg.synth.train_dialogues, "Dialogues in the train split")->capture_default_str();
  synth_cmd->add_option("--val-dialogues", cfg.synth.val_dialogues, "Dialogues in the validation split")->capture_default_str();
  synth_cmd->add_option("--test-dialogues", cfg.synth.test_dialogues, "Dialogues in the test split")->capture_default_str();
  synth_cmd->add_option("--classes", cfg.synth.classes, "Number of emotion classes")->capture_default_str();
  synth_cmd->add_option("--min-speakers", cfg.synth.min_speakers, "Fewest participants per dialogue")->capture_default_str();
  synth_cmd->add_option("--max-speakers", cfg.synth.max_speakers, "Most participants per dialogue")->capture_default_str();
  synth_cmd->add_option("--min-length", cfg.synth.min_length, "Shortest dialogue, in utterances")->capture_default_str();
  synth_cmd->add_option("--max-length", cfg.synth.max_length, "Longest dialogue, in utterances")->capture_default_str();
  synth_cmd->add_option("--p-shift", cfg.synth.p_shift, "Per-turn emotion-shift probability")->capture_default_str();
  synth_cmd->add_option("--noise", cfg.synth.noise, "Gaussian noise scale")->capture_default_str();
  synth_cmd->add_option("--utterance-dim", cfg.synth.utterance_dim, "Utterance feature size")->capture_default_str();
  synth_cmd->add_option("--commonsense-dim", cfg.synth.commonsense_dim, "Commonsense feature size")->capture_default_str();
  synth_cmd->add_option("--format", cfg.format, "jsonl or packed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }
  if (cfg.threads < 1) {
    std::cerr << "error: --threads must be at least 1\n";
    return kUsageError;
  }
  omp_set_num_threads(cfg.threads);
  kernels::set_parallel(cfg.threads > 1);

  try {
    if (*train_cmd) return cmd_train(cfg, app);
    if (*eval_cmd) return cmd_eval(cfg, app);
    if (*grad_cmd) return cmd_gradcheck(cfg, app);
    if (*ablate_cmd) return cmd_ablate(cfg, app);
    if (*synth_cmd) return cmd_synth(cfg, app);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
