#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gazehead.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  gh_status status;
  std::string message;
};

void check(gh_status status) {
  if (status != GH_OK) throw Failure{status, gh_last_error()};
}

gh_log_level g_log_level = GH_LOG_INFO;

void info(const std::string& message) {
  if (g_log_level <= GH_LOG_INFO) std::fprintf(stderr, "[info] %s\n", message.c_str());
}

// One JSON object per line so failures can be parsed by wrappers.
void report_error(const std::string& subcommand, const std::string& kind, int code, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"code", code}, {"subcommand", subcommand}, {"message", message}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

std::string version_string() {
  return std::string("gazehead ") + gh_version() + " (checkpoint format " +
         std::to_string(gh_checkpoint_format_version()) + ")";
}

void write_run_record(const CLI::App& app, const CLI::App& sub, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{GH_ERR_IO, "cannot write run record '" + path.string() + "'"};
  out << "# " << version_string() << "\n";
  out << "# subcommand: " << sub.get_name() << "\n";
  // Global options plus the invoked subcommand's section.
  std::istringstream resolved(app.config_to_str(true, false));
  const std::string prefix = sub.get_name() + ".";
  for (std::string line; std::getline(resolved, line);) {
    const auto eq = line.find('=');
    const std::string key = line.substr(0, eq);
    if (key.rfind(prefix, 0) == 0 || key.find('.') == std::string::npos) out << line << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-conditioned head motion generation"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "Config file (flat dotted keys, e.g. train.steps = 3000)");
  app.set_version_flag("--version", version_string());
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug|info|warn|error|off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic gaze/head dataset");
  gh_synth_options so;
  gh_synth_options_default(&so);
  std::string synth_out;
  synth->add_option("--out", synth_out, "Frame-record output file")->required();
  synth->add_option("--sequences", so.sequences, "Number of sequences")->capture_default_str();
  synth->add_option("--frames", so.frames, "Frames per sequence")->capture_default_str();
  synth->add_option("--fps", so.fps, "Frame rate")->capture_default_str();
  synth->add_option("--seed", so.seed, "Random seed")->capture_default_str();
  synth->add_option("--gain-mean", so.oracle.gain_mean, "Mean head-follows-gaze gain")->capture_default_str();
  synth->add_option("--gain-std", so.oracle.gain_std, "Gain standard deviation")->capture_default_str();
  synth->add_option("--lag", so.oracle.lag_alpha, "Follow rate per frame at the reference rate")
      ->capture_default_str();
  synth->add_option("--bias-std", so.oracle.bias_std_deg, "Per-sequence head bias std (deg)")
      ->capture_default_str();
  synth->add_option("--noise-std", so.oracle.noise_std_deg, "Per-frame noise std (deg)")->capture_default_str();

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Filter, resample, window and split frame records");
  gh_prepare_options po;
  gh_prepare_options_default(&po);
  std::string prep_in, prep_out, cut_policy = "split";
  prepare->add_option("--input", prep_in, "Frame-record input file")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", prep_out, "Output directory")->required();
  prepare->add_option("--source-fps", po.source_fps, "Input frame rate")->capture_default_str();
  prepare->add_option("--model-fps", po.model_fps, "Model frame rate")->capture_default_str();
  prepare->add_option("--window", po.window, "Window length (frames)")->capture_default_str();
  prepare->add_option("--test-fraction", po.test_fraction, "Fraction of subjects held out")->capture_default_str();
  prepare->add_option("--max-bad-frames", po.max_bad_frames, "Max fraction of failed detections")
      ->capture_default_str();
  prepare->add_option("--scene-cut-policy", cut_policy, "split|drop")
      ->check(CLI::IsMember({"split", "drop"}))
      ->capture_default_str();
  prepare->add_option("--seed", po.seed, "Split seed")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model on a train manifest");
  gh_train_options to;
  gh_train_options_default(&to);
  std::string train_manifest, train_out, temporal = "true";
  gh_model_config& mc = to.config;
  train->add_option("--manifest", train_manifest, "Train manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--window", mc.window, "Window length (frames)")->capture_default_str();
  train->add_option("--latent-dim", mc.latent_dim, "Latent dimension")->capture_default_str();
  train->add_option("--encoder-hidden", mc.encoder_hidden, "Encoder hidden width")->capture_default_str();
  train->add_option("--decoder-hidden", mc.decoder_hidden, "Decoder hidden width")->capture_default_str();
  train->add_option("--feature-dim", mc.feature_dim, "Per-stream feature width")->capture_default_str();
  train->add_option("--kl-weight-max", mc.kl_weight_max, "Final KL weight")->capture_default_str();
  train->add_option("--kl-anneal-steps", mc.kl_anneal_steps, "KL warm-up steps")->capture_default_str();
  train->add_option("--context-dropout", mc.context_dropout, "Context dropout probability")->capture_default_str();
  train->add_option("--feature-dropout", mc.feature_dropout, "Feature dropout probability")->capture_default_str();
  train->add_option("--batch-size", mc.batch_size, "Batch size")->capture_default_str();
  train->add_option("--steps", mc.train_steps, "Optimizer steps")->capture_default_str();
  train->add_option("--lr", mc.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--temporal-modeling", temporal, "true|false; false trains the frame-local ablation")
      ->check(CLI::IsMember({"true", "false"}))
      ->capture_default_str();
  train->add_option("--checkpoint-every", to.checkpoint_every, "Intermediate checkpoint period (0 = off)")
      ->capture_default_str();
  train->add_option("--log-every", to.log_every, "Progress log period")->capture_default_str();
  train->add_option("--seed", mc.seed, "Initialization and sampling seed")->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "Generate head motion for gaze sequences");
  gh_generate_options go;
  gh_generate_options_default(&go);
  std::string gen_ckpt, gen_gaze, gen_out, method = "cvae";
  generate->add_option("--checkpoint", gen_ckpt, "Model checkpoint (cvae, no-temporal)");
  generate->add_option("--gaze", gen_gaze, "Frame-record file with gaze")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", gen_out, "Output file")->required();
  generate->add_option("--k", go.k, "Samples per sequence")->capture_default_str();
  generate->add_option("--seed", go.seed, "Sampling seed")->capture_default_str();
  generate->add_option("--method", method, "cvae|constant|mirror|no-temporal")
      ->check(CLI::IsMember({"cvae", "constant", "mirror", "no-temporal"}))
      ->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score generations against a test manifest");
  gh_evaluate_options eo;
  gh_evaluate_options_default(&eo);
  std::string eval_manifest, eval_dir, eval_out;
  std::uint64_t eval_seed = 0;
  evaluate->add_option("--manifest", eval_manifest, "Test manifest")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--generated", eval_dir, "Directory of generation files")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--k", eo.k, "Samples per input")->capture_default_str();
  evaluate->add_option("--out", eval_out, "Report CSV")->required();
  evaluate->add_option("--seed", eval_seed, "Unused; accepted for uniformity")->capture_default_str();

  // plot
  auto* plot = app.add_subcommand("plot", "Charts and comparison tables from reports");
  std::vector<std::string> plot_reports;
  std::string plot_out;
  std::uint64_t plot_seed = 0;
  plot->add_option("--report", plot_reports, "Report CSV (repeatable)")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->add_option("--seed", plot_seed, "Unused; accepted for uniformity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string sub;
    for (const auto* s : app.get_subcommands()) sub = s->get_name();
    report_error(sub, "usage", kExitUsage, e.what());
    std::fprintf(stderr, "%s", app.help().c_str());
    return kExitUsage;
  }

  static const std::map<std::string, gh_log_level> levels{{"debug", GH_LOG_DEBUG}, {"info", GH_LOG_INFO},
                                                          {"warn", GH_LOG_WARN},   {"error", GH_LOG_ERROR},
                                                          {"off", GH_LOG_OFF}};
  g_log_level = levels.at(log_level);
  gh_set_log_level(g_log_level);

  const CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == synth) {
      so.out = synth_out.c_str();
      check(gh_synth(&so));
      write_run_record(app, *sub, synth_out + ".run.toml");
    } else if (sub == prepare) {
      po.input = prep_in.c_str();
      po.out_dir = prep_out.c_str();
      po.scene_cut_policy = cut_policy == "drop" ? GH_SCENE_CUT_DROP : GH_SCENE_CUT_SPLIT;
      gh_prepare_summary summary{};
      check(gh_prepare(&po, &summary));
      info("prepare: " + std::to_string(summary.train_windows) + " train windows, " +
           std::to_string(summary.test_windows) + " test windows, " + std::to_string(summary.rejected_videos) +
           " rejected videos");
      write_run_record(app, *sub, fs::path(prep_out) / "run_record.toml");
    } else if (sub == train) {
      to.manifest = train_manifest.c_str();
      to.out_dir = train_out.c_str();
      mc.temporal_modeling = temporal == "true" ? 1 : 0;
      check(gh_train(&to));
      write_run_record(app, *sub, fs::path(train_out) / "run_record.toml");
    } else if (sub == generate) {
      check(gh_parse_method(method.c_str(), &go.method));
      go.checkpoint = gen_ckpt.empty() ? nullptr : gen_ckpt.c_str();
      go.gaze = gen_gaze.c_str();
      go.out = gen_out.c_str();
      gh_generate_summary summary{};
      check(gh_generate_file(&go, &summary));
      info("generate: " + std::to_string(summary.videos) + " sequences, " + std::to_string(summary.frames_dropped) +
           " trailing input frames not generated (partial final windows)");
      write_run_record(app, *sub, gen_out + ".run.toml");
    } else if (sub == evaluate) {
      eo.manifest = eval_manifest.c_str();
      eo.generated_dir = eval_dir.c_str();
      eo.out = eval_out.c_str();
      check(gh_evaluate(&eo));
      write_run_record(app, *sub, eval_out + ".run.toml");
    } else if (sub == plot) {
      std::vector<const char*> paths;
      for (const auto& r : plot_reports) paths.push_back(r.c_str());
      check(gh_plot(paths.data(), paths.size(), plot_out.c_str()));
      write_run_record(app, *sub, fs::path(plot_out) / "run_record.toml");
    }
  } catch (const Failure& f) {
    report_error(sub->get_name(), gh_status_name(f.status), static_cast<int>(f.status), f.message);
    return kExitFailure;
  } catch (const std::exception& e) {
    report_error(sub->get_name(), "internal", GH_ERR_INTERNAL, e.what());
    return kExitFailure;
  }
  return 0;
}
