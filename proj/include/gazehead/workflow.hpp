#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazehead/cvae.hpp"
#include "gazehead/data_pipeline.hpp"
#include "gazehead/generation.hpp"
#include "gazehead/metrics.hpp"
#include "gazehead/synthetic_oracle.hpp"

// File-level steps behind each command-line subcommand. Every function reads
// only its inputs and writes only under its output path.
namespace gazehead::workflow {

struct SynthOptions {
  std::string out;  // frame-record file
  int sequences = 100;
  int frames = 600;
  double fps = 25.0;
  oracle::OracleParams params;
};

void synth(const SynthOptions& options);

struct PrepareFilesOptions {
  std::string input;
  std::string out_dir;
  data::PrepareOptions prepare;
};

struct PrepareSummary {
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::size_t rejected_videos = 0;
};

/// Writes train_manifest.jsonl, test_manifest.jsonl, rejections.csv and
/// test_frames.jsonl (the test windows as frame records at the model rate,
/// the usual input to generate).
PrepareSummary prepare(const PrepareFilesOptions& options);

inline constexpr const char* kTrainManifest = "train_manifest.jsonl";
inline constexpr const char* kTestManifest = "test_manifest.jsonl";
inline constexpr const char* kRejections = "rejections.csv";
inline constexpr const char* kTestFrames = "test_frames.jsonl";
inline constexpr const char* kModelFile = "model.ghc";
inline constexpr const char* kTrainLog = "train_log.csv";

struct TrainFilesOptions {
  std::string manifest;
  std::string out_dir;
  cvae::ModelConfig config;
  int checkpoint_every = 0;
  int log_every = 500;
};

/// Writes model.ghc, train_log.csv (one row per step) and, when
/// checkpoint_every > 0, checkpoint_step_<N>.ghc.
cvae::Checkpoint train(const TrainFilesOptions& options);

struct GenerateFilesOptions {
  std::string checkpoint;  // required for the cVAE methods
  std::string gaze;        // frame-record file, one or more videos
  std::string out;
  int k = 30;
  std::uint64_t seed = 0;
  generation::Method method = generation::Method::Cvae;
};

struct GenerateSummary {
  std::size_t videos = 0;
  std::size_t frames_generated = 0;
  std::size_t frames_dropped = 0;  // trailing frames beyond the last full window
};

/// Output lines are frame records with the generated pose under "head" plus
/// "sample", "kind" ("head") and "method".
GenerateSummary generate(const GenerateFilesOptions& options);

struct EvaluateFilesOptions {
  std::string manifest;
  std::string generated_dir;  // one *.jsonl per method
  std::string out;            // report CSV
  int k = 30;
};

/// Writes the report plus "<stem>_trajectories.csv" beside it (real and
/// generated trajectories of the first test sequence).
std::vector<metrics::EvalReport> evaluate(const EvaluateFilesOptions& options);

/// Builds evaluation inputs from manifest sequences and generated samples
/// keyed by sequence id; the first k samples of each sequence are used.
struct GeneratedSet {
  std::string method;
  // sequence id -> samples
  std::vector<std::pair<std::string, std::vector<MotionSequence>>> sequences;
};
GeneratedSet read_generated(const std::string& path, double fps);

std::vector<metrics::EvalInput> evaluation_inputs(const data::DatasetManifest& manifest,
                                                  const GeneratedSet& generated, int k);

struct PlotOptions {
  std::vector<std::string> reports;
  std::string out_dir;
};

/// Per-metric bar charts (SVG), comparison.csv / comparison.md, and pitch/yaw
/// trajectory plots with their CSV when a trajectories file sits beside a
/// report.
void plot(const PlotOptions& options);

}  // namespace gazehead::workflow
