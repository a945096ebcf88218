#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gazehead/motion_types.hpp"

namespace gazehead::data {

/// One video frame as emitted by the upstream face/gaze tooling. Angles are
/// radians in memory and degrees on disk.
struct FrameRecord {
  std::string video_id;
  std::string subject_id;
  std::int64_t frame_index = 0;
  std::optional<AngularPose> gaze;
  std::optional<AngularPose> head;
  int face_count = 1;
  bool glasses_flag = false;
  bool scene_cut_flag = false;

  /// A frame is usable when exactly one face was found and both estimates exist.
  bool is_clean() const { return face_count == 1 && gaze.has_value() && head.has_value(); }

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct VideoFrames {
  std::string video_id;
  std::string subject_id;
  std::vector<FrameRecord> frames;
};

// --- serialization -----------------------------------------------------------

/// Parses line-delimited frame records. Blank lines are skipped. Throws Parse
/// (with the 1-based line number) for malformed records and Validation for
/// out-of-order or duplicate frame indices.
std::vector<VideoFrames> ingest(std::istream& in);
std::vector<VideoFrames> ingest_file(const std::string& path);

std::string frame_record_to_json(const FrameRecord& record);
FrameRecord frame_record_from_json(const std::string& line);

void write_frame_records(std::ostream& out, const std::vector<VideoFrames>& videos);

// --- filtering ---------------------------------------------------------------

enum class SceneCutPolicy { Split, Drop };

struct FilterPolicy {
  double max_bad_frame_fraction = 0.10;
  SceneCutPolicy scene_cut_policy = SceneCutPolicy::Split;
};

struct Rejection {
  std::string video_id;
  std::string rule;  // "eyewear", "detection failures" or "scene cut"
  std::string detail;

  friend bool operator==(const Rejection&, const Rejection&) = default;
};

struct FilterResult {
  /// Clean, contiguous segments. A video that survives intact keeps its id;
  /// a video broken at scene cuts or at residual bad frames yields segments
  /// named "<video_id>/seg<k>".
  std::vector<VideoFrames> kept;
  std::vector<Rejection> rejections;
};

FilterResult filter_videos(const std::vector<VideoFrames>& videos, const FilterPolicy& policy);

// --- resampling and windowing ------------------------------------------------

/// Integer stride between source and model rates; throws Config when the
/// model rate does not divide the source rate.
std::size_t resample_stride(double source_fps, double model_fps);

/// Keeps every stride-th frame starting at index 0.
VideoFrames resample(const VideoFrames& video, double source_fps, double model_fps);

struct WindowRecord {
  std::string sequence_id;
  std::string subject_id;
  int window_index = 0;
  std::int64_t start_frame = 0;
  MotionWindow window;

  friend bool operator==(const WindowRecord&, const WindowRecord&) = default;
};

/// Non-overlapping T-frame windows; window k > 0 carries the last two real
/// head poses of window k - 1 as context. Trailing frames are dropped.
std::vector<WindowRecord> make_windows(const VideoFrames& video, std::size_t window_length,
                                       std::size_t context_length = 2);

// --- normalization -----------------------------------------------------------

/// Per-dimension z-score statistics in radians, ordered
/// (gaze pitch, gaze yaw, head pitch, head yaw).
struct NormStats {
  std::array<double, 4> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> std{1.0, 1.0, 1.0, 1.0};

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Columns are frames, rows are (pitch, yaw).
using PoseMatrix = Eigen::Matrix<double, 2, Eigen::Dynamic>;

PoseMatrix normalize(std::span<const AngularPose> poses, const NormStats& stats, MotionKind kind);
std::vector<AngularPose> denormalize(const PoseMatrix& values, const NormStats& stats,
                                     MotionKind kind);

// --- manifests ---------------------------------------------------------------

enum class Split { Train, Test };

const char* split_name(Split split);

struct DatasetManifest {
  Split split = Split::Train;
  double source_fps = 25.0;
  double model_fps = 5.0;
  int window_length = 12;
  NormStats normalization;
  std::vector<WindowRecord> windows;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Zero-variance dimensions fall back to std = 1 with a warning.
NormStats compute_norm_stats(const std::vector<WindowRecord>& windows);

struct SplitResult {
  DatasetManifest train;
  DatasetManifest test;
};

/// Deterministic subject-disjoint split. At least one subject lands on each
/// side; throws Config with fewer than two subjects.
SplitResult split_by_subject(const std::vector<WindowRecord>& windows, double test_fraction,
                             std::uint64_t seed, double source_fps, double model_fps,
                             int window_length);

void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void write_manifest_file(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(std::istream& in);
DatasetManifest read_manifest_file(const std::string& path);

void write_rejections_csv(std::ostream& out, const std::vector<Rejection>& rejections);

/// Windows of one source sequence, in window order.
struct SequenceGroup {
  std::string sequence_id;
  std::string subject_id;
  std::vector<const WindowRecord*> windows;

  MotionSequence gaze(double fps) const;
  MotionSequence head(double fps) const;
};

/// Groups consecutive windows by sequence id (order of first appearance).
std::vector<SequenceGroup> group_sequences(const DatasetManifest& manifest);

// --- end-to-end preparation --------------------------------------------------

struct PrepareOptions {
  double source_fps = 25.0;
  double model_fps = 5.0;
  int window_length = 12;
  double test_fraction = 0.1;
  FilterPolicy filter;
  std::uint64_t seed = 0;
};

struct PrepareResult {
  SplitResult split;
  std::vector<Rejection> rejections;
};

PrepareResult prepare(const std::vector<VideoFrames>& videos, const PrepareOptions& options);

}  // namespace gazehead::data
