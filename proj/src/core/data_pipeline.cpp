#include "gazehead/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "gazehead/error.hpp"
#include "gazehead/log.hpp"
#include "gazehead/random.hpp"

namespace gazehead::data {

using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "gazehead-manifest";
constexpr int kManifestVersion = 1;

json pose_to_json(const std::optional<AngularPose>& pose) {
  if (!pose) return nullptr;
  return json{{"pitch", rad_to_deg(pose->pitch)}, {"yaw", rad_to_deg(pose->yaw)}};
}

std::optional<AngularPose> pose_from_json(const json& j, const char* field) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  const json& p = j.at(field);
  if (!p.is_object() || !p.contains("pitch") || !p.contains("yaw") ||
      !p.at("pitch").is_number() || !p.at("yaw").is_number()) {
    throw std::invalid_argument(std::string("field '") + field +
                                "' must be null or {pitch, yaw} numbers");
  }
  const AngularPose raw{deg_to_rad(p.at("pitch").get<double>()),
                        deg_to_rad(p.at("yaw").get<double>())};
  if (!std::isfinite(raw.pitch) || !std::isfinite(raw.yaw)) {
    throw std::invalid_argument(std::string("field '") + field + "' is not finite");
  }
  return canonicalize(raw);
}

json pair_array(const AngularPose& p) { return json::array({rad_to_deg(p.pitch), rad_to_deg(p.yaw)}); }

json pose_list(const std::vector<AngularPose>& poses) {
  json arr = json::array();
  for (const auto& p : poses) arr.push_back(pair_array(p));
  return arr;
}

std::vector<AngularPose> pose_list_from(const json& arr) {
  std::vector<AngularPose> out;
  out.reserve(arr.size());
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2) throw std::invalid_argument("pose must be [pitch, yaw]");
    out.push_back(canonicalize({deg_to_rad(pair[0].get<double>()), deg_to_rad(pair[1].get<double>())}));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// --- serialization -----------------------------------------------------------

std::string frame_record_to_json(const FrameRecord& r) {
  json j;
  j["video_id"] = r.video_id;
  j["subject_id"] = r.subject_id;
  j["frame_index"] = r.frame_index;
  j["gaze"] = pose_to_json(r.gaze);
  j["head"] = pose_to_json(r.head);
  j["face_count"] = r.face_count;
  j["glasses_flag"] = r.glasses_flag;
  j["scene_cut_flag"] = r.scene_cut_flag;
  return j.dump();
}

FrameRecord frame_record_from_json(const std::string& line) {
  const json j = json::parse(line);
  if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
  FrameRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.subject_id = j.at("subject_id").get<std::string>();
  r.frame_index = j.at("frame_index").get<std::int64_t>();
  if (r.frame_index < 0) throw std::invalid_argument("frame_index must be non-negative");
  r.gaze = pose_from_json(j, "gaze");
  r.head = pose_from_json(j, "head");
  r.face_count = j.value("face_count", 1);
  if (r.face_count < 0) throw std::invalid_argument("face_count must be non-negative");
  r.glasses_flag = j.value("glasses_flag", false);
  r.scene_cut_flag = j.value("scene_cut_flag", false);
  return r;
}

std::vector<VideoFrames> ingest(std::istream& in) {
  std::vector<VideoFrames> videos;
  std::unordered_map<std::string, std::size_t> index_of;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameRecord record;
    try {
      record = frame_record_from_json(line);
    } catch (const std::exception& e) {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    auto [it, inserted] = index_of.try_emplace(record.video_id, videos.size());
    if (inserted) videos.push_back({record.video_id, record.subject_id, {}});
    VideoFrames& video = videos[it->second];
    if (record.subject_id != video.subject_id) {
      fail(ErrorCode::Validation, "video '" + video.video_id + "' changes subject_id at line " +
                                      std::to_string(line_no));
    }
    if (!video.frames.empty() && record.frame_index <= video.frames.back().frame_index) {
      const bool dup = record.frame_index == video.frames.back().frame_index;
      fail(ErrorCode::Validation,
           "video '" + video.video_id + "': " + (dup ? "duplicate" : "out-of-order") +
               " frame_index " + std::to_string(record.frame_index) + " at line " +
               std::to_string(line_no));
    }
    video.frames.push_back(std::move(record));
  }
  return videos;
}

std::vector<VideoFrames> ingest_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open '" + path + "'");
  return ingest(in);
}

void write_frame_records(std::ostream& out, const std::vector<VideoFrames>& videos) {
  for (const auto& v : videos) {
    for (const auto& f : v.frames) out << frame_record_to_json(f) << '\n';
  }
}

// --- filtering ---------------------------------------------------------------

FilterResult filter_videos(const std::vector<VideoFrames>& videos, const FilterPolicy& policy) {
  FilterResult result;
  for (const auto& video : videos) {
    const auto& frames = video.frames;
    if (frames.empty()) {
      result.rejections.push_back({video.video_id, "detection failures", "no frames"});
      continue;
    }
    const auto glasses = std::find_if(frames.begin(), frames.end(),
                                      [](const FrameRecord& f) { return f.glasses_flag; });
    if (glasses != frames.end()) {
      result.rejections.push_back(
          {video.video_id, "eyewear", "glasses flagged on frame " + std::to_string(glasses->frame_index)});
      continue;
    }
    const auto bad = static_cast<std::size_t>(
        std::count_if(frames.begin(), frames.end(), [](const FrameRecord& f) { return !f.is_clean(); }));
    const double bad_fraction = static_cast<double>(bad) / static_cast<double>(frames.size());
    if (bad_fraction > policy.max_bad_frame_fraction) {
      std::ostringstream detail;
      detail << bad << " of " << frames.size() << " frames lack a single detected face or estimate ("
             << std::fixed << std::setprecision(1) << 100.0 * bad_fraction << "% > "
             << 100.0 * policy.max_bad_frame_fraction << "%)";
      result.rejections.push_back({video.video_id, "detection failures", detail.str()});
      continue;
    }
    const auto cuts = std::count_if(frames.begin(), frames.end(),
                                    [](const FrameRecord& f) { return f.scene_cut_flag; });
    if (cuts > 0 && policy.scene_cut_policy == SceneCutPolicy::Drop) {
      result.rejections.push_back(
          {video.video_id, "scene cut", std::to_string(cuts) + " scene cut(s) flagged"});
      continue;
    }

    // Contiguous clean runs, broken at scene cuts and at residual bad frames.
    std::vector<VideoFrames> segments;
    VideoFrames current{video.video_id, video.subject_id, {}};
    auto flush = [&] {
      if (!current.frames.empty()) segments.push_back(std::move(current));
      current = VideoFrames{video.video_id, video.subject_id, {}};
    };
    for (const auto& f : frames) {
      if (f.scene_cut_flag) flush();
      if (!f.is_clean()) {
        flush();
        continue;
      }
      current.frames.push_back(f);
    }
    flush();

    if (segments.empty()) {
      result.rejections.push_back({video.video_id, "detection failures", "no clean frames"});
      continue;
    }
    if (segments.size() > 1) {
      for (std::size_t k = 0; k < segments.size(); ++k) {
        segments[k].video_id = video.video_id + "/seg" + std::to_string(k);
        for (auto& f : segments[k].frames) f.video_id = segments[k].video_id;
      }
    }
    for (auto& s : segments) result.kept.push_back(std::move(s));
  }
  return result;
}

// --- resampling and windowing ------------------------------------------------

std::size_t resample_stride(double source_fps, double model_fps) {
  require(std::isfinite(source_fps) && std::isfinite(model_fps) && source_fps > 0 && model_fps > 0,
          ErrorCode::Config, "frame rates must be positive");
  const double ratio = source_fps / model_fps;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    std::ostringstream os;
    os << "model fps " << model_fps << " does not evenly divide source fps " << source_fps;
    fail(ErrorCode::Config, os.str());
  }
  return static_cast<std::size_t>(rounded);
}

VideoFrames resample(const VideoFrames& video, double source_fps, double model_fps) {
  const std::size_t stride = resample_stride(source_fps, model_fps);
  VideoFrames out{video.video_id, video.subject_id, {}};
  out.frames.reserve((video.frames.size() + stride - 1) / stride);
  for (std::size_t i = 0; i < video.frames.size(); i += stride) out.frames.push_back(video.frames[i]);
  return out;
}

std::vector<WindowRecord> make_windows(const VideoFrames& video, std::size_t window_length,
                                       std::size_t context_length) {
  require(window_length >= 3, ErrorCode::Config, "window length must be at least 3");
  require(context_length == 2, ErrorCode::Config, "context length must be 2");
  const std::size_t count = video.frames.size() / window_length;
  std::vector<WindowRecord> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    WindowRecord rec;
    rec.sequence_id = video.video_id;
    rec.subject_id = video.subject_id;
    rec.window_index = static_cast<int>(k);
    rec.start_frame = video.frames[k * window_length].frame_index;
    for (std::size_t t = 0; t < window_length; ++t) {
      const FrameRecord& f = video.frames[k * window_length + t];
      require(f.gaze && f.head, ErrorCode::Contract,
              "video '" + video.video_id + "' frame " + std::to_string(f.frame_index) +
                  " lacks gaze or head; filter before windowing");
      rec.window.gaze.push_back(*f.gaze);
      rec.window.head.push_back(*f.head);
    }
    if (k > 0) {
      const auto& prev = out.back().window.head;
      rec.window.context = {prev[window_length - 2], prev[window_length - 1]};
      rec.window.has_context = true;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// --- normalization -----------------------------------------------------------

NormStats compute_norm_stats(const std::vector<WindowRecord>& windows) {
  require(!windows.empty(), ErrorCode::Validation, "cannot compute normalization of an empty manifest");
  std::array<double, 4> sum{};
  std::size_t n = 0;
  for (const auto& w : windows) {
    for (std::size_t t = 0; t < w.window.gaze.size(); ++t) {
      sum[0] += w.window.gaze[t].pitch;
      sum[1] += w.window.gaze[t].yaw;
      sum[2] += w.window.head[t].pitch;
      sum[3] += w.window.head[t].yaw;
      ++n;
    }
  }
  NormStats stats;
  for (int d = 0; d < 4; ++d) stats.mean[d] = sum[d] / static_cast<double>(n);
  std::array<double, 4> sq{};
  for (const auto& w : windows) {
    for (std::size_t t = 0; t < w.window.gaze.size(); ++t) {
      const double v[4] = {w.window.gaze[t].pitch, w.window.gaze[t].yaw, w.window.head[t].pitch,
                           w.window.head[t].yaw};
      for (int d = 0; d < 4; ++d) sq[d] += (v[d] - stats.mean[d]) * (v[d] - stats.mean[d]);
    }
  }
  static const char* names[4] = {"gaze pitch", "gaze yaw", "head pitch", "head yaw"};
  for (int d = 0; d < 4; ++d) {
    stats.std[d] = std::sqrt(sq[d] / static_cast<double>(n));
    if (!(stats.std[d] > 1e-12)) {
      log::warn(std::string("zero variance in ") + names[d] + "; using std = 1");
      stats.std[d] = 1.0;
    }
  }
  return stats;
}

PoseMatrix normalize(std::span<const AngularPose> poses, const NormStats& stats, MotionKind kind) {
  const int off = kind == MotionKind::Gaze ? 0 : 2;
  PoseMatrix out(2, static_cast<Eigen::Index>(poses.size()));
  for (std::size_t t = 0; t < poses.size(); ++t) {
    out(0, static_cast<Eigen::Index>(t)) = (poses[t].pitch - stats.mean[off]) / stats.std[off];
    out(1, static_cast<Eigen::Index>(t)) = (poses[t].yaw - stats.mean[off + 1]) / stats.std[off + 1];
  }
  return out;
}

std::vector<AngularPose> denormalize(const PoseMatrix& values, const NormStats& stats, MotionKind kind) {
  const int off = kind == MotionKind::Gaze ? 0 : 2;
  std::vector<AngularPose> out(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    out[static_cast<std::size_t>(t)] = {values(0, t) * stats.std[off] + stats.mean[off],
                                        values(1, t) * stats.std[off + 1] + stats.mean[off + 1]};
  }
  return out;
}

// --- manifests ---------------------------------------------------------------

const char* split_name(Split split) { return split == Split::Train ? "train" : "test"; }

SplitResult split_by_subject(const std::vector<WindowRecord>& windows, double test_fraction,
                             std::uint64_t seed, double source_fps, double model_fps,
                             int window_length) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::Config,
          "test fraction must lie in (0, 1)");
  std::set<std::string> subject_set;
  for (const auto& w : windows) subject_set.insert(w.subject_id);
  std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
  require(subjects.size() >= 2, ErrorCode::Config,
          "subject split needs at least 2 subjects, found " + std::to_string(subjects.size()));

  Rng rng(seed);
  for (std::size_t i = subjects.size() - 1; i > 0; --i) {
    std::swap(subjects[i], subjects[rng.below(i + 1)]);
  }
  const auto n = static_cast<long long>(subjects.size());
  const long long n_test =
      std::clamp(std::llround(test_fraction * static_cast<double>(n)), 1LL, n - 1);
  const std::set<std::string> test_subjects(subjects.begin(), subjects.begin() + n_test);

  SplitResult result;
  for (DatasetManifest* m : {&result.train, &result.test}) {
    m->source_fps = source_fps;
    m->model_fps = model_fps;
    m->window_length = window_length;
  }
  result.train.split = Split::Train;
  result.test.split = Split::Test;
  for (const auto& w : windows) {
    (test_subjects.count(w.subject_id) ? result.test : result.train).windows.push_back(w);
  }
  if (!result.train.windows.empty()) {
    result.train.normalization = compute_norm_stats(result.train.windows);
    result.test.normalization = result.train.normalization;
  }
  return result;
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  json header;
  header["format"] = kManifestFormat;
  header["version"] = kManifestVersion;
  header["split"] = split_name(m.split);
  header["source_fps"] = m.source_fps;
  header["model_fps"] = m.model_fps;
  header["window_length"] = m.window_length;
  header["num_windows"] = m.windows.size();
  json mean = json::array(), stdev = json::array();
  for (int d = 0; d < 4; ++d) {
    mean.push_back(rad_to_deg(m.normalization.mean[d]));
    stdev.push_back(rad_to_deg(m.normalization.std[d]));
  }
  header["normalization"] = {{"mean_deg", mean}, {"std_deg", stdev}};
  out << header.dump() << '\n';
  for (const auto& w : m.windows) {
    json j;
    j["sequence_id"] = w.sequence_id;
    j["subject_id"] = w.subject_id;
    j["window_index"] = w.window_index;
    j["start_frame"] = w.start_frame;
    j["has_context"] = w.window.has_context;
    j["context"] = json::array({pair_array(w.window.context[0]), pair_array(w.window.context[1])});
    j["gaze"] = pose_list(w.window.gaze);
    j["head"] = pose_list(w.window.head);
    out << j.dump() << '\n';
  }
}

void write_manifest_file(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  write_manifest(out, manifest);
  require(out.good(), ErrorCode::Io, "failed writing '" + path + "'");
}

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("format", std::string{}) != kManifestFormat) {
          throw std::invalid_argument("not a gazehead manifest");
        }
        const int version = j.at("version").get<int>();
        if (version != kManifestVersion) {
          fail(ErrorCode::FormatVersion, "manifest version " + std::to_string(version) +
                                             " unsupported (expected " +
                                             std::to_string(kManifestVersion) + ")");
        }
        const auto split = j.at("split").get<std::string>();
        if (split != "train" && split != "test") throw std::invalid_argument("bad split");
        m.split = split == "train" ? Split::Train : Split::Test;
        m.source_fps = j.at("source_fps").get<double>();
        m.model_fps = j.at("model_fps").get<double>();
        m.window_length = j.at("window_length").get<int>();
        expected = j.at("num_windows").get<std::size_t>();
        const auto& norm = j.at("normalization");
        for (int d = 0; d < 4; ++d) {
          m.normalization.mean[d] = deg_to_rad(norm.at("mean_deg").at(d).get<double>());
          m.normalization.std[d] = deg_to_rad(norm.at("std_deg").at(d).get<double>());
          if (!(m.normalization.std[d] > 0)) throw std::invalid_argument("std must be positive");
        }
        have_header = true;
        continue;
      }
      WindowRecord w;
      w.sequence_id = j.at("sequence_id").get<std::string>();
      w.subject_id = j.at("subject_id").get<std::string>();
      w.window_index = j.at("window_index").get<int>();
      w.start_frame = j.at("start_frame").get<std::int64_t>();
      w.window.has_context = j.at("has_context").get<bool>();
      const auto ctx = pose_list_from(j.at("context"));
      if (ctx.size() != 2) throw std::invalid_argument("context must hold 2 poses");
      w.window.context = {ctx[0], ctx[1]};
      w.window.gaze = pose_list_from(j.at("gaze"));
      w.window.head = pose_list_from(j.at("head"));
      w.window.validate(static_cast<std::size_t>(m.window_length));
      m.windows.push_back(std::move(w));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorCode::Parse, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  require(have_header, ErrorCode::Parse, "manifest is empty");
  require(m.windows.size() == expected, ErrorCode::Parse,
          "manifest declares " + std::to_string(expected) + " windows, found " +
              std::to_string(m.windows.size()));
  return m;
}

DatasetManifest read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open '" + path + "'");
  return read_manifest(in);
}

void write_rejections_csv(std::ostream& out, const std::vector<Rejection>& rejections) {
  out << "video_id,rule,detail\n";
  for (const auto& r : rejections) {
    out << csv_field(r.video_id) << ',' << csv_field(r.rule) << ',' << csv_field(r.detail) << '\n';
  }
}

MotionSequence SequenceGroup::gaze(double fps) const {
  std::vector<AngularPose> frames;
  for (const auto* w : windows) frames.insert(frames.end(), w->window.gaze.begin(), w->window.gaze.end());
  return MotionSequence(std::move(frames), fps, MotionKind::Gaze);
}

MotionSequence SequenceGroup::head(double fps) const {
  std::vector<AngularPose> frames;
  for (const auto* w : windows) {
    require(w->window.has_head(), ErrorCode::Validation,
            "window " + std::to_string(w->window_index) + " of '" + sequence_id + "' has no real head");
    frames.insert(frames.end(), w->window.head.begin(), w->window.head.end());
  }
  return MotionSequence(std::move(frames), fps, MotionKind::Head);
}

std::vector<SequenceGroup> group_sequences(const DatasetManifest& manifest) {
  std::vector<SequenceGroup> groups;
  std::unordered_map<std::string, std::size_t> index_of;
  for (const auto& w : manifest.windows) {
    auto [it, inserted] = index_of.try_emplace(w.sequence_id, groups.size());
    if (inserted) groups.push_back({w.sequence_id, w.subject_id, {}});
    groups[it->second].windows.push_back(&w);
  }
  for (auto& g : groups) {
    std::stable_sort(g.windows.begin(), g.windows.end(),
                     [](const WindowRecord* a, const WindowRecord* b) { return a->window_index < b->window_index; });
  }
  return groups;
}

PrepareResult prepare(const std::vector<VideoFrames>& videos, const PrepareOptions& options) {
  resample_stride(options.source_fps, options.model_fps);
  FilterResult filtered = filter_videos(videos, options.filter);
  std::vector<WindowRecord> windows;
  for (const auto& video : filtered.kept) {
    auto ws = make_windows(resample(video, options.source_fps, options.model_fps),
                           static_cast<std::size_t>(options.window_length));
    windows.insert(windows.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  log::info("prepare: kept " + std::to_string(filtered.kept.size()) + " segments, rejected " +
            std::to_string(filtered.rejections.size()) + " videos, " + std::to_string(windows.size()) +
            " windows");
  PrepareResult result;
  result.split = split_by_subject(windows, options.test_fraction, options.seed, options.source_fps,
                                  options.model_fps, options.window_length);
  result.rejections = std::move(filtered.rejections);
  return result;
}

}  // namespace gazehead::data
