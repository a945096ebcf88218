#include "gazehead/workflow.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <json.hpp>

#include "gazehead/error.hpp"
#include "gazehead/log.hpp"

namespace gazehead::workflow {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  require(!out.fail(), ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

json pose_json(const AngularPose& p) { return json{{"pitch", rad_to_deg(p.pitch)}, {"yaw", rad_to_deg(p.yaw)}}; }

}  // namespace

// --- synth -------------------------------------------------------------------

void synth(const SynthOptions& o) {
  require(o.sequences > 0 && o.frames > 0, ErrorCode::Config, "sequences and frames must be positive");
  require(o.fps > 0.0, ErrorCode::Config, "fps must be positive");
  o.params.validate();
  const auto pairs = oracle::generate_dataset(o.params, static_cast<std::size_t>(o.sequences),
                                              static_cast<std::size_t>(o.frames), o.fps);
  const fs::path path(o.out);
  auto out = open_out(path);
  data::write_frame_records(out, oracle::to_videos(pairs));
  close_out(out, path);
  log::info("synth: wrote " + std::to_string(o.sequences) + " sequences x " + std::to_string(o.frames) +
            " frames to " + o.out);
}

// --- prepare -----------------------------------------------------------------

PrepareSummary prepare(const PrepareFilesOptions& o) {
  const auto videos = data::ingest_file(o.input);
  const auto result = data::prepare(videos, o.prepare);
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  data::write_manifest_file((dir / kTrainManifest).string(), result.split.train);
  data::write_manifest_file((dir / kTestManifest).string(), result.split.test);
  {
    const fs::path p = dir / kRejections;
    auto out = open_out(p);
    data::write_rejections_csv(out, result.rejections);
    close_out(out, p);
  }
  {
    const fs::path p = dir / kTestFrames;
    auto out = open_out(p);
    const auto stride = static_cast<std::int64_t>(data::resample_stride(o.prepare.source_fps, o.prepare.model_fps));
    for (const auto& w : result.split.test.windows) {
      for (std::size_t t = 0; t < w.window.gaze.size(); ++t) {
        data::FrameRecord r;
        r.video_id = w.sequence_id;
        r.subject_id = w.subject_id;
        r.frame_index = w.start_frame + static_cast<std::int64_t>(t) * stride;
        r.gaze = w.window.gaze[t];
        if (w.window.has_head()) r.head = w.window.head[t];
        out << data::frame_record_to_json(r) << '\n';
      }
    }
    close_out(out, p);
  }
  return {result.split.train.windows.size(), result.split.test.windows.size(), result.rejections.size()};
}

// --- train -------------------------------------------------------------------

cvae::Checkpoint train(const TrainFilesOptions& o) {
  const auto manifest = data::read_manifest_file(o.manifest);
  require(manifest.split == data::Split::Train, ErrorCode::Validation,
          "'" + o.manifest + "' is not a train manifest");
  cvae::ModelConfig config = o.config;
  config.model_fps = manifest.model_fps;
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  const fs::path log_path = dir / kTrainLog;
  auto log_out = open_out(log_path);
  log_out << "step,kl_weight,total,reconstruction,kl\n";

  cvae::TrainOptions options;
  options.log_every = o.log_every;
  options.checkpoint_every = o.checkpoint_every;
  options.on_step = [&](const cvae::StepRecord& r) {
    log_out << r.step << ',' << num(r.kl_weight) << ',' << num(r.loss.total) << ',' << num(r.loss.reconstruction)
            << ',' << num(r.loss.kl) << '\n';
  };
  options.on_checkpoint = [&](const cvae::Checkpoint& ck) {
    cvae::save_checkpoint(ck, (dir / ("checkpoint_step_" + std::to_string(ck.step) + ".ghc")).string());
  };
  auto checkpoint = cvae::train(manifest, config, options);
  close_out(log_out, log_path);
  cvae::save_checkpoint(checkpoint, (dir / kModelFile).string());
  return checkpoint;
}

// --- generate ----------------------------------------------------------------

GenerateSummary generate(const GenerateFilesOptions& o) {
  require(o.k >= 1, ErrorCode::Config, "k must be >= 1");
  const bool needs_model =
      o.method == generation::Method::Cvae || o.method == generation::Method::CvaeNoTemporal;
  std::optional<cvae::Model> model;
  if (needs_model) {
    require(!o.checkpoint.empty(), ErrorCode::Config,
            std::string("method '") + generation::method_name(o.method) + "' requires --checkpoint");
    model.emplace(cvae::model_from_checkpoint(cvae::load_checkpoint(o.checkpoint)));
  }
  const double fps = model ? model->config().model_fps : 5.0;
  const auto videos = data::ingest_file(o.gaze);
  require(!videos.empty(), ErrorCode::Validation, "'" + o.gaze + "' holds no frames");

  const fs::path path(o.out);
  auto out = open_out(path);
  GenerateSummary summary;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& video = videos[v];
    std::vector<AngularPose> gaze;
    gaze.reserve(video.frames.size());
    for (const auto& f : video.frames) {
      require(f.gaze.has_value(), ErrorCode::Validation,
              "video '" + video.video_id + "' frame " + std::to_string(f.frame_index) + " has no gaze");
      gaze.push_back(canonicalize(*f.gaze));
    }
    generation::GenerationRequest request{MotionSequence(std::move(gaze), fps, MotionKind::Gaze), o.k,
                                          derive_seed(o.seed, v), o.method, std::nullopt};
    if (video.frames.front().head) request.initial_head = *video.frames.front().head;
    if (model && request.gaze.size() < static_cast<std::size_t>(model->config().window)) {
      log::warn("generate: video '" + video.video_id + "' is shorter than one window; skipped");
      summary.frames_dropped += request.gaze.size();
      continue;
    }
    const auto samples = generation::generate(request, model ? &*model : nullptr);
    const std::size_t produced = samples.front().size();
    if (produced < video.frames.size()) {
      log::info("generate: video '" + video.video_id + "': " + std::to_string(video.frames.size() - produced) +
                " trailing frames beyond the last full window were not generated");
    }
    summary.frames_dropped += video.frames.size() - produced;
    summary.frames_generated += produced * samples.size();
    ++summary.videos;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      for (std::size_t t = 0; t < produced; ++t) {
        const auto& f = video.frames[t];
        json j;
        j["video_id"] = video.video_id;
        j["subject_id"] = video.subject_id;
        j["frame_index"] = f.frame_index;
        j["sample"] = s;
        j["kind"] = "head";
        j["method"] = generation::method_name(o.method);
        j["gaze"] = pose_json(request.gaze[t]);
        j["head"] = pose_json(samples[s][t]);
        j["face_count"] = 1;
        j["glasses_flag"] = false;
        j["scene_cut_flag"] = false;
        out << j.dump() << '\n';
      }
    }
  }
  close_out(out, path);
  return summary;
}

// --- evaluate ----------------------------------------------------------------

GeneratedSet read_generated(const std::string& path, double fps) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  GeneratedSet set;
  std::vector<std::string> order;
  std::map<std::string, std::map<std::int64_t, std::vector<AngularPose>>> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const std::string method = j.at("method").get<std::string>();
      if (set.method.empty()) set.method = method;
      require(method == set.method, ErrorCode::Validation,
              "mixed methods '" + set.method + "' and '" + method + "'");
      const std::string id = j.at("video_id").get<std::string>();
      const auto sample = j.at("sample").get<std::int64_t>();
      const json& h = j.at("head");
      const AngularPose pose{deg_to_rad(h.at("pitch").get<double>()), deg_to_rad(h.at("yaw").get<double>())};
      auto [it, inserted] = frames.try_emplace(id);
      if (inserted) order.push_back(id);
      it->second[sample].push_back(canonicalize(pose));
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  require(!order.empty(), ErrorCode::Validation, "'" + path + "' holds no generated frames");
  for (const auto& id : order) {
    std::vector<MotionSequence> samples;
    for (auto& [index, poses] : frames[id]) {
      require(samples.empty() || poses.size() == samples.front().size(), ErrorCode::Validation,
              "samples of '" + id + "' in '" + path + "' differ in length");
      samples.emplace_back(std::move(poses), fps, MotionKind::Head);
    }
    set.sequences.emplace_back(id, std::move(samples));
  }
  return set;
}

std::vector<metrics::EvalInput> evaluation_inputs(const data::DatasetManifest& manifest, const GeneratedSet& generated,
                                                  int k) {
  require(k >= 1, ErrorCode::Config, "k must be >= 1");
  const auto groups = data::group_sequences(manifest);
  std::map<std::string, const data::SequenceGroup*> by_id;
  for (const auto& g : groups) by_id[g.sequence_id] = &g;
  for (const auto& [id, samples] : generated.sequences) {
    require(by_id.count(id) > 0, ErrorCode::Validation,
            "generated sequence '" + id + "' (" + generated.method + ") has no real head in the manifest");
  }
  std::map<std::string, const std::vector<MotionSequence>*> gen_by_id;
  for (const auto& [id, samples] : generated.sequences) gen_by_id[id] = &samples;

  std::vector<metrics::EvalInput> inputs;
  for (const auto& g : groups) {
    const auto it = gen_by_id.find(g.sequence_id);
    require(it != gen_by_id.end(), ErrorCode::Validation,
            "no " + generated.method + " generations for test sequence '" + g.sequence_id + "'");
    const auto& samples = *it->second;
    require(samples.size() >= static_cast<std::size_t>(k), ErrorCode::Validation,
            "sequence '" + g.sequence_id + "' has " + std::to_string(samples.size()) + " " + generated.method +
                " samples, fewer than k=" + std::to_string(k));
    metrics::EvalInput input{g.sequence_id, g.head(manifest.model_fps), {}, static_cast<double>(g.windows.size())};
    for (int s = 0; s < k; ++s) {
      const auto& sample = samples[static_cast<std::size_t>(s)];
      require(sample.size() >= input.real.size(), ErrorCode::Validation,
              "generated '" + g.sequence_id + "' is shorter than its real head sequence");
      input.samples.push_back(sample.slice(0, input.real.size()));
    }
    inputs.push_back(std::move(input));
  }
  return inputs;
}

std::vector<metrics::EvalReport> evaluate(const EvaluateFilesOptions& o) {
  const auto manifest = data::read_manifest_file(o.manifest);
  require(!manifest.windows.empty(), ErrorCode::Validation, "'" + o.manifest + "' has no windows");
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(o.generated_dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  require(!ec, ErrorCode::Io, "cannot list '" + o.generated_dir + "': " + ec.message());
  require(!files.empty(), ErrorCode::Validation, "no *.jsonl generations in '" + o.generated_dir + "'");
  std::sort(files.begin(), files.end());

  std::vector<metrics::EvalReport> reports;
  std::vector<GeneratedSet> sets;
  for (const auto& f : files) {
    sets.push_back(read_generated(f.string(), manifest.model_fps));
    const auto inputs = evaluation_inputs(manifest, sets.back(), o.k);
    reports.push_back(metrics::evaluate(sets.back().method, inputs));
  }

  const fs::path out_path(o.out);
  auto out = open_out(out_path);
  metrics::write_report_csv(out, reports);
  close_out(out, out_path);

  // Trajectories of the first test sequence: gaze, real head, and up to three
  // samples per method.
  const fs::path traj_path = out_path.parent_path() / (out_path.stem().string() + "_trajectories.csv");
  auto traj = open_out(traj_path);
  traj << "series,sequence_id,sample,frame,pitch_deg,yaw_deg\n";
  const auto groups = data::group_sequences(manifest);
  const auto& first = groups.front();
  auto emit = [&](const std::string& series, int sample, const MotionSequence& seq) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      traj << series << ',' << first.sequence_id << ',' << sample << ',' << t << ',' << num(rad_to_deg(seq[t].pitch))
           << ',' << num(rad_to_deg(seq[t].yaw)) << '\n';
    }
  };
  emit("gaze", 0, first.gaze(manifest.model_fps));
  const auto real = first.head(manifest.model_fps);
  emit("real", 0, real);
  for (const auto& set : sets) {
    for (const auto& [id, samples] : set.sequences) {
      if (id != first.sequence_id) continue;
      const std::size_t shown = std::min<std::size_t>({samples.size(), 3, static_cast<std::size_t>(o.k)});
      for (std::size_t s = 0; s < shown; ++s) emit(set.method, static_cast<int>(s), samples[s].slice(0, real.size()));
    }
  }
  close_out(traj, traj_path);
  return reports;
}

}  // namespace gazehead::workflow
