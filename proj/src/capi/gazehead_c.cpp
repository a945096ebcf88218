#include "gazehead.h"

#include <new>
#include <string>
#include <vector>

#include "gazehead/cvae.hpp"
#include "gazehead/error.hpp"
#include "gazehead/generation.hpp"
#include "gazehead/log.hpp"
#include "gazehead/metrics.hpp"
#include "gazehead/workflow.hpp"

using namespace gazehead;

struct gh_model {
  cvae::Checkpoint checkpoint;
  cvae::Model model;
};

namespace {

thread_local std::string g_last_error;

gh_status set_error(gh_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
gh_status guarded(F&& body) {
  try {
    body();
    return GH_OK;
  } catch (const Error& e) {
    return set_error(static_cast<gh_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(GH_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(GH_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(GH_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidInput, std::string(what) + " must not be NULL");
}

std::string str(const char* s, const char* what) {
  need(s, what);
  return s;
}

AngularPose from_c(const gh_pose& p) { return {deg_to_rad(p.pitch_deg), deg_to_rad(p.yaw_deg)}; }
gh_pose to_c(const AngularPose& p) { return {rad_to_deg(p.pitch), rad_to_deg(p.yaw)}; }

MotionSequence sequence(const gh_pose* poses, std::size_t n, MotionKind kind) {
  need(poses, "pose array");
  std::vector<AngularPose> frames;
  frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) frames.push_back(canonicalize(from_c(poses[i])));
  return MotionSequence(std::move(frames), 5.0, kind);
}

cvae::ModelConfig from_c(const gh_model_config& c) {
  cvae::ModelConfig m;
  m.window = c.window;
  m.latent_dim = c.latent_dim;
  m.model_fps = c.model_fps;
  m.encoder_hidden = c.encoder_hidden;
  m.decoder_hidden = c.decoder_hidden;
  m.feature_dim = c.feature_dim;
  m.kl_weight_max = c.kl_weight_max;
  m.kl_anneal_steps = c.kl_anneal_steps;
  m.context_dropout_prob = c.context_dropout;
  m.feature_dropout_prob = c.feature_dropout;
  m.batch_size = c.batch_size;
  m.train_steps = c.train_steps;
  m.learning_rate = c.learning_rate;
  m.temporal_modeling = c.temporal_modeling != 0;
  m.seed = c.seed;
  return m;
}

gh_model_config to_c(const cvae::ModelConfig& m) {
  gh_model_config c;
  c.window = m.window;
  c.latent_dim = m.latent_dim;
  c.model_fps = m.model_fps;
  c.encoder_hidden = m.encoder_hidden;
  c.decoder_hidden = m.decoder_hidden;
  c.feature_dim = m.feature_dim;
  c.kl_weight_max = m.kl_weight_max;
  c.kl_anneal_steps = m.kl_anneal_steps;
  c.context_dropout = m.context_dropout_prob;
  c.feature_dropout = m.feature_dropout_prob;
  c.batch_size = m.batch_size;
  c.train_steps = m.train_steps;
  c.learning_rate = m.learning_rate;
  c.temporal_modeling = m.temporal_modeling ? 1 : 0;
  c.seed = m.seed;
  return c;
}

generation::Method from_c(gh_method m) {
  switch (m) {
    case GH_METHOD_CVAE: return generation::Method::Cvae;
    case GH_METHOD_NO_TEMPORAL: return generation::Method::CvaeNoTemporal;
    case GH_METHOD_CONSTANT: return generation::Method::ConstantHead;
    case GH_METHOD_MIRROR: return generation::Method::MirrorGaze;
  }
  fail(ErrorCode::InvalidInput, "unknown method value " + std::to_string(static_cast<int>(m)));
}

}  // namespace

extern "C" {

const char* gh_last_error(void) { return g_last_error.c_str(); }

const char* gh_status_name(gh_status status) {
  switch (status) {
    case GH_OK: return "ok";
    case GH_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (status >= GH_ERR_INVALID_INPUT && status <= GH_ERR_NUMERIC) {
    return error_code_name(static_cast<ErrorCode>(status));
  }
  return "unknown";
}

const char* gh_version(void) { return GAZEHEAD_VERSION; }

uint32_t gh_checkpoint_format_version(void) { return cvae::kCheckpointFormatVersion; }

void gh_set_log_level(gh_log_level level) { log::set_level(static_cast<log::Level>(level)); }

void gh_set_log_callback(gh_log_fn fn, void* user) {
  if (fn == nullptr) {
    log::set_sink({});
    return;
  }
  log::set_sink([fn, user](log::Level level, const std::string& message) {
    fn(static_cast<gh_log_level>(level), message.c_str(), user);
  });
}

// --- synth ---

void gh_synth_options_default(gh_synth_options* o) {
  if (o == nullptr) return;
  const workflow::SynthOptions d;
  const oracle::OracleParams& p = d.params;
  o->out = nullptr;
  o->sequences = d.sequences;
  o->frames = d.frames;
  o->fps = d.fps;
  o->seed = p.seed;
  o->oracle = {p.gain_mean,         p.gain_std,
               p.lag_alpha,         rad_to_deg(p.bias_std),
               rad_to_deg(p.noise_std), p.fixation_min_s,
               p.fixation_max_s,    rad_to_deg(p.saccade_min),
               rad_to_deg(p.saccade_max), p.saccade_duration_s,
               rad_to_deg(p.pitch_limit), rad_to_deg(p.yaw_limit),
               p.reference_fps};
}

gh_status gh_synth(const gh_synth_options* o) {
  return guarded([&] {
    need(o, "options");
    workflow::SynthOptions w;
    w.out = str(o->out, "out");
    w.sequences = o->sequences;
    w.frames = o->frames;
    w.fps = o->fps;
    const gh_oracle_params& c = o->oracle;
    w.params.gain_mean = c.gain_mean;
    w.params.gain_std = c.gain_std;
    w.params.lag_alpha = c.lag_alpha;
    w.params.bias_std = deg_to_rad(c.bias_std_deg);
    w.params.noise_std = deg_to_rad(c.noise_std_deg);
    w.params.fixation_min_s = c.fixation_min_s;
    w.params.fixation_max_s = c.fixation_max_s;
    w.params.saccade_min = deg_to_rad(c.saccade_min_deg);
    w.params.saccade_max = deg_to_rad(c.saccade_max_deg);
    w.params.saccade_duration_s = c.saccade_duration_s;
    w.params.pitch_limit = deg_to_rad(c.pitch_limit_deg);
    w.params.yaw_limit = deg_to_rad(c.yaw_limit_deg);
    w.params.reference_fps = c.reference_fps;
    w.params.seed = o->seed;
    workflow::synth(w);
  });
}

// --- prepare ---

void gh_prepare_options_default(gh_prepare_options* o) {
  if (o == nullptr) return;
  const data::PrepareOptions d;
  o->input = nullptr;
  o->out_dir = nullptr;
  o->source_fps = d.source_fps;
  o->model_fps = d.model_fps;
  o->window = d.window_length;
  o->test_fraction = d.test_fraction;
  o->max_bad_frames = d.filter.max_bad_frame_fraction;
  o->scene_cut_policy = d.filter.scene_cut_policy == data::SceneCutPolicy::Drop ? GH_SCENE_CUT_DROP
                                                                                 : GH_SCENE_CUT_SPLIT;
  o->seed = d.seed;
}

gh_status gh_prepare(const gh_prepare_options* o, gh_prepare_summary* summary) {
  return guarded([&] {
    need(o, "options");
    workflow::PrepareFilesOptions w;
    w.input = str(o->input, "input");
    w.out_dir = str(o->out_dir, "out_dir");
    w.prepare.source_fps = o->source_fps;
    w.prepare.model_fps = o->model_fps;
    w.prepare.window_length = o->window;
    w.prepare.test_fraction = o->test_fraction;
    w.prepare.filter.max_bad_frame_fraction = o->max_bad_frames;
    require(o->scene_cut_policy == GH_SCENE_CUT_SPLIT || o->scene_cut_policy == GH_SCENE_CUT_DROP,
            ErrorCode::InvalidInput, "unknown scene cut policy");
    w.prepare.filter.scene_cut_policy =
        o->scene_cut_policy == GH_SCENE_CUT_DROP ? data::SceneCutPolicy::Drop : data::SceneCutPolicy::Split;
    w.prepare.seed = o->seed;
    const auto s = workflow::prepare(w);
    if (summary != nullptr) *summary = {s.train_windows, s.test_windows, s.rejected_videos};
  });
}

// --- train ---

void gh_model_config_default(gh_model_config* c) {
  if (c != nullptr) *c = to_c(cvae::ModelConfig{});
}

void gh_train_options_default(gh_train_options* o) {
  if (o == nullptr) return;
  const workflow::TrainFilesOptions d;
  o->manifest = nullptr;
  o->out_dir = nullptr;
  o->config = to_c(d.config);
  o->checkpoint_every = d.checkpoint_every;
  o->log_every = d.log_every;
}

gh_status gh_train(const gh_train_options* o) {
  return guarded([&] {
    need(o, "options");
    workflow::TrainFilesOptions w;
    w.manifest = str(o->manifest, "manifest");
    w.out_dir = str(o->out_dir, "out_dir");
    w.config = from_c(o->config);
    w.checkpoint_every = o->checkpoint_every;
    w.log_every = o->log_every;
    workflow::train(w);
  });
}

// --- models ---

gh_status gh_model_load(const char* path, gh_model** model) {
  return guarded([&] {
    need(model, "model");
    *model = nullptr;
    auto checkpoint = cvae::load_checkpoint(str(path, "path"));
    auto built = cvae::model_from_checkpoint(checkpoint);
    *model = new gh_model{std::move(checkpoint), std::move(built)};
  });
}

void gh_model_free(gh_model* model) { delete model; }

gh_status gh_model_info(const gh_model* model, gh_model_config* config, int64_t* step, int64_t* parameter_count) {
  return guarded([&] {
    need(model, "model");
    if (config != nullptr) *config = to_c(model->model.config());
    if (step != nullptr) *step = model->checkpoint.step;
    if (parameter_count != nullptr) *parameter_count = model->model.parameter_count();
  });
}

gh_status gh_model_generate_window(const gh_model* model, const gh_pose* gaze, const gh_pose* context,
                                   const double* z, gh_pose* out) {
  return guarded([&] {
    need(model, "model");
    need(z, "z");
    need(out, "out");
    const auto T = static_cast<std::size_t>(model->model.config().window);
    const MotionSequence g = sequence(gaze, T, MotionKind::Gaze);
    std::optional<generation::Context> ctx;
    if (context != nullptr) ctx = generation::Context{canonicalize(from_c(context[0])), canonicalize(from_c(context[1]))};
    const cvae::Vector latent = Eigen::Map<const cvae::Vector>(z, model->model.latent_dim());
    const auto head = generation::generate_window(model->model, g, ctx, latent);
    for (std::size_t t = 0; t < T; ++t) out[t] = to_c(head[t]);
  });
}

gh_status gh_model_generate_long(const gh_model* model, const gh_pose* gaze, size_t n, uint64_t seed,
                                 int force_zero_context, gh_pose* out, size_t* out_count) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const MotionSequence g = sequence(gaze, n, MotionKind::Gaze);
    const auto head = generation::generate_long(model->model, g, seed, {force_zero_context != 0});
    for (std::size_t t = 0; t < head.size(); ++t) out[t] = to_c(head[t]);
    if (out_count != nullptr) *out_count = head.size();
  });
}

// --- files ---

gh_status gh_parse_method(const char* name, gh_method* method) {
  return guarded([&] {
    need(method, "method");
    switch (generation::parse_method(str(name, "name"))) {
      case generation::Method::Cvae: *method = GH_METHOD_CVAE; break;
      case generation::Method::CvaeNoTemporal: *method = GH_METHOD_NO_TEMPORAL; break;
      case generation::Method::ConstantHead: *method = GH_METHOD_CONSTANT; break;
      case generation::Method::MirrorGaze: *method = GH_METHOD_MIRROR; break;
    }
  });
}

const char* gh_method_name(gh_method method) {
  switch (method) {
    case GH_METHOD_CVAE:
    case GH_METHOD_NO_TEMPORAL:
    case GH_METHOD_CONSTANT:
    case GH_METHOD_MIRROR:
      return generation::method_name(from_c(method));
  }
  return "unknown";
}

void gh_generate_options_default(gh_generate_options* o) {
  if (o == nullptr) return;
  const workflow::GenerateFilesOptions d;
  o->checkpoint = nullptr;
  o->gaze = nullptr;
  o->out = nullptr;
  o->k = d.k;
  o->seed = d.seed;
  o->method = GH_METHOD_CVAE;
}

gh_status gh_generate_file(const gh_generate_options* o, gh_generate_summary* summary) {
  return guarded([&] {
    need(o, "options");
    workflow::GenerateFilesOptions w;
    w.checkpoint = o->checkpoint != nullptr ? o->checkpoint : "";
    w.gaze = str(o->gaze, "gaze");
    w.out = str(o->out, "out");
    w.k = o->k;
    w.seed = o->seed;
    w.method = from_c(o->method);
    const auto s = workflow::generate(w);
    if (summary != nullptr) *summary = {s.videos, s.frames_generated, s.frames_dropped};
  });
}

void gh_evaluate_options_default(gh_evaluate_options* o) {
  if (o == nullptr) return;
  o->manifest = nullptr;
  o->generated_dir = nullptr;
  o->out = nullptr;
  o->k = workflow::EvaluateFilesOptions{}.k;
}

gh_status gh_evaluate(const gh_evaluate_options* o) {
  return guarded([&] {
    need(o, "options");
    workflow::EvaluateFilesOptions w;
    w.manifest = str(o->manifest, "manifest");
    w.generated_dir = str(o->generated_dir, "generated_dir");
    w.out = str(o->out, "out");
    w.k = o->k;
    workflow::evaluate(w);
  });
}

gh_status gh_plot(const char* const* reports, size_t num_reports, const char* out_dir) {
  return guarded([&] {
    workflow::PlotOptions w;
    if (num_reports > 0) need(reports, "reports");
    for (std::size_t i = 0; i < num_reports; ++i) w.reports.push_back(str(reports[i], "report path"));
    w.out_dir = str(out_dir, "out_dir");
    workflow::plot(w);
  });
}

// --- metrics ---

gh_status gh_angular_error(const gh_pose* generated, const gh_pose* real, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = metrics::angular_error(sequence(generated, n, MotionKind::Head), sequence(real, n, MotionKind::Head));
  });
}

gh_status gh_smoothness(const gh_pose* seq, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = metrics::smoothness(sequence(seq, n, MotionKind::Head));
  });
}

gh_status gh_apd(const gh_pose* samples, size_t k, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    need(samples, "samples");
    std::vector<MotionSequence> seqs;
    for (std::size_t i = 0; i < k; ++i) seqs.push_back(sequence(samples + i * n, n, MotionKind::Head));
    *out = metrics::apd(seqs);
  });
}

}  // extern "C"
