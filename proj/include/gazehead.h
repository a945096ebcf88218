#ifndef GAZEHEAD_H
#define GAZEHEAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GH_API __declspec(dllexport)
#else
#define GH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure gh_last_error() holds a
 * message for the calling thread until its next failing call. */
typedef enum gh_status {
  GH_OK = 0,
  GH_ERR_INVALID_INPUT = 1,
  GH_ERR_PARSE = 2,
  GH_ERR_VALIDATION = 3,
  GH_ERR_CONFIG = 4,
  GH_ERR_CONTRACT = 5,
  GH_ERR_IO = 6,
  GH_ERR_FORMAT_VERSION = 7,
  GH_ERR_NUMERIC = 8,
  GH_ERR_INTERNAL = 99
} gh_status;

GH_API const char* gh_last_error(void);
GH_API const char* gh_status_name(gh_status status);
GH_API const char* gh_version(void);
GH_API uint32_t gh_checkpoint_format_version(void);

typedef enum gh_log_level {
  GH_LOG_DEBUG = 0,
  GH_LOG_INFO = 1,
  GH_LOG_WARN = 2,
  GH_LOG_ERROR = 3,
  GH_LOG_OFF = 4
} gh_log_level;

typedef void (*gh_log_fn)(gh_log_level level, const char* message, void* user);

GH_API void gh_set_log_level(gh_log_level level);
/* NULL restores the default stderr sink. */
GH_API void gh_set_log_callback(gh_log_fn fn, void* user);

/* Angles cross the API in degrees. */
typedef struct gh_pose {
  double pitch_deg;
  double yaw_deg;
} gh_pose;

/* --- synthetic data --- */

typedef struct gh_oracle_params {
  double gain_mean;
  double gain_std;
  double lag_alpha; /* follow rate per frame at reference_fps */
  double bias_std_deg;
  double noise_std_deg;
  double fixation_min_s;
  double fixation_max_s;
  double saccade_min_deg;
  double saccade_max_deg;
  double saccade_duration_s;
  double pitch_limit_deg;
  double yaw_limit_deg;
  double reference_fps;
} gh_oracle_params;

typedef struct gh_synth_options {
  const char* out;
  int sequences;
  int frames;
  double fps;
  uint64_t seed;
  gh_oracle_params oracle;
} gh_synth_options;

GH_API void gh_synth_options_default(gh_synth_options* options);
GH_API gh_status gh_synth(const gh_synth_options* options);

/* --- data preparation --- */

typedef enum gh_scene_cut_policy { GH_SCENE_CUT_SPLIT = 0, GH_SCENE_CUT_DROP = 1 } gh_scene_cut_policy;

typedef struct gh_prepare_options {
  const char* input;
  const char* out_dir;
  double source_fps;
  double model_fps;
  int window;
  double test_fraction;
  double max_bad_frames;
  gh_scene_cut_policy scene_cut_policy;
  uint64_t seed;
} gh_prepare_options;

typedef struct gh_prepare_summary {
  size_t train_windows;
  size_t test_windows;
  size_t rejected_videos;
} gh_prepare_summary;

GH_API void gh_prepare_options_default(gh_prepare_options* options);
/* summary may be NULL. */
GH_API gh_status gh_prepare(const gh_prepare_options* options, gh_prepare_summary* summary);

/* --- training --- */

typedef struct gh_model_config {
  int window;
  int latent_dim;
  double model_fps;
  int encoder_hidden;
  int decoder_hidden;
  int feature_dim;
  double kl_weight_max;
  int kl_anneal_steps;
  double context_dropout;
  double feature_dropout;
  int batch_size;
  int train_steps;
  double learning_rate;
  int temporal_modeling;
  uint64_t seed;
} gh_model_config;

typedef struct gh_train_options {
  const char* manifest;
  const char* out_dir;
  gh_model_config config;
  int checkpoint_every; /* 0 disables intermediate checkpoints */
  int log_every;
} gh_train_options;

GH_API void gh_model_config_default(gh_model_config* config);
GH_API void gh_train_options_default(gh_train_options* options);
GH_API gh_status gh_train(const gh_train_options* options);

/* --- models --- */

typedef struct gh_model gh_model;

GH_API gh_status gh_model_load(const char* path, gh_model** model);
GH_API void gh_model_free(gh_model* model);
/* Any output pointer may be NULL. */
GH_API gh_status gh_model_info(const gh_model* model, gh_model_config* config, int64_t* step,
                               int64_t* parameter_count);

/* Decodes one window of config.window frames with latent z (latent_dim
 * values). context holds the two previous head poses, or NULL for none. */
GH_API gh_status gh_model_generate_window(const gh_model* model, const gh_pose* gaze, const gh_pose* context,
                                          const double* z, gh_pose* out);

/* Autoregressive generation over floor(n / window) windows. out must hold n
 * poses; *out_count receives the number written. */
GH_API gh_status gh_model_generate_long(const gh_model* model, const gh_pose* gaze, size_t n, uint64_t seed,
                                        int force_zero_context, gh_pose* out, size_t* out_count);

/* --- generation, evaluation, plots over files --- */

typedef enum gh_method {
  GH_METHOD_CVAE = 0,
  GH_METHOD_NO_TEMPORAL = 1,
  GH_METHOD_CONSTANT = 2,
  GH_METHOD_MIRROR = 3
} gh_method;

/* Accepts cvae, no-temporal, constant, mirror. */
GH_API gh_status gh_parse_method(const char* name, gh_method* method);
GH_API const char* gh_method_name(gh_method method);

typedef struct gh_generate_options {
  const char* checkpoint; /* may be NULL for the baselines */
  const char* gaze;
  const char* out;
  int k;
  uint64_t seed;
  gh_method method;
} gh_generate_options;

typedef struct gh_generate_summary {
  size_t videos;
  size_t frames_generated;
  size_t frames_dropped;
} gh_generate_summary;

GH_API void gh_generate_options_default(gh_generate_options* options);
GH_API gh_status gh_generate_file(const gh_generate_options* options, gh_generate_summary* summary);

typedef struct gh_evaluate_options {
  const char* manifest;
  const char* generated_dir;
  const char* out;
  int k;
} gh_evaluate_options;

GH_API void gh_evaluate_options_default(gh_evaluate_options* options);
GH_API gh_status gh_evaluate(const gh_evaluate_options* options);

GH_API gh_status gh_plot(const char* const* reports, size_t num_reports, const char* out_dir);

/* --- metrics on raw sequences --- */

GH_API gh_status gh_angular_error(const gh_pose* generated, const gh_pose* real, size_t n, double* out);
GH_API gh_status gh_smoothness(const gh_pose* sequence, size_t n, double* out);
/* samples holds k sequences of n poses back to back. */
GH_API gh_status gh_apd(const gh_pose* samples, size_t k, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* GAZEHEAD_H */
