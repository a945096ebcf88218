#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gazehead/cvae.hpp"
#include "gazehead/error.hpp"
#include "gazehead/log.hpp"

namespace gazehead::cvae {

using nlohmann::json;

// --- checkpoints -------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'G', 'H', 'C', 'V', 'A', 'E', '\0', '\1'};

json config_to_json(const ModelConfig& c) {
  return {{"window", c.window},
          {"latent_dim", c.latent_dim},
          {"model_fps", c.model_fps},
          {"encoder_hidden", c.encoder_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"feature_dim", c.feature_dim},
          {"kl_weight_max", c.kl_weight_max},
          {"kl_anneal_steps", c.kl_anneal_steps},
          {"context_dropout_prob", c.context_dropout_prob},
          {"feature_dropout_prob", c.feature_dropout_prob},
          {"batch_size", c.batch_size},
          {"train_steps", c.train_steps},
          {"learning_rate", c.learning_rate},
          {"temporal_modeling", c.temporal_modeling},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.window = j.at("window").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.model_fps = j.at("model_fps").get<double>();
  c.encoder_hidden = j.at("encoder_hidden").get<int>();
  c.decoder_hidden = j.at("decoder_hidden").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.kl_weight_max = j.at("kl_weight_max").get<double>();
  c.kl_anneal_steps = j.at("kl_anneal_steps").get<int>();
  c.context_dropout_prob = j.at("context_dropout_prob").get<double>();
  c.feature_dropout_prob = j.at("feature_dropout_prob").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.train_steps = j.at("train_steps").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.temporal_modeling = j.at("temporal_modeling").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename T>
void put(std::string& out, const T& value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  require(pos + sizeof(T) <= in.size(), ErrorCode::Parse, "checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const Model probe(ck.config, ck.norm, ck.parameters);
  json meta;
  meta["config"] = config_to_json(ck.config);
  meta["normalization"] = {{"mean", ck.norm.mean}, {"std", ck.norm.std}};
  meta["step"] = ck.step;
  meta["rng_state"] = ck.rng_state;
  json tensors = json::array();
  for (const auto& slot : probe.parameter_set().slots()) {
    tensors.push_back({{"name", slot.name}, {"rows", slot.rows}, {"cols", slot.cols}});
  }
  meta["tensors"] = tensors;
  const std::string meta_text = meta.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointFormatVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ck.parameters.size()));
  out.append(reinterpret_cast<const char*>(ck.parameters.data()),
             static_cast<std::size_t>(ck.parameters.size()) * sizeof(double));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  require(bytes.size() >= sizeof(kMagic) && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0,
          ErrorCode::Parse, "not a gazehead checkpoint (bad magic)");
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointFormatVersion) {
    fail(ErrorCode::FormatVersion, "checkpoint format version " + std::to_string(version) +
                                       " is not supported (expected " +
                                       std::to_string(kCheckpointFormatVersion) + ")");
  }
  take<std::uint32_t>(bytes, pos);
  const auto meta_len = take<std::uint64_t>(bytes, pos);
  require(pos + meta_len <= bytes.size(), ErrorCode::Parse, "checkpoint metadata truncated");
  Checkpoint ck;
  json meta;
  try {
    meta = json::parse(bytes.substr(pos, meta_len));
    ck.config = config_from_json(meta.at("config"));
    for (int d = 0; d < 4; ++d) {
      ck.norm.mean[d] = meta.at("normalization").at("mean").at(d).get<double>();
      ck.norm.std[d] = meta.at("normalization").at("std").at(d).get<double>();
    }
    ck.step = meta.at("step").get<std::int64_t>();
    ck.rng_state = meta.at("rng_state").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("checkpoint metadata: ") + e.what());
  }
  pos += meta_len;
  const auto count = take<std::uint64_t>(bytes, pos);
  require(pos + count * sizeof(double) == bytes.size(), ErrorCode::Parse, "checkpoint parameter block size mismatch");
  ck.parameters.resize(static_cast<Eigen::Index>(count));
  std::memcpy(ck.parameters.data(), bytes.data() + pos, count * sizeof(double));

  // The stored tensor table must agree with the layout the config implies.
  const Model probe(ck.config, ck.norm, ck.parameters);
  const auto& slots = probe.parameter_set().slots();
  const auto& tensors = meta.at("tensors");
  require(tensors.size() == slots.size(), ErrorCode::Validation, "checkpoint tensor table does not match config");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    require(tensors[i].at("name").get<std::string>() == slots[i].name &&
                tensors[i].at("rows").get<Eigen::Index>() == slots[i].rows &&
                tensors[i].at("cols").get<Eigen::Index>() == slots[i].cols,
            ErrorCode::Validation, "checkpoint tensor '" + slots[i].name + "' does not match config");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::Io, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open checkpoint '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  return Model(checkpoint.config, checkpoint.norm, checkpoint.parameters);
}

// --- training ----------------------------------------------------------------

Trainer::Trainer(const data::DatasetManifest& manifest, ModelConfig config)
    : manifest_(manifest),
      model_((config.validate(), config), manifest.normalization),
      optimizer_(model_.parameter_count()),
      rng_(derive_seed(config.seed, 1)) {
  require(!manifest.windows.empty(), ErrorCode::Validation, "training manifest has no windows");
  require(manifest.window_length == config.window, ErrorCode::Config,
          "manifest window length " + std::to_string(manifest.window_length) + " != model window " +
              std::to_string(config.window));
}

StochasticInputs Trainer::draw_noise(Eigen::Index batch_size) {
  const ModelConfig& c = model_.config();
  StochasticInputs noise;
  noise.latent_noise.resize(c.latent_dim, batch_size);
  for (Eigen::Index j = 0; j < batch_size; ++j) {
    for (Eigen::Index i = 0; i < c.latent_dim; ++i) noise.latent_noise(i, j) = rng_.normal();
  }
  const double p = c.feature_dropout_prob;
  if (p > 0.0) {
    const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
    auto mask = [&] {
      Matrix m(c.feature_dim, batch_size);
      for (Eigen::Index j = 0; j < batch_size; ++j) {
        for (Eigen::Index i = 0; i < c.feature_dim; ++i) m(i, j) = rng_.bernoulli(p) ? 0.0 : keep_scale;
      }
      return m;
    };
    for (int t = 0; t < c.window; ++t) {
      noise.gaze_masks.push_back(mask());
      noise.head_masks.push_back(mask());
    }
    noise.context_mask = c.temporal_modeling ? mask() : Matrix::Ones(c.feature_dim, batch_size);
  }
  return noise;
}

StepRecord Trainer::train_step(std::span<const std::size_t> batch_indices) {
  const ModelConfig& c = model_.config();
  require(!batch_indices.empty(), ErrorCode::Contract, "empty batch");
  std::vector<const MotionWindow*> windows;
  windows.reserve(batch_indices.size());
  for (std::size_t idx : batch_indices) {
    require(idx < manifest_.windows.size(), ErrorCode::Contract, "batch index out of range");
    windows.push_back(&manifest_.windows[idx].window);
  }
  Batch batch = model_.make_batch(windows);
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const bool drop = rng_.bernoulli(c.context_dropout_prob);
    if (drop || !c.temporal_modeling) {
      batch.context.col(b).setZero();
      batch.has_context(b) = 0.0;
    }
  }
  const StochasticInputs noise = draw_noise(batch.size());

  StepRecord record;
  record.step = step_;
  record.kl_weight = kl_anneal(step_, c);
  record.loss = model_.loss_and_gradient(batch, noise, record.kl_weight, &gradient_);
  if (!std::isfinite(record.loss.total) || !gradient_.allFinite()) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_ << " (total=" << record.loss.total << "); batch:";
    for (std::size_t idx : batch_indices) {
      os << ' ' << manifest_.windows[idx].sequence_id << '#' << manifest_.windows[idx].window_index;
    }
    fail(ErrorCode::Numeric, os.str());
  }
  optimizer_.step(model_.parameters(), gradient_, c.learning_rate);
  ++step_;
  return record;
}

StepRecord Trainer::step() {
  const auto n = static_cast<std::uint64_t>(manifest_.windows.size());
  std::vector<std::size_t> indices(static_cast<std::size_t>(model_.config().batch_size));
  for (auto& i : indices) i = static_cast<std::size_t>(rng_.below(n));
  return train_step(indices);
}

Checkpoint Trainer::checkpoint() const {
  return {model_.config(), model_.norm_stats(), model_.parameters(), step_, rng_.state()};
}

Checkpoint train(const data::DatasetManifest& manifest, const ModelConfig& config, const TrainOptions& options) {
  Trainer trainer(manifest, config);
  log::info("train: " + std::to_string(trainer.model().parameter_count()) + " parameters, " +
            std::to_string(manifest.windows.size()) + " windows, " + std::to_string(config.train_steps) +
            " steps, temporal_modeling=" + (config.temporal_modeling ? "true" : "false"));
  double running_total = 0.0, running_recon = 0.0, running_kl = 0.0;
  int running_n = 0;
  for (int s = 0; s < config.train_steps; ++s) {
    const StepRecord rec = trainer.step();
    if (options.on_step) options.on_step(rec);
    running_total += rec.loss.total;
    running_recon += rec.loss.reconstruction;
    running_kl += rec.loss.kl;
    ++running_n;
    const std::int64_t done = trainer.current_step();
    if (options.log_every > 0 && (done % options.log_every == 0 || done == config.train_steps)) {
      std::ostringstream os;
      os.precision(5);
      os << "step " << done << "/" << config.train_steps << " loss " << running_total / running_n << " recon "
         << running_recon / running_n << " kl " << running_kl / running_n << " lambda " << rec.kl_weight;
      log::info(os.str());
      running_total = running_recon = running_kl = 0.0;
      running_n = 0;
    }
    if (options.checkpoint_every > 0 && done % options.checkpoint_every == 0 && options.on_checkpoint) {
      options.on_checkpoint(trainer.checkpoint());
    }
  }
  return trainer.checkpoint();
}

}  // namespace gazehead::cvae
