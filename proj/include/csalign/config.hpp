#pragma once

// Maps flat key=value config entries onto SynthConfig / TrainConfig.

#include <map>
#include <string>
#include <vector>

#include "csalign/error.hpp"
#include "csalign/io.hpp"
#include "csalign/synth.hpp"

namespace csalign {

struct ExperimentConfig {
  SynthConfig synth;
  TrainConfig train;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : io::detail::split(s, ',')) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) out += (k ? "," : "") + items[k];
  return out;
}

}  // namespace detail

/// Applies every entry; unknown keys and malformed values raise ErrorCode::Parse.
inline void apply_config(const std::map<std::string, std::string>& kv, ExperimentConfig& cfg) {
  auto& s = cfg.synth;
  auto& t = cfg.train;
  for (const auto& [key, value] : kv) {
    const std::string where = "config key '" + key + "'";
    auto num = [&] { return io::detail::to_double(value, where); };
    auto integer = [&] { return static_cast<int>(io::detail::to_int(value, where)); };
    if (key == "num_classes") s.num_classes = integer();
    else if (key == "per_class") s.per_class = integer();
    else if (key == "input_dims") {
      s.input_dims.clear();
      for (const auto& f : detail::split_list(value)) s.input_dims.push_back(static_cast<int>(io::detail::to_int(f, where)));
    } else if (key == "embed_dim") s.embed_dim = integer();
    else if (key == "class_sep") s.class_sep = num();
    else if (key == "noise_sigma") s.noise_sigma = num();
    else if (key == "modality_names") s.modality_names = detail::split_list(value);
    else if (key == "seed") {
      const auto v = io::detail::to_int(value, where);
      detail::require(v >= 0, ErrorCode::Parse, where + ": seed must be non-negative");
      s.seed = t.seed = static_cast<std::uint64_t>(v);
    } else if (key == "learning_rate") t.learning_rate = num();
    else if (key == "adam_beta1") t.adam_beta1 = num();
    else if (key == "adam_beta2") t.adam_beta2 = num();
    else if (key == "adam_epsilon") t.adam_epsilon = num();
    else if (key == "weight_decay") t.weight_decay = num();
    else if (key == "grad_clip_norm") t.grad_clip_norm = num();
    else if (key == "lr_decay_every") t.lr_decay_every = integer();
    else if (key == "lr_decay_factor") t.lr_decay_factor = num();
    else if (key == "max_epochs") t.max_epochs = integer();
    else if (key == "batch_size") t.batch_size = integer();
    else if (key == "hidden_dim") t.hidden_dim = integer();
    else if (key == "holdout_fraction") t.holdout_fraction = num();
    else if (key == "temperature") t.align.temperature = num();
    else if (key == "kl_epsilon") t.kl.epsilon = num();
    else if (key == "mmd_bandwidth") {
      t.mmd = value == "median" ? MmdConfig::median_heuristic() : MmdConfig::fixed(num());
    } else if (key == "loss_kind") {
      try {
        t.loss_kind = parse_loss_kind(value);
      } catch (const Error& e) {
        detail::fail(ErrorCode::Parse, e.what());
      }
    } else if (key == "strategy") {
      try {
        t.strategy = parse_strategy(value);
      } catch (const Error& e) {
        detail::fail(ErrorCode::Parse, e.what());
      }
    } else {
      detail::fail(ErrorCode::Parse, "unknown " + where);
    }
  }
}

/// Fully resolved configuration, one entry per key accepted by apply_config.
inline io::ordered_json to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.synth;
  const auto& t = cfg.train;
  std::vector<std::string> names;
  for (std::size_t m = 0; m < s.modalities(); ++m) names.push_back(s.modality_name(m));
  io::ordered_json j;
  j["num_classes"] = s.num_classes;
  j["per_class"] = s.per_class;
  j["input_dims"] = s.input_dims;
  j["embed_dim"] = s.embed_dim;
  j["class_sep"] = s.class_sep;
  j["noise_sigma"] = s.noise_sigma;
  j["modality_names"] = names;
  j["seed"] = t.seed;
  j["learning_rate"] = t.learning_rate;
  j["adam_beta1"] = t.adam_beta1;
  j["adam_beta2"] = t.adam_beta2;
  j["adam_epsilon"] = t.adam_epsilon;
  j["weight_decay"] = t.weight_decay;
  j["grad_clip_norm"] = t.grad_clip_norm;
  j["lr_decay_every"] = t.lr_decay_every;
  j["lr_decay_factor"] = t.lr_decay_factor;
  j["max_epochs"] = t.max_epochs;
  j["batch_size"] = t.batch_size;
  j["hidden_dim"] = t.hidden_dim;
  j["holdout_fraction"] = t.holdout_fraction;
  j["temperature"] = t.align.temperature;
  j["kl_epsilon"] = t.kl.epsilon;
  if (t.mmd.bandwidth) j["mmd_bandwidth"] = *t.mmd.bandwidth;
  else j["mmd_bandwidth"] = "median";
  j["loss_kind"] = to_string(t.loss_kind);
  j["strategy"] = to_string(t.strategy);
  return j;
}

/// key=value text that apply_config maps back onto an identical configuration.
inline std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  const io::ordered_json j = to_json(cfg);
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_array()) {
      std::vector<std::string> parts;
      for (const auto& v : value) parts.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      text = detail::join(parts);
    } else if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number_float()) {
      text = io::format_double(value.get<double>());
    } else {
      text = value.dump();
    }
    out += key + "=" + text + "\n";
  }
  return out;
}

/// Generates the synthetic benchmark for `cfg` and splits off the held-out part.
inline DataSplit make_experiment_data(const ExperimentConfig& cfg) {
  cfg.synth.validate();
  cfg.train.validate();
  auto split = split_holdout(generate_synthetic(cfg.synth), cfg.train.holdout_fraction, cfg.train.seed);
  const auto gallery = static_cast<std::size_t>(split.test[0].rows());
  for (std::size_t k : cfg.train.ks) {
    detail::require(k <= gallery, ErrorCode::InvalidConfig,
                    "held-out split has " + std::to_string(gallery) + " items, too few for P@" + std::to_string(k));
  }
  return split;
}

inline std::vector<Encoder> make_experiment_encoders(const ExperimentConfig& cfg) {
  return make_encoders(cfg.synth.input_dims, cfg.synth.embed_dim, cfg.train.hidden_dim, cfg.train.seed);
}

}  // namespace csalign
