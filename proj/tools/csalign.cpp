// csalign command-line tool: divergences on files, property suite, training,
// strategy ablation, and the circular-vs-pairwise benchmark.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "csalign/csalign.hpp"

namespace fs = std::filesystem;
using csalign::io::ordered_json;

namespace {

enum Exit : int { kOk = 0, kPropertyFailure = 1, kParseError = 2, kValidationError = 3, kNumericAbort = 4 };

int exit_code_for(csalign::ErrorCode code) {
  using csalign::ErrorCode;
  switch (code) {
    case ErrorCode::Parse:
    case ErrorCode::InvalidConfig: return kParseError;
    case ErrorCode::NonFiniteLoss: return kNumericAbort;
    default: return kValidationError;
  }
}

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string manifest_path;
  bool deterministic = true;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "key=value config file");
  cmd->add_option("--seed", opt.seed, "RNG seed (overrides the config file)");
  cmd->add_option("--out-dir", opt.out_dir, "directory for artifacts and manifest.json");
  cmd->add_option("--manifest", opt.manifest_path, "manifest path (default <out-dir>/manifest.json)");
  cmd->add_flag("--deterministic,!--no-deterministic", opt.deterministic,
                "single-threaded reference path (default on)");
}

csalign::ExperimentConfig resolve_config(const CommonOptions& opt) {
  csalign::ExperimentConfig cfg;
  if (!opt.config_path.empty()) csalign::apply_config(csalign::io::load_config(opt.config_path), cfg);
  if (opt.seed) cfg.synth.seed = cfg.train.seed = *opt.seed;
  return cfg;
}

class Run {
 public:
  Run(std::string command, const CommonOptions& opt)
      : command_(std::move(command)), opt_(opt), started_(csalign::io::utc_timestamp()) {}

  std::string artifact(const std::string& file) {
    fs::create_directories(opt_.out_dir);
    const std::string path = (fs::path(opt_.out_dir) / file).string();
    outputs_.push_back(path);
    return path;
  }

  void note_output(const std::string& path) { outputs_.push_back(path); }

  void finish(const ordered_json& config, std::uint64_t seed) {
    ordered_json m;
    m["command"] = command_;
    m["config"] = config;
    m["seed"] = seed;
    m["deterministic"] = opt_.deterministic;
    m["version"] = CSALIGN_VERSION;
    m["started"] = started_;
    m["finished"] = csalign::io::utc_timestamp();
    m["outputs"] = outputs_;
    std::string path = opt_.manifest_path;
    if (path.empty()) {
      fs::create_directories(opt_.out_dir);
      path = (fs::path(opt_.out_dir) / "manifest.json").string();
    }
    csalign::io::write_file(path, csalign::io::dump_json(m));
  }

 private:
  std::string command_;
  CommonOptions opt_;
  std::string started_;
  std::vector<std::string> outputs_;
};

std::string metric_columns(const std::vector<csalign::RetrievalMetrics>& metrics) {
  std::string out;
  for (const auto& m : metrics) out += "," + m.direction + "_p1," + m.direction + "_p10";
  return out;
}

ordered_json metrics_json(const std::vector<csalign::RetrievalMetrics>& metrics) {
  ordered_json j = ordered_json::object();
  for (const auto& m : metrics) {
    ordered_json d;
    for (const auto& [k, v] : m.p_at) d["p_at_" + std::to_string(k)] = v;
    d["map"] = m.map_score;
    j[m.direction] = d;
  }
  return j;
}

// ---------------------------------------------------------------- divergence

struct DivergenceArgs {
  std::string measure = "cs";
  std::vector<std::string> files;
  std::string out;
  bool label_col = false;
  double kl_epsilon = 1e-8;
  std::optional<double> bandwidth;
};

int cmd_divergence(const DivergenceArgs& a, const CommonOptions& opt) {
  Run run("divergence", opt);
  csalign::DivergenceValue result;
  const auto need = [&](std::size_t lo, std::size_t hi) {
    csalign::detail::require(a.files.size() >= lo && a.files.size() <= hi, csalign::ErrorCode::Parse,
                             "measure '" + a.measure + "' takes " + std::to_string(lo) +
                                 (hi == lo ? "" : "+") + " input files");
  };
  ordered_json config;
  config["measure"] = a.measure;
  config["inputs"] = a.files;

  if (a.measure == "cs" || a.measure == "gcs" || a.measure == "kl") {
    std::vector<csalign::Vector> pmfs;
    for (const auto& f : a.files) pmfs.push_back(csalign::io::load_pmf(f));
    if (a.measure == "cs") {
      need(2, 2);
      result = csalign::cs_divergence(pmfs[0], pmfs[1]);
    } else if (a.measure == "gcs") {
      need(2, static_cast<std::size_t>(-1));
      result = csalign::gcs_divergence(pmfs);
    } else {
      need(2, 2);
      config["kl_epsilon"] = a.kl_epsilon;
      const double v = csalign::kl_divergence(pmfs[0], pmfs[1], csalign::KlConfig{a.kl_epsilon});
      result = {v, v, 1.0};
    }
  } else if (a.measure == "mmd" || a.measure == "coral") {
    need(2, 2);
    const auto x = csalign::io::load_embeddings(a.files[0], a.label_col);
    const auto y = csalign::io::load_embeddings(a.files[1], a.label_col);
    double v = 0.0;
    if (a.measure == "mmd") {
      const csalign::MmdConfig cfg = a.bandwidth ? csalign::MmdConfig::fixed(*a.bandwidth) : csalign::MmdConfig{};
      config["mmd_bandwidth"] = a.bandwidth ? ordered_json(*a.bandwidth) : ordered_json("median");
      v = csalign::mmd_squared(x, y, cfg);
    } else {
      v = csalign::coral_loss(x, y);
    }
    result = {v, v, 1.0};
  } else {
    csalign::detail::fail(csalign::ErrorCode::Parse, "unknown measure '" + a.measure + "'");
  }

  ordered_json report;
  report["measure"] = a.measure;
  report["value"] = result.value;
  report["numerator"] = result.numerator;
  report["denominator"] = result.denominator;
  const std::string text = csalign::io::dump_json(report);
  std::cout << text;
  if (!a.out.empty()) {
    csalign::io::write_file(a.out, text);
    run.note_output(a.out);
  }
  run.finish(config, opt.seed.value_or(0));
  return kOk;
}

// --------------------------------------------------------------------- props

int cmd_props(int trials, bool flip_sign, const CommonOptions& opt) {
  Run run("props", opt);
  csalign::PropertyOptions po;
  po.seed = opt.seed.value_or(0);
  po.trials = trials;
  po.flip_gcs_sign = flip_sign;
  csalign::detail::require(trials >= 1, csalign::ErrorCode::InvalidConfig, "--trials must be >= 1");
  const auto summary = csalign::run_property_suite(po);

  ordered_json j;
  j["seed"] = po.seed;
  j["trials"] = po.trials;
  j["passed"] = summary.passed();
  j["failed_properties"] = summary.failed_properties();
  ordered_json props = ordered_json::array();
  for (const auto& r : summary.results) {
    ordered_json p;
    p["name"] = r.name;
    p["trials"] = r.trials;
    p["failures"] = r.failures;
    if (!r.passed()) p["first_failure"] = r.first_failure;
    props.push_back(p);
  }
  j["properties"] = props;
  const std::string text = csalign::io::dump_json(j);
  std::cout << text;
  csalign::io::write_file(run.artifact("props.json"), text);

  ordered_json config;
  config["trials"] = trials;
  config["fault_flip_gcs_sign"] = flip_sign;
  run.finish(config, po.seed);
  return summary.passed() ? kOk : kPropertyFailure;
}

// --------------------------------------------------------------------- train

int cmd_train(const CommonOptions& opt) {
  Run run("train", opt);
  const auto cfg = resolve_config(opt);
  const auto data = csalign::make_experiment_data(cfg);
  auto encoders = csalign::make_experiment_encoders(cfg);
  const auto trace = csalign::train_run(data.train, data.test, encoders, cfg.train);

  std::string csv = "epoch,loss";
  for (const auto& rec : trace.epochs) {
    if (!rec.metrics.empty()) {
      csv += metric_columns(rec.metrics);
      break;
    }
  }
  csv += "\n";
  for (const auto& rec : trace.epochs) {
    csv += std::to_string(rec.epoch) + "," + csalign::io::format_double(rec.loss);
    for (const auto& m : rec.metrics) {
      csv += "," + csalign::io::format_double(m.p_at.at(1)) + "," + csalign::io::format_double(m.p_at.at(10));
    }
    csv += "\n";
  }
  csalign::io::write_file(run.artifact("train_trace.csv"), csv);

  ordered_json j;
  j["epochs_run"] = trace.epochs.size();
  j["aborted"] = trace.aborted;
  j["abort_reason"] = trace.abort_reason;
  j["first_loss"] = trace.epochs.front().loss;
  j["final_loss"] = trace.last().loss;
  j["directions"] = metrics_json(trace.last().metrics);
  const std::string text = csalign::io::dump_json(j);
  csalign::io::write_file(run.artifact("train_metrics.json"), text);
  std::cout << text;

  const std::string cfg_path = run.artifact("resolved_config.txt");
  csalign::io::write_file(cfg_path, csalign::to_config_text(cfg));
  run.finish(csalign::to_json(cfg), cfg.train.seed);
  if (trace.aborted) {
    std::cerr << "csalign: " << trace.abort_reason << "\n";
    return kNumericAbort;
  }
  return kOk;
}

// -------------------------------------------------------------------- ablate

int cmd_ablate(const CommonOptions& opt) {
  Run run("ablate", opt);
  const auto cfg = resolve_config(opt);
  const auto data = csalign::make_experiment_data(cfg);
  const auto table = csalign::ablation_run(data, cfg.train, cfg.synth.embed_dim);

  std::string csv = "strategy,avg_p1,avg_p10,avg_map,final_loss,aborted,unsupervised_directions\n";
  ordered_json rows = ordered_json::array();
  bool aborted = false;
  for (const auto& row : table.rows) {
    std::string unsup;
    ordered_json dirs = ordered_json::object();
    for (const auto& d : row.directions) {
      if (!d.supervised) unsup += (unsup.empty() ? "" : ";") + d.metrics.direction;
      ordered_json dj = metrics_json({d.metrics})[d.metrics.direction];
      dj["supervised"] = d.supervised;
      dirs[d.metrics.direction] = dj;
    }
    csv += csalign::to_string(row.strategy) + "," + csalign::io::format_double(row.avg_p1) + "," +
           csalign::io::format_double(row.avg_p10) + "," + csalign::io::format_double(row.avg_map) + "," +
           csalign::io::format_double(row.final_loss) + "," + (row.aborted ? "1" : "0") + "," + unsup + "\n";
    ordered_json r;
    r["strategy"] = csalign::to_string(row.strategy);
    r["avg_p1"] = row.avg_p1;
    r["avg_p10"] = row.avg_p10;
    r["avg_map"] = row.avg_map;
    r["final_loss"] = row.final_loss;
    r["aborted"] = row.aborted;
    r["directions"] = dirs;
    rows.push_back(r);
    aborted = aborted || row.aborted;
  }
  csalign::io::write_file(run.artifact("ablation.csv"), csv);
  ordered_json j;
  j["rows"] = rows;
  const std::string text = csalign::io::dump_json(j);
  csalign::io::write_file(run.artifact("ablation.json"), text);
  std::cout << csv;
  csalign::io::write_file(run.artifact("resolved_config.txt"), csalign::to_config_text(cfg));
  run.finish(csalign::to_json(cfg), cfg.train.seed);
  return aborted ? kNumericAbort : kOk;
}

// --------------------------------------------------------------------- bench

int cmd_bench(csalign::BenchConfig bc, const CommonOptions& opt) {
  Run run("bench", opt);
  const auto cfg = resolve_config(opt);
  bc.seed = cfg.train.seed;
  bc.embed_dim = cfg.synth.embed_dim;
  const auto rows = csalign::run_bench(bc);

  std::string csv = "modalities,circular_builds,pairwise_builds,circular_seconds,pairwise_seconds\n";
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    csv += std::to_string(r.modalities) + "," + std::to_string(r.circular_builds) + "," +
           std::to_string(r.pairwise_builds) + "," + csalign::io::format_double(r.circular_seconds) + "," +
           csalign::io::format_double(r.pairwise_seconds) + "\n";
    ordered_json o;
    o["modalities"] = r.modalities;
    o["circular_builds"] = r.circular_builds;
    o["pairwise_builds"] = r.pairwise_builds;
    o["circular_seconds"] = r.circular_seconds;
    o["pairwise_seconds"] = r.pairwise_seconds;
    arr.push_back(o);
  }
  csalign::io::write_file(run.artifact("bench.csv"), csv);
  ordered_json j;
  j["rows"] = arr;
  csalign::io::write_file(run.artifact("bench.json"), csalign::io::dump_json(j));
  std::cout << csv;

  ordered_json config;
  config["min_modalities"] = bc.min_modalities;
  config["max_modalities"] = bc.max_modalities;
  config["batch_size"] = bc.batch_size;
  config["embed_dim"] = bc.embed_dim;
  config["num_classes"] = bc.num_classes;
  config["repeats"] = bc.repeats;
  run.finish(config, bc.seed);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csalign: Cauchy-Schwarz divergence alignment toolkit"};
  app.set_version_flag("--version", CSALIGN_VERSION);
  app.require_subcommand(1);

  CommonOptions div_opt, props_opt, train_opt, ablate_opt, bench_opt;

  DivergenceArgs div;
  auto* c_div = app.add_subcommand("divergence", "divergence between PMF files or embedding files");
  c_div->add_option("--measure", div.measure, "cs | gcs | kl | mmd | coral")
      ->check(CLI::IsMember({"cs", "gcs", "kl", "mmd", "coral"}));
  c_div->add_option("files", div.files, "PMF files (cs, gcs, kl) or embedding files (mmd, coral)")->required();
  c_div->add_option("--out", div.out, "also write the JSON report here");
  c_div->add_flag("--label-col", div.label_col, "last CSV column holds integer labels");
  c_div->add_option("--kl-epsilon", div.kl_epsilon, "KL smoothing constant");
  c_div->add_option("--bandwidth", div.bandwidth, "fixed MMD bandwidth (default: median heuristic)");
  add_common(c_div, div_opt);

  int trials = 1000;
  bool flip = false;
  auto* c_props = app.add_subcommand("props", "seeded randomized property suite");
  c_props->add_option("--trials", trials, "trials per property");
  c_props->add_flag("--fault-flip-gcs-sign", flip, "test hook: negate GCS values (suite must fail)");
  add_common(c_props, props_opt);

  auto* c_train = app.add_subcommand("train", "train encoders on the synthetic benchmark");
  add_common(c_train, train_opt);

  auto* c_ablate = app.add_subcommand("ablate", "clockwise / counterclockwise / mixed ablation");
  add_common(c_ablate, ablate_opt);

  csalign::BenchConfig bc;
  auto* c_bench = app.add_subcommand("bench", "circular vs pairwise PMF builds and timings");
  c_bench->add_option("--min-modalities", bc.min_modalities);
  c_bench->add_option("--max-modalities", bc.max_modalities);
  c_bench->add_option("--batch-size", bc.batch_size);
  c_bench->add_option("--repeats", bc.repeats);
  add_common(c_bench, bench_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParseError;
  }

  try {
    if (c_div->parsed()) return cmd_divergence(div, div_opt);
    if (c_props->parsed()) return cmd_props(trials, flip, props_opt);
    if (c_train->parsed()) return cmd_train(train_opt);
    if (c_ablate->parsed()) return cmd_ablate(ablate_opt);
    if (c_bench->parsed()) return cmd_bench(bc, bench_opt);
  } catch (const csalign::Error& e) {
    std::cerr << "csalign: " << csalign::to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "csalign: " << e.what() << "\n";
    return kParseError;
  }
  return kParseError;
}
