// Command-line front end: train, eval, bench, ablate and synth.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lightrdl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lightrdl;

namespace {

std::vector<PipelineMode> parse_modes(const std::string& text) {
  std::vector<PipelineMode> modes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) modes.push_back(parse_pipeline_mode(item));
  return modes;
}

SynthConfig load_synth_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    // Accept a bare generator config or a pipeline config with a "synth" section.
    return SynthConfig::from_json(j.contains("synth") ? j.at("synth") : j);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(file.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity-level prediction on temporal relational databases"};
  app.require_subcommand(1);

  fs::path config_path, bundle, out_dir;
  std::string mode_text, modes_text = "lightrdl,rdl-baseline";
  std::uint64_t seed = 0;
  bool force = false;

  auto* train = app.add_subcommand("train", "Train every configured seed and write a bundle");
  train->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  auto* seed_opt = train->add_option("--seed", seed, "Train a single seed instead of the configured list");
  train->add_option("--mode", mode_text, "Override the configured mode");
  train->add_option("--out", out_dir, "Override the bundle directory");

  auto* eval = app.add_subcommand("eval", "Recompute test metrics of a trained bundle");
  eval->add_option("--bundle", bundle, "Bundle directory written by train")->required();

  auto* bench = app.add_subcommand("bench", "Time graph construction, training and inference per mode");
  bench->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  bench->add_option("--modes", modes_text, "Comma-separated modes");
  bench->add_option("--out", out_dir, "Directory for bench.json and bench.txt");

  auto* ablate = app.add_subcommand("ablate", "Mean test metric per mode over all configured seeds");
  ablate->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  ablate->add_option("--modes", modes_text, "Comma-separated modes")->default_val("lightrdl,no-time,with-pred");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic database with its tasks");
  synth->add_option("--config", config_path, "Generator config (JSON)")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_flag("--force", force, "Overwrite a non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the exit code of bad configs; --help still exits 0.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      PipelineConfig cfg = load_pipeline_config(config_path);
      if (!mode_text.empty()) cfg.mode = parse_pipeline_mode(mode_text);
      if (*seed_opt) cfg.seeds = {seed};
      if (!out_dir.empty()) cfg.output = out_dir;
      cfg.validate();
      const fs::path dir = run_train(cfg);
      std::ifstream summary(dir / "summary.json");
      std::cout << "bundle: " << dir.string() << "\n" << summary.rdbuf();
    } else if (*eval) {
      const EvalSummary s = run_eval(bundle);
      for (const SeedMetric& m : s.per_seed)
        std::printf("seed %llu: %s = %.6f (n=%zu)\n", static_cast<unsigned long long>(m.seed), s.metric.c_str(),
                    m.report.value, m.report.n);
      std::printf("%s mean %.6f std %.6f over %zu seeds\n", s.metric.c_str(), s.mean, s.std, s.per_seed.size());
    } else if (*bench) {
      const PipelineConfig cfg = load_pipeline_config(config_path);
      const BenchReport report = run_bench(cfg, parse_modes(modes_text));
      const fs::path dir = out_dir.empty() ? cfg.output : out_dir;
      fs::create_directories(dir);
      write_file(dir / "bench.json", report.to_json().dump(2) + "\n");
      write_file(dir / "bench.txt", report.to_table());
      std::cout << report.to_table();
    } else if (*ablate) {
      const PipelineConfig cfg = load_pipeline_config(config_path);
      for (const AblationRow& row : run_ablation(cfg, parse_modes(modes_text)))
        std::printf("%-13s %s mean %.6f std %.6f\n", std::string(to_string(row.mode)).c_str(),
                    row.summary.metric.c_str(), row.summary.mean, row.summary.std);
    } else if (*synth) {
      const SynthConfig cfg = load_synth_config(config_path);
      run_synth(cfg, out_dir, force);
      std::cout << "wrote " << out_dir.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
