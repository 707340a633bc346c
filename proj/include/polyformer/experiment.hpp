#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polyformer/polynomial.hpp"
#include "polyformer/training.hpp"

namespace polyformer {

/// User-facing experiment settings. Zero / empty fields fall back to the
/// built-in defaults of the selected target.
struct ExperimentConfig {
  std::string target = "f1";  // "f1" | "f2" | path to a polynomial JSON file
  std::string model = "attention";  // attention | nn_depth | nn_width
  double scale = 1.0;
  std::uint64_t seed = 42;
  int sample_count = 0;
  std::vector<double> covariance;
  int train_count = 0;
  int epochs = 0;
  int batch_size = 0;
  double lr_init = 0.0;
  double lr_max = 0.0;
  double clip_norm = 0.0;
  double warmup_fraction = 0.0;
  std::string out_dir = "runs";
};

/// Fully resolved settings: built-in defaults applied, then the scale factor
/// (sample count, epochs and batch size all scale together, rounded up, with
/// the batch capped at the train size).
struct ResolvedExperiment {
  std::string target_name;
  Polynomial target = Polynomial(1, 0);
  int sample_count = 0;
  int train_count = 0;
  std::vector<double> covariance;
  TrainConfig train;
  double input_bound_est = 0.0;  // 3 sqrt(max covariance * d)
  int tokens = 0;                // n_q
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg);

struct ModelRun {
  std::string kind;
  RunHistory history;
  double final_train_mse = 0.0;
  double final_test_mse = 0.0;
  int convergence = -1;
  double wall_seconds = 0.0;
  std::int64_t params = 0;
  std::unique_ptr<SgdTrainable> trained;
};

// Generates data (seed), splits it (seed+1), initializes the model (seed+2)
// and trains it (shuffle seed+3).
ModelRun run_model(const ResolvedExperiment& exp, const std::string& kind);

// history.csv, summary.json, model.json and, for 2-d targets, surface.csv
// over the [-30, 30]^2 grid with 101 points per axis.
void write_run_outputs(const ResolvedExperiment& exp, const ModelRun& run, const std::string& dir);

struct ReproduceReport {
  std::vector<ModelRun> runs;  // attention, nn_depth, nn_width
  bool attention_wins = false;
};

ReproduceReport run_reproduce(const ResolvedExperiment& exp);

}  // namespace polyformer
