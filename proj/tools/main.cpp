#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polyformer/compiler.hpp"
#include "polyformer/experiment.hpp"
#include "polyformer/serialization.hpp"

namespace {

using namespace polyformer;

Polynomial load_target(const std::string& target) {
  if (target == "f1") return target_f1();
  if (target == "f2") return target_f2();
  return polynomial_from_json(load_json_file(target));
}

// Uniform draw from the ball of radius `bound`.
std::vector<double> ball_point(int d, double bound, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> x(d);
  double norm_sq = 0.0;
  for (double& c : x) {
    c = gauss(rng);
    norm_sq += c * c;
  }
  double norm = std::sqrt(norm_sq);
  double radius = bound * std::pow(unif(rng), 1.0 / static_cast<double>(d));
  if (norm > 0.0)
    for (double& c : x) c *= radius / norm;
  return x;
}

int cmd_compile_check(const std::string& target, double bound, int points, std::uint64_t seed,
                      const std::string& json_out, const std::string& trace_out) {
  Polynomial p = load_target(target);
  if (p.degree() < 1) {
    std::cout << "degenerate input: the polynomial is constant (degree 0); no encoder blocks are\n"
                 "needed and the model reduces to its readout bias "
              << p.constant_term() << "\n";
    if (!json_out.empty())
      save_json_file(json_out, {{"degenerate", true}, {"constant", p.constant_term()}, {"passed", true}});
    return 0;
  }

  TransformerModel model;
  try {
    model = compile_exact(p, bound, seed);
  } catch (const std::exception& e) {
    std::cerr << "compilation failed: " << e.what() << "\n";
    return 1;
  }

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  double max_abs = 0.0, max_rel = 0.0;
  for (int i = 0; i < points; ++i) {
    std::vector<double> x = ball_point(p.dim(), bound, rng);
    double want = p.eval(x);
    double got = forward_fast(model, x);
    double abs_err = std::abs(got - want);
    max_abs = std::max(max_abs, abs_err);
    max_rel = std::max(max_rel, abs_err / (1.0 + std::abs(want)));
  }
  if (!trace_out.empty()) {
    std::ofstream os(trace_out);
    write_trace_jsonl(forward_trace(model, ball_point(p.dim(), bound, rng)), os);
  }

  std::int64_t params = count_free_params(model);
  std::int64_t nonzeros = count_nonzeros(model);
  std::int64_t bound_params = free_param_bound(model.d, model.q);
  std::int64_t bound_nonzeros = nonzero_bound(model.d, model.q);
  bool passed = max_rel < 1e-6 && params <= bound_params && nonzeros <= bound_nonzeros;

  std::cout << "target          " << target << " (d=" << model.d << ", q=" << model.q
            << ", tokens=" << model.n << ")\n"
            << "ball radius     " << bound << "\n"
            << "eval points     " << points << "\n"
            << "max abs error   " << max_abs << "\n"
            << "max rel error   " << max_rel << "\n"
            << "free params     " << params << " (bound " << bound_params << ")\n"
            << "non-zeros       " << nonzeros << " (bound " << bound_nonzeros << ")\n"
            << "result          " << (passed ? "PASS" : "FAIL") << "\n";
  if (!json_out.empty())
    save_json_file(json_out, {{"degenerate", false},
                              {"target", target},
                              {"bound", bound},
                              {"points", points},
                              {"max_abs_err", max_abs},
                              {"max_rel_err", max_rel},
                              {"free_params", params},
                              {"nonzeros", nonzeros},
                              {"bound_params", bound_params},
                              {"bound_nonzeros", bound_nonzeros},
                              {"passed", passed}});
  return passed ? 0 : 1;
}

void overlay_config_file(ExperimentConfig& cfg, const std::string& path) {
  nlohmann::json j = load_json_file(path);
  if (j.contains("target")) cfg.target = j["target"].get<std::string>();
  if (j.contains("model")) cfg.model = j["model"].get<std::string>();
  if (j.contains("scale")) cfg.scale = j["scale"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("sample_count")) cfg.sample_count = j["sample_count"].get<int>();
  if (j.contains("covariance")) cfg.covariance = j["covariance"].get<std::vector<double>>();
  if (j.contains("train_count")) cfg.train_count = j["train_count"].get<int>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("lr_init")) cfg.lr_init = j["lr_init"].get<double>();
  if (j.contains("lr_max")) cfg.lr_max = j["lr_max"].get<double>();
  if (j.contains("clip_norm")) cfg.clip_norm = j["clip_norm"].get<double>();
  if (j.contains("warmup_fraction")) cfg.warmup_fraction = j["warmup_fraction"].get<double>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
}

void print_comparison(const ReproduceReport& report) {
  std::printf("%-10s %14s %14s %12s %10s %10s\n", "model", "train_mse", "test_mse", "conv_epoch",
              "seconds", "params");
  for (const auto& run : report.runs)
    std::printf("%-10s %14.6g %14.6g %12d %10.1f %10lld\n", run.kind.c_str(), run.final_train_mse,
                run.final_test_mse, run.convergence, run.wall_seconds,
                static_cast<long long>(run.params));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact polynomial compilation into fixed-block attention models, plus the training benchmarks"};
  app.require_subcommand(1);

  // compile-check ------------------------------------------------------
  std::string cc_target = "f1";
  std::string cc_poly;
  double cc_bound = 0.0;
  int cc_points = 200;
  std::uint64_t cc_seed = 42;
  std::string cc_json, cc_trace;
  auto* cc = app.add_subcommand("compile-check", "compile a polynomial and verify the model output");
  cc->add_option("--target", cc_target, "f1 | f2 | path to polynomial JSON");
  cc->add_option("--poly", cc_poly, "path to polynomial JSON (alias for --target <path>)");
  cc->add_option("--bound", cc_bound, "ball radius the model is built for");
  cc->add_option("--points", cc_points, "number of random evaluation points");
  cc->add_option("--seed", cc_seed, "seed for directions and evaluation points");
  cc->add_option("--json", cc_json, "write the report to this JSON file");
  cc->add_option("--trace", cc_trace, "dump a JSONL block trace for one point");

  // train ----------------------------------------------------------------
  ExperimentConfig tr_cfg;
  std::string tr_config_file;
  auto* tr = app.add_subcommand("train", "train one model on a synthetic regression task");
  auto* tr_target = tr->add_option("--target", tr_cfg.target, "f1 | f2 | path to polynomial JSON");
  auto* tr_model = tr->add_option("--model", tr_cfg.model, "attention | nn_depth | nn_width");
  auto* tr_scale = tr->add_option("--scale", tr_cfg.scale, "scale factor in (0, 1]");
  auto* tr_seed = tr->add_option("--seed", tr_cfg.seed, "base seed");
  auto* tr_epochs = tr->add_option("--epochs", tr_cfg.epochs, "override epoch count");
  auto* tr_batch = tr->add_option("--batch-size", tr_cfg.batch_size, "override batch size");
  auto* tr_lr_init = tr->add_option("--lr-init", tr_cfg.lr_init, "initial learning rate");
  auto* tr_lr_max = tr->add_option("--lr-max", tr_cfg.lr_max, "maximum learning rate");
  auto* tr_clip = tr->add_option("--clip-norm", tr_cfg.clip_norm, "gradient clipping threshold");
  auto* tr_out = tr->add_option("--out-dir", tr_cfg.out_dir, "output directory");
  tr->add_option("--config", tr_config_file, "JSON config file (flags take precedence)");

  // reproduce -----------------------------------------------------------
  std::string rp_target = "f1";
  ExperimentConfig rp_cfg;
  std::string rp_config_file;
  auto* rp = app.add_subcommand("reproduce", "train the attention model and both baselines, compare test MSE");
  rp->add_option("target", rp_target, "f1 | f2")->required();
  auto* rp_scale = rp->add_option("--scale", rp_cfg.scale, "scale factor in (0, 1]");
  auto* rp_seed = rp->add_option("--seed", rp_cfg.seed, "base seed");
  auto* rp_epochs = rp->add_option("--epochs", rp_cfg.epochs, "override epoch count");
  auto* rp_batch = rp->add_option("--batch-size", rp_cfg.batch_size, "override batch size");
  auto* rp_lr_init = rp->add_option("--lr-init", rp_cfg.lr_init, "initial learning rate");
  auto* rp_lr_max = rp->add_option("--lr-max", rp_cfg.lr_max, "maximum learning rate");
  auto* rp_clip = rp->add_option("--clip-norm", rp_cfg.clip_norm, "gradient clipping threshold");
  auto* rp_out = rp->add_option("--out-dir", rp_cfg.out_dir, "output directory");
  rp->add_option("--config", rp_config_file, "JSON config file (flags take precedence)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cc->parsed()) {
      std::string target = cc_poly.empty() ? cc_target : cc_poly;
      double bound = cc_bound > 0.0 ? cc_bound : (target == "f2" ? 6.0 : 5.0);
      return cmd_compile_check(target, bound, cc_points, cc_seed, cc_json, cc_trace);
    }

    if (tr->parsed()) {
      ExperimentConfig cfg;  // flags > config file > built-in defaults
      if (!tr_config_file.empty()) overlay_config_file(cfg, tr_config_file);
      if (tr_target->count()) cfg.target = tr_cfg.target;
      if (tr_model->count()) cfg.model = tr_cfg.model;
      if (tr_scale->count()) cfg.scale = tr_cfg.scale;
      if (tr_seed->count()) cfg.seed = tr_cfg.seed;
      if (tr_epochs->count()) cfg.epochs = tr_cfg.epochs;
      if (tr_batch->count()) cfg.batch_size = tr_cfg.batch_size;
      if (tr_lr_init->count()) cfg.lr_init = tr_cfg.lr_init;
      if (tr_lr_max->count()) cfg.lr_max = tr_cfg.lr_max;
      if (tr_clip->count()) cfg.clip_norm = tr_cfg.clip_norm;
      if (tr_out->count()) cfg.out_dir = tr_cfg.out_dir;

      ResolvedExperiment exp = resolve_experiment(cfg);
      ModelRun run = run_model(exp, cfg.model);
      write_run_outputs(exp, run, exp.out_dir);
      std::cout << cfg.model << " on " << cfg.target << ": train_mse=" << run.final_train_mse
                << " test_mse_clean=" << run.final_test_mse << " convergence_epoch=" << run.convergence
                << " seconds=" << run.wall_seconds << "\n"
                << "outputs written to " << exp.out_dir << "\n";
      return 0;
    }

    if (rp->parsed()) {
      ExperimentConfig cfg;
      if (!rp_config_file.empty()) overlay_config_file(cfg, rp_config_file);
      cfg.target = rp_target;
      if (rp_scale->count()) cfg.scale = rp_cfg.scale;
      if (rp_seed->count()) cfg.seed = rp_cfg.seed;
      if (rp_epochs->count()) cfg.epochs = rp_cfg.epochs;
      if (rp_batch->count()) cfg.batch_size = rp_cfg.batch_size;
      if (rp_lr_init->count()) cfg.lr_init = rp_cfg.lr_init;
      if (rp_lr_max->count()) cfg.lr_max = rp_cfg.lr_max;
      if (rp_clip->count()) cfg.clip_norm = rp_cfg.clip_norm;
      if (rp_out->count()) cfg.out_dir = rp_cfg.out_dir;
      if (cfg.target != "f1" && cfg.target != "f2")
        throw std::invalid_argument("reproduce: target must be f1 or f2");

      ResolvedExperiment exp = resolve_experiment(cfg);
      ReproduceReport report = run_reproduce(exp);
      for (const auto& run : report.runs) write_run_outputs(exp, run, exp.out_dir + "/" + run.kind);

      nlohmann::json comparison = nlohmann::json::array();
      for (const auto& run : report.runs)
        comparison.push_back({{"model", run.kind},
                              {"train_mse", run.final_train_mse},
                              {"test_mse_clean", run.final_test_mse},
                              {"convergence_epoch", run.convergence},
                              {"wall_seconds", run.wall_seconds},
                              {"params", run.params}});
      save_json_file(exp.out_dir + "/comparison.json",
                     {{"target", cfg.target},
                      {"scale", exp.scale},
                      {"seed", exp.seed},
                      {"attention_wins", report.attention_wins},
                      {"models", comparison}});

      print_comparison(report);
      if (!report.attention_wins) {
        std::cerr << "ordering violated: the attention model did not achieve the lowest test MSE\n";
        return 2;
      }
      std::cout << "attention test MSE is below both baselines\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
