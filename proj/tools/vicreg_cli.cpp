// vicreg: command-line front end for gradient checks, training runs, preset
// ablations, sweeps, checkpoint probes and metrics reports.

#include "vicreg/checkpoint.hpp"
#include "vicreg/config.hpp"
#include "vicreg/experiment.hpp"
#include "vicreg/gradcheck.hpp"
#include "vicreg/manifest.hpp"
#include "vicreg/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace fs = std::filesystem;
using namespace vicreg;

namespace {

// Exit codes: 0 success, 1 failed expectation/check, 2 usage or input error.
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

struct ConfigOptions {
  std::string path;
  std::vector<std::string> sets;
  int epochs = 0;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o, bool required) {
  auto* opt = cmd->add_option("--config,-c", o.path, "run configuration (key=value file)");
  if (required) opt->required();
  cmd->add_option("--set", o.sets, "override one key, e.g. --set loss.lambda=1 (repeatable)");
  cmd->add_option("--epochs", o.epochs, "override train.epochs");
}

RunConfig resolve_config(const ConfigOptions& o) {
  RunConfig c = o.path.empty() ? RunConfig{} : load_config(o.path);
  apply_env_overrides(c);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.epochs > 0) {
    c.train.epochs = o.epochs;
    c.train.warmup_epochs = std::min(c.train.warmup_epochs, o.epochs - 1);
  }
  c.validate();
  return c;
}

std::string write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  return path.string();
}

std::string fmt(double v, const char* f = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Writes the metrics, checkpoint, config, report and plot of one run into dir.
std::vector<std::string> write_run_artifacts(const fs::path& dir, const RunConfig& config,
                                             const RunOutcome& outcome) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  {
    std::ofstream csv(dir / "metrics.csv");
    write_metrics_csv(csv, outcome.result.metrics);
  }
  written.push_back((dir / "metrics.csv").string());
  {
    std::ofstream jl(dir / "metrics.jsonl");
    write_metrics_jsonl(jl, outcome.result.metrics);
  }
  written.push_back((dir / "metrics.jsonl").string());
  save_checkpoint((dir / "checkpoint.txt").string(), checkpoint_modules(outcome.result));
  written.push_back((dir / "checkpoint.txt").string());
  written.push_back(write_text(dir / "config.cfg", serialize_config(config)));
  const MetricsSummary s = summarize_metrics(outcome.result.metrics, config.train.coeffs.gamma);
  written.push_back(write_text(dir / "report.txt", format_summary(s)));
  written.push_back(write_text(dir / "metrics.svg", render_svg(outcome.result.metrics)));
  return written;
}

void finish_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                     const std::vector<std::string>& files,
                     std::vector<std::pair<std::string, std::string>> results) {
  Manifest m;
  m.command = command;
  m.config = config;
  for (const auto& f : files) m.artifacts.push_back(describe_artifact(f));
  m.results = std::move(results);
  write_manifest((dir / "manifest.json").string(), m);
}

int cmd_gradcheck(int seeds_per_shape, std::uint64_t seed, const std::string& out) {
  GradcheckOptions o;
  o.seeds_per_shape = seeds_per_shape;
  o.seed = seed;
  const GradcheckReport loss = check_loss_gradients(o);
  const GradcheckReport pipe = check_pipeline_gradients(o);
  const double worst = std::max(loss.max_error, pipe.max_error);
  std::printf("loss      checked %d skipped %d max rel err %.3e\n", loss.checked, loss.skipped,
              loss.max_error);
  std::printf("pipeline  checked %d skipped %d max rel err %.3e\n", pipe.checked, pipe.skipped,
              pipe.max_error);
  std::printf("max relative error %.3e\n", worst);
  const bool ok = worst < 1e-6 && loss.checked >= 100 && pipe.checked >= 100;
  if (!out.empty()) {
    fs::create_directories(out);
    Manifest m;
    m.command = "gradcheck";
    m.results = {{"loss_checked", std::to_string(loss.checked)},
                 {"pipeline_checked", std::to_string(pipe.checked)},
                 {"max_relative_error", fmt(worst, "%.3e")},
                 {"passed", ok ? "true" : "false"}};
    write_manifest((fs::path(out) / "manifest.json").string(), m);
  }
  if (!ok) {
    std::fprintf(stderr, "gradcheck failed: need >= 100 checked cases per suite below 1e-6\n");
    return kFailed;
  }
  return 0;
}

int cmd_train(const ConfigOptions& co, const std::string& out) {
  const RunConfig config = resolve_config(co);
  const SyntheticDataset data = generate_dataset(config.data);
  const RunOutcome outcome = run_experiment(data, config, true);
  const auto files = write_run_artifacts(out, config, outcome);
  const auto& p = *outcome.probes;
  std::cout << format_summary(summarize_metrics(outcome.result.metrics, config.train.coeffs.gamma))
            << "linear probe accuracy  " << fmt(p.linear.accuracy, "%.4f") << '\n'
            << "knn (k=" << config.probe.knn_k << ") accuracy   " << fmt(p.knn.accuracy, "%.4f") << '\n';
  finish_manifest(out, "train", config, files,
                  {{"verdict", to_string(outcome.verdict)},
                   {"linear_probe_accuracy", fmt(p.linear.accuracy, "%.17g")},
                   {"knn_accuracy", fmt(p.knn.accuracy, "%.17g")}});
  return 0;
}

int cmd_ablate(const std::string& family, const ConfigOptions& co, const std::string& only,
               const std::string& out) {
  const RunConfig base = resolve_config(co);
  std::vector<ExperimentPreset> presets = make_presets(family, base);
  if (!only.empty()) {
    std::erase_if(presets, [&](const ExperimentPreset& p) { return p.name != only; });
    if (presets.empty()) throw std::invalid_argument("no preset named '" + only + "' in " + family);
  }
  const SyntheticDataset data = generate_dataset(base.data);
  std::vector<std::string> failing;
  std::vector<std::string> files;
  std::vector<std::pair<std::string, std::string>> results;
  for (const auto& p : presets) {
    const RunOutcome outcome = run_experiment(data, p.config, false);
    const auto& rows = outcome.result.metrics;
    const bool ok = expectation_met(p.expectation, rows, p.config.train.coeffs.gamma);
    const MetricsSummary s = summarize_metrics(rows, p.config.train.coeffs.gamma);
    std::printf("%-36s verdict %-9s expected %-8s final std %-10s tail min %-10s %s\n", p.name.c_str(),
                to_string(outcome.verdict).c_str(), to_string(p.expectation).c_str(),
                fmt(s.last.mean_embed_std).c_str(), fmt(s.tail_min_embed_std).c_str(),
                p.expectation == Expectation::kNone ? "-" : (ok ? "ok" : "FAIL"));
    std::fflush(stdout);
    const auto written = write_run_artifacts(fs::path(out) / p.name, p.config, outcome);
    files.insert(files.end(), written.begin(), written.end());
    results.emplace_back(p.name, to_string(outcome.verdict) + (ok ? "" : " (expectation failed)"));
    if (!ok) failing.push_back(p.name);
  }
  finish_manifest(out, "ablate " + family, base, files, results);
  if (!failing.empty()) {
    std::string names;
    for (const auto& n : failing) names += (names.empty() ? "" : ", ") + n;
    std::fprintf(stderr, "failing presets: %s\n", names.c_str());
    return kFailed;
  }
  return 0;
}

int cmd_sweep(const std::string& axis, std::vector<int> values, const ConfigOptions& co,
              const std::string& out) {
  const RunConfig base = resolve_config(co);
  if (values.empty()) values = default_sweep_values(axis);
  const SyntheticDataset data = generate_dataset(base.data);
  std::vector<std::string> files;
  std::vector<std::pair<std::string, std::string>> results;
  std::printf("%-16s %-9s %-12s %-10s %-10s\n", axis.c_str(), "verdict", "final std", "linear", "knn");
  for (int v : values) {
    const RunConfig c = apply_sweep_value(base, axis, v);
    const RunOutcome outcome = run_experiment(data, c, true);
    const auto& p = *outcome.probes;
    std::printf("%-16d %-9s %-12s %-10s %-10s\n", v, to_string(outcome.verdict).c_str(),
                fmt(outcome.result.metrics.back().mean_embed_std).c_str(),
                fmt(p.linear.accuracy, "%.4f").c_str(), fmt(p.knn.accuracy, "%.4f").c_str());
    std::fflush(stdout);
    const auto written = write_run_artifacts(fs::path(out) / (axis + "_" + std::to_string(v)), c, outcome);
    files.insert(files.end(), written.begin(), written.end());
    results.emplace_back(axis + "=" + std::to_string(v),
                         to_string(outcome.verdict) + " linear=" + fmt(p.linear.accuracy, "%.4f") +
                             " knn=" + fmt(p.knn.accuracy, "%.4f"));
  }
  finish_manifest(out, "sweep " + axis, base, files, results);
  return 0;
}

int cmd_probe(const std::string& checkpoint, const std::string& module, const ConfigOptions& co,
              int k, const std::string& out) {
  RunConfig config = resolve_config(co);
  if (k > 0) config.probe.knn_k = k;
  const auto modules = load_checkpoint(checkpoint);
  const NamedModule& enc = find_module(modules, module);
  const SyntheticDataset data = generate_dataset(config.data);
  if (enc.spec.input_width() != data.input_dim()) {
    throw ShapeMismatchError("checkpoint encoder expects " + std::to_string(enc.spec.input_width()) +
                             " inputs but the configured dataset has " +
                             std::to_string(data.input_dim()));
  }
  Branch b;
  b.encoder_spec = enc.spec;
  b.encoder = enc.params;
  const ProbeReport r = evaluate_probes(b, split_for_probe(data, config.probe.eval_stride), config.probe);
  std::printf("linear probe accuracy %.4f (%ld/%ld)\n", r.linear.accuracy, r.linear.n_correct,
              r.linear.n_eval);
  std::printf("knn (k=%d) accuracy   %.4f (%ld/%ld)\n", config.probe.knn_k, r.knn.accuracy,
              r.knn.n_correct, r.knn.n_eval);
  fs::create_directories(out);
  nlohmann::ordered_json j;
  j["checkpoint"] = checkpoint;
  j["module"] = module;
  j["linear"] = {{"accuracy", r.linear.accuracy}, {"n_correct", r.linear.n_correct}, {"n_eval", r.linear.n_eval}};
  j["knn"] = {{"k", config.probe.knn_k}, {"accuracy", r.knn.accuracy}, {"n_correct", r.knn.n_correct},
              {"n_eval", r.knn.n_eval}};
  const std::string path = write_text(fs::path(out) / "probe.json", j.dump(2) + "\n");
  finish_manifest(out, "probe", config, {checkpoint, path},
                  {{"linear_probe_accuracy", fmt(r.linear.accuracy, "%.17g")},
                   {"knn_accuracy", fmt(r.knn.accuracy, "%.17g")}});
  return 0;
}

int cmd_report(const std::string& metrics, double gamma, int tail, const std::string& svg) {
  std::ifstream in(metrics);
  if (!in) throw std::runtime_error("metrics file not found: " + metrics);
  const auto rows = read_metrics_csv(in);
  std::cout << format_summary(summarize_metrics(rows, gamma, tail));
  if (!svg.empty()) {
    write_text(svg, render_svg(rows, fs::path(metrics).filename().string()));
    std::cout << "plot written to " << svg << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Batch-sized temporaries are allocated every step; keep them on the heap
  // instead of mapping and unmapping pages each time.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif

  CLI::App app{"VICReg desk-scale training, ablation and diagnostics"};
  app.require_subcommand(1);
  std::string out;

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of loss and network gradients");
  int seeds_per_shape = GradcheckOptions{}.seeds_per_shape;
  std::uint64_t grad_seed = GradcheckOptions{}.seed;
  grad->add_option("--seeds-per-shape", seeds_per_shape, "seeded cases per (n, d) shape");
  grad->add_option("--seed", grad_seed, "base seed");
  grad->add_option("--out", out, "directory for the manifest");

  ConfigOptions train_co;
  auto* train_cmd = app.add_subcommand("train", "pretrain one configuration and probe it");
  add_config_options(train_cmd, train_co, true);
  std::string train_out = "vicreg_out/train";
  train_cmd->add_option("--out", train_out, "output directory");

  ConfigOptions ablate_co;
  std::string family;
  std::string only;
  std::string ablate_out;
  auto* ablate = app.add_subcommand("ablate", "run a preset family and check its expectations");
  ablate->add_option("family", family, "table7 | table6 | table8 | table4")->required();
  add_config_options(ablate, ablate_co, false);
  ablate->add_option("--only", only, "run a single preset of the family");
  ablate->add_option("--out", ablate_out, "output directory (default vicreg_out/<family>)");

  ConfigOptions sweep_co;
  std::string axis;
  std::vector<int> values;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "vary expander width or batch size");
  sweep->add_option("--axis", axis, "expander_width | batch_size")->required();
  sweep->add_option("--values", values, "values to try (default depends on the axis)")->delimiter(',');
  add_config_options(sweep, sweep_co, false);
  sweep->add_option("--out", sweep_out, "output directory (default vicreg_out/sweep_<axis>)");

  ConfigOptions probe_co;
  std::string checkpoint;
  std::string module = "encoder";
  int k = 0;
  std::string probe_out = "vicreg_out/probe";
  auto* probe = app.add_subcommand("probe", "linear and kNN probes of a checkpointed encoder");
  probe->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  probe->add_option("--module", module, "module name inside the checkpoint");
  probe->add_option("--k", k, "neighbours for the kNN probe (default probe.knn_k)");
  add_config_options(probe, probe_co, false);
  probe->add_option("--out", probe_out, "output directory");

  std::string metrics;
  double gamma = 1.0;
  int tail = 50;
  std::string svg;
  auto* report = app.add_subcommand("report", "summarize a metrics CSV");
  report->add_option("--metrics", metrics, "metrics.csv written by train/ablate/sweep")->required();
  report->add_option("--gamma", gamma, "variance target used by the run");
  report->add_option("--tail", tail, "window for the tail minimum");
  report->add_option("--svg", svg, "also write a plot of the std and correlation curves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kBadInput;
  }

  try {
    if (*grad) return cmd_gradcheck(seeds_per_shape, grad_seed, out);
    if (*train_cmd) return cmd_train(train_co, train_out);
    if (*ablate) return cmd_ablate(family, ablate_co, only, ablate_out.empty() ? "vicreg_out/" + family : ablate_out);
    if (*sweep) return cmd_sweep(axis, values, sweep_co, sweep_out.empty() ? "vicreg_out/sweep_" + axis : sweep_out);
    if (*probe) return cmd_probe(checkpoint, module, probe_co, k, probe_out);
    if (*report) return cmd_report(metrics, gamma, tail, svg);
  } catch (const ConfigNotFoundError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadInput;
  }
  return kBadInput;
}
