#include <CLI11.hpp>

#include <iostream>

#include "mfsr/mfsr.hpp"

namespace {

using mfsr::ConfigOverrides;

// Attaches an optional flag whose value, when given, overrides `dotted` in the config.
template <typename T>
void override_flag(CLI::App* app, ConfigOverrides& out, std::vector<std::function<void()>>& hooks,
                   const std::string& flag, const std::string& dotted, const std::string& help) {
  auto value = std::make_shared<T>();
  auto* opt = app->add_option(flag, *value, help + " (overrides " + dotted + ")");
  hooks.push_back([&out, value, opt, dotted] {
    if (opt->count() == 0) return;
    std::ostringstream s;
    s.precision(17);
    s << *value;
    out[dotted] = s.str();
  });
}

void add_set_option(CLI::App* app, std::vector<std::string>& sets) {
  app->add_option("--set", sets, "Override any config key, as section.key=value");
}

ConfigOverrides collect(const std::vector<std::function<void()>>& hooks, ConfigOverrides& out,
                        const std::vector<std::string>& sets) {
  for (const auto& h : hooks) h();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw mfsr::ConfigValueError(s, "--set expects section.key=value");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

void print_metrics(const std::map<std::string, double>& m) { std::cout << mfsr::metrics_text(m); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-frame super-resolution experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::vector<std::string> sets;
  ConfigOverrides overrides;
  std::vector<std::function<void()>> hooks;

  auto* sim = app.add_subcommand("simulate", "Generate low-resolution frames and a manifest");
  sim->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  override_flag<std::string>(sim, overrides, hooks, "--output-dir", "experiment.output_dir", "Output directory");
  override_flag<std::uint64_t>(sim, overrides, hooks, "--master-seed", "experiment.master_seed", "Master seed");
  add_set_option(sim, sets);

  auto* rec = app.add_subcommand("reconstruct", "Run MM-TV reconstruction and the fusion baseline");
  rec->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  override_flag<std::string>(rec, overrides, hooks, "--output-dir", "experiment.output_dir", "Run directory");
  override_flag<double>(rec, overrides, hooks, "--lambda", "solver.lambda", "Regularization weight");
  override_flag<double>(rec, overrides, hooks, "--cg-eps", "solver.cg_eps", "CG relative tolerance");
  override_flag<int>(rec, overrides, hooks, "--cg-max-iters", "solver.cg_max_iters", "CG iteration cap");
  override_flag<int>(rec, overrides, hooks, "--mm-max-iters", "solver.mm_max_iters", "Outer iteration cap");
  override_flag<double>(rec, overrides, hooks, "--mm-rel-tol", "solver.mm_rel_tol", "Outer stop tolerance, 0 disables");
  override_flag<std::string>(rec, overrides, hooks, "--tv", "solver.tv", "smoothed or classic");
  override_flag<double>(rec, overrides, hooks, "--eps", "solver.eps", "TV smoothing");
  add_set_option(rec, sets);

  auto* fus = app.add_subcommand("fuse", "Run only the interpolate-register-fuse baseline");
  fus->add_option("--config", config_path, "Experiment config")->check(CLI::ExistingFile);
  fus->add_option("--dir", output_dir, "Run directory when no config is given");
  override_flag<int>(fus, overrides, hooks, "--sweeps", "baseline.sweeps", "Interpolation sweeps");
  override_flag<int>(fus, overrides, hooks, "--search-radius", "baseline.search_radius", "Registration radius");
  add_set_option(fus, sets);

  std::string frame_a, frame_b, manifest_path, flow_out;
  auto* flw = app.add_subcommand("flow", "Estimate the global shift between two frames");
  flw->add_option("frame_a", frame_a, "Reference frame")->required()->check(CLI::ExistingFile);
  flw->add_option("frame_b", frame_b, "Moving frame")->required()->check(CLI::ExistingFile);
  flw->add_option("--config", config_path, "Config whose [flow] section is used")->check(CLI::ExistingFile);
  flw->add_option("--manifest", manifest_path, "Manifest giving the true shift")->check(CLI::ExistingFile);
  flw->add_option("--output-dir", flow_out, "Write flow fields and the report here");
  override_flag<double>(flw, overrides, hooks, "--alpha", "flow.alpha", "Smoothness weight");
  override_flag<int>(flw, overrides, hooks, "--iterations,--iters", "flow.iterations", "Jacobi sweeps");
  override_flag<int>(flw, overrides, hooks, "--pyramid-levels", "flow.pyramid_levels", "Pyramid levels");
  override_flag<int>(flw, overrides, hooks, "--warps-per-level", "flow.warps_per_level", "Warps per level");
  add_set_option(flw, sets);

  std::string report_dir, reference, estimate;
  auto* rep = app.add_subcommand("report", "Summarize a run directory or compare two images");
  rep->add_option("dir", report_dir, "Run directory");
  rep->add_option("--reference", reference, "Reference PGM")->check(CLI::ExistingFile);
  rep->add_option("--estimate", estimate, "Estimated PGM")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mfsr::kExitConfig;
  }

  try {
    collect(hooks, overrides, sets);

    if (*sim) {
      const auto cfg = mfsr::load_config(config_path, overrides);
      const auto sum = mfsr::cmd_simulate(cfg);
      for (const auto& p : sum.written) std::cout << "wrote " << p.string() << "\n";
    } else if (*rec) {
      const auto cfg = mfsr::load_config(config_path, overrides);
      const auto sum = mfsr::cmd_reconstruct(cfg);
      print_metrics(sum.metrics);
    } else if (*fus) {
      mfsr::ExperimentConfig cfg;
      bool scene_known = false;
      if (!config_path.empty()) {
        cfg = mfsr::load_config(config_path, overrides);
        scene_known = true;
      } else if (!output_dir.empty()) {
        cfg = mfsr::parse_config("[frame]\n", {}, overrides);
      } else {
        throw mfsr::ConfigValueError("config", "fuse needs --config or --dir");
      }
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      const auto sum = mfsr::cmd_fuse(cfg, scene_known);
      std::cout << "wrote " << (cfg.output_dir / "fused.pgm").string() << "\n";
      print_metrics(sum.metrics);
    } else if (*flw) {
      mfsr::FlowConfig fc;
      if (!config_path.empty()) {
        fc = mfsr::load_config(config_path, overrides).flow;
      } else {
        ConfigOverrides only_flow{{"flow.pyramid_levels", "4"}};
        for (const auto& [k, v] : overrides)
          if (k.rfind("flow.", 0) == 0) only_flow[k] = v;
        fc = mfsr::parse_config("[frame]\n", {}, only_flow).flow;
      }
      std::optional<std::filesystem::path> manifest;
      if (!manifest_path.empty()) {
        manifest = manifest_path;
      } else {
        const auto guess = std::filesystem::path(frame_a).parent_path() / "manifest.txt";
        if (std::filesystem::exists(guess)) manifest = guess;
      }
      std::optional<std::filesystem::path> out;
      if (!flow_out.empty()) out = flow_out;
      std::cout << mfsr::cmd_flow(fc, frame_a, frame_b, manifest, std::nullopt, out).text;
    } else if (*rep) {
      if (!reference.empty() || !estimate.empty()) {
        if (reference.empty() || estimate.empty())
          throw mfsr::ConfigValueError("report", "--reference and --estimate go together");
        std::cout << mfsr::cmd_report_compare(reference, estimate);
      } else if (!report_dir.empty()) {
        std::cout << mfsr::cmd_report_dir(report_dir);
      } else {
        throw mfsr::ConfigValueError("report", "give a run directory or --reference/--estimate");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mfsr::exit_code_for(e);
  }
  return mfsr::kExitOk;
}
