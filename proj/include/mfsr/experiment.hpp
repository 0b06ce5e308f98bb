#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mfsr/baselines.hpp"
#include "mfsr/config.hpp"
#include "mfsr/errors.hpp"
#include "mfsr/mm_solver.hpp"
#include "mfsr/observation.hpp"
#include "mfsr/optical_flow.hpp"
#include "mfsr/pgm.hpp"

namespace mfsr {

// Fixed 12-significant-digit text so reruns are byte-identical.
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Manifest: `key = value` text describing a simulated observation set.

struct ManifestFrame {
  FrameSpec spec;
  std::string file;
  double noise_var_target = 0.0;
  double noise_var_empirical = 0.0;
  std::string checksum;
};

struct Manifest {
  Shape hr_shape;
  std::uint64_t master_seed = 0;
  std::vector<ManifestFrame> frames;
};

inline std::string write_manifest(const Manifest& m) {
  std::ostringstream out;
  out << "# mfsr observation manifest\n";
  out << "hr_height = " << m.hr_shape.height << "\n";
  out << "hr_width = " << m.hr_shape.width << "\n";
  out << "master_seed = " << m.master_seed << "\n";
  out << "frames = " << m.frames.size() << "\n";
  for (std::size_t k = 0; k < m.frames.size(); ++k) {
    const auto& f = m.frames[k];
    const std::string p = "frame." + std::to_string(k + 1) + ".";
    out << p << "file = " << f.file << "\n";
    out << p << "psf = " << f.spec.psf_id << "\n";
    out << p << "dx = " << fmt_real(f.spec.dx) << "\n";
    out << p << "dy = " << fmt_real(f.spec.dy) << "\n";
    out << p << "decim = " << f.spec.decim << "\n";
    out << p << "snr_db = " << fmt_real(f.spec.snr_db) << "\n";
    out << p << "seed = " << f.spec.seed << "\n";
    out << p << "noise_var_target = " << fmt_real(f.noise_var_target) << "\n";
    out << p << "noise_var_empirical = " << fmt_real(f.noise_var_empirical) << "\n";
    out << p << "fnv1a64 = " << f.checksum << "\n";
  }
  return out.str();
}

inline Manifest parse_manifest(std::string_view text) {
  std::map<std::string, detail::ConfigEntry> kv;
  int lineno = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("manifest line " + std::to_string(lineno) + ": expected key = value");
    kv[std::string(detail::trim(line.substr(0, eq)))] = {std::string(detail::trim(line.substr(eq + 1))), lineno};
  }
  auto get = [&](const std::string& key) -> const detail::ConfigEntry& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("manifest: missing " + key);
    return it->second;
  };
  try {
    Manifest m;
    m.hr_shape = {static_cast<std::size_t>(detail::parse_positive_int("hr_height", get("hr_height"))),
                  static_cast<std::size_t>(detail::parse_positive_int("hr_width", get("hr_width")))};
    m.master_seed = detail::parse_unsigned("master_seed", get("master_seed"));
    const auto n = detail::parse_unsigned("frames", get("frames"));
    for (std::uint64_t k = 1; k <= n; ++k) {
      const std::string p = "frame." + std::to_string(k) + ".";
      ManifestFrame f;
      f.file = get(p + "file").value;
      const auto psf = detail::parse_unsigned(p + "psf", get(p + "psf"));
      if (psf > 8) throw FormatError("manifest: " + p + "psf out of range");
      f.spec.psf_id = static_cast<int>(psf);
      f.spec.dx = detail::parse_finite(p + "dx", get(p + "dx"));
      f.spec.dy = detail::parse_finite(p + "dy", get(p + "dy"));
      f.spec.decim = static_cast<std::size_t>(detail::parse_positive_int(p + "decim", get(p + "decim")));
      f.spec.snr_db = detail::parse_real(p + "snr_db", get(p + "snr_db"));
      f.spec.seed = detail::parse_unsigned(p + "seed", get(p + "seed"));
      f.noise_var_target = detail::parse_real(p + "noise_var_target", get(p + "noise_var_target"));
      f.noise_var_empirical = detail::parse_real(p + "noise_var_empirical", get(p + "noise_var_empirical"));
      f.checksum = get(p + "fnv1a64").value;
      m.frames.push_back(std::move(f));
    }
    return m;
  } catch (const ConfigValueError& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

// Reads the manifest in `dir` and every frame it lists, verifying checksums.
inline std::pair<Manifest, ObservationSet> load_observations(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  if (!std::filesystem::exists(manifest_path)) throw IoError("no manifest at " + manifest_path.string());
  Manifest m = parse_manifest(read_file_bytes(manifest_path));
  ObservationSet obs{m.hr_shape, {}};
  for (const auto& f : m.frames) {
    const auto path = dir / f.file;
    const std::string bytes = read_file_bytes(path);
    if (fnv1a64_hex(bytes) != f.checksum) throw FormatError("checksum mismatch for " + path.string());
    ImageGrid img = read_pgm(bytes);
    validate(f.spec, m.hr_shape);
    if (img.height() * f.spec.decim != m.hr_shape.height || img.width() * f.spec.decim != m.hr_shape.width)
      throw DimensionError(path.string() + " has shape " + to_string(img.shape()) + ", inconsistent with manifest");
    obs.frames.push_back({f.spec, std::move(img)});
  }
  if (obs.frames.empty()) throw EmptyObservationError("manifest lists no frames");
  return {std::move(m), std::move(obs)};
}

// Writes a set of files, removing the ones already written if any write fails.
class OutputBatch {
 public:
  void add(std::filesystem::path path, std::string bytes) { files_.emplace_back(std::move(path), std::move(bytes)); }

  void commit() {
    std::vector<std::filesystem::path> written;
    try {
      for (const auto& [path, bytes] : files_) {
        write_file_bytes(path, bytes);
        written.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) std::filesystem::remove(p, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateSummary {
  Manifest manifest;
  std::vector<std::filesystem::path> written;
};

inline SimulateSummary cmd_simulate(const ExperimentConfig& cfg) {
  const ImageGrid hr = load_scene(cfg.scene);
  for (const auto& spec : cfg.frames) validate(spec, hr.shape());
  ensure_dir(cfg.output_dir);

  SimulateSummary sum;
  sum.manifest.hr_shape = hr.shape();
  sum.manifest.master_seed = cfg.master_seed;
  OutputBatch batch;
  const LexVector x = to_lex(hr);
  for (std::size_t k = 0; k < cfg.frames.size(); ++k) {
    const auto& spec = cfg.frames[k];
    const ImageGrid clean = from_lex(observation_operator(spec, hr.shape()).apply(x));
    const ImageGrid noisy = add_noise(clean, spec.snr_db, spec.seed);
    double emp = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double d = noisy.data()[i] - clean.data()[i];
      emp += d * d;
    }
    emp /= static_cast<double>(clean.size());

    ManifestFrame mf;
    mf.spec = spec;
    mf.file = "frame_" + std::to_string(k + 1) + ".pgm";
    mf.noise_var_target = std::isfinite(spec.snr_db) ? variance(clean) * std::pow(10.0, -spec.snr_db / 10.0) : 0.0;
    mf.noise_var_empirical = emp;
    std::string bytes = write_pgm(noisy);
    mf.checksum = fnv1a64_hex(bytes);
    batch.add(cfg.output_dir / mf.file, std::move(bytes));
    sum.written.push_back(cfg.output_dir / mf.file);
    sum.manifest.frames.push_back(std::move(mf));
  }
  batch.add(cfg.output_dir / "hr.pgm", write_pgm(hr));
  batch.add(cfg.output_dir / "manifest.txt", write_manifest(sum.manifest));
  sum.written.push_back(cfg.output_dir / "hr.pgm");
  sum.written.push_back(cfg.output_dir / "manifest.txt");
  batch.commit();
  return sum;
}

// ---------------------------------------------------------------------------
// flow

struct FlowReport {
  Shift estimated;
  std::optional<Shift> truth;
  std::string text;
};

namespace detail {

// Linear stretch of a field to 0..255 for viewing.
inline ImageGrid stretch_for_display(const ImageGrid& v) {
  double lo = v.data()[0], hi = v.data()[0];
  for (double x : v.data()) lo = std::min(lo, x), hi = std::max(hi, x);
  ImageGrid out(v.shape());
  const double span = hi - lo;
  for (std::size_t i = 0; i < v.size(); ++i) out.data()[i] = span > 0 ? 255.0 * (v.data()[i] - lo) / span : 128.0;
  return out;
}

inline std::optional<Shift> shift_from_manifest(const std::filesystem::path& manifest_path,
                                                const std::filesystem::path& a, const std::filesystem::path& b) {
  const Manifest m = parse_manifest(read_file_bytes(manifest_path));
  const ManifestFrame* fa = nullptr;
  const ManifestFrame* fb = nullptr;
  for (const auto& f : m.frames) {
    if (f.file == a.filename().string()) fa = &f;
    if (f.file == b.filename().string()) fb = &f;
  }
  if (!fa || !fb || fa->spec.decim != fb->spec.decim) return std::nullopt;
  // Warps act on the HR grid; frames live on the decimated grid.
  const double r = static_cast<double>(fa->spec.decim);
  return Shift{(fb->spec.dx - fa->spec.dx) / r, (fb->spec.dy - fa->spec.dy) / r};
}

inline std::string shift_line(const char* label, const Shift& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s dx= %.3f dy= %.3f\n", label, s.dx, s.dy);
  return buf;
}

}  // namespace detail

inline FlowReport cmd_flow(const FlowConfig& flow_cfg, const std::filesystem::path& frame_a,
                           const std::filesystem::path& frame_b, const std::optional<std::filesystem::path>& manifest,
                           const std::optional<Shift>& known_truth = std::nullopt,
                           const std::optional<std::filesystem::path>& output_dir = std::nullopt) {
  const ImageGrid a = read_pgm_file(frame_a);
  const ImageGrid b = read_pgm_file(frame_b);
  if (a.shape() != b.shape())
    throw DimensionError("frames differ in shape: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const FlowField flow = horn_schunck(a, b, flow_cfg);

  FlowReport rep;
  rep.estimated = global_shift(flow, 0.5);
  rep.truth = known_truth;
  if (!rep.truth && manifest) rep.truth = detail::shift_from_manifest(*manifest, frame_a, frame_b);

  rep.text = detail::shift_line("estimated:", rep.estimated);
  if (rep.truth) {
    rep.text += detail::shift_line("true:", *rep.truth);
    rep.text += detail::shift_line("error:", {rep.estimated.dx - rep.truth->dx, rep.estimated.dy - rep.truth->dy});
  }
  if (output_dir) {
    ensure_dir(*output_dir);
    OutputBatch batch;
    batch.add(*output_dir / "flow_vx.pgm", write_pgm(detail::stretch_for_display(flow.vx)));
    batch.add(*output_dir / "flow_vy.pgm", write_pgm(detail::stretch_for_display(flow.vy)));
    batch.add(*output_dir / "flow_report.txt", rep.text);
    batch.commit();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// reconstruct / fuse

struct ReconstructSummary {
  MmResult mm;
  FusionResult fusion;
  std::optional<ImageGrid> truth;
  std::map<std::string, double> metrics;
};

inline std::optional<ImageGrid> ground_truth(const ExperimentConfig& cfg, Shape hr_shape) {
  ImageGrid gt = load_scene(cfg.scene);
  if (gt.shape() != hr_shape) return std::nullopt;
  return gt;
}

inline std::string metrics_text(const std::map<std::string, double>& metrics) {
  std::string out;
  for (const auto& [k, v] : metrics) out += k + " = " + fmt_real(v) + "\n";
  return out;
}

inline ReconstructSummary cmd_reconstruct(const ExperimentConfig& cfg) {
  auto [manifest, obs] = load_observations(cfg.output_dir);
  const auto ops = observation_operators(obs);

  ReconstructSummary sum;
  std::vector<double> wall_ms;
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto last = t0;
  sum.mm = mm_deconvolve(obs, ops, cfg.solver, [&](const MmIteration&) {
    const auto now = clock::now();
    wall_ms.push_back(std::chrono::duration<double, std::milli>(now - last).count());
    last = now;
  });
  const double mm_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  const auto t1 = clock::now();
  sum.fusion = fusion_baseline(obs, cfg.fusion);
  const double fusion_ms = std::chrono::duration<double, std::milli>(clock::now() - t1).count();

  sum.metrics["runtime_ms.mm"] = mm_ms;
  sum.metrics["runtime_ms.fusion"] = fusion_ms;
  sum.metrics["mm.outer_iterations"] = static_cast<double>(sum.mm.cg_iterations.size());
  sum.metrics["mm.final_objective"] = sum.mm.trace.back();
  sum.truth = ground_truth(cfg, obs.hr_shape);
  if (sum.truth) {
    sum.metrics["mm.mad"] = mad_metric(*sum.truth, sum.mm.x_hat);
    sum.metrics["mm.mse"] = mse_metric(*sum.truth, sum.mm.x_hat);
    sum.metrics["fusion.mad"] = mad_metric(*sum.truth, sum.fusion.fused);
    sum.metrics["fusion.mse"] = mse_metric(*sum.truth, sum.fusion.fused);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& img : sum.fusion.interpolated) best = std::min(best, mse_metric(*sum.truth, img));
    sum.metrics["single_frame.best_mse"] = best;
  }

  std::string trace = "iter,L,cg_iters\n";
  std::string timing = "iter,wall_ms\n";
  for (std::size_t t = 0; t < sum.mm.trace.size(); ++t) {
    trace += std::to_string(t) + "," + fmt_real(sum.mm.trace[t]) + "," +
             (t ? std::to_string(sum.mm.cg_iterations[t - 1]) : std::string("0")) + "\n";
    timing += std::to_string(t) + "," + (t ? fmt_real(wall_ms[t - 1]) : std::string("0")) + "\n";
  }
  OutputBatch batch;
  batch.add(cfg.output_dir / "x_hat.pgm", write_pgm(sum.mm.x_hat));
  batch.add(cfg.output_dir / "fused.pgm", write_pgm(sum.fusion.fused));
  batch.add(cfg.output_dir / "trace.csv", trace);
  batch.add(cfg.output_dir / "timing.csv", timing);
  batch.add(cfg.output_dir / "metrics.txt", metrics_text(sum.metrics));
  batch.commit();
  return sum;
}

struct FuseSummary {
  FusionResult fusion;
  std::map<std::string, double> metrics;
};

inline FuseSummary cmd_fuse(const ExperimentConfig& cfg, bool scene_known = true) {
  auto [manifest, obs] = load_observations(cfg.output_dir);
  FuseSummary sum{fusion_baseline(obs, cfg.fusion), {}};
  if (auto gt = scene_known ? ground_truth(cfg, obs.hr_shape) : std::nullopt) {
    sum.metrics["fusion.mad"] = mad_metric(*gt, sum.fusion.fused);
    sum.metrics["fusion.mse"] = mse_metric(*gt, sum.fusion.fused);
  }
  write_pgm_file(cfg.output_dir / "fused.pgm", sum.fusion.fused);
  return sum;
}

// Side-by-side MAD / MSE of an estimate against a reference image.
inline std::string cmd_report_compare(const std::filesystem::path& reference, const std::filesystem::path& estimate) {
  const ImageGrid ref = read_pgm_file(reference);
  const ImageGrid est = read_pgm_file(estimate);
  return "mad = " + fmt_real(mad_metric(ref, est)) + "\nmse = " + fmt_real(mse_metric(ref, est)) + "\n";
}

// Summary of a finished run directory.
inline std::string cmd_report_dir(const std::filesystem::path& dir) {
  std::string out;
  const auto metrics = dir / "metrics.txt";
  const auto trace = dir / "trace.csv";
  if (!std::filesystem::exists(metrics) && !std::filesystem::exists(trace))
    throw IoError("no metrics.txt or trace.csv in " + dir.string());
  if (std::filesystem::exists(metrics)) out += read_file_bytes(metrics);
  if (std::filesystem::exists(trace)) {
    std::istringstream in(read_file_bytes(trace));
    std::string line, first, lastline;
    std::getline(in, line);  // header
    std::size_t rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) {
        if (!rows) first = line;
        lastline = line;
        ++rows;
      }
    out += "trace.rows = " + std::to_string(rows) + "\n";
    if (rows) out += "trace.first = " + first + "\ntrace.last = " + lastline + "\n";
  }
  return out;
}

// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigSyntaxError*>(&e) || dynamic_cast<const ConfigValueError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const Error*>(&e)) return kExitData;
  return kExitInternal;
}

}  // namespace mfsr
