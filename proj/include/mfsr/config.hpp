#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mfsr/baselines.hpp"
#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"
#include "mfsr/mm_solver.hpp"
#include "mfsr/observation.hpp"
#include "mfsr/optical_flow.hpp"
#include "mfsr/pgm.hpp"

namespace mfsr {

enum class SceneSource { Texture, Rectangle, File };

struct SceneConfig {
  SceneSource source = SceneSource::Texture;
  std::filesystem::path path;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 7;
  Rect rect{16, 16, 32, 32};
  double foreground = 255.0;
  double background = 0.0;
};

struct ExperimentConfig {
  SceneConfig scene;
  std::vector<FrameSpec> frames;
  SolverConfig solver;
  FlowConfig flow;
  FusionConfig fusion;
  std::filesystem::path output_dir = "out";
  std::uint64_t master_seed = 2011;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigEntry {
  std::string value;
  int line = 0;
};

// One [section] occurrence with its key/value pairs.
struct ConfigBlock {
  std::string name;
  int line = 0;
  std::map<std::string, ConfigEntry> entries;
};

inline std::vector<ConfigBlock> tokenize_config(std::string_view text) {
  std::vector<ConfigBlock> blocks;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigSyntaxError(lineno, "unterminated section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigSyntaxError(lineno, "empty section name");
      blocks.push_back({std::string(name), lineno, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigSyntaxError(lineno, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigSyntaxError(lineno, "missing key before '='");
    if (blocks.empty()) throw ConfigSyntaxError(lineno, "key '" + std::string(key) + "' outside of a section");
    auto [it, inserted] = blocks.back().entries.emplace(std::string(key), ConfigEntry{std::string(value), lineno});
    if (!inserted) throw ConfigSyntaxError(lineno, "duplicate key '" + std::string(key) + "'");
  }
  return blocks;
}

inline double parse_real(const std::string& key, const ConfigEntry& e) {
  const std::string_view v = e.value;
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto* first = v.data();
  const auto* last = v.data() + v.size();
  if (!v.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || v.empty() || std::isnan(out))
    throw ConfigValueError(key, "expected a number, got '" + e.value + "' (line " + std::to_string(e.line) + ")");
  return out;
}

inline double parse_finite(const std::string& key, const ConfigEntry& e) {
  const double v = parse_real(key, e);
  if (!std::isfinite(v)) throw ConfigValueError(key, "must be finite (line " + std::to_string(e.line) + ")");
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& key, const ConfigEntry& e) {
  std::uint64_t out = 0;
  const std::string_view v = e.value;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw ConfigValueError(key, "expected a non-negative integer, got '" + e.value + "' (line " +
                                    std::to_string(e.line) + ")");
  return out;
}

inline int parse_positive_int(const std::string& key, const ConfigEntry& e) {
  const auto v = parse_unsigned(key, e);
  if (v == 0 || v > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
    throw ConfigValueError(key, "must be a positive integer (line " + std::to_string(e.line) + ")");
  return static_cast<int>(v);
}

// Applies each known key through its handler; anything left over is an error.
class BlockReader {
 public:
  explicit BlockReader(const ConfigBlock& block) : block_(block) {}

  template <typename Fn>
  BlockReader& on(const std::string& key, Fn&& fn) {
    known_.insert(key);
    if (auto it = block_.entries.find(key); it != block_.entries.end()) fn(key, it->second);
    return *this;
  }

  void finish() const {
    for (const auto& [key, entry] : block_.entries)
      if (!known_.count(key))
        throw ConfigValueError(key, "unknown key in [" + block_.name + "] (line " + std::to_string(entry.line) + ")");
  }

 private:
  const ConfigBlock& block_;
  std::set<std::string> known_;
};

}  // namespace detail

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.frames.empty()) throw ConfigValueError("frame", "at least one [frame] block is required");
  try {
    cfg.solver.validate();
  } catch (const DomainError& e) {
    throw ConfigValueError("solver", e.what());
  }
  try {
    cfg.flow.validate();
  } catch (const DomainError& e) {
    throw ConfigValueError("flow", e.what());
  }
  const auto& s = cfg.scene;
  if (s.source == SceneSource::File) {
    if (s.path.empty()) throw ConfigValueError("path", "scene source 'file' needs a path");
    if (!std::filesystem::exists(s.path)) throw ConfigValueError("path", "file not found: " + s.path.string());
  } else {
    for (const auto& f : cfg.frames)
      if (s.height % f.decim != 0 || s.width % f.decim != 0)
        throw ConfigValueError("decim", "factor " + std::to_string(f.decim) + " does not divide scene size");
    if (s.source == SceneSource::Rectangle &&
        (s.rect.top + s.rect.height > s.height || s.rect.left + s.rect.width > s.width))
      throw ConfigValueError("rect_top", "rectangle does not fit inside the scene");
  }
}

// Line-oriented key = value text with [section] headers; every [frame] block
// adds one observation. '#' starts a comment. `base_dir` resolves relative
// scene paths.
// Command-line overrides keyed as "section.key"; they replace or add entries in
// the first block of that section. Frame blocks cannot be overridden.
using ConfigOverrides = std::map<std::string, std::string>;

inline ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                                     const ConfigOverrides& overrides = {}) {
  using namespace detail;
  ExperimentConfig cfg;
  auto blocks = tokenize_config(text);
  for (const auto& [dotted, value] : overrides) {
    const auto dot = dotted.find('.');
    if (dot == std::string::npos) throw ConfigValueError(dotted, "override must be section.key");
    const std::string section = dotted.substr(0, dot);
    if (section == "frame") throw ConfigValueError(dotted, "frame blocks cannot be overridden");
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const ConfigBlock& b) { return b.name == section; });
    if (it == blocks.end()) {
      blocks.push_back({section, 0, {}});
      it = std::prev(blocks.end());
    }
    it->entries[dotted.substr(dot + 1)] = ConfigEntry{value, 0};
  }
  std::set<std::string> seen;
  std::vector<bool> explicit_seed;

  for (const auto& block : blocks) {
    if (block.name != "frame" && !seen.insert(block.name).second)
      throw ConfigSyntaxError(block.line, "section [" + block.name + "] appears twice");
    BlockReader rd(block);

    if (block.name == "experiment") {
      rd.on("master_seed", [&](auto& k, auto& e) { cfg.master_seed = parse_unsigned(k, e); })
          .on("output_dir", [&](auto&, auto& e) { cfg.output_dir = e.value; });
    } else if (block.name == "scene") {
      auto& s = cfg.scene;
      rd.on("source",
            [&](auto& k, auto& e) {
              if (e.value == "texture") s.source = SceneSource::Texture;
              else if (e.value == "rectangle") s.source = SceneSource::Rectangle;
              else if (e.value == "file") s.source = SceneSource::File;
              else throw ConfigValueError(k, "expected texture, rectangle or file");
            })
          .on("path", [&](auto&, auto& e) { s.path = base_dir / std::filesystem::path(e.value); })
          .on("height", [&](auto& k, auto& e) { s.height = static_cast<std::size_t>(parse_positive_int(k, e)); })
          .on("width", [&](auto& k, auto& e) { s.width = static_cast<std::size_t>(parse_positive_int(k, e)); })
          .on("seed", [&](auto& k, auto& e) { s.seed = parse_unsigned(k, e); })
          .on("rect_top", [&](auto& k, auto& e) { s.rect.top = parse_unsigned(k, e); })
          .on("rect_left", [&](auto& k, auto& e) { s.rect.left = parse_unsigned(k, e); })
          .on("rect_height", [&](auto& k, auto& e) { s.rect.height = parse_unsigned(k, e); })
          .on("rect_width", [&](auto& k, auto& e) { s.rect.width = parse_unsigned(k, e); })
          .on("foreground", [&](auto& k, auto& e) { s.foreground = parse_finite(k, e); })
          .on("background", [&](auto& k, auto& e) { s.background = parse_finite(k, e); });
    } else if (block.name == "solver") {
      auto& s = cfg.solver;
      std::optional<double> eps;
      std::optional<double> floor;
      rd.on("lambda", [&](auto& k, auto& e) { s.lambda = parse_finite(k, e); })
          .on("cg_eps", [&](auto& k, auto& e) { s.cg_eps = parse_finite(k, e); })
          .on("cg_max_iters", [&](auto& k, auto& e) { s.cg_max_iters = parse_positive_int(k, e); })
          .on("mm_max_iters", [&](auto& k, auto& e) { s.mm_max_iters = parse_positive_int(k, e); })
          .on("mm_rel_tol", [&](auto& k, auto& e) { s.mm_rel_tol = parse_finite(k, e); })
          .on("tv",
              [&](auto& k, auto& e) {
                if (e.value == "smoothed") s.tv.kind = TvKind::Smoothed;
                else if (e.value == "classic") s.tv.kind = TvKind::Classic;
                else if (e.value == "log_weighted") s.tv.kind = TvKind::LogWeighted;
                else throw ConfigValueError(k, "expected smoothed, classic or log_weighted");
              })
          .on("eps", [&](auto& k, auto& e) { eps = parse_finite(k, e); })
          .on("eps_floor", [&](auto& k, auto& e) { floor = parse_finite(k, e); });
      if (eps) s.tv.eps = *eps;
      if (floor) s.tv.eps_floor = *floor;
    } else if (block.name == "flow") {
      auto& f = cfg.flow;
      rd.on("alpha", [&](auto& k, auto& e) { f.alpha = parse_finite(k, e); })
          .on("iterations", [&](auto& k, auto& e) { f.iterations = parse_positive_int(k, e); })
          .on("pyramid_levels", [&](auto& k, auto& e) { f.pyramid_levels = parse_positive_int(k, e); })
          .on("warps_per_level", [&](auto& k, auto& e) { f.warps_per_level = parse_positive_int(k, e); })
          .on("presmooth_sigma", [&](auto& k, auto& e) { f.presmooth_sigma = parse_finite(k, e); })
          .on("median_radius", [&](auto& k, auto& e) { f.median_radius = static_cast<int>(parse_unsigned(k, e)); });
    } else if (block.name == "baseline") {
      rd.on("sweeps", [&](auto& k, auto& e) { cfg.fusion.sweeps = parse_positive_int(k, e); })
          .on("search_radius", [&](auto& k, auto& e) {
            cfg.fusion.search_radius = static_cast<int>(parse_unsigned(k, e));
          });
    } else if (block.name == "frame") {
      FrameSpec spec;
      std::optional<std::uint64_t> seed;
      rd.on("psf", [&](auto& k, auto& e) {
            const auto id = parse_unsigned(k, e);
            if (id > 8) throw ConfigValueError(k, "kernel id must be 0 (none) or 1..8");
            spec.psf_id = static_cast<int>(id);
          })
          .on("dx", [&](auto& k, auto& e) { spec.dx = parse_finite(k, e); })
          .on("dy", [&](auto& k, auto& e) { spec.dy = parse_finite(k, e); })
          .on("decim", [&](auto& k, auto& e) { spec.decim = static_cast<std::size_t>(parse_positive_int(k, e)); })
          .on("snr_db", [&](auto& k, auto& e) {
            spec.snr_db = parse_real(k, e);
            if (spec.snr_db == -std::numeric_limits<double>::infinity())
              throw ConfigValueError(k, "must be a number or inf");
          })
          .on("seed", [&](auto& k, auto& e) { seed = parse_unsigned(k, e); });
      if (spec.psf_id != kDeltaPsf && (spec.psf_id < 1 || spec.psf_id > 8))
        throw ConfigValueError("psf", "kernel id must be 0 (none) or 1..8 (line " + std::to_string(block.line) + ")");
      spec.seed = seed.value_or(0);
      cfg.frames.push_back(spec);
      explicit_seed.push_back(seed.has_value());
    } else {
      throw ConfigSyntaxError(block.line, "unknown section [" + block.name + "]");
    }
    rd.finish();
  }

  // Frames without an explicit seed draw from the master seed, which may be
  // declared after them.
  for (std::size_t k = 0; k < cfg.frames.size(); ++k)
    if (!explicit_seed[k]) cfg.frames[k].seed = derive_frame_seed(cfg.master_seed, k);

  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {}) {
  std::string text;
  try {
    text = read_file_bytes(path);
  } catch (const IoError&) {
    throw ConfigValueError("config", "cannot read " + path.string());
  }
  return parse_config(text, path.parent_path(), overrides);
}

// Ground-truth HR image described by the scene section.
inline ImageGrid load_scene(const SceneConfig& s) {
  switch (s.source) {
    case SceneSource::Texture: return synth_texture(s.height, s.width, s.seed);
    case SceneSource::Rectangle: return synth_rectangle(s.height, s.width, s.rect, s.foreground, s.background);
    case SceneSource::File: return read_pgm_file(s.path);
  }
  throw DomainError("unknown scene source");
}

}  // namespace mfsr
