#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"
#include "mfsr/linear_operator.hpp"

namespace mfsr {

inline double mean(const ImageGrid& img) {
  double s = 0.0;
  for (double v : img.data()) s += v;
  return s / static_cast<double>(img.size());
}

// Population variance about the image mean.
inline double variance(const ImageGrid& img) {
  const double mu = mean(img);
  double s = 0.0;
  for (double v : img.data()) s += (v - mu) * (v - mu);
  return s / static_cast<double>(img.size());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed of frame `index` (0-based). Depends only on (master, index), so adding
// frames never changes the noise of earlier ones.
inline std::uint64_t derive_frame_seed(std::uint64_t master, std::size_t index) {
  return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

// Adds white Gaussian noise with variance Var(img) * 10^(-snr_db / 10).
inline ImageGrid add_noise(const ImageGrid& img, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw DomainError("add_noise: snr_db must be a number or +inf");
  if (snr_db == kNoiselessSnr) return img;
  const double var = variance(img);
  if (!(var > 0.0)) throw DegenerateSignalError("add_noise: constant image has no signal variance");
  const double sigma = std::sqrt(var * std::pow(10.0, -snr_db / 10.0));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ImageGrid out = img;
  for (double& v : out.data()) v += sigma * gauss(rng);
  return out;
}

// psf_id 0 selects the delta kernel (no blur).
inline constexpr int kDeltaPsf = 0;

struct FrameSpec {
  int psf_id = 1;
  double dx = 0.0;  // columns
  double dy = 0.0;  // rows
  std::size_t decim = 2;
  double snr_db = kNoiselessSnr;
  std::uint64_t seed = 0;
};

struct Frame {
  FrameSpec spec;
  ImageGrid image;
};

struct ObservationSet {
  Shape hr_shape;
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
};

inline void validate(const FrameSpec& spec, Shape hr_shape) {
  if (spec.psf_id != kDeltaPsf && (spec.psf_id < 1 || spec.psf_id > 8))
    throw UnknownKernelError("unknown kernel id " + std::to_string(spec.psf_id));
  if (spec.decim == 0 || hr_shape.height % spec.decim != 0 || hr_shape.width % spec.decim != 0)
    throw DimensionError("frame decimation " + std::to_string(spec.decim) + " does not divide " +
                         to_string(hr_shape));
}

// H_k = D * M * B: blur first, then warp, then decimate.
inline LinearOperator observation_operator(const FrameSpec& spec, Shape hr_shape) {
  validate(spec, hr_shape);
  return compose({spec.psf_id == kDeltaPsf ? identity_op(hr_shape) : blur_op(make_kernel(spec.psf_id), hr_shape),
                  warp_op(spec.dx, spec.dy, hr_shape), decimate_op(spec.decim, hr_shape)});
}

inline std::vector<LinearOperator> observation_operators(const ObservationSet& obs) {
  std::vector<LinearOperator> ops;
  ops.reserve(obs.size());
  for (const auto& f : obs.frames) ops.push_back(observation_operator(f.spec, obs.hr_shape));
  return ops;
}

inline ObservationSet simulate_observations(const ImageGrid& hr, const std::vector<FrameSpec>& specs) {
  ObservationSet obs{hr.shape(), {}};
  obs.frames.reserve(specs.size());
  const LexVector x = to_lex(hr);
  for (const auto& spec : specs) {
    const auto H = observation_operator(spec, hr.shape());
    const ImageGrid clean = from_lex(H.apply(x));
    obs.frames.push_back({spec, add_noise(clean, spec.snr_db, spec.seed)});
  }
  return obs;
}

}  // namespace mfsr
