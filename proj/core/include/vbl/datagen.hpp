#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "vbl/dataset.hpp"

namespace vbl::datagen {

// Seeded generator with platform-independent derived distributions (std::normal_distribution
// and friends are implementation-defined, so they are not used).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform_open();                                                          // (0, 1)
  double normal();                                                                // Box-Muller
  double logistic();                                                              // log(u / (1-u))
  std::size_t index(std::size_t n);                                               // uniform in [0, n)
  std::size_t categorical(const Eigen::Ref<const Vector>& weights);

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Independent stream seed derived from a base seed and a stream id.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct GmmSpec {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  Eigen::Index n = 600;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SpiralSpec {
  Eigen::Index n = 800;
  double noise = 0.5;
  double t_min = 0.0;
  double t_max = 4.0 * 3.14159265358979323846;
  double pitch = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MixSpec {
  Eigen::Index n = 4000;
  int d = 11;
  int m = 5;
  double snr_db = 20.0;  // +inf means no noise
  std::uint64_t seed = 0;

  void validate() const;
};

using GeneratorSpec = std::variant<GmmSpec, SpiralSpec, MixSpec>;

struct LabeledDataset {
  Dataset data;
  std::vector<int> labels;
};

struct MixResult {
  Dataset data;
  Matrix mixing;          // d x m, unit-norm columns
  Vector noise_variances; // per sensor
};

struct BssSample {
  MixResult mix;
  Matrix sources;  // N x m
};

LabeledDataset sample_gmm(const GmmSpec& spec);

// Points (t cos t, t sin t, pitch t) + isotropic noise, t ~ U[t_min, t_max].
Dataset sample_spiral(const SpiralSpec& spec);

// i.i.d. standard logistic draws, N x m.
Matrix sample_logistic_sources(Eigen::Index n, int m, std::uint64_t seed);

// y = A x + u with A_ij ~ N(0,1) normalized per column and per-sensor noise variance
// (empirical signal power) / 10^(snr_db/10). snr_db = +inf gives y = A x exactly.
MixResult mix_sources(const Matrix& sources, int d, double snr_db, std::uint64_t seed);

BssSample sample_bss(const MixSpec& spec);

// Three well-separated anisotropic 2-D components.
GmmSpec three_cluster_spec(std::uint64_t seed, Eigen::Index n = 600);

}  // namespace vbl::datagen
