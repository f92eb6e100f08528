#pragma once

#include <cstdint>
#include <vector>

#include "ratioscope/dataset.hpp"

namespace ratioscope {

// Counter-based SplitMix64 stream: output k is mix(key + (k + 1) * golden).
// Streams for different (seed, role, trial) keys are independent, so any
// trial can be regenerated without producing the ones before it.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t key) : state_(key) {}

  std::uint64_t next();
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal variate by the Marsaglia polar method.
  double normal();

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class StreamRole : std::uint64_t {
  kInliers = 0x1,
  kTestInliers = 0x2,
  kTestOutliers = 0x3,
  kSplit = 0x4,
  kBasis = 0x5,
};

// Key for the stream owned by one role within one trial.
std::uint64_t stream_key(std::uint64_t seed, StreamRole role, std::uint64_t trial);

struct SynthSpec {
  int d = 10;
  int n_inlier = 200;
  int n_test_inlier = 100;
  int n_test_outlier = 10;
  std::vector<double> mu;  // empty: [3, -2, 0, ..., 0]
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;

  void validate() const;
  std::vector<double> outlier_mean() const;
};

struct SynthData {
  Dataset inliers;
  Dataset test;
  std::vector<Label> test_labels;
};

// Inliers ~ N(0, I); test = n_test_inlier draws of N(0, I) followed by
// n_test_outlier draws of N(mu, I).
SynthData generate(const SynthSpec& spec);

}  // namespace ratioscope
