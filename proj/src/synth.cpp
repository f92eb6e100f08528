#include "ratioscope/synth.hpp"

#include <cmath>
#include <string>

#include "ratioscope/error.hpp"

namespace ratioscope {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t SplitMix64::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() {
  state_ += kGolden;
  return mix(state_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

std::uint64_t stream_key(std::uint64_t seed, StreamRole role, std::uint64_t trial) {
  std::uint64_t key = SplitMix64::mix(seed + kGolden);
  key = SplitMix64::mix(key ^ static_cast<std::uint64_t>(role) * 0xD1B54A32D192ED03ULL);
  return SplitMix64::mix(key ^ (trial + 1) * 0x8CB92BA72F3D8DD7ULL);
}

void SynthSpec::validate() const {
  if (d < 2) throw Error(ErrorKind::kInvalidSpec, "d must be >= 2, got " + std::to_string(d));
  if (n_inlier < 1 || n_test_inlier < 1 || n_test_outlier < 1)
    throw Error(ErrorKind::kInvalidSpec, "sample counts must be >= 1");
  if (!mu.empty() && static_cast<int>(mu.size()) != d)
    throw Error(ErrorKind::kInvalidSpec, "mu has " + std::to_string(mu.size()) +
                                             " entries, expected " + std::to_string(d));
}

std::vector<double> SynthSpec::outlier_mean() const {
  if (!mu.empty()) return mu;
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  mean[0] = 3.0;
  mean[1] = -2.0;
  return mean;
}

namespace {

Eigen::MatrixXd draw(SplitMix64& rng, int d, int count, const std::vector<double>* mean) {
  Eigen::MatrixXd x(d, count);
  for (int j = 0; j < count; ++j)
    for (int k = 0; k < d; ++k)
      x(k, j) = rng.normal() + (mean ? (*mean)[static_cast<std::size_t>(k)] : 0.0);
  return x;
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const auto mu = spec.outlier_mean();
  SplitMix64 inlier_rng(stream_key(spec.seed, StreamRole::kInliers, spec.trial));
  SplitMix64 test_rng(stream_key(spec.seed, StreamRole::kTestInliers, spec.trial));
  SplitMix64 outlier_rng(stream_key(spec.seed, StreamRole::kTestOutliers, spec.trial));

  Eigen::MatrixXd inliers = draw(inlier_rng, spec.d, spec.n_inlier, nullptr);
  Eigen::MatrixXd test(spec.d, spec.n_test_inlier + spec.n_test_outlier);
  test.leftCols(spec.n_test_inlier) = draw(test_rng, spec.d, spec.n_test_inlier, nullptr);
  test.rightCols(spec.n_test_outlier) = draw(outlier_rng, spec.d, spec.n_test_outlier, &mu);

  std::vector<Label> labels(static_cast<std::size_t>(spec.n_test_inlier), Label::kInlier);
  labels.insert(labels.end(), static_cast<std::size_t>(spec.n_test_outlier), Label::kOutlier);
  return {Dataset::from_matrix(std::move(inliers), "in"),
          Dataset::from_matrix(std::move(test), "test"), std::move(labels)};
}

}  // namespace ratioscope
