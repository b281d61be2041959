#pragma once

#include "ran/core.hpp"

#include <numeric>

namespace ran {

/// One coarse-to-fine level: the pool size of a feature cell at original
/// resolution and the dilation rates of the stacked search passes.
struct LevelConfig {
  Index pool_size = 1;
  std::vector<Index> dilation;

  void validate() const {
    if (pool_size < 1) throw std::invalid_argument("LevelConfig: pool_size must be >= 1");
    for (const Index r : dilation)
      if (r < 1) throw std::invalid_argument("LevelConfig: dilation entries must be >= 1");
  }
};

inline Index dilation_l1(const LevelConfig& level) {
  return std::accumulate(level.dilation.begin(), level.dilation.end(), Index(0));
}

/// Levels ordered coarse to fine (pool sizes non-increasing), the number of
/// full-resolution (motion-aware) levels q, and the proposal head count m.
struct ArchitectureConfig {
  std::vector<LevelConfig> levels;
  Index ma_depth = 0;
  Index heads = 2;

  void validate() const {
    if (levels.empty()) throw std::invalid_argument("ArchitectureConfig: needs at least one level");
    if (ma_depth < 0 || ma_depth > Index(levels.size()))
      throw std::invalid_argument("ArchitectureConfig: ma_depth out of range");
    if (heads < 1) throw std::invalid_argument("ArchitectureConfig: heads must be >= 1");
    for (size_t k = 0; k < levels.size(); ++k) {
      levels[k].validate();
      if (k > 0 && levels[k].pool_size > levels[k - 1].pool_size)
        throw std::invalid_argument("ArchitectureConfig: pool sizes must be non-increasing");
    }
  }
};

/// s_k = p_k * (1 + 2*||r_k||_1): original-resolution size of the effective
/// receptive field of level k.
inline Index receptive_field_size(const LevelConfig& level) {
  level.validate();
  return level.pool_size * (1 + 2 * dilation_l1(level));
}

/// a_k = (s_k - 1) / 2, an exact half-integer.
inline double capture_range(const LevelConfig& level) {
  return double(receptive_field_size(level) - 1) / 2.0;
}

/// True iff the coarsest level's accessible motion range covers the whole
/// image: p_1 * (1 + 2*||r_1||_1) >= 2*max(T,H,W) + 1.
inline bool covers_whole_image(const ArchitectureConfig& cfg, Dims dims) {
  if (cfg.levels.empty()) throw std::invalid_argument("covers_whole_image: empty config");
  const Index s1 = receptive_field_size(cfg.levels.front());
  const Index m = std::max(dims.t, std::max(dims.h, dims.w));
  return s1 >= 2 * m + 1;
}

/// The motion-separability step function: right-continuous, 0 below the
/// first breakpoint, plateau `values[i]` on [breakpoints[i], breakpoints[i+1]).
struct SeparabilityProfile {
  std::vector<double> breakpoints;  // ascending
  std::vector<double> values;       // non-decreasing

  double value_at(double p) const {
    double v = 0.0;
    for (size_t i = 0; i < breakpoints.size(); ++i) {
      if (p < breakpoints[i]) break;
      v = values[i];
    }
    return v;
  }
};

/// Closed-form separability bound of a configuration. Breakpoints sit at
/// p_k + 2*sum_{k'>k} a_{k'} with plateau 2*sum_{k'>=k} a_{k'}; both are
/// integers (2*a_k = s_k - 1), so the arithmetic below is exact.
inline SeparabilityProfile separability_profile(const ArchitectureConfig& cfg) {
  cfg.validate();
  const Index K = Index(cfg.levels.size());
  std::vector<long long> twice_a(cfg.levels.size());
  for (Index k = 0; k < K; ++k)
    twice_a[size_t(k)] = (long long)(receptive_field_size(cfg.levels[size_t(k)]) - 1);

  SeparabilityProfile prof;
  long long tail = 0;  // sum of 2*a_{k'} for k' > k
  for (Index k = K - 1; k >= 0; --k) {
    const long long bp = (long long)(cfg.levels[size_t(k)].pool_size) + tail;
    tail += twice_a[size_t(k)];
    const long long value = tail;  // now sum over k' >= k
    if (!prof.breakpoints.empty() && double(bp) == prof.breakpoints.back()) {
      prof.values.back() = double(value);  // merged band: keep the larger plateau
    } else {
      prof.breakpoints.push_back(double(bp));
      prof.values.push_back(double(value));
    }
  }
  return prof;
}

/// Exact integral of the step function over [0, p_max].
inline double profile_area(const SeparabilityProfile& prof, double p_max) {
  if (!(p_max > 0.0)) throw std::invalid_argument("profile_area: p_max must be positive");
  double area = 0.0;
  for (size_t i = 0; i < prof.breakpoints.size(); ++i) {
    const double lo = prof.breakpoints[i];
    if (lo >= p_max) break;
    const double hi = (i + 1 < prof.breakpoints.size()) ? std::min(prof.breakpoints[i + 1], p_max) : p_max;
    area += prof.values[i] * (hi - lo);
  }
  return area;
}

/// Motion-aware schedule: levels k <= q keep the q-level resolution
/// (pool 2^(K-q)) with the baseline dilation scaled by 2^(q-k); levels k > q
/// follow the pyramid schedule (pool 2^(K-k), baseline dilation). q = 0
/// reproduces the pure feature pyramid. The scaling holds with equality, so
/// p_k * ||r_k||_1 matches the pyramid value at every level by construction.
inline ArchitectureConfig ma_config(Index K, Index q, const std::vector<Index>& base_dilation,
                                    Index heads = 2) {
  if (K < 1 || K > 24) throw std::invalid_argument("ma_config: K out of range");
  if (q < 0 || q > K) throw std::invalid_argument("ma_config: q out of range");
  if (base_dilation.empty()) throw std::invalid_argument("ma_config: base dilation must be nonempty");
  ArchitectureConfig cfg;
  cfg.ma_depth = q;
  cfg.heads = heads;
  cfg.levels.resize(size_t(K));
  for (Index k = 1; k <= K; ++k) {
    LevelConfig& lvl = cfg.levels[size_t(k - 1)];
    if (k <= q) {
      lvl.pool_size = Index(1) << (K - q);
      const Index scale = Index(1) << (q - k);
      lvl.dilation.reserve(base_dilation.size());
      for (const Index r : base_dilation) lvl.dilation.push_back(r * scale);
    } else {
      lvl.pool_size = Index(1) << (K - k);
      lvl.dilation = base_dilation;
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace ran
