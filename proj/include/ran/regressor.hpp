#pragma once

#include "ran/arch.hpp"
#include "ran/field_ops.hpp"

#include <array>

namespace ran {

/// Feature maps of one coarse-to-fine level at its working resolution.
template <typename Scalar>
struct FeatureLevelT {
  VolumeT<Scalar> volume;
  Index level_index = 1;  // 1-based, coarse to fine
  Index pool_size = 1;
};

/// Top-m candidate residual displacements per voxel with their match scores.
/// Scores are sorted descending per voxel; residual components are integer
/// lattice offsets in working-resolution voxels.
template <typename Scalar>
struct MultiHeadProposalT {
  Dims dims;
  Index heads = 1;
  bool heads_clamped = false;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> residuals;  // voxel-major, (head, dz dy dx) fastest
  Eigen::Array<Scalar, Eigen::Dynamic, 1> scores;     // voxel-major, head fastest
};

using FeatureLevel = FeatureLevelT<float>;
using MultiHeadProposal = MultiHeadProposalT<float>;

struct SearchParams {
  Index radius = 1;         // L-inf bound of the lattice, working voxels
  Index stride = 1;         // lattice step (finest dilation pass)
  Index patch_radius = 2;   // 5^3 patch taps by default
  Index patch_spacing = 1;  // tap spacing; dilated levels match on their own lattice
};

inline Dims working_dims(Dims orig, Index pool) {
  return {(orig.t + pool - 1) / pool, (orig.h + pool - 1) / pool, (orig.w + pool - 1) / pool};
}

namespace detail {

// Derivative magnitude that tolerates degenerate (length-1) axes; used for
// feature channels where the public gradient contract would reject the dims.
template <typename Scalar>
VolumeT<Scalar> gradient_magnitude(const VolumeT<Scalar>& vol) {
  const Dims d = vol.dims;
  VolumeT<Scalar> out(d, vol.channels, Scalar(0), vol.spacing);
  const Index nc = vol.channels;
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    for (Index ch = 0; ch < nc; ++ch) {
      const double gz = d.t < 2 ? 0.0
                                : axis_diff([&](Index k) { return double(vol.at(k, y, x, ch)); }, z, d.t);
      const double gy = d.h < 2 ? 0.0
                                : axis_diff([&](Index k) { return double(vol.at(z, k, x, ch)); }, y, d.h);
      const double gx = d.w < 2 ? 0.0
                                : axis_diff([&](Index k) { return double(vol.at(z, y, k, ch)); }, x, d.w);
      out.data[i * nc + ch] = Scalar(std::sqrt(gz * gz + gy * gy + gx * gx));
    }
  });
  return out;
}

}  // namespace detail

/// Per-level feature maps: Gaussian-smoothed input resampled to the level's
/// working grid, with the gradient magnitude of each channel appended.
/// The smoothing scale is half the level's search-lattice step
/// (sigma = 0.5 * p_k * min dilation), so the correlation basin spans the
/// lattice; full-resolution dilated levels keep the coarse context a pooled
/// level of the same reach would have. Deterministic given (vol, cfg).
template <typename Scalar>
std::vector<FeatureLevelT<Scalar>> build_feature_levels(const VolumeT<Scalar>& vol,
                                                        const ArchitectureConfig& cfg) {
  cfg.validate();
  std::vector<FeatureLevelT<Scalar>> levels;
  levels.reserve(cfg.levels.size());
  for (size_t k = 0; k < cfg.levels.size(); ++k) {
    const Index pool = cfg.levels[k].pool_size;
    const Index step = cfg.levels[k].dilation.empty()
                           ? Index(1)
                           : *std::min_element(cfg.levels[k].dilation.begin(),
                                               cfg.levels[k].dilation.end());
    const VolumeT<Scalar> smoothed = gaussian_smooth(vol, 0.5 * double(pool * step));
    const VolumeT<Scalar> resampled = resample_volume(smoothed, working_dims(vol.dims, pool));
    const VolumeT<Scalar> mag = detail::gradient_magnitude(resampled);

    VolumeT<Scalar> feat(resampled.dims, resampled.channels * 2, Scalar(0), resampled.spacing);
    const Index nc = resampled.channels;
    parallel_for(0, feat.voxels(), [&](Index i) {
      for (Index ch = 0; ch < nc; ++ch) {
        feat.data[i * 2 * nc + ch] = resampled.data[i * nc + ch];
        feat.data[i * 2 * nc + nc + ch] = mag.data[i * nc + ch];
      }
    });
    levels.push_back({std::move(feat), Index(k + 1), pool});
  }
  return levels;
}

namespace detail {

// Per-voxel patch mean and population variance for every channel, over the
// clamped (2r+1)^3 tap window with taps spaced `sp` voxels apart.
template <typename Scalar>
void patch_stats(const VolumeT<Scalar>& vol, Index r, Index sp, std::vector<double>& mean,
                 std::vector<double>& var) {
  const Dims d = vol.dims;
  const Index nc = vol.channels;
  mean.assign(size_t(d.count() * nc), 0.0);
  var.assign(size_t(d.count() * nc), 0.0);
  const double n = double((2 * r + 1) * (2 * r + 1) * (2 * r + 1));
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    std::array<double, 16> s{}, ss{};
    for (Index oz = -r; oz <= r; ++oz) {
      const Index zz = std::clamp<Index>(z + oz * sp, 0, d.t - 1);
      for (Index oy = -r; oy <= r; ++oy) {
        const Index yy = std::clamp<Index>(y + oy * sp, 0, d.h - 1);
        for (Index ox = -r; ox <= r; ++ox) {
          const Index xx = std::clamp<Index>(x + ox * sp, 0, d.w - 1);
          const Scalar* p = vol.data.data() + d.offset(zz, yy, xx) * nc;
          for (Index ch = 0; ch < nc; ++ch) {
            const double v = double(p[ch]);
            s[size_t(ch)] += v;
            ss[size_t(ch)] += v * v;
          }
        }
      }
    }
    for (Index ch = 0; ch < nc; ++ch) {
      const double mu = s[size_t(ch)] / n;
      mean[size_t(i * nc + ch)] = mu;
      var[size_t(i * nc + ch)] = std::max(0.0, ss[size_t(ch)] / n - mu * mu);
    }
  });
}

struct Candidate {
  Index dz, dy, dx;
  Index linf;
};

inline bool candidate_beats(double score_a, const Candidate& a, double score_b, const Candidate& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.linf != b.linf) return a.linf < b.linf;
  if (a.dz != b.dz) return a.dz < b.dz;
  if (a.dy != b.dy) return a.dy < b.dy;
  return a.dx < b.dx;
}

}  // namespace detail

/// Windowed block matching: scores every lattice displacement within the
/// L-inf radius by local NCC (per channel, averaged) between the target
/// patch at x and the source patch at x + delta, and keeps the top-m.
/// Ties prefer smaller L-inf, then lexicographic (dz, dy, dx). The returned
/// residual field pulls the source toward the target: warp(src, residual)
/// matches tgt where the match is good.
template <typename Scalar>
MultiHeadProposalT<Scalar> regress_residual(const FeatureLevelT<Scalar>& src_feat,
                                            const FeatureLevelT<Scalar>& tgt_feat,
                                            Index heads, const SearchParams& search) {
  const VolumeT<Scalar>& src = src_feat.volume;
  const VolumeT<Scalar>& tgt = tgt_feat.volume;
  if (src.dims != tgt.dims || src.channels != tgt.channels)
    throw std::invalid_argument("regress_residual: feature maps must match in dims and channels");
  if (heads < 1) throw std::invalid_argument("regress_residual: heads must be >= 1");
  if (search.radius < 0 || search.stride < 1 || search.patch_radius < 0 || search.patch_spacing < 1)
    throw std::invalid_argument("regress_residual: bad search parameters");
  if (src.channels > 16)
    throw std::invalid_argument("regress_residual: more than 16 feature channels unsupported");

  // candidate lattice in scan order (dz, dy, dx ascending)
  std::vector<detail::Candidate> candidates;
  const Index steps = search.radius / search.stride;
  for (Index a = -steps; a <= steps; ++a)
    for (Index b = -steps; b <= steps; ++b)
      for (Index c = -steps; c <= steps; ++c) {
        const Index dz = a * search.stride, dy = b * search.stride, dx = c * search.stride;
        candidates.push_back({dz, dy, dx,
                              std::max(std::abs(dz), std::max(std::abs(dy), std::abs(dx)))});
      }

  MultiHeadProposalT<Scalar> out;
  out.dims = src.dims;
  out.heads = std::min<Index>(heads, Index(candidates.size()));
  out.heads_clamped = out.heads < heads;
  out.residuals.setZero(out.dims.count() * out.heads * 3);
  out.scores.setZero(out.dims.count() * out.heads);

  std::vector<double> mu_t, var_t, mu_s, var_s;
  detail::patch_stats(tgt, search.patch_radius, search.patch_spacing, mu_t, var_t);
  detail::patch_stats(src, search.patch_radius, search.patch_spacing, mu_s, var_s);

  const Dims d = src.dims;
  const Index nc = src.channels;
  const Index pr = search.patch_radius;
  const Index ps = search.patch_spacing;
  const double n_patch = double((2 * pr + 1) * (2 * pr + 1) * (2 * pr + 1));
  constexpr double kVarEps = 1e-12;
  const Index m = out.heads;

  parallel_chunks(0, d.count(), d.h * d.w, [&](Index lo, Index hi) {
    std::vector<double> best_score(size_t(m), 0.0);
    std::vector<Index> best_idx(size_t(m), 0);
    for (Index i = lo; i < hi; ++i) {
      const Index z = i / (d.h * d.w);
      const Index y = (i / d.w) % d.h;
      const Index x = i % d.w;
      Index filled = 0;

      for (Index ci = 0; ci < Index(candidates.size()); ++ci) {
        const auto& cand = candidates[size_t(ci)];
        const Index cz = z + cand.dz, cy = y + cand.dy, cx = x + cand.dx;

        std::array<double, 16> cross{}, s_mu{}, s_var{};
        const bool center_inside =
            cz >= 0 && cz < d.t && cy >= 0 && cy < d.h && cx >= 0 && cx < d.w;
        if (center_inside) {
          const Index j = d.offset(cz, cy, cx);
          for (Index ch = 0; ch < nc; ++ch) {
            s_mu[size_t(ch)] = mu_s[size_t(j * nc + ch)];
            s_var[size_t(ch)] = var_s[size_t(j * nc + ch)];
          }
        }
        std::array<double, 16> s_sum{}, s_sq{};
        for (Index oz = -pr; oz <= pr; ++oz) {
          const Index tz = std::clamp<Index>(z + oz * ps, 0, d.t - 1);
          const Index sz = std::clamp<Index>(cz + oz * ps, 0, d.t - 1);
          for (Index oy = -pr; oy <= pr; ++oy) {
            const Index ty = std::clamp<Index>(y + oy * ps, 0, d.h - 1);
            const Index sy = std::clamp<Index>(cy + oy * ps, 0, d.h - 1);
            for (Index ox = -pr; ox <= pr; ++ox) {
              const Index tx = std::clamp<Index>(x + ox * ps, 0, d.w - 1);
              const Index sx = std::clamp<Index>(cx + ox * ps, 0, d.w - 1);
              const Scalar* tp = tgt.data.data() + d.offset(tz, ty, tx) * nc;
              const Scalar* sp = src.data.data() + d.offset(sz, sy, sx) * nc;
              for (Index ch = 0; ch < nc; ++ch) {
                const double a = double(tp[ch]);
                const double b = double(sp[ch]);
                cross[size_t(ch)] += a * b;
                if (!center_inside) {
                  s_sum[size_t(ch)] += b;
                  s_sq[size_t(ch)] += b * b;
                }
              }
            }
          }
        }
        if (!center_inside) {
          for (Index ch = 0; ch < nc; ++ch) {
            const double mu = s_sum[size_t(ch)] / n_patch;
            s_mu[size_t(ch)] = mu;
            s_var[size_t(ch)] = std::max(0.0, s_sq[size_t(ch)] / n_patch - mu * mu);
          }
        }

        double score = 0.0;
        for (Index ch = 0; ch < nc; ++ch) {
          const double vt = var_t[size_t(i * nc + ch)];
          const double vs = s_var[size_t(ch)];
          if (vt < kVarEps || vs < kVarEps) continue;  // flat region scores 0
          const double cov = cross[size_t(ch)] / n_patch - mu_t[size_t(i * nc + ch)] * s_mu[size_t(ch)];
          score += cov / std::sqrt(vt * vs);
        }
        score /= double(nc);

        // insertion into the top-m slots
        Index pos = filled;
        while (pos > 0 && detail::candidate_beats(score, cand, best_score[size_t(pos - 1)],
                                                  candidates[size_t(best_idx[size_t(pos - 1)])]))
          --pos;
        if (pos < m) {
          const Index last = std::min(filled, m - 1);
          for (Index s = last; s > pos; --s) {
            best_score[size_t(s)] = best_score[size_t(s - 1)];
            best_idx[size_t(s)] = best_idx[size_t(s - 1)];
          }
          best_score[size_t(pos)] = score;
          best_idx[size_t(pos)] = ci;
          if (filled < m) ++filled;
        }
      }

      for (Index h = 0; h < m; ++h) {
        const auto& cand = candidates[size_t(best_idx[size_t(h)])];
        out.residuals[(i * m + h) * 3 + 0] = Scalar(cand.dz);
        out.residuals[(i * m + h) * 3 + 1] = Scalar(cand.dy);
        out.residuals[(i * m + h) * 3 + 2] = Scalar(cand.dx);
        out.scores[i * m + h] = Scalar(best_score[size_t(h)]);
      }
    }
  });
  return out;
}

}  // namespace ran
