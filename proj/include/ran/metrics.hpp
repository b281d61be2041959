#pragma once

#include "ran/field_ops.hpp"

#include <limits>
#include <random>

namespace ran {

/// Per-voxel non-negative integer labels, 0 = background.
struct LabelVolume {
  Dims dims;
  Eigen::Array<int32_t, Eigen::Dynamic, 1> data;

  LabelVolume() = default;

  explicit LabelVolume(Dims d) : dims(d) {
    require_positive(d, "LabelVolume");
    data.setZero(d.count());
  }

  int32_t at(Index z, Index y, Index x) const { return data[dims.offset(z, y, x)]; }
  int32_t& at(Index z, Index y, Index x) { return data[dims.offset(z, y, x)]; }

  void validate() const {
    if ((data < 0).any()) throw invalid_data_error("LabelVolume: labels must be non-negative");
  }
};

/// 2|A∩B| / (|A|+|B|); 1 if both masks are empty, 0 if exactly one is.
inline double dice(const LabelVolume& a, const LabelVolume& b, int32_t label) {
  if (a.dims != b.dims) throw std::invalid_argument("dice: dimensions differ");
  Index na = 0, nb = 0, ninter = 0;
  for (Index i = 0; i < a.data.size(); ++i) {
    const bool ia = a.data[i] == label;
    const bool ib = b.data[i] == label;
    na += ia;
    nb += ib;
    ninter += ia && ib;
  }
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  return 2.0 * double(ninter) / double(na + nb);
}

/// Mask voxels with a 6-neighbor outside the mask; volume borders count as
/// outside.
inline std::vector<Vec3i> surface_voxels(const LabelVolume& v, int32_t label) {
  std::vector<Vec3i> out;
  const Dims d = v.dims;
  auto inside = [&](Index z, Index y, Index x) {
    return z >= 0 && z < d.t && y >= 0 && y < d.h && x >= 0 && x < d.w &&
           v.at(z, y, x) == label;
  };
  for (Index z = 0; z < d.t; ++z)
    for (Index y = 0; y < d.h; ++y)
      for (Index x = 0; x < d.w; ++x) {
        if (v.at(z, y, x) != label) continue;
        if (!inside(z - 1, y, x) || !inside(z + 1, y, x) || !inside(z, y - 1, x) ||
            !inside(z, y + 1, x) || !inside(z, y, x - 1) || !inside(z, y, x + 1))
          out.push_back(Vec3i(z, y, x));
      }
  return out;
}

enum class DistanceMethod { ExactTransform, BruteForce };

struct SurfaceDistances {
  double hausdorff_mm = 0.0;
  double average_mm = 0.0;
};

namespace detail {

constexpr double kEdtInf = 1e300;

// Lower envelope of parabolas f[q] + (s*(x-q))^2 over integer x (squared
// Euclidean distance transform, one axis, anisotropic sample spacing s).
// Unreachable samples carry the large-but-finite kEdtInf offset; their
// parabolas simply never win the envelope.
inline void edt_pass(double* f, Index n, double s, std::vector<Index>& v, std::vector<double>& z,
                     std::vector<double>& out) {
  const double inf = std::numeric_limits<double>::infinity();
  const double s2 = s * s;
  v.assign(size_t(n), 0);
  z.assign(size_t(n) + 1, 0.0);
  out.assign(size_t(n), 0.0);
  auto intersect = [&](Index q, Index p) {
    return (f[q] - f[p] + s2 * double(q * q - p * p)) / (2.0 * s2 * double(q - p));
  };
  Index k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (Index q = 1; q < n; ++q) {
    double sx = intersect(q, v[size_t(k)]);
    while (k > 0 && sx <= z[size_t(k)]) {
      --k;
      sx = intersect(q, v[size_t(k)]);
    }
    ++k;
    v[size_t(k)] = q;
    z[size_t(k)] = sx;
    z[size_t(k) + 1] = inf;
  }
  k = 0;
  for (Index x = 0; x < n; ++x) {
    while (z[size_t(k) + 1] < double(x)) ++k;
    const Index q = v[size_t(k)];
    out[size_t(x)] = f[q] + s2 * double((x - q) * (x - q));
  }
  std::copy(out.begin(), out.end(), f);
}

// Squared Euclidean distance (mm^2) to the nearest seed over the whole grid.
inline std::vector<double> squared_distance_transform(const Dims& d, const std::vector<Vec3i>& seeds,
                                                      const Vec3d& spacing) {
  std::vector<double> dist(size_t(d.count()), kEdtInf);
  for (const auto& s : seeds) dist[size_t(d.offset(s[0], s[1], s[2]))] = 0.0;

  std::vector<Index> v;
  std::vector<double> z, out, line;
  // pass along x, then y, then z; the value grouping matches the brute-force
  // ((dx*sx)^2 + (dy*sy)^2) + (dz*sz)^2 ordering exactly
  line.resize(size_t(std::max(d.t, std::max(d.h, d.w))));
  for (Index zz = 0; zz < d.t; ++zz)
    for (Index yy = 0; yy < d.h; ++yy)
      edt_pass(dist.data() + d.offset(zz, yy, 0), d.w, spacing[2], v, z, out);
  for (Index zz = 0; zz < d.t; ++zz)
    for (Index xx = 0; xx < d.w; ++xx) {
      for (Index yy = 0; yy < d.h; ++yy) line[size_t(yy)] = dist[size_t(d.offset(zz, yy, xx))];
      edt_pass(line.data(), d.h, spacing[1], v, z, out);
      for (Index yy = 0; yy < d.h; ++yy) dist[size_t(d.offset(zz, yy, xx))] = line[size_t(yy)];
    }
  for (Index yy = 0; yy < d.h; ++yy)
    for (Index xx = 0; xx < d.w; ++xx) {
      for (Index zz = 0; zz < d.t; ++zz) line[size_t(zz)] = dist[size_t(d.offset(zz, yy, xx))];
      edt_pass(line.data(), d.t, spacing[0], v, z, out);
      for (Index zz = 0; zz < d.t; ++zz) dist[size_t(d.offset(zz, yy, xx))] = line[size_t(zz)];
    }
  return dist;
}

struct DirectedStats {
  double max_mm = 0.0;
  double mean_mm = 0.0;
};

inline DirectedStats directed_brute_force(const std::vector<Vec3i>& from,
                                          const std::vector<Vec3i>& to, const Vec3d& spacing) {
  DirectedStats st;
  double sum = 0.0;
  for (const auto& a : from) {
    double best = kEdtInf;
    for (const auto& b : to) {
      const double dz = double(a[0] - b[0]) * spacing[0];
      const double dy = double(a[1] - b[1]) * spacing[1];
      const double dx = double(a[2] - b[2]) * spacing[2];
      const double dd = (dx * dx + dy * dy) + dz * dz;
      if (dd < best) best = dd;
    }
    const double dmm = std::sqrt(best);
    st.max_mm = std::max(st.max_mm, dmm);
    sum += dmm;
  }
  st.mean_mm = sum / double(from.size());
  return st;
}

inline DirectedStats directed_from_transform(const std::vector<Vec3i>& from,
                                             const std::vector<double>& dist2, const Dims& d) {
  DirectedStats st;
  double sum = 0.0;
  for (const auto& a : from) {
    const double dmm = std::sqrt(dist2[size_t(d.offset(a[0], a[1], a[2]))]);
    st.max_mm = std::max(st.max_mm, dmm);
    sum += dmm;
  }
  st.mean_mm = sum / double(from.size());
  return st;
}

}  // namespace detail

/// Symmetric Hausdorff and average surface distance in mm between the two
/// masks of `label`. Surfaces are 6-neighborhood boundaries; distances are
/// Euclidean between voxel centers.
inline SurfaceDistances surface_distances(const LabelVolume& a, const LabelVolume& b, int32_t label,
                                          Vec3d spacing,
                                          DistanceMethod method = DistanceMethod::ExactTransform) {
  if (a.dims != b.dims) throw std::invalid_argument("surface_distances: dimensions differ");
  const auto sa = surface_voxels(a, label);
  const auto sb = surface_voxels(b, label);
  if (sa.empty() || sb.empty())
    throw undefined_metric_error("surface_distances: empty mask for label " + std::to_string(label));

  detail::DirectedStats ab, ba;
  if (method == DistanceMethod::BruteForce) {
    ab = detail::directed_brute_force(sa, sb, spacing);
    ba = detail::directed_brute_force(sb, sa, spacing);
  } else {
    const auto dist_to_b = detail::squared_distance_transform(a.dims, sb, spacing);
    const auto dist_to_a = detail::squared_distance_transform(a.dims, sa, spacing);
    ab = detail::directed_from_transform(sa, dist_to_b, a.dims);
    ba = detail::directed_from_transform(sb, dist_to_a, a.dims);
  }
  return {std::max(ab.max_mm, ba.max_mm), 0.5 * (ab.mean_mm + ba.mean_mm)};
}

inline double hausdorff(const LabelVolume& a, const LabelVolume& b, int32_t label, Vec3d spacing,
                        DistanceMethod method = DistanceMethod::ExactTransform) {
  return surface_distances(a, b, label, spacing, method).hausdorff_mm;
}

inline double asd(const LabelVolume& a, const LabelVolume& b, int32_t label, Vec3d spacing,
                  DistanceMethod method = DistanceMethod::ExactTransform) {
  return surface_distances(a, b, label, spacing, method).average_mm;
}

/// Count of interior tissue voxels (border excluded) whose Jacobian
/// determinant is negative.
template <typename Scalar>
Index neg_jacobian_count(const DisplacementFieldT<Scalar>& ddf, const LabelVolume& tissue) {
  if (ddf.dims != tissue.dims)
    throw std::invalid_argument("neg_jacobian_count: dimensions differ");
  const auto jd = jacobian_det(ddf);
  const Dims d = ddf.dims;
  Index count = 0;
  for (Index z = 1; z < d.t - 1; ++z)
    for (Index y = 1; y < d.h - 1; ++y)
      for (Index x = 1; x < d.w - 1; ++x)
        if (tissue.at(z, y, x) != 0 && jd.at(z, y, x) < Scalar(0)) ++count;
  return count;
}

/// Nearest-neighbor label warping: warped labels stay within the source
/// label set.
template <typename Scalar>
LabelVolume warp_labels_nearest(const LabelVolume& labels, const DisplacementFieldT<Scalar>& ddf) {
  if (labels.dims != ddf.dims)
    throw std::invalid_argument("warp_labels_nearest: dimensions differ");
  LabelVolume out(labels.dims);
  const Dims d = labels.dims;
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    const Index sz = detail::nearest_index(double(z) + double(ddf.data[i * 3 + 0]), d.t);
    const Index sy = detail::nearest_index(double(y) + double(ddf.data[i * 3 + 1]), d.h);
    const Index sx = detail::nearest_index(double(x) + double(ddf.data[i * 3 + 2]), d.w);
    out.data[i] = labels.at(sz, sy, sx);
  });
  return out;
}

struct MotionPdfOptions {
  Index bins = 32;
  double sigma = 1.0;            // smoothing in bins
  Index exact_limit = 10000;     // all pairs when at most this many correct voxels
  Index pair_budget = 2000000;   // sampled pairs above the exact limit
  uint64_t seed = 0;
};

/// 2-D density over (Chebyshev voxel distance, Chebyshev motion difference)
/// of pairs of correctly registered voxels: rows index the motion-difference
/// bin, columns the distance bin.
struct MotionPairPdf {
  bool empty = false;
  Eigen::ArrayXXd density;
};

namespace detail {

inline void smooth_histogram_2d(Eigen::ArrayXXd& h, double sigma) {
  if (sigma <= 0.0) return;
  const auto kernel = gaussian_kernel(sigma);
  const Index r = Index(kernel.size() / 2);
  Eigen::ArrayXXd tmp(h.rows(), h.cols());
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) {
      double acc = 0.0;
      for (Index o = -r; o <= r; ++o) {
        const Index k = std::clamp<Index>(i + o, 0, h.rows() - 1);
        acc += kernel[size_t(o + r)] * h(k, j);
      }
      tmp(i, j) = acc;
    }
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) {
      double acc = 0.0;
      for (Index o = -r; o <= r; ++o) {
        const Index k = std::clamp<Index>(j + o, 0, h.cols() - 1);
        acc += kernel[size_t(o + r)] * tmp(i, k);
      }
      h(i, j) = acc;
    }
}

}  // namespace detail

template <typename Scalar>
MotionPairPdf motion_pair_pdf(const DisplacementFieldT<Scalar>& ddf, const LabelVolume& src_labels,
                              const LabelVolume& tgt_labels, const MotionPdfOptions& opts = {}) {
  if (ddf.dims != src_labels.dims || ddf.dims != tgt_labels.dims)
    throw std::invalid_argument("motion_pair_pdf: dimensions differ");
  if (opts.bins < 1) throw std::invalid_argument("motion_pair_pdf: bins must be >= 1");

  const LabelVolume warped = warp_labels_nearest(src_labels, ddf);
  std::vector<Index> correct;
  for (Index i = 0; i < ddf.dims.count(); ++i)
    if (tgt_labels.data[i] != 0 && tgt_labels.data[i] == warped.data[i]) correct.push_back(i);

  MotionPairPdf out;
  out.density = Eigen::ArrayXXd::Zero(opts.bins, opts.bins);
  if (correct.empty()) {
    out.empty = true;
    return out;
  }

  const Dims d = ddf.dims;
  auto coords = [&](Index i) {
    return Vec3i(i / (d.h * d.w), (i / d.w) % d.h, i % d.w);
  };
  auto add_pair = [&](Index i, Index j) {
    const Vec3i a = coords(i), b = coords(j);
    const Index dist = (a - b).cwiseAbs().maxCoeff();
    double diff = 0.0;
    for (int c = 0; c < 3; ++c)
      diff = std::max(diff, std::abs(double(ddf.data[i * 3 + c]) - double(ddf.data[j * 3 + c])));
    const Index bd = std::min<Index>(dist, opts.bins - 1);
    const Index bm = std::min<Index>(Index(diff), opts.bins - 1);
    out.density(bm, bd) += 1.0;
  };

  const Index n = Index(correct.size());
  if (n <= opts.exact_limit) {
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) add_pair(correct[size_t(i)], correct[size_t(j)]);
  } else {
    std::mt19937_64 rng(opts.seed);
    for (Index s = 0; s < opts.pair_budget; ++s) {
      const Index i = Index(rng() % uint64_t(n));
      const Index j = Index(rng() % uint64_t(n));
      if (i == j) continue;
      add_pair(correct[size_t(i)], correct[size_t(j)]);
    }
  }

  detail::smooth_histogram_2d(out.density, opts.sigma);
  const double total = out.density.sum();
  if (total > 0.0) out.density /= total;
  return out;
}

}  // namespace ran
