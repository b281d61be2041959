#pragma once

#include "ran/accumulator.hpp"
#include "ran/synthetic.hpp"

namespace ran {

enum class Similarity { Ncc, Mse };

struct RegistrationParams {
  Similarity similarity = Similarity::Ncc;
  double lambda = 0.1;
  Index patch_radius = 2;
  AccumulatorParams accumulator;
  // Theory mode exposes the lattice bottleneck cleanly: no residual
  // smoothing, nearest-neighbor field transport between grids.
  bool theory_mode = false;
};

template <typename Scalar>
struct RegistrationResultT {
  struct Level {
    DisplacementFieldT<Scalar> residual;
    AttributeFieldT<Scalar> attributes;
    double objective = 0.0;
  };

  DisplacementFieldT<Scalar> final_ddf;
  std::vector<Level> per_level;
  std::vector<double> objective_trace;
  bool objective_increased = false;
  bool coverage_warning = false;
};

using RegistrationResult = RegistrationResultT<float>;

/// Similarity plus edge-weighted smoothness:
///   D(tgt, warp(src, ddf)) + lambda * mean(|grad phi|^2 * exp(-|grad tgt|^2))
/// with D either (1 - global NCC) or the mean squared error.
template <typename Scalar>
double objective(const VolumeT<Scalar>& src, const VolumeT<Scalar>& tgt,
                 const DisplacementFieldT<Scalar>& ddf, double lambda, Similarity similarity) {
  if (src.dims != tgt.dims || src.dims != ddf.dims || src.channels != tgt.channels)
    throw std::invalid_argument("objective: inputs must share dims and channels");
  if (lambda < 0.0) throw std::invalid_argument("objective: lambda must be >= 0");

  const VolumeT<Scalar> warped = warp(src, ddf);
  const Index n = warped.data.size();

  double data_term = 0.0;
  if (similarity == Similarity::Mse) {
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double e = double(tgt.data[i]) - double(warped.data[i]);
      sum += e * e;
    }
    data_term = sum / double(n);
  } else {
    double sa = 0.0, sb = 0.0;
    for (Index i = 0; i < n; ++i) {
      sa += double(warped.data[i]);
      sb += double(tgt.data[i]);
    }
    const double ma = sa / double(n), mb = sb / double(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double a = double(warped.data[i]) - ma;
      const double b = double(tgt.data[i]) - mb;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
    }
    const double ncc = (saa < 1e-12 || sbb < 1e-12) ? 0.0 : sab / std::sqrt(saa * sbb);
    data_term = 1.0 - ncc;
  }

  double reg = 0.0;
  if (lambda > 0.0) {
    const VolumeT<Scalar> gt = gradient(tgt);
    const VolumeT<Scalar> gphi = gradient(as_volume(ddf));  // 9 entries per voxel
    const Index nvox = ddf.dims.count();
    const Index gtc = gt.channels;
    double sum = 0.0;
    for (Index i = 0; i < nvox; ++i) {
      double g2 = 0.0;
      for (Index c = 0; c < gtc; ++c) {
        const double g = double(gt.data[i * gtc + c]);
        g2 += g * g;
      }
      const double wgt = std::exp(-g2);
      double p2 = 0.0;
      for (Index c = 0; c < 9; ++c) {
        const double g = double(gphi.data[i * 9 + c]);
        p2 += g * g;
      }
      sum += wgt * p2;
    }
    reg = sum / double(9 * nvox);
  }
  return data_term + lambda * reg;
}

namespace detail {

template <typename Scalar>
AttributeFieldT<Scalar> resample_attributes(const AttributeFieldT<Scalar>& attr, Dims new_dims,
                                            Interp mode) {
  VolumeT<Scalar> v(attr.dims, attr.heads);
  v.data = attr.data;
  const VolumeT<Scalar> r = resample_volume(v, new_dims, mode);
  AttributeFieldT<Scalar> out(new_dims, attr.heads);
  out.data = r.data;
  return out;
}

inline SearchParams level_search(const LevelConfig& level, Index patch_radius) {
  SearchParams sp;
  sp.patch_radius = patch_radius;
  if (level.dilation.empty()) {
    sp.radius = 0;
    sp.stride = 1;
  } else {
    sp.radius = dilation_l1(level);
    sp.stride = *std::min_element(level.dilation.begin(), level.dilation.end());
  }
  sp.patch_spacing = sp.stride;  // match on the level's own dilated lattice
  return sp;
}

}  // namespace detail

/// Coarse-to-fine registration: per level, warp the source features by the
/// running field, block-match the residual on the level's dilated lattice,
/// and fuse with the confidence-weighted accumulator. Deterministic given
/// the inputs.
template <typename Scalar>
RegistrationResultT<Scalar> register_volumes(const VolumeT<Scalar>& src, const VolumeT<Scalar>& tgt,
                                             const ArchitectureConfig& cfg,
                                             const RegistrationParams& params = {}) {
  if (src.dims != tgt.dims || src.channels != tgt.channels)
    throw std::invalid_argument("register_volumes: source and target must share dims and channels");
  if (!src.data.allFinite() || !tgt.data.allFinite())
    throw invalid_data_error("register_volumes: non-finite input data");
  cfg.validate();

  RegistrationResultT<Scalar> result;
  result.coverage_warning = !covers_whole_image(cfg, src.dims);

  const auto src_levels = build_feature_levels(src, cfg);
  const auto tgt_levels = build_feature_levels(tgt, cfg);

  const Interp mode = params.theory_mode ? Interp::Nearest : Interp::Trilinear;
  AccumulatorParams acc = params.accumulator;
  if (params.theory_mode) {
    acc.sigma = 0.0;
    acc.additive_fusion = true;
  }

  DisplacementFieldT<Scalar> phi = identity_field<Scalar>(src_levels[0].volume.dims);
  AttributeFieldT<Scalar> theta(src_levels[0].volume.dims, cfg.heads);

  for (size_t k = 0; k < cfg.levels.size(); ++k) {
    const Dims wd = src_levels[k].volume.dims;
    if (phi.dims != wd) {
      phi = resample_field(phi, wd, mode);
      theta = detail::resample_attributes(theta, wd, mode);
    }

    FeatureLevelT<Scalar> warped_level{warp(src_levels[k].volume, phi), Index(k + 1),
                                       cfg.levels[k].pool_size};
    const SearchParams sp = detail::level_search(cfg.levels[k], params.patch_radius);
    const auto proposal = regress_residual(warped_level, tgt_levels[k], cfg.heads, sp);

    auto fused = accumulate(phi, theta, proposal, acc);
    phi = std::move(fused.ddf);
    theta = std::move(fused.attributes);

    const auto phi_full = resample_field(phi, src.dims, mode);
    const double obj = objective(src, tgt, phi_full, params.lambda, params.similarity);
    result.objective_trace.push_back(obj);
    result.per_level.push_back({std::move(fused.residual), theta, obj});
  }

  result.final_ddf = resample_field(phi, src.dims, mode);
  for (size_t i = 1; i < result.objective_trace.size(); ++i)
    if (result.objective_trace[i] > result.objective_trace[i - 1] + 1e-6)
      result.objective_increased = true;
  return result;
}

/// Seeded synthetic deformation: a rigid motion about the volume center plus
/// trilinearly upsampled random control-grid offsets.
struct SyntheticDeformation {
  Vec3d rotation{0.0, 0.0, 0.0};     // radians about the (z, y, x) axes
  Vec3d translation{0.0, 0.0, 0.0};  // voxels (dz, dy, dx)
  double deform_amplitude = 0.0;     // voxels, per component
  Index deform_scale = 8;            // control-grid spacing in voxels, >= 2
  uint64_t seed = 0;
};

inline Eigen::Matrix3d rotation_matrix_zyx(const Vec3d& angles) {
  // component order (z, y, x); "about z" mixes the (y, x) plane, etc.
  Eigen::Matrix3d rz = Eigen::Matrix3d::Identity();
  rz(1, 1) = std::cos(angles[0]);
  rz(1, 2) = -std::sin(angles[0]);
  rz(2, 1) = std::sin(angles[0]);
  rz(2, 2) = std::cos(angles[0]);
  Eigen::Matrix3d ry = Eigen::Matrix3d::Identity();
  ry(0, 0) = std::cos(angles[1]);
  ry(0, 2) = -std::sin(angles[1]);
  ry(2, 0) = std::sin(angles[1]);
  ry(2, 2) = std::cos(angles[1]);
  Eigen::Matrix3d rx = Eigen::Matrix3d::Identity();
  rx(0, 0) = std::cos(angles[2]);
  rx(0, 1) = -std::sin(angles[2]);
  rx(1, 0) = std::sin(angles[2]);
  rx(1, 1) = std::cos(angles[2]);
  return rz * ry * rx;
}

template <typename Scalar = float>
DisplacementFieldT<Scalar> synth_ddf(Dims dims, const SyntheticDeformation& sd) {
  require_positive(dims, "synth_ddf");
  if (sd.deform_amplitude < 0.0)
    throw std::invalid_argument("synth_ddf: amplitude must be >= 0");
  if (sd.deform_scale < 2) throw std::invalid_argument("synth_ddf: scale must be >= 2");

  const Eigen::Matrix3d rot = rotation_matrix_zyx(sd.rotation);
  const Vec3d center(double(dims.t - 1) / 2.0, double(dims.h - 1) / 2.0,
                     double(dims.w - 1) / 2.0);

  // control grid covering [0, N-1] with spacing `deform_scale`
  const Dims cd{(dims.t - 1) / sd.deform_scale + 2, (dims.h - 1) / sd.deform_scale + 2,
                (dims.w - 1) / sd.deform_scale + 2};
  std::vector<double> ctrl(size_t(cd.count() * 3), 0.0);
  if (sd.deform_amplitude > 0.0) {
    std::mt19937_64 rng(sd.seed);
    for (double& c : ctrl) c = sd.deform_amplitude * (2.0 * uniform01(rng) - 1.0);
  }
  auto ctrl_at = [&](Index z, Index y, Index x, int comp) {
    return ctrl[size_t(cd.offset(z, y, x) * 3 + comp)];
  };

  DisplacementFieldT<Scalar> out(dims);
  parallel_for(0, dims.count(), [&](Index i) {
    const Vec3d p(double(i / (dims.h * dims.w)), double((i / dims.w) % dims.h),
                  double(i % dims.w));
    const Vec3d rigid = rot * (p - center) + center + sd.translation - p;

    Vec3d deform(0.0, 0.0, 0.0);
    if (sd.deform_amplitude > 0.0) {
      const Vec3d g = p / double(sd.deform_scale);
      const Index z0 = std::min<Index>(Index(g[0]), cd.t - 2);
      const Index y0 = std::min<Index>(Index(g[1]), cd.h - 2);
      const Index x0 = std::min<Index>(Index(g[2]), cd.w - 2);
      const double fz = g[0] - double(z0), fy = g[1] - double(y0), fx = g[2] - double(x0);
      for (int c = 0; c < 3; ++c) {
        const double c00 = ctrl_at(z0, y0, x0, c) * (1 - fx) + ctrl_at(z0, y0, x0 + 1, c) * fx;
        const double c01 = ctrl_at(z0, y0 + 1, x0, c) * (1 - fx) + ctrl_at(z0, y0 + 1, x0 + 1, c) * fx;
        const double c10 = ctrl_at(z0 + 1, y0, x0, c) * (1 - fx) + ctrl_at(z0 + 1, y0, x0 + 1, c) * fx;
        const double c11 =
            ctrl_at(z0 + 1, y0 + 1, x0, c) * (1 - fx) + ctrl_at(z0 + 1, y0 + 1, x0 + 1, c) * fx;
        deform[c] = (c00 * (1 - fy) + c01 * fy) * (1 - fz) + (c10 * (1 - fy) + c11 * fy) * fz;
      }
    }
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = Scalar(rigid[c] + deform[c]);
  });
  return out;
}

struct SeparabilityOptions {
  Dims dims{32, 32, 32};
  Index trial_budget = 60;        // registration runs, spread over (p, g) probes
  uint64_t seed = 1;
  std::vector<Index> distances;   // empty: derived from the profile breakpoints
  double body_radius = 2.0;
};

struct SeparabilityMeasurement {
  std::vector<double> distances;
  std::vector<double> measured;  // running max over ascending distance
  std::vector<double> bound;     // closed-form profile at each distance
};

/// Empirical counterpart of the separability profile: controlled two-body
/// scenes at L-inf distance p, opposed motions of growing magnitude along a
/// perpendicular axis, in theory mode. Reports the largest recovered motion
/// difference per distance (running max, so the table is monotone).
template <typename Scalar = float>
SeparabilityMeasurement measured_separability(const ArchitectureConfig& cfg,
                                              const RegistrationParams& base_params,
                                              const SeparabilityOptions& opts = {}) {
  cfg.validate();
  const Dims dims = opts.dims;
  if (dims.t > 48 || dims.h > 48 || dims.w > 48)
    throw std::invalid_argument("measured_separability: dims capped at 48^3");

  const SeparabilityProfile profile = separability_profile(cfg);
  std::vector<Index> distances = opts.distances;
  if (distances.empty()) {
    // probe around every breakpoint plus a few fillers
    for (const double b : profile.breakpoints) {
      for (const Index delta : {Index(-1), Index(0), Index(1)}) {
        const Index p = Index(b) + delta;
        if (p >= 1 && p < dims.w / 2) distances.push_back(p);
      }
    }
    for (const Index p : {Index(2), Index(6), Index(10)})
      if (p < dims.w / 2) distances.push_back(p);
    std::sort(distances.begin(), distances.end());
    distances.erase(std::unique(distances.begin(), distances.end()), distances.end());
  }

  RegistrationParams params = base_params;
  params.theory_mode = true;

  const Index p1 = cfg.levels.front().pool_size;
  double max_reach = 0.0;
  for (const auto& lvl : cfg.levels)
    max_reach += double(lvl.pool_size * dilation_l1(lvl));

  const Index runs_per_distance = std::max<Index>(1, opts.trial_budget / Index(distances.size()));

  SeparabilityMeasurement table;
  double running_max = 0.0;
  std::mt19937_64 rng(opts.seed);
  for (const Index p : distances) {
    double measured = 0.0;
    for (Index run = 0; run < runs_per_distance; ++run) {
      // bottleneck alignment: base position snapped to the coarsest pool grid
      const Index zc = (dims.t / 2 / p1) * p1;
      const Index yc = (dims.h / 2 / p1) * p1;
      const Index xbase = (Index(uniform01(rng) * double(dims.w / 4)) + dims.w / 4) / p1 * p1;

      // opposed motions along y keep the body separation fixed at p
      const double bound_here = profile.value_at(double(p));
      const double gmax = std::min(max_reach, bound_here / 2.0 + 2.0);
      const double g = runs_per_distance > 1
                           ? 1.0 + (gmax - 1.0) * double(run) / double(runs_per_distance - 1)
                           : gmax;
      if (g < 0.5) continue;

      const Vec3i ca(zc, yc, xbase);
      const Vec3i cb(zc, yc, xbase + p);
      const auto scene = make_two_body_scene<Scalar>(dims, ca, cb, Vec3d(0, g, 0), Vec3d(0, -g, 0),
                                                     opts.body_radius);
      const auto res = register_volumes(scene.source, scene.target, cfg, params);

      const Index ia = dims.offset(ca[0], ca[1], ca[2]);
      const Index ib = dims.offset(cb[0], cb[1], cb[2]);
      double diff = 0.0;
      for (int c = 0; c < 3; ++c)
        diff = std::max(diff, std::abs(double(res.final_ddf.data[ia * 3 + c]) -
                                       double(res.final_ddf.data[ib * 3 + c])));
      measured = std::max(measured, diff);
    }
    running_max = std::max(running_max, measured);
    table.distances.push_back(double(p));
    table.measured.push_back(running_max);
    table.bound.push_back(profile.value_at(double(p)));
  }
  return table;
}

}  // namespace ran
