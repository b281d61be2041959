#pragma once

#include "ran/metrics.hpp"

#include <random>

namespace ran {

/// Deterministic uniform in [0, 1) from the top 53 bits of the engine output;
/// bit-stable across platforms, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

struct BlobSceneParams {
  Index grid_spacing = 4;  // jittered blob lattice; small enough to texture every patch
  double radius_min = 1.6;
  double radius_max = 3.0;
  double amplitude_min = 0.4;
  double amplitude_max = 1.0;
};

/// Densely textured test volume: one Gaussian bump per jittered lattice cell
/// with random radius and signed amplitude. Every 5^3 patch has variance.
template <typename Scalar = float>
VolumeT<Scalar> make_blob_volume(Dims dims, uint64_t seed, const BlobSceneParams& p = {}) {
  std::mt19937_64 rng(seed);
  struct Blob {
    Vec3d center;
    double inv2s2;
    double amp;
    double cutoff2;
  };
  std::vector<Blob> blobs;
  for (Index bz = 0; bz * p.grid_spacing < dims.t; ++bz)
    for (Index by = 0; by * p.grid_spacing < dims.h; ++by)
      for (Index bx = 0; bx * p.grid_spacing < dims.w; ++bx) {
        const double jitter = double(p.grid_spacing);
        Blob b;
        b.center = Vec3d(double(bz * p.grid_spacing) + jitter * uniform01(rng),
                         double(by * p.grid_spacing) + jitter * uniform01(rng),
                         double(bx * p.grid_spacing) + jitter * uniform01(rng));
        const double radius = p.radius_min + (p.radius_max - p.radius_min) * uniform01(rng);
        const double sigma = radius / 1.5;
        b.inv2s2 = 1.0 / (2.0 * sigma * sigma);
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        b.amp = sign * (p.amplitude_min + (p.amplitude_max - p.amplitude_min) * uniform01(rng));
        const double reach = 3.0 * sigma;
        b.cutoff2 = reach * reach;
        blobs.push_back(b);
      }

  VolumeT<Scalar> vol(dims, 1);
  parallel_for(0, dims.count(), [&](Index i) {
    const Vec3d pt(double(i / (dims.h * dims.w)), double((i / dims.w) % dims.h),
                   double(i % dims.w));
    double v = 0.0;
    for (const Blob& b : blobs) {
      const double r2 = (pt - b.center).squaredNorm();
      if (r2 < b.cutoff2) v += b.amp * std::exp(-r2 * b.inv2s2);
    }
    vol.data[i] = Scalar(v);
  });
  return vol;
}

/// Two compact bodies on a flat background. The target holds the bodies at
/// `center_a` / `center_b`; the source holds them displaced by the pulling
/// ground-truth motions, so phi[center_a] = motion_a registers source onto
/// target. Labels 1 and 2 mark the bodies in both frames.
template <typename Scalar = float>
struct TwoBodySceneT {
  VolumeT<Scalar> source;
  VolumeT<Scalar> target;
  LabelVolume source_labels;
  LabelVolume target_labels;
  Vec3d motion_a, motion_b;
  Vec3i center_a, center_b;
};

using TwoBodyScene = TwoBodySceneT<float>;

template <typename Scalar = float>
TwoBodySceneT<Scalar> make_two_body_scene(Dims dims, Vec3i center_a, Vec3i center_b, Vec3d motion_a,
                                          Vec3d motion_b, double body_radius,
                                          double amplitude_b = 0.7) {
  TwoBodySceneT<Scalar> scene;
  scene.center_a = center_a;
  scene.center_b = center_b;
  scene.motion_a = motion_a;
  scene.motion_b = motion_b;

  const double sigma = body_radius / 1.5;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  auto paint = [&](VolumeT<Scalar>& vol, LabelVolume& labels, const Vec3d& ca, const Vec3d& cb) {
    parallel_for(0, dims.count(), [&](Index i) {
      const Vec3d pt(double(i / (dims.h * dims.w)), double((i / dims.w) % dims.h),
                     double(i % dims.w));
      const double ra2 = (pt - ca).squaredNorm();
      const double rb2 = (pt - cb).squaredNorm();
      vol.data[i] = Scalar(std::exp(-ra2 * inv2s2) + amplitude_b * std::exp(-rb2 * inv2s2));
      if (ra2 <= body_radius * body_radius)
        labels.data[i] = 1;
      else if (rb2 <= body_radius * body_radius)
        labels.data[i] = 2;
    });
  };

  const Vec3d ta = center_a.cast<double>();
  const Vec3d tb = center_b.cast<double>();
  scene.target = VolumeT<Scalar>(dims, 1);
  scene.target_labels = LabelVolume(dims);
  paint(scene.target, scene.target_labels, ta, tb);

  scene.source = VolumeT<Scalar>(dims, 1);
  scene.source_labels = LabelVolume(dims);
  paint(scene.source, scene.source_labels, ta + motion_a, tb + motion_b);
  return scene;
}

}  // namespace ran
