#pragma once

#include "ran/core.hpp"

namespace ran {

/// Scalar 3-D raster with physical spacing. Samples are stored voxel-major
/// (z slowest, x fastest) with the channel index fastest within a voxel.
template <typename Scalar>
struct VolumeT {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Dims dims;
  Vec3d spacing{1.0, 1.0, 1.0};  // (sz, sy, sx) mm per voxel
  Index channels = 1;
  Array data;

  VolumeT() = default;

  VolumeT(Dims d, Index c, Scalar fill = Scalar(0), Vec3d sp = Vec3d(1.0, 1.0, 1.0))
      : dims(d), spacing(std::move(sp)), channels(c) {
    require_positive(d, "Volume");
    if (c < 1) throw std::invalid_argument("Volume: channels must be >= 1");
    if (!(spacing.array() > 0.0).all())
      throw std::invalid_argument("Volume: spacing must be strictly positive");
    data = Array::Constant(d.count() * c, fill);
  }

  explicit VolumeT(Dims d) : VolumeT(d, 1) {}

  Index voxels() const { return dims.count(); }

  Scalar& at(Index z, Index y, Index x, Index c = 0) {
    return data[dims.offset(z, y, x) * channels + c];
  }
  Scalar at(Index z, Index y, Index x, Index c = 0) const {
    return data[dims.offset(z, y, x) * channels + c];
  }
};

/// Per-voxel displacement vectors (dz, dy, dx) in voxel units, voxel-major
/// interleaved. Displacements are grid-native: spacing never enters the
/// field algebra, only metric computation.
template <typename Scalar>
struct DisplacementFieldT {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Dims dims;
  Array data;  // 3 components per voxel

  DisplacementFieldT() = default;

  explicit DisplacementFieldT(Dims d, Scalar fill = Scalar(0)) : dims(d) {
    require_positive(d, "DisplacementField");
    data = Array::Constant(d.count() * 3, fill);
  }

  Index voxels() const { return dims.count(); }

  Scalar& at(Index z, Index y, Index x, int comp) {
    return data[dims.offset(z, y, x) * 3 + comp];
  }
  Scalar at(Index z, Index y, Index x, int comp) const {
    return data[dims.offset(z, y, x) * 3 + comp];
  }
};

using Volume = VolumeT<float>;
using DisplacementField = DisplacementFieldT<float>;

/// The zero (identity-transform) field.
template <typename Scalar = float>
DisplacementFieldT<Scalar> identity_field(Dims dims) {
  return DisplacementFieldT<Scalar>(dims);
}

template <typename Scalar>
VolumeT<Scalar> as_volume(const DisplacementFieldT<Scalar>& f) {
  VolumeT<Scalar> v(f.dims, 3);
  v.data = f.data;
  return v;
}

template <typename Scalar>
DisplacementFieldT<Scalar> field_from_volume(const VolumeT<Scalar>& v) {
  if (v.channels != 3) throw std::invalid_argument("field_from_volume: expected 3 channels");
  DisplacementFieldT<Scalar> f(v.dims);
  f.data = v.data;
  return f;
}

}  // namespace ran
