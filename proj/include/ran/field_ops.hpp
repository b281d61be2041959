#pragma once

#include "ran/volume.hpp"

#include <cmath>

namespace ran {

enum class Interp { Trilinear, Nearest };

// Boundary policy for every sampler in this module: clamp-to-edge.
inline double clamp_coord(double v, Index n) {
  const double hi = double(n - 1);
  return v < 0.0 ? 0.0 : (v > hi ? hi : v);
}

namespace detail {

struct TrilinearCell {
  Index z0, z1, y0, y1, x0, x1;
  double fz, fy, fx;
};

inline TrilinearCell trilinear_cell(const Dims& d, double z, double y, double x) {
  z = clamp_coord(z, d.t);
  y = clamp_coord(y, d.h);
  x = clamp_coord(x, d.w);
  TrilinearCell c;
  c.z0 = Index(z);  // coordinates are non-negative after clamping
  c.y0 = Index(y);
  c.x0 = Index(x);
  c.z1 = std::min(c.z0 + 1, d.t - 1);
  c.y1 = std::min(c.y0 + 1, d.h - 1);
  c.x1 = std::min(c.x0 + 1, d.w - 1);
  c.fz = z - double(c.z0);
  c.fy = y - double(c.y0);
  c.fx = x - double(c.x0);
  return c;
}

inline Index nearest_index(double v, Index n) {
  const double c = clamp_coord(v, n);
  Index i = Index(std::floor(c + 0.5));
  return std::min(i, n - 1);
}

}  // namespace detail

template <typename Scalar>
double sample_trilinear(const VolumeT<Scalar>& vol, double z, double y, double x, Index ch) {
  const auto c = detail::trilinear_cell(vol.dims, z, y, x);
  const Index nc = vol.channels;
  const Scalar* p = vol.data.data();
  auto v = [&](Index zz, Index yy, Index xx) {
    return double(p[vol.dims.offset(zz, yy, xx) * nc + ch]);
  };
  const double c00 = v(c.z0, c.y0, c.x0) * (1.0 - c.fx) + v(c.z0, c.y0, c.x1) * c.fx;
  const double c01 = v(c.z0, c.y1, c.x0) * (1.0 - c.fx) + v(c.z0, c.y1, c.x1) * c.fx;
  const double c10 = v(c.z1, c.y0, c.x0) * (1.0 - c.fx) + v(c.z1, c.y0, c.x1) * c.fx;
  const double c11 = v(c.z1, c.y1, c.x0) * (1.0 - c.fx) + v(c.z1, c.y1, c.x1) * c.fx;
  const double d0 = c00 * (1.0 - c.fy) + c01 * c.fy;
  const double d1 = c10 * (1.0 - c.fy) + c11 * c.fy;
  return d0 * (1.0 - c.fz) + d1 * c.fz;
}

template <typename Scalar>
Vec3d sample_field_trilinear(const DisplacementFieldT<Scalar>& f, double z, double y, double x) {
  const auto c = detail::trilinear_cell(f.dims, z, y, x);
  const Scalar* p = f.data.data();
  Vec3d out;
  for (int comp = 0; comp < 3; ++comp) {
    auto v = [&](Index zz, Index yy, Index xx) {
      return double(p[f.dims.offset(zz, yy, xx) * 3 + comp]);
    };
    const double c00 = v(c.z0, c.y0, c.x0) * (1.0 - c.fx) + v(c.z0, c.y0, c.x1) * c.fx;
    const double c01 = v(c.z0, c.y1, c.x0) * (1.0 - c.fx) + v(c.z0, c.y1, c.x1) * c.fx;
    const double c10 = v(c.z1, c.y0, c.x0) * (1.0 - c.fx) + v(c.z1, c.y0, c.x1) * c.fx;
    const double c11 = v(c.z1, c.y1, c.x0) * (1.0 - c.fx) + v(c.z1, c.y1, c.x1) * c.fx;
    const double d0 = c00 * (1.0 - c.fy) + c01 * c.fy;
    const double d1 = c10 * (1.0 - c.fy) + c11 * c.fy;
    out[comp] = d0 * (1.0 - c.fz) + d1 * c.fz;
  }
  return out;
}

/// output[x] = trilinear sample of vol at x + ddf[x], clamp-to-edge.
template <typename Scalar>
VolumeT<Scalar> warp(const VolumeT<Scalar>& vol, const DisplacementFieldT<Scalar>& ddf) {
  if (vol.dims != ddf.dims)
    throw std::invalid_argument("warp: volume and field dimensions differ");
  VolumeT<Scalar> out(vol.dims, vol.channels, Scalar(0), vol.spacing);
  const Dims d = vol.dims;
  const Index nc = vol.channels;
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    const Scalar* fp = ddf.data.data() + i * 3;
    const double sz = double(z) + double(fp[0]);
    const double sy = double(y) + double(fp[1]);
    const double sx = double(x) + double(fp[2]);
    for (Index ch = 0; ch < nc; ++ch)
      out.data[i * nc + ch] = Scalar(sample_trilinear(vol, sz, sy, sx, ch));
  });
  return out;
}

/// result[x] = inner[x] + trilinear-sample(outer, x + inner[x]), so that
/// warp(v, compose(a, b)) ~= warp(warp(v, a), b): a's (coarse) alignment is
/// applied first.
template <typename Scalar>
DisplacementFieldT<Scalar> compose(const DisplacementFieldT<Scalar>& outer,
                                   const DisplacementFieldT<Scalar>& inner) {
  if (outer.dims != inner.dims)
    throw std::invalid_argument("compose: field dimensions differ");
  DisplacementFieldT<Scalar> out(inner.dims);
  const Dims d = inner.dims;
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    const Scalar* ip = inner.data.data() + i * 3;
    const Vec3d o = sample_field_trilinear(outer, double(z) + double(ip[0]),
                                           double(y) + double(ip[1]),
                                           double(x) + double(ip[2]));
    out.data[i * 3 + 0] = Scalar(double(ip[0]) + o[0]);
    out.data[i * 3 + 1] = Scalar(double(ip[1]) + o[1]);
    out.data[i * 3 + 2] = Scalar(double(ip[2]) + o[2]);
  });
  return out;
}

namespace detail {

// Cell-center grid mapping: output index i samples input coordinate
// (i + 0.5) * (n_in / n_out) - 0.5. For integer ratios this reads block
// centers, so nearest-neighbor transport reproduces pooling cells exactly.
inline double resample_coord(Index i, Index n_in, Index n_out) {
  return (double(i) + 0.5) * (double(n_in) / double(n_out)) - 0.5;
}

}  // namespace detail

/// Trilinear (or nearest) resampling of each channel onto a new grid.
template <typename Scalar>
VolumeT<Scalar> resample_volume(const VolumeT<Scalar>& vol, Dims new_dims,
                                Interp mode = Interp::Trilinear) {
  require_positive(new_dims, "resample_volume");
  VolumeT<Scalar> out(new_dims, vol.channels, Scalar(0),
                      Vec3d(vol.spacing[0] * double(vol.dims.t) / double(new_dims.t),
                            vol.spacing[1] * double(vol.dims.h) / double(new_dims.h),
                            vol.spacing[2] * double(vol.dims.w) / double(new_dims.w)));
  const Index nc = vol.channels;
  parallel_for(0, new_dims.count(), [&](Index i) {
    const Index z = i / (new_dims.h * new_dims.w);
    const Index y = (i / new_dims.w) % new_dims.h;
    const Index x = i % new_dims.w;
    const double cz = detail::resample_coord(z, vol.dims.t, new_dims.t);
    const double cy = detail::resample_coord(y, vol.dims.h, new_dims.h);
    const double cx = detail::resample_coord(x, vol.dims.w, new_dims.w);
    if (mode == Interp::Nearest) {
      const Index iz = detail::nearest_index(cz, vol.dims.t);
      const Index iy = detail::nearest_index(cy, vol.dims.h);
      const Index ix = detail::nearest_index(cx, vol.dims.w);
      for (Index ch = 0; ch < nc; ++ch) out.data[i * nc + ch] = vol.at(iz, iy, ix, ch);
    } else {
      for (Index ch = 0; ch < nc; ++ch)
        out.data[i * nc + ch] = Scalar(sample_trilinear(vol, cz, cy, cx, ch));
    }
  });
  return out;
}

/// Resampling of a displacement field onto a new grid; each component is
/// additionally scaled by new_dim/old_dim along its own axis so the values
/// stay in voxel units of the destination grid.
template <typename Scalar>
DisplacementFieldT<Scalar> resample_field(const DisplacementFieldT<Scalar>& ddf, Dims new_dims,
                                          Interp mode = Interp::Trilinear) {
  require_positive(new_dims, "resample_field");
  if (ddf.dims == new_dims && mode == Interp::Trilinear) return ddf;
  DisplacementFieldT<Scalar> out(new_dims);
  const double scale[3] = {double(new_dims.t) / double(ddf.dims.t),
                           double(new_dims.h) / double(ddf.dims.h),
                           double(new_dims.w) / double(ddf.dims.w)};
  parallel_for(0, new_dims.count(), [&](Index i) {
    const Index z = i / (new_dims.h * new_dims.w);
    const Index y = (i / new_dims.w) % new_dims.h;
    const Index x = i % new_dims.w;
    const double cz = detail::resample_coord(z, ddf.dims.t, new_dims.t);
    const double cy = detail::resample_coord(y, ddf.dims.h, new_dims.h);
    const double cx = detail::resample_coord(x, ddf.dims.w, new_dims.w);
    Vec3d v;
    if (mode == Interp::Nearest) {
      const Index iz = detail::nearest_index(cz, ddf.dims.t);
      const Index iy = detail::nearest_index(cy, ddf.dims.h);
      const Index ix = detail::nearest_index(cx, ddf.dims.w);
      const Scalar* p = ddf.data.data() + ddf.dims.offset(iz, iy, ix) * 3;
      v = Vec3d(double(p[0]), double(p[1]), double(p[2]));
    } else {
      v = sample_field_trilinear(ddf, cz, cy, cx);
    }
    out.data[i * 3 + 0] = Scalar(v[0] * scale[0]);
    out.data[i * 3 + 1] = Scalar(v[1] * scale[1]);
    out.data[i * 3 + 2] = Scalar(v[2] * scale[2]);
  });
  return out;
}

namespace detail {

// Central difference in the interior, one-sided at the two boundary faces.
template <class Getter>
inline double axis_diff(const Getter& get, Index i, Index n) {
  if (i == 0) return get(1) - get(0);
  if (i == n - 1) return get(n - 1) - get(n - 2);
  return 0.5 * (get(i + 1) - get(i - 1));
}

}  // namespace detail

/// Per-channel spatial gradient, 3 output channels (d/dz, d/dy, d/dx) per
/// input channel, in intensity per voxel.
template <typename Scalar>
VolumeT<Scalar> gradient(const VolumeT<Scalar>& vol) {
  const Dims d = vol.dims;
  if (d.t < 2 || d.h < 2 || d.w < 2)
    throw std::invalid_argument("gradient: every dimension must be >= 2");
  VolumeT<Scalar> out(d, vol.channels * 3, Scalar(0), vol.spacing);
  const Index nc = vol.channels;
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    for (Index ch = 0; ch < nc; ++ch) {
      const double gz = detail::axis_diff([&](Index k) { return double(vol.at(k, y, x, ch)); }, z, d.t);
      const double gy = detail::axis_diff([&](Index k) { return double(vol.at(z, k, x, ch)); }, y, d.h);
      const double gx = detail::axis_diff([&](Index k) { return double(vol.at(z, y, k, ch)); }, x, d.w);
      out.data[(i * nc + ch) * 3 + 0] = Scalar(gz);
      out.data[(i * nc + ch) * 3 + 1] = Scalar(gy);
      out.data[(i * nc + ch) * 3 + 2] = Scalar(gx);
    }
  });
  return out;
}

/// Per-voxel determinant of (I + dphi/dx), 1 for the identity field.
template <typename Scalar>
VolumeT<Scalar> jacobian_det(const DisplacementFieldT<Scalar>& ddf) {
  const Dims d = ddf.dims;
  if (d.t < 2 || d.h < 2 || d.w < 2)
    throw std::invalid_argument("jacobian_det: every dimension must be >= 2");
  VolumeT<Scalar> out(d, 1);
  parallel_for(0, d.count(), [&](Index i) {
    const Index z = i / (d.h * d.w);
    const Index y = (i / d.w) % d.h;
    const Index x = i % d.w;
    double J[3][3];
    for (int comp = 0; comp < 3; ++comp) {
      J[comp][0] = detail::axis_diff([&](Index k) { return double(ddf.at(k, y, x, comp)); }, z, d.t);
      J[comp][1] = detail::axis_diff([&](Index k) { return double(ddf.at(z, k, x, comp)); }, y, d.h);
      J[comp][2] = detail::axis_diff([&](Index k) { return double(ddf.at(z, y, k, comp)); }, x, d.w);
      J[comp][comp] += 1.0;
    }
    out.data[i] = Scalar(J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                         J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                         J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]));
  });
  return out;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const Index r = std::max<Index>(1, Index(std::ceil(3.0 * sigma)));
  std::vector<double> k(size_t(2 * r + 1));
  double sum = 0.0;
  for (Index i = -r; i <= r; ++i) {
    const double w = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    k[size_t(i + r)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Separable Gaussian smoothing with replicated edges (passes in z, y, x
/// order). sigma <= 0 returns the input unchanged.
template <typename Scalar>
VolumeT<Scalar> gaussian_smooth(const VolumeT<Scalar>& vol, double sigma) {
  if (sigma <= 0.0) return vol;
  const std::vector<double> kernel = gaussian_kernel(sigma);
  const Index r = Index(kernel.size() / 2);
  const Dims d = vol.dims;
  const Index nc = vol.channels;

  VolumeT<Scalar> a = vol;
  VolumeT<Scalar> b(d, nc, Scalar(0), vol.spacing);
  for (int axis = 0; axis < 3; ++axis) {
    const Index n = d[axis];
    parallel_for(0, d.count(), [&](Index i) {
      const Index z = i / (d.h * d.w);
      const Index y = (i / d.w) % d.h;
      const Index x = i % d.w;
      const Index pos = axis == 0 ? z : (axis == 1 ? y : x);
      for (Index ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (Index j = -r; j <= r; ++j) {
          Index k = pos + j;
          k = k < 0 ? 0 : (k >= n ? n - 1 : k);
          const double w = kernel[size_t(j + r)];
          const double s = axis == 0   ? double(a.at(k, y, x, ch))
                           : axis == 1 ? double(a.at(z, k, x, ch))
                                       : double(a.at(z, y, k, ch));
          acc += w * s;
        }
        b.data[i * nc + ch] = Scalar(acc);
      }
    });
    std::swap(a, b);
  }
  return a;
}

}  // namespace ran
