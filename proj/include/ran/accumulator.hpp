#pragma once

#include "ran/field_ops.hpp"
#include "ran/regressor.hpp"

namespace ran {

/// Per-voxel vector of m accumulated attribute scalars (match quality),
/// voxel-major with the head index fastest.
template <typename Scalar>
struct AttributeFieldT {
  Dims dims;
  Index heads = 1;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data;

  AttributeFieldT() = default;

  AttributeFieldT(Dims d, Index m, Scalar fill = Scalar(0)) : dims(d), heads(m) {
    require_positive(d, "AttributeField");
    if (m < 1) throw std::invalid_argument("AttributeField: heads must be >= 1");
    data = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Constant(d.count() * m, fill);
  }

  Scalar at(Index voxel, Index head) const { return data[voxel * heads + head]; }
  Scalar& at(Index voxel, Index head) { return data[voxel * heads + head]; }
};

using AttributeField = AttributeFieldT<float>;

template <typename Scalar>
AttributeFieldT<Scalar> attributes_of(const MultiHeadProposalT<Scalar>& proposal) {
  AttributeFieldT<Scalar> a(proposal.dims, proposal.heads);
  a.data = proposal.scores;
  return a;
}

struct AccumulatorParams {
  double mu = 0.5;          // logistic midpoint for NCC-like scores in [-1, 1]
  double tau = 0.1;         // logistic sharpness
  double temperature = 0.1; // softmax temperature of the multi-head masks
  double sigma = 1.0;       // normalized-convolution smoothing, voxels
  double decay = 0.9;       // coarse attribute decay per level
  // Theory mode fuses by grid-aligned addition instead of composition, so
  // pairwise field differences follow the per-level cell arithmetic exactly.
  bool additive_fusion = false;
};

/// Logistic map of the per-voxel best attribute: w = 1/(1+exp(-(s-mu)/tau)),
/// monotone in the score, values in (0, 1).
template <typename Scalar>
VolumeT<Scalar> confidence_weights(const AttributeFieldT<Scalar>& attr, double mu = 0.5,
                                   double tau = 0.1) {
  if (tau <= 0.0) throw std::invalid_argument("confidence_weights: tau must be positive");
  VolumeT<Scalar> w(attr.dims, 1);
  const Index m = attr.heads;
  parallel_for(0, attr.dims.count(), [&](Index i) {
    double best = double(attr.data[i * m]);
    for (Index h = 1; h < m; ++h) best = std::max(best, double(attr.data[i * m + h]));
    w.data[i] = Scalar(1.0 / (1.0 + std::exp(-(best - mu) / tau)));
  });
  return w;
}

/// Per-voxel softmax over the m attribute entries; weights sum to 1.
template <typename Scalar>
AttributeFieldT<Scalar> multi_head_masks(const AttributeFieldT<Scalar>& attr,
                                         double temperature = 0.1) {
  if (temperature <= 0.0)
    throw std::invalid_argument("multi_head_masks: temperature must be positive");
  AttributeFieldT<Scalar> mask(attr.dims, attr.heads);
  const Index m = attr.heads;
  parallel_for(0, attr.dims.count(), [&](Index i) {
    double best = double(attr.data[i * m]);
    for (Index h = 1; h < m; ++h) best = std::max(best, double(attr.data[i * m + h]));
    double sum = 0.0;
    for (Index h = 0; h < m; ++h) {
      const double e = std::exp((double(attr.data[i * m + h]) - best) / temperature);
      mask.data[i * m + h] = Scalar(e);
      sum += e;
    }
    for (Index h = 0; h < m; ++h) mask.data[i * m + h] = Scalar(double(mask.data[i * m + h]) / sum);
  });
  return mask;
}

/// Normalized convolution: Gaussian smoothing of (field * weights) divided by
/// the smoothed weights; voxels whose local weight mass vanishes fall back to
/// the unweighted smoothing of the field.
template <typename Scalar>
DisplacementFieldT<Scalar> interpolate_weighted(const DisplacementFieldT<Scalar>& field,
                                                const VolumeT<Scalar>& weights,
                                                double sigma = 1.0) {
  if (field.dims != weights.dims || weights.channels != 1)
    throw std::invalid_argument("interpolate_weighted: weight volume must match field dims");
  if ((weights.data < Scalar(0)).any())
    throw std::invalid_argument("interpolate_weighted: weights must be non-negative");

  VolumeT<Scalar> fw(field.dims, 3);
  parallel_for(0, field.dims.count(), [&](Index i) {
    const double w = double(weights.data[i]);
    fw.data[i * 3 + 0] = Scalar(double(field.data[i * 3 + 0]) * w);
    fw.data[i * 3 + 1] = Scalar(double(field.data[i * 3 + 1]) * w);
    fw.data[i * 3 + 2] = Scalar(double(field.data[i * 3 + 2]) * w);
  });

  const VolumeT<Scalar> sm_fw = gaussian_smooth(fw, sigma);
  const VolumeT<Scalar> sm_w = gaussian_smooth(weights, sigma);
  const VolumeT<Scalar> sm_f = gaussian_smooth(as_volume(field), sigma);

  constexpr double kEps = 1e-8;
  DisplacementFieldT<Scalar> out(field.dims);
  parallel_for(0, field.dims.count(), [&](Index i) {
    const double w = double(sm_w.data[i]);
    for (int c = 0; c < 3; ++c)
      out.data[i * 3 + c] = w > kEps ? Scalar(double(sm_fw.data[i * 3 + c]) / w)
                                     : sm_f.data[i * 3 + c];
  });
  return out;
}

template <typename Scalar>
struct AccumulateResultT {
  DisplacementFieldT<Scalar> ddf;       // fused coarse-then-residual field
  AttributeFieldT<Scalar> attributes;   // max(incoming, decay * previous)
  DisplacementFieldT<Scalar> residual;  // confidence-interpolated residual
};

using AccumulateResult = AccumulateResultT<float>;

/// Deterministic fusion of the previous coarse field with the multi-head
/// residual proposal:
///   1. per-voxel mask-weighted sum of the head residuals,
///   2. confidence-weighted interpolation of that residual,
///   3. confidence-weighted interpolation of the previous field,
///   4. composition (coarse alignment first),
///   5. per-head attribute fusion by max against the decayed previous value.
template <typename Scalar>
AccumulateResultT<Scalar> accumulate(const DisplacementFieldT<Scalar>& prev_ddf,
                                     const AttributeFieldT<Scalar>& prev_attr,
                                     const MultiHeadProposalT<Scalar>& proposal,
                                     const AccumulatorParams& params = {}) {
  if (prev_ddf.dims != proposal.dims || prev_attr.dims != proposal.dims)
    throw std::invalid_argument("accumulate: all inputs must live on the level's working grid");

  const Index m = proposal.heads;
  const AttributeFieldT<Scalar> incoming = attributes_of(proposal);
  const AttributeFieldT<Scalar> masks = multi_head_masks(incoming, params.temperature);

  DisplacementFieldT<Scalar> fused(proposal.dims);
  parallel_for(0, proposal.dims.count(), [&](Index i) {
    double v[3] = {0.0, 0.0, 0.0};
    for (Index h = 0; h < m; ++h) {
      const double w = double(masks.data[i * m + h]);
      for (int c = 0; c < 3; ++c) v[c] += w * double(proposal.residuals[(i * m + h) * 3 + c]);
    }
    for (int c = 0; c < 3; ++c) fused.data[i * 3 + c] = Scalar(v[c]);
  });

  const DisplacementFieldT<Scalar> phi_res =
      interpolate_weighted(fused, confidence_weights(incoming, params.mu, params.tau), params.sigma);
  const DisplacementFieldT<Scalar> phi_prev =
      interpolate_weighted(prev_ddf, confidence_weights(prev_attr, params.mu, params.tau),
                           params.sigma);

  AccumulateResultT<Scalar> out;
  if (params.additive_fusion) {
    out.ddf = DisplacementFieldT<Scalar>(proposal.dims);
    out.ddf.data = phi_prev.data + phi_res.data;
  } else {
    out.ddf = compose(phi_prev, phi_res);
  }
  out.residual = phi_res;

  out.attributes = AttributeFieldT<Scalar>(proposal.dims, prev_attr.heads);
  const Index mp = prev_attr.heads;
  parallel_for(0, proposal.dims.count(), [&](Index i) {
    for (Index h = 0; h < mp; ++h) {
      const double decayed = params.decay * double(prev_attr.data[i * mp + h]);
      const double fresh = h < m ? double(proposal.scores[i * m + h]) : decayed;
      out.attributes.data[i * mp + h] = Scalar(std::max(fresh, decayed));
    }
  });
  return out;
}

}  // namespace ran
