#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ran/metrics.hpp"
#include "ran/synthetic.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace ran;

namespace {

LabelVolume cube_mask(Dims d, Vec3i lo, Vec3i hi, int32_t label = 1) {
  LabelVolume v(d);
  for (Index z = lo[0]; z < hi[0]; ++z)
    for (Index y = lo[1]; y < hi[1]; ++y)
      for (Index x = lo[2]; x < hi[2]; ++x) v.at(z, y, x) = label;
  return v;
}

LabelVolume random_mask(Dims d, uint64_t seed, double fill = 0.2) {
  std::mt19937_64 rng(seed);
  LabelVolume v(d);
  for (Index i = 0; i < d.count(); ++i)
    if (uniform01(rng) < fill) v.data[i] = 1;
  v.data[d.offset(d.t / 2, d.h / 2, d.w / 2)] = 1;  // never empty
  return v;
}

// independent set-arithmetic dice
double dice_oracle(const LabelVolume& a, const LabelVolume& b, int32_t label) {
  std::set<Index> sa, sb;
  for (Index i = 0; i < a.data.size(); ++i) {
    if (a.data[i] == label) sa.insert(i);
    if (b.data[i] == label) sb.insert(i);
  }
  if (sa.empty() && sb.empty()) return 1.0;
  Index inter = 0;
  for (const Index i : sa) inter += sb.count(i);
  return 2.0 * double(inter) / double(sa.size() + sb.size());
}

}  // namespace

TEST_CASE("dice: identical, disjoint, half-overlap") {
  const Dims d{8, 8, 8};
  const auto a = cube_mask(d, {1, 1, 1}, {3, 3, 3});
  CHECK(dice(a, a, 1) == 1.0);

  const auto b = cube_mask(d, {5, 5, 5}, {7, 7, 7});
  CHECK(dice(a, b, 1) == 0.0);

  // 2x2x2 cube against itself shifted by one voxel in x: 4 shared voxels
  const auto c = cube_mask(d, {1, 1, 2}, {3, 3, 4});
  CHECK(dice(a, c, 1) == 0.5);

  const LabelVolume empty(d);
  CHECK(dice(empty, empty, 1) == 1.0);
  CHECK(dice(a, empty, 1) == 0.0);
  CHECK_THROWS_AS(dice(a, LabelVolume(Dims{8, 8, 4}), 1), std::invalid_argument);
}

TEST_CASE("dice is symmetric and within [0,1] on random masks") {
  const Dims d{10, 10, 10};
  for (uint64_t s = 0; s < 8; ++s) {
    const auto a = random_mask(d, 100 + s);
    const auto b = random_mask(d, 200 + s);
    const double ab = dice(a, b, 1);
    CHECK(ab == dice(b, a, 1));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab == doctest::Approx(dice_oracle(a, b, 1)).epsilon(1e-12));
  }
}

TEST_CASE("surface distances: identical and point-pair cases") {
  const Dims d{9, 9, 9};
  const auto a = cube_mask(d, {2, 2, 2}, {6, 6, 6});
  const auto same = surface_distances(a, a, 1, Vec3d(1, 1, 1));
  CHECK(same.hausdorff_mm == 0.0);
  CHECK(same.average_mm == 0.0);

  LabelVolume p1(d), p2(d);
  p1.at(4, 4, 2) = 1;
  p2.at(4, 4, 5) = 1;
  const auto pp = surface_distances(p1, p2, 1, Vec3d(1, 1, 1));
  CHECK(pp.hausdorff_mm == 3.0);
  CHECK(pp.average_mm == 3.0);

  CHECK_THROWS_AS(surface_distances(p1, LabelVolume(d), 1, Vec3d(1, 1, 1)),
                  undefined_metric_error);
}

TEST_CASE("hausdorff dominates asd and both respect spacing") {
  const Dims d{9, 9, 9};
  LabelVolume p1(d), p2(d);
  p1.at(4, 4, 2) = 1;
  p2.at(4, 2, 2) = 1;
  const auto st = surface_distances(p1, p2, 1, Vec3d(1, 2.5, 1));
  CHECK(st.hausdorff_mm == doctest::Approx(5.0).epsilon(1e-12));  // 2 voxels * 2.5 mm
  CHECK(st.hausdorff_mm >= st.average_mm);
  CHECK(st.average_mm >= 0.0);
}

TEST_CASE("exact transform equals brute force on random masks") {
  const Dims d{12, 12, 12};
  for (uint64_t s = 0; s < 20; ++s) {
    const auto a = random_mask(d, 300 + s, 0.15);
    const auto b = random_mask(d, 400 + s, 0.15);
    const auto fast = surface_distances(a, b, 1, Vec3d(1, 1, 1), DistanceMethod::ExactTransform);
    const auto slow = surface_distances(a, b, 1, Vec3d(1, 1, 1), DistanceMethod::BruteForce);
    CHECK(fast.hausdorff_mm == slow.hausdorff_mm);
    CHECK(fast.average_mm == slow.average_mm);
  }
}

TEST_CASE("neg_jacobian_count: identity, folding, empty mask") {
  const Dims d{8, 8, 8};
  LabelVolume tissue(d);
  tissue.data.setConstant(1);

  CHECK(neg_jacobian_count(identity_field(d), tissue) == 0);

  DisplacementField folding(d);
  for (Index z = 0; z < d.t; ++z)
    for (Index y = 0; y < d.h; ++y)
      for (Index x = 0; x < d.w; ++x) folding.at(z, y, x, 2) = -2.0f * float(x);
  const Index count = neg_jacobian_count(folding, tissue);

  // brute-force scan oracle over interior voxels
  const auto jd = jacobian_det(folding);
  Index oracle = 0;
  for (Index z = 1; z < d.t - 1; ++z)
    for (Index y = 1; y < d.h - 1; ++y)
      for (Index x = 1; x < d.w - 1; ++x)
        if (jd.at(z, y, x) < 0.0f) ++oracle;
  CHECK(count == oracle);
  CHECK(count == 6 * 6 * 6);

  CHECK(neg_jacobian_count(folding, LabelVolume(d)) == 0);
  CHECK_THROWS_AS(neg_jacobian_count(folding, LabelVolume(Dims{8, 8, 4})),
                  std::invalid_argument);
}

TEST_CASE("warp_labels_nearest keeps the label set") {
  const Dims d{8, 8, 8};
  const auto labels = cube_mask(d, {2, 2, 2}, {5, 5, 5}, 7);
  DisplacementField f(d);
  for (Index i = 0; i < d.count(); ++i) f.data[i * 3 + 2] = 0.6f;
  const auto w = warp_labels_nearest(labels, f);
  for (Index i = 0; i < d.count(); ++i) CHECK((w.data[i] == 0 || w.data[i] == 7));
}

TEST_CASE("motion_pair_pdf: identity field puts all mass on the zero row") {
  const Dims d{10, 10, 10};
  const auto labels = cube_mask(d, {2, 2, 2}, {7, 7, 7});
  MotionPdfOptions opts;
  opts.bins = 8;
  opts.sigma = 0.0;  // unsmoothed: the support statement is exact
  const auto pdf = motion_pair_pdf(identity_field(d), labels, labels, opts);
  REQUIRE_FALSE(pdf.empty);
  CHECK(pdf.density.sum() == doctest::Approx(1.0).epsilon(1e-6));
  for (Index r = 1; r < pdf.density.rows(); ++r)
    for (Index c = 0; c < pdf.density.cols(); ++c) CHECK(pdf.density(r, c) == 0.0);
}

TEST_CASE("motion_pair_pdf: two bodies with a motion gap") {
  const Dims d{16, 16, 16};
  const auto scene = make_two_body_scene(d, Vec3i(8, 8, 5), Vec3i(8, 8, 11), Vec3d(0, 0, 2),
                                         Vec3d(0, 0, -2), 2.0);
  // ground-truth pulling field: +-2 on the two bodies
  DisplacementField gt(d);
  for (Index i = 0; i < d.count(); ++i) {
    if (scene.target_labels.data[i] == 1) gt.data[i * 3 + 2] = 2.0f;
    if (scene.target_labels.data[i] == 2) gt.data[i * 3 + 2] = -2.0f;
  }
  MotionPdfOptions opts;
  opts.bins = 16;
  opts.sigma = 0.0;
  const auto pdf = motion_pair_pdf(gt, scene.source_labels, scene.target_labels, opts);
  REQUIRE_FALSE(pdf.empty);
  CHECK(pdf.density.sum() == doctest::Approx(1.0).epsilon(1e-6));
  // intra-body pairs: difference 0; inter-body pairs: difference 4
  double mass_zero = 0.0, mass_four = 0.0;
  for (Index c = 0; c < pdf.density.cols(); ++c) {
    mass_zero += pdf.density(0, c);
    mass_four += pdf.density(4, c);
  }
  CHECK(mass_zero > 0.0);
  CHECK(mass_four > 0.0);
  CHECK(mass_zero + mass_four == doctest::Approx(1.0).epsilon(1e-6));

  // smoothed version still sums to one
  opts.sigma = 1.0;
  const auto smooth = motion_pair_pdf(gt, scene.source_labels, scene.target_labels, opts);
  CHECK(smooth.density.sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("motion_pair_pdf: empty correct set raises the flag") {
  const Dims d{8, 8, 8};
  const auto a = cube_mask(d, {1, 1, 1}, {3, 3, 3}, 1);
  const auto b = cube_mask(d, {5, 5, 5}, {7, 7, 7}, 2);  // labels never agree
  const auto pdf = motion_pair_pdf(identity_field(d), a, b);
  CHECK(pdf.empty);
  CHECK(pdf.density.sum() == 0.0);
}

TEST_CASE("motion_pair_pdf: difference of two densities sums to zero") {
  const Dims d{12, 12, 12};
  const auto labels = cube_mask(d, {2, 2, 2}, {10, 10, 10});
  DisplacementField f(d);
  for (Index i = 0; i < d.count(); ++i) f.data[i * 3 + 1] = float(i % 3);
  MotionPdfOptions opts;
  opts.bins = 12;
  const auto p1 = motion_pair_pdf(identity_field(d), labels, labels, opts);
  const auto p2 = motion_pair_pdf(f, labels, labels, opts);
  CHECK((p1.density - p2.density).sum() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("label volumes reject negative labels") {
  LabelVolume v({4, 4, 4});
  v.data[0] = -3;
  CHECK_THROWS_AS(v.validate(), invalid_data_error);
}
