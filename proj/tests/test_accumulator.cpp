#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ran/accumulator.hpp"

#include <cmath>
#include <random>

using namespace ran;

namespace {

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

AttributeField uniform_attr(Dims d, Index m, float value) {
  AttributeField a(d, m, value);
  return a;
}

MultiHeadProposal make_proposal(Dims d, Index heads) {
  MultiHeadProposal p;
  p.dims = d;
  p.heads = heads;
  p.residuals.setZero(d.count() * heads * 3);
  p.scores.setZero(d.count() * heads);
  return p;
}

// scalar reference implementations, independent of the library path
double logistic_ref(double s, double mu, double tau) { return 1.0 / (1.0 + std::exp(-(s - mu) / tau)); }

}  // namespace

TEST_CASE("confidence_weights: midpoint, asymptotes, scalar oracle") {
  const Dims d{2, 2, 2};

  const auto mid = confidence_weights(uniform_attr(d, 1, 0.5f));
  for (Index i = 0; i < d.count(); ++i) CHECK(mid.data[i] == doctest::Approx(0.5).epsilon(1e-12));

  const auto hi = confidence_weights(uniform_attr(d, 1, 1e6f));
  const auto lo = confidence_weights(uniform_attr(d, 1, -1e6f));
  CHECK(hi.data[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(lo.data[0] == doctest::Approx(0.0).epsilon(1e-6));

  AttributeField two(d, 1);
  two.data[0] = 0.9f;
  two.data[1] = 0.1f;
  const auto w = confidence_weights(two);
  CHECK(w.data[0] == doctest::Approx(logistic_ref(double(two.data[0]), 0.5, 0.1)).epsilon(1e-6));
  CHECK(w.data[1] == doctest::Approx(logistic_ref(double(two.data[1]), 0.5, 0.1)).epsilon(1e-6));
  CHECK(w.data[0] == doctest::Approx(0.982).epsilon(1e-3));
  CHECK(w.data[1] == doctest::Approx(0.018).epsilon(2e-2));
}

TEST_CASE("multi_head_masks: single head, symmetry, saturation") {
  const Dims d{2, 2, 2};

  const auto one = multi_head_masks(uniform_attr(d, 1, 0.7f));
  CHECK((one.data == 1.0f).all());

  const auto equal = multi_head_masks(uniform_attr(d, 4, 0.3f));
  for (Index i = 0; i < equal.data.size(); ++i)
    CHECK(equal.data[i] == doctest::Approx(0.25).epsilon(1e-6));

  AttributeField att(d, 2);
  for (Index i = 0; i < d.count(); ++i) {
    att.data[i * 2 + 0] = 1.0f;
    att.data[i * 2 + 1] = 0.0f;
  }
  const auto mask = multi_head_masks(att, 0.1);
  const double expect = 1.0 / (1.0 + std::exp(-10.0));  // scalar softmax oracle
  for (Index i = 0; i < d.count(); ++i) {
    CHECK(mask.data[i * 2 + 0] == doctest::Approx(expect).epsilon(1e-6));
    CHECK(mask.data[i * 2 + 1] == doctest::Approx(1.0 - expect).epsilon(1e-7));
    CHECK(double(mask.data[i * 2 + 0]) + double(mask.data[i * 2 + 1]) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(mask.data[0] == doctest::Approx(1.0 - 4.54e-5).epsilon(1e-6));
}

TEST_CASE("mask weight rises strictly with its attribute") {
  const Dims d{1, 1, 1};
  double prev = -1.0;
  for (double s = -1.0; s <= 1.0; s += 0.25) {
    AttributeField att(d, 3);
    att.data[0] = float(s);
    att.data[1] = 0.2f;
    att.data[2] = -0.4f;
    const auto mask = multi_head_masks(att, 0.1);
    CHECK(double(mask.data[0]) > prev);
    prev = double(mask.data[0]);
  }
}

TEST_CASE("interpolate_weighted: uniform weights reduce to plain smoothing") {
  const Dims d{6, 6, 6};
  std::mt19937_64 rng(7);
  DisplacementField f(d);
  for (Index i = 0; i < f.data.size(); ++i) f.data[i] = float(uniform01(rng) - 0.5);

  const Volume w(d, 1, 0.7f);
  const auto nc = interpolate_weighted(f, w, 1.0);
  const auto plain = field_from_volume(gaussian_smooth(as_volume(f), 1.0));
  for (Index i = 0; i < f.data.size(); ++i)
    CHECK(std::abs(double(nc.data[i]) - double(plain.data[i])) < 1e-5);
}

TEST_CASE("interpolate_weighted: constant fields stay constant") {
  const Dims d{5, 5, 5};
  DisplacementField f(d);
  for (Index i = 0; i < d.count(); ++i) {
    f.data[i * 3 + 0] = 1.5f;
    f.data[i * 3 + 1] = -0.5f;
    f.data[i * 3 + 2] = 2.0f;
  }
  Volume w(d, 1);
  std::mt19937_64 rng(9);
  for (Index i = 0; i < d.count(); ++i) w.data[i] = float(0.1 + uniform01(rng));
  const auto out = interpolate_weighted(f, w, 1.0);
  for (Index i = 1; i < d.count() - 1; ++i) {
    CHECK(out.data[i * 3 + 0] == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(out.data[i * 3 + 1] == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(out.data[i * 3 + 2] == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("interpolate_weighted: zero-weight voxel inherits its neighbor") {
  const Dims d{1, 1, 2};
  DisplacementField f(d);
  f.at(0, 0, 0, 2) = 3.0f;
  f.at(0, 0, 1, 2) = -100.0f;  // must be ignored where weight is 0
  Volume w(d, 1);
  w.at(0, 0, 0) = 1.0f;
  w.at(0, 0, 1) = 0.0f;
  const auto out = interpolate_weighted(f, w, 1.0);
  CHECK(out.at(0, 0, 1, 2) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("interpolate_weighted rejects mismatched dims and negative weights") {
  DisplacementField f({4, 4, 4});
  CHECK_THROWS_AS(interpolate_weighted(f, Volume(Dims{4, 4, 2}, 1, 1.0f), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(interpolate_weighted(f, Volume(Dims{4, 4, 4}, 1, -1.0f), 1.0),
                  std::invalid_argument);
}

TEST_CASE("accumulate: identity plus zero proposal is exactly identity") {
  const Dims d{6, 6, 6};
  auto prop = make_proposal(d, 2);
  std::mt19937_64 rng(3);
  for (Index i = 0; i < prop.scores.size(); ++i) prop.scores[i] = float(uniform01(rng));
  // scores must be sorted per voxel
  for (Index i = 0; i < d.count(); ++i)
    if (prop.scores[i * 2 + 1] > prop.scores[i * 2 + 0])
      std::swap(prop.scores[i * 2 + 1], prop.scores[i * 2 + 0]);

  const auto res = accumulate(identity_field(d), AttributeField(d, 2), prop);
  CHECK((res.ddf.data == 0.0f).all());
}

TEST_CASE("accumulate: constant residual passes through in the interior") {
  const Dims d{8, 8, 8};
  auto prop = make_proposal(d, 1);
  for (Index i = 0; i < d.count(); ++i) {
    prop.residuals[i * 3 + 2] = 1.0f;
    prop.scores[i] = 0.9f;
  }
  const auto res = accumulate(identity_field(d), AttributeField(d, 1), prop);
  for (Index z = 2; z < d.t - 2; ++z)
    for (Index y = 2; y < d.h - 2; ++y)
      for (Index x = 2; x < d.w - 2; ++x) {
        CHECK(res.ddf.at(z, y, x, 0) == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(res.ddf.at(z, y, x, 1) == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(res.ddf.at(z, y, x, 2) == doctest::Approx(1.0).epsilon(1e-6));
      }
}

TEST_CASE("accumulate: a saturated mask selects the leading head") {
  const Dims d{8, 8, 8};
  const float a0 = 2.0f;
  auto prop = make_proposal(d, 2);
  for (Index i = 0; i < d.count(); ++i) {
    prop.residuals[(i * 2 + 0) * 3 + 2] = a0;
    prop.residuals[(i * 2 + 1) * 3 + 2] = -a0;
    prop.scores[i * 2 + 0] = 1.0f;  // gap of 1 at temperature 0.1 saturates
    prop.scores[i * 2 + 1] = 0.0f;
  }
  const auto res = accumulate(identity_field(d), AttributeField(d, 2), prop);
  for (Index z = 2; z < d.t - 2; ++z)
    for (Index y = 2; y < d.h - 2; ++y)
      for (Index x = 2; x < d.w - 2; ++x)
        CHECK(std::abs(double(res.ddf.at(z, y, x, 2)) - double(a0)) < 1e-3);
}

TEST_CASE("accumulate: fused residual stays within the head convex hull") {
  const Dims d{6, 6, 6};
  std::mt19937_64 rng(19);
  auto prop = make_proposal(d, 3);
  const double radius = 2.0;
  for (Index i = 0; i < d.count(); ++i) {
    for (Index h = 0; h < 3; ++h) {
      for (int c = 0; c < 3; ++c)
        prop.residuals[(i * 3 + h) * 3 + c] = float(std::floor(uniform01(rng) * 5.0) - 2.0);
      prop.scores[i * 3 + h] = float(1.0 - 0.3 * double(h));
    }
  }
  const auto res = accumulate(identity_field(d), AttributeField(d, 3), prop);
  for (Index i = 0; i < res.residual.data.size(); ++i)
    CHECK(std::abs(double(res.residual.data[i])) <= radius + 1e-6);
  for (Index i = 0; i < res.ddf.data.size(); ++i)
    CHECK(std::abs(double(res.ddf.data[i])) <= radius + 1e-6);  // prev was identity
}

TEST_CASE("accumulate: attribute fusion is max against decayed previous") {
  const Dims d{2, 2, 2};
  auto prop = make_proposal(d, 2);
  AttributeField prev(d, 2);
  for (Index i = 0; i < d.count(); ++i) {
    prop.scores[i * 2 + 0] = 0.4f;
    prop.scores[i * 2 + 1] = 0.1f;
    prev.data[i * 2 + 0] = 1.0f;  // decayed to 0.9, beats 0.4
    prev.data[i * 2 + 1] = 0.05f; // decayed to 0.045, loses to 0.1
  }
  const auto res = accumulate(identity_field(d), prev, prop);
  for (Index i = 0; i < d.count(); ++i) {
    CHECK(res.attributes.data[i * 2 + 0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(res.attributes.data[i * 2 + 1] == doctest::Approx(0.1).epsilon(1e-6));
  }
}

TEST_CASE("accumulate rejects grid mismatches") {
  auto prop = make_proposal({4, 4, 4}, 1);
  CHECK_THROWS_AS(accumulate(identity_field({4, 4, 2}), AttributeField({4, 4, 4}, 1), prop),
                  std::invalid_argument);
}
