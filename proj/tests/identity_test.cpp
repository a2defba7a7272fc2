#include <doctest.h>

#include <cmath>

#include "stylid/error.hpp"
#include "stylid/facegen.hpp"
#include "stylid/identity.hpp"
#include "support.hpp"

using namespace stylid;

namespace {

AttributeVector random_attributes(RngStream& rng) {
  AttributeVector a;
  for (auto& v : a.values) v = rng.next_uniform();
  return a;
}

Tensor render(const AttributeVector& a, std::size_t size = 32, int palette = 0) {
  return render_face(FaceParams{a, palette, 0.5}, size);
}

Tensor stylized(const Tensor& img, double intensity, std::uint64_t seed = 0) {
  StyleOp op;
  op.intensity = intensity;
  return graffiti_stylize(img, op, RngStream(seed));
}

}  // namespace

TEST_CASE("extraction inverts rendering") {
  SUBCASE("every grid value of every component") {
    RngStream rng(1);
    for (std::size_t k = 0; k < kAttributeCount; ++k) {
      for (int step = 0; step <= 10; ++step) {
        AttributeVector a = random_attributes(rng);
        a[k] = step / 10.0;
        CHECK(max_abs_diff(extract_attributes(render(a)), a) <= 1e-9);
      }
    }
  }
  SUBCASE("grid faces with every palette") {
    for (const FaceParams& p : make_face_grid(64, 3)) {
      CHECK(max_abs_diff(extract_attributes(render_face(p, 32)), p.attributes) <= 1e-9);
    }
  }
  SUBCASE("resolution independence") {
    RngStream rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      const AttributeVector a = random_attributes(rng);
      CHECK(max_abs_diff(extract_attributes(render(a, 32)), extract_attributes(render(a, 64))) <= 1e-6);
    }
  }
}

TEST_CASE("extraction errors and clamping") {
  Tensor blank({kImageChannels, 32, 32});
  CHECK_THROWS_AS(extract_attributes(blank), ExtractionError);
  CHECK_THROWS_AS(extract_attributes(Tensor({3, 32, 32})), ShapeError);

  RngStream rng(4);
  Tensor img = render(random_attributes(rng));
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) img(kGeometryChannel, r, c) += 0.05 * rng.next_uniform();
  const AttributeVector a = extract_attributes(img);
  CHECK(a.in_range());
}

TEST_CASE("attr_loss") {
  AttributeVector a;
  a.values = {0.3, 0.5, 0.5, 0.4, 0.6, 0.5};
  AttributeVector b = a;
  b[Attribute::kMouthWidth] += 0.1;
  CHECK(std::abs(attr_loss(render(a), render(b, 32, 2)) - 0.01) <= 1e-9);
  CHECK(attr_loss(render(a), render(a, 32, 3)) <= 1e-18);
}

TEST_CASE("projection contracts") {
  const auto grid = make_face_grid(20, 9);
  SUBCASE("projection restores attributes and keeps style") {
    for (const FaceParams& p : grid) {
      const Tensor img = render_face(p, 32);
      const Tensor s = stylized(img, 0.7);
      const Tensor proj = project(s, p.attributes);
      CHECK(max_abs_diff(extract_attributes(proj), p.attributes) <= 1e-9);
      const auto before = palette_histogram(s, StyleOp::default_graffiti_palette());
      const auto after = palette_histogram(proj, StyleOp::default_graffiti_palette());
      double moved = 0.0;
      for (std::size_t i = 0; i < before.size(); ++i) moved += std::abs(before[i] - after[i]);
      CHECK(moved / 2.0 <= 0.05);
    }
  }
  SUBCASE("P(I) = I for canonical renders") {
    for (const FaceParams& p : grid) {
      const Tensor img = render_face(p, 32);
      CHECK(project(img, extract_attributes(img)).identical(img));
    }
  }
  SUBCASE("a fixed projector hits its reference on 100 inputs") {
    const Projector proj{grid[0].attributes};
    const auto others = make_face_grid(100, 11);
    for (std::size_t i = 0; i < others.size(); ++i) {
      const Tensor x = stylized(render_face(others[i], 32), 0.1 * static_cast<double>(i % 11), i);
      CHECK(max_abs_diff(extract_attributes(proj.apply(x)), proj.reference) <= 1e-9);
    }
  }
  SUBCASE("optimize mode reaches its tolerance") {
    for (std::size_t i = 0; i < 4; ++i) {
      const Tensor img = render_face(grid[i], 32);
      const Tensor s = stylized(img, 0.7);
      const Tensor proj = project(s, grid[i].attributes, ProjectionMode::kOptimize, 1e-4);
      CHECK(max_abs_diff(extract_attributes(proj), grid[i].attributes) <= 1e-4);
      // Colour channels are untouched.
      for (std::size_t k = 32 * 32; k < s.size(); ++k) REQUIRE(proj[k] == s[k]);
    }
  }
  SUBCASE("targets outside [0, 1] are rejected") {
    AttributeVector bad = grid[0].attributes;
    bad[0] = 1.5;
    CHECK_THROWS_AS(project(render_face(grid[0], 32), bad), ProjectionError);
  }
}

TEST_CASE("composition order") {
  for (const FaceParams& p : make_face_grid(30, 5)) {
    const Tensor img = render_face(p, 32);
    for (double k : {0.0, 0.3, 0.7, 1.0}) {
      StyleOp op;
      op.intensity = k;
      const ImageOperator s = [&](const Tensor& x) { return graffiti_stylize(x, op, RngStream(1)); };
      const CompositionReport rep = verify_composition(img, s, Projector{p.attributes});
      CHECK(rep.holds);
      CHECK(rep.loss_ps <= 1e-18);
      // Strict whenever S actually moves F_a.
      if (max_abs_diff(extract_attributes(s(img)), extract_attributes(img)) > 0.0) CHECK(rep.loss_ps < rep.loss_sp);
      if (k == 0.0) CHECK(rep.loss_sp == 0.0);
    }
  }
}

TEST_CASE("ffc") {
  CHECK(ffc(Tensor::vector({1, 0}), Tensor::vector({1, 1})) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(ffc(Tensor::vector({2, 3}), Tensor::vector({4, 6})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ffc(Tensor::vector({1, 2}), Tensor::vector({-1, -2})) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(ffc(Tensor::vector({1, 0}), Tensor::vector({0, 1})) == 0.0);
  CHECK_THROWS_AS(ffc(Tensor::vector({0, 0}), Tensor::vector({1, 1})), InputError);
  CHECK_THROWS_AS(ffc(Tensor::vector({1, 0}), Tensor::vector({1, 1, 1})), InputError);

  AttributeVector a;
  a.values = {0, 1, 0.5, 0.5, 0.25, 1};
  const Tensor e = face_embedding(a);
  CHECK(e.identical(Tensor::vector({-1, 1, 0, 0, -0.5, 1, 1})));
  CHECK(identity_embedding(a).dim() == kFaceEmbeddingDim);
  CHECK(ffc(face_embedding(AttributeVector{}), face_embedding(AttributeVector{})) == doctest::Approx(1.0));
}
