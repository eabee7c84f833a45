#include "support.hpp"

#include "bostomo/scene.hpp"

#include <doctest.h>

using namespace bos;

TEST_CASE("reference room config loads the reference camera and projector placement") {
  const Scene s = load_scene(testing::config("reference_room.json"));
  CHECK(s.camera.position.isApprox(Vec3(0.85, -29.0, 1.5)));
  REQUIRE(s.projector.has_value());
  CHECK(s.projector->position.isApprox(Vec3(1.85, -29.0, 1.5)));
  CHECK(s.camera.rows == 100);
  CHECK(s.camera.cols == 100);
  CHECK(s.camera.forward.isApprox(Vec3::UnitY()));
  CHECK(s.boundary.axis == 0);
  CHECK(s.boundary.offset == doctest::Approx(-1.2));
}

TEST_CASE("degenerate camera up vector is rejected") {
  auto j = testing::small_scene_json();
  j["camera"]["up"] = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(scene_from_json(j), ValidationError);
}

TEST_CASE("camera up not orthogonal to forward is rejected") {
  auto j = testing::small_scene_json();
  j["camera"]["up"] = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(scene_from_json(j), ValidationError);
}

TEST_CASE("config without projector selects the self-luminous wall") {
  const Scene s = testing::small_scene();
  CHECK_FALSE(s.projector.has_value());
  CHECK(s.wall.texture.rows == 64);
}

TEST_CASE("camera inside the room is rejected") {
  auto j = testing::small_scene_json();
  j["camera"]["position_m"] = {0.0, 0.0, 1.0};
  CHECK_THROWS_AS(scene_from_json(j), ValidationError);
}

TEST_CASE("malformed config is a parse error") {
  auto j = testing::small_scene_json();
  j.erase("room");
  CHECK_THROWS_AS(scene_from_json(j), ParseError);
}

TEST_CASE("pixel footprints partition the sensor") {
  const Scene s = load_scene(testing::config("reference_room.json"));
  const Camera& cam = s.camera;
  const PixelFootprint corner = pixel_footprint(cam, {0, 0});
  CHECK(corner.area() == doctest::Approx((cam.sensor_width / 100) * (cam.sensor_height / 100)));
  const Vec3 sensor_center = cam.position - cam.focal_length * cam.forward;
  // Corner pixel centre sits half a pixel inside the sensor corner.
  const Vec3 off = corner.center - sensor_center;
  CHECK(std::abs(off.dot(cam.right())) == doctest::Approx(0.5 * cam.sensor_width - 0.5 * corner.width));
  CHECK(std::abs(off.dot(cam.up)) == doctest::Approx(0.5 * cam.sensor_height - 0.5 * corner.height));

  const PixelFootprint mid = pixel_footprint(cam, {50, 50});
  const Vec3 moff = mid.center - sensor_center;
  CHECK(std::abs(moff.dot(cam.right())) == doctest::Approx(0.5 * mid.width));
  CHECK(std::abs(moff.dot(cam.up)) == doctest::Approx(0.5 * mid.height));
  CHECK(std::abs(moff.dot(cam.forward)) < 1e-15);
  CHECK_THROWS(pixel_footprint(cam, {100, 0}));
}

TEST_CASE("pixel (0, 0) images the top-left of the wall") {
  const Scene s = testing::small_scene();
  const PixelFootprint fp = pixel_footprint(s.camera, {0, 0});
  const Vec3 d = fp.direction(fp.center);
  CHECK(d.z() > 0.0);
  CHECK(d.x() < 0.0);
}

TEST_CASE("scene serialization round-trips") {
  const Scene a = load_scene(testing::config("reference_room.json"));
  const Scene b = scene_from_json(scene_to_json(a));
  CHECK(a == b);
  const Scene c = load_scene(testing::config("benchmark_plume.json"));
  CHECK(scene_from_json(scene_to_json(c)) == c);
}

TEST_CASE("nondimensional groups follow from physical properties") {
  const NondimConstants c = nondim_from_physical(0.5, 2.0, 1.5e-5, 2.0e-5, 1.0 / 300.0, 9.81, 30.0, Vec3(0, 0, -1));
  CHECK(c.Re == doctest::Approx(0.5 * 2.0 / 1.5e-5));
  CHECK(c.Pe == doctest::Approx(0.5 * 2.0 / 2.0e-5));
  CHECK(c.Ri == doctest::Approx(9.81 * (1.0 / 300.0) * 30.0 * 2.0 / 0.25));
}

TEST_CASE("train block validation") {
  auto j = testing::small_scene_json();
  j["train"] = {{"weights", {{"lambda", {0.0, 0.0, 0.0}}}}};
  CHECK_THROWS_AS(scene_from_json(j), ValidationError);
  j["train"] = {{"spp", 0}};
  CHECK_THROWS_AS(scene_from_json(j), ValidationError);
}
