#pragma once

#include "bostomo/common.hpp"
#include "bostomo/config.hpp"
#include "bostomo/constants.hpp"
#include "bostomo/fields.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bos {

/// How a texture was produced; kept so a scene serializes back to the same config.
struct TextureSpec {
  enum class Kind { Constant, Noise, File };
  Kind kind = Kind::Constant;
  double value = 1.0;
  std::uint64_t seed = 1;
  int resolution = 256;
  double min_freq = 4.0;
  double max_freq = 16.0;
  std::string path;

  bool operator==(const TextureSpec&) const = default;
};

Texture build_texture(const TextureSpec& spec, const std::filesystem::path& base_dir = {});

/// Pinhole camera. The pinhole sits at `position`; the sensor plane lies at distance
/// `focal_length` behind it. Pixel (0, 0) images the top-left of the scene.
struct Camera {
  Vec3 position = Vec3::Zero();
  Vec3 forward = Vec3::UnitY();
  Vec3 up = Vec3::UnitZ();
  double focal_length = 0.05;
  double sensor_width = 0.036;
  double sensor_height = 0.036;
  int rows = 100;
  int cols = 100;

  bool operator==(const Camera&) const = default;

  Vec3 right() const { return forward.cross(up); }
  int pixel_count() const { return rows * cols; }
};

struct Projector {
  Vec3 position = Vec3::Zero();
  Vec3 forward = Vec3::UnitY();
  Vec3 up = Vec3::UnitZ();
  double focal_length = 0.05;
  double pattern_width = 0.036;
  double pattern_height = 0.036;
  double power = 1.0;
  TextureSpec pattern_spec;
  Texture pattern;

  bool operator==(const Projector&) const = default;

  Vec3 right() const { return forward.cross(up); }
};

/// Rectangular back wall. `e1`/`e2` span the plane; texture u runs along e1 and
/// texture v runs along -e2 (top row at +e2).
struct WallPlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = -Vec3::UnitY();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitZ();
  double width = 1.0;
  double height = 1.0;
  TextureSpec texture_spec;
  Texture texture{1, 1, 1.0};

  bool operator==(const WallPlane&) const = default;

  double signed_distance(const Vec3& x) const { return (x - point).dot(normal); }
};

struct BoundaryAnnotation {
  std::string kind;  ///< "inlet" or "outlet"
  Vec3 center = Vec3::Zero();
  Vec3 half_size = Vec3::Zero();

  bool operator==(const BoundaryAnnotation&) const = default;
};

/// Axis-aligned plane carrying boundary data, restricted to the room box.
struct BoundaryPlane {
  int axis = 0;
  double offset = 0.0;
  std::vector<BoundaryAnnotation> annotations;

  bool operator==(const BoundaryPlane&) const = default;
};

struct Scene {
  Box room;
  Camera camera;
  std::optional<Projector> projector;
  WallPlane wall;
  BoundaryPlane boundary;
  MediumConstants medium;
  NondimConstants nondim;
  TraceConfig trace;
  RenderSettings render;
  TrainConfig train;
  BenchmarkConfig benchmark;

  bool operator==(const Scene&) const = default;

  double ambient_eta() const { return eta_from_temperature(medium.T0, medium); }
};

/// Parses and validates a scene config. Throws ParseError or ValidationError.
Scene load_scene(const std::filesystem::path& path);
Scene scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json scene_to_json(const Scene& s);

/// Throws ValidationError naming the first violated invariant.
void validate_scene(const Scene& s);

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults = {});
nlohmann::json train_config_to_json(const TrainConfig& t);

struct PixelIndex {
  int row = 0;
  int col = 0;
  bool operator==(const PixelIndex&) const = default;
};

/// Sensor-plane rectangle of one pixel plus the pinhole that fixes each sample's direction.
struct PixelFootprint {
  Vec3 center;
  Vec3 axis_u;  ///< unit vector along the pixel width
  Vec3 axis_v;  ///< unit vector along the pixel height
  double width = 0.0;
  double height = 0.0;
  Vec3 pinhole;

  double area() const { return width * height; }
  /// a, b in [-1/2, 1/2] map to the rectangle.
  Vec3 point(double a, double b) const { return center + (a * width) * axis_u + (b * height) * axis_v; }
  Vec3 direction(const Vec3& sensor_point) const { return (pinhole - sensor_point).normalized(); }
};

PixelFootprint pixel_footprint(const Camera& cam, PixelIndex j);

/// Re/Pe/Ri from dimensional properties: Re = UL/nu, Pe = UL/alpha, Ri = g beta dT L / U^2.
NondimConstants nondim_from_physical(double U, double L, double nu, double alpha, double beta,
                                     double g, double delta_T, const Vec3& e_g);

}  // namespace bos
