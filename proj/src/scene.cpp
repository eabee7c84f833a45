#include "bostomo/scene.hpp"

#include "bostomo/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bos {

using nlohmann::json;

std::string to_string(Integrator i) { return i == Integrator::Nonlinear ? "nonlinear" : "quasilinear"; }

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    case Activation::Sine: return "sine";
  }
  return "tanh";
}

std::string to_string(BoundaryNormalization n) {
  return n == BoundaryNormalization::ReferenceMax ? "reference_max" : "own_max";
}

Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  if (s == "sine") return Activation::Sine;
  throw ValidationError("unknown activation '" + s + "'");
}

namespace {

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + ": expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

Vec3 vec3_or(const json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  return vec3_from(j.at(key), key);
}

Vec3 unit_or_throw(const Vec3& v, const std::string& what) {
  const double n = v.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) throw ValidationError(what + " must have nonzero finite norm");
  return v / n;
}

Integrator integrator_from(const std::string& s) {
  if (s == "nonlinear") return Integrator::Nonlinear;
  if (s == "quasilinear") return Integrator::Quasilinear;
  throw ValidationError("unknown integrator '" + s + "'");
}

int axis_from(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  const auto s = j.get<std::string>();
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw ValidationError("boundary_plane.axis must be x, y or z");
}

TextureSpec texture_spec_from(const json& j) {
  TextureSpec t;
  if (j.is_number()) {
    t.kind = TextureSpec::Kind::Constant;
    t.value = j.get<double>();
    return t;
  }
  const auto type = get_or<std::string>(j, "type", "constant");
  if (type == "constant") {
    t.kind = TextureSpec::Kind::Constant;
    t.value = get_or(j, "value", 1.0);
  } else if (type == "noise") {
    t.kind = TextureSpec::Kind::Noise;
    t.seed = get_or<std::uint64_t>(j, "seed", 1);
    t.resolution = get_or(j, "resolution", 256);
    if (j.contains("band")) {
      t.min_freq = j.at("band").at(0).get<double>();
      t.max_freq = j.at("band").at(1).get<double>();
    }
  } else if (type == "pfm") {
    t.kind = TextureSpec::Kind::File;
    t.path = j.at("path").get<std::string>();
  } else {
    throw ValidationError("unknown texture type '" + type + "'");
  }
  return t;
}

json texture_spec_to(const TextureSpec& t) {
  switch (t.kind) {
    case TextureSpec::Kind::Constant: return {{"type", "constant"}, {"value", t.value}};
    case TextureSpec::Kind::Noise:
      return {{"type", "noise"}, {"seed", t.seed}, {"resolution", t.resolution}, {"band", {t.min_freq, t.max_freq}}};
    case TextureSpec::Kind::File: return {{"type", "pfm"}, {"path", t.path}};
  }
  return {};
}

/// Largest focal length for which every wall corner still lands on the sensor.
double covering_focal_length(const Vec3& pos, const Vec3& fwd, const Vec3& up, double sensor_w,
                             double sensor_h, const WallPlane& wall) {
  const Vec3 right = fwd.cross(up);
  double f = std::numeric_limits<double>::infinity();
  for (int sx = -1; sx <= 1; sx += 2) {
    for (int sy = -1; sy <= 1; sy += 2) {
      const Vec3 corner = wall.point + (0.5 * sx * wall.width) * wall.e1 + (0.5 * sy * wall.height) * wall.e2;
      const Vec3 d = corner - pos;
      const double depth = d.dot(fwd);
      if (depth <= 0.0) throw ValidationError("wall corner lies behind the camera or projector");
      const double lx = std::abs(d.dot(right));
      const double ly = std::abs(d.dot(up));
      if (lx > 0.0) f = std::min(f, 0.5 * sensor_w * depth / lx);
      if (ly > 0.0) f = std::min(f, 0.5 * sensor_h * depth / ly);
    }
  }
  return f;
}

}  // namespace

Texture build_texture(const TextureSpec& spec, const std::filesystem::path& base_dir) {
  switch (spec.kind) {
    case TextureSpec::Kind::Constant:
      if (!(spec.value >= 0.0)) throw ValidationError("constant texture value must be >= 0");
      return Texture(1, 1, spec.value);
    case TextureSpec::Kind::Noise: return make_noise_texture(spec.seed, spec.resolution, spec.min_freq, spec.max_freq);
    case TextureSpec::Kind::File: {
      std::filesystem::path p = spec.path;
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      return texture_from_raster(read_pfm(p));
    }
  }
  return {};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& d) {
  TrainConfig t = d;
  if (j.is_null()) return t;
  t.iterations = get_or(j, "iterations", d.iterations);
  t.learning_rate = get_or(j, "learning_rate", d.learning_rate);
  t.beta1 = get_or(j, "beta1", d.beta1);
  t.beta2 = get_or(j, "beta2", d.beta2);
  t.eps = get_or(j, "eps", d.eps);
  t.cosine_decay = get_or(j, "cosine_decay", d.cosine_decay);
  if (j.contains("batch")) {
    const auto& b = j.at("batch");
    t.batch.collocation = get_or(b, "collocation", d.batch.collocation);
    t.batch.pixels = get_or(b, "pixels", d.batch.pixels);
    t.batch.boundary = get_or(b, "boundary", d.batch.boundary);
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    t.init_seed = get_or(s, "init", d.init_seed);
    t.sampling_seed = get_or(s, "sampling", d.sampling_seed);
    t.render_seed = get_or(s, "render", d.render_seed);
  }
  t.spp = get_or(j, "spp", d.spp);
  t.noisy_render_seeds = get_or(j, "noisy_render_seeds", d.noisy_render_seeds);
  t.render_step = get_or(j, "render_step_m", d.render_step);
  t.checkpoint_every = get_or(j, "checkpoint_every", d.checkpoint_every);
  t.log_every = get_or(j, "log_every", d.log_every);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (w.contains("lambda")) {
      const auto& l = w.at("lambda");
      t.weights.lambda_bos = l.at(0).get<double>();
      t.weights.lambda_boundary = l.at(1).get<double>();
      t.weights.lambda_pde = l.at(2).get<double>();
    }
    if (w.contains("gamma")) {
      const auto& g = w.at("gamma");
      t.weights.gamma_mass = g.at(0).get<double>();
      t.weights.gamma_mom = g.at(1).get<double>();
      t.weights.gamma_heat = g.at(2).get<double>();
    }
  }
  if (j.contains("boundary_loss")) {
    const auto& b = j.at("boundary_loss");
    const auto mode = get_or<std::string>(b, "normalization", to_string(d.boundary.normalization));
    if (mode == "reference_max") t.boundary.normalization = BoundaryNormalization::ReferenceMax;
    else if (mode == "own_max") t.boundary.normalization = BoundaryNormalization::OwnMax;
    else throw ValidationError("unknown boundary normalization '" + mode + "'");
    t.boundary.min_scale = get_or(b, "min_scale", d.boundary.min_scale);
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    if (n.contains("hidden")) t.network.hidden = n.at("hidden").get<std::vector<int>>();
    t.network.activation = activation_from(get_or<std::string>(n, "activation", to_string(d.network.activation)));
    t.network.fourier_features = get_or(n, "fourier_features", d.network.fourier_features);
    t.network.fourier_scale = get_or(n, "fourier_scale", d.network.fourier_scale);
  }

  if (t.iterations < 1) throw ValidationError("train.iterations must be >= 1");
  if (t.batch.collocation < 1 || t.batch.pixels < 1 || t.batch.boundary < 1)
    throw ValidationError("train.batch sizes must be >= 1");
  if (t.spp < 1) throw ValidationError("train.spp must be >= 1");
  if (!(t.render_step > 0.0)) throw ValidationError("train.render_step_m must be > 0");
  if (!(t.learning_rate >= 0.0)) throw ValidationError("train.learning_rate must be >= 0");
  const auto& w = t.weights;
  for (double v : {w.lambda_bos, w.lambda_boundary, w.lambda_pde, w.gamma_mass, w.gamma_mom, w.gamma_heat})
    if (!(v >= 0.0)) throw ValidationError("loss weights must be >= 0");
  if (w.lambda_bos == 0.0 && w.lambda_boundary == 0.0 && w.lambda_pde == 0.0)
    throw ValidationError("at least one loss weight lambda must be > 0");
  for (int h : t.network.hidden)
    if (h < 1) throw ValidationError("network hidden sizes must be >= 1");
  if (t.network.fourier_features < 0) throw ValidationError("network.fourier_features must be >= 0");
  return t;
}

json train_config_to_json(const TrainConfig& t) {
  return {
      {"iterations", t.iterations},
      {"learning_rate", t.learning_rate},
      {"beta1", t.beta1},
      {"beta2", t.beta2},
      {"eps", t.eps},
      {"cosine_decay", t.cosine_decay},
      {"batch", {{"collocation", t.batch.collocation}, {"pixels", t.batch.pixels}, {"boundary", t.batch.boundary}}},
      {"seeds", {{"init", t.init_seed}, {"sampling", t.sampling_seed}, {"render", t.render_seed}}},
      {"spp", t.spp},
      {"noisy_render_seeds", t.noisy_render_seeds},
      {"render_step_m", t.render_step},
      {"checkpoint_every", t.checkpoint_every},
      {"log_every", t.log_every},
      {"weights",
       {{"lambda", {t.weights.lambda_bos, t.weights.lambda_boundary, t.weights.lambda_pde}},
        {"gamma", {t.weights.gamma_mass, t.weights.gamma_mom, t.weights.gamma_heat}}}},
      {"boundary_loss", {{"normalization", to_string(t.boundary.normalization)}, {"min_scale", t.boundary.min_scale}}},
      {"network",
       {{"hidden", t.network.hidden},
        {"activation", to_string(t.network.activation)},
        {"fourier_features", t.network.fourier_features},
        {"fourier_scale", t.network.fourier_scale}}},
  };
}

NondimConstants nondim_from_physical(double U, double L, double nu, double alpha, double beta, double g,
                                     double delta_T, const Vec3& e_g) {
  NondimConstants c;
  c.U = U;
  c.L = L;
  c.Re = U * L / nu;
  c.Pe = U * L / alpha;
  c.Ri = g * beta * delta_T * L / (U * U);
  c.e_g = e_g;
  return c;
}

Scene scene_from_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    Scene s;
    const auto& room = j.at("room");
    s.room.lo = vec3_from(room.at("min_m"), "room.min_m");
    s.room.hi = vec3_from(room.at("max_m"), "room.max_m");

    const auto& w = j.at("wall");
    s.wall.point = vec3_from(w.at("point_m"), "wall.point_m");
    s.wall.normal = unit_or_throw(vec3_from(w.at("normal"), "wall.normal"), "wall.normal");
    s.wall.width = w.at("extent_m").at(0).get<double>();
    s.wall.height = w.at("extent_m").at(1).get<double>();
    {
      // e2 defaults to world +z projected into the plane; e1 completes a right-handed frame
      // as seen from the camera side.
      Vec3 up = vec3_or(w, "e2", Vec3::UnitZ());
      up -= up.dot(s.wall.normal) * s.wall.normal;
      s.wall.e2 = unit_or_throw(up, "wall.e2 (projected into the wall plane)");
      s.wall.e1 = s.wall.e2.cross(s.wall.normal);
    }
    s.wall.texture_spec = w.contains("texture") ? texture_spec_from(w.at("texture")) : TextureSpec{};
    s.wall.texture = build_texture(s.wall.texture_spec, base_dir);

    const auto& c = j.at("camera");
    s.camera.position = vec3_from(c.at("position_m"), "camera.position_m");
    s.camera.forward = unit_or_throw(vec3_or(c, "forward", Vec3::UnitY()), "camera.forward");
    s.camera.up = unit_or_throw(vec3_or(c, "up", Vec3::UnitZ()), "camera.up");
    if (c.contains("sensor_extent_m")) {
      s.camera.sensor_width = c.at("sensor_extent_m").at(0).get<double>();
      s.camera.sensor_height = c.at("sensor_extent_m").at(1).get<double>();
    }
    if (c.contains("resolution")) {
      s.camera.rows = c.at("resolution").at(0).get<int>();
      s.camera.cols = c.at("resolution").at(1).get<int>();
    }
    if (std::abs(s.camera.forward.dot(s.camera.up)) > 1e-9) throw ValidationError("camera.forward must be orthogonal to camera.up");
    s.camera.focal_length = c.contains("focal_length_m")
                                ? c.at("focal_length_m").get<double>()
                                : covering_focal_length(s.camera.position, s.camera.forward, s.camera.up,
                                                        s.camera.sensor_width, s.camera.sensor_height, s.wall);

    if (j.contains("projector") && !j.at("projector").is_null()) {
      const auto& p = j.at("projector");
      Projector pr;
      pr.position = vec3_from(p.at("position_m"), "projector.position_m");
      pr.forward = unit_or_throw(vec3_or(p, "forward", Vec3::UnitY()), "projector.forward");
      pr.up = unit_or_throw(vec3_or(p, "up", Vec3::UnitZ()), "projector.up");
      if (std::abs(pr.forward.dot(pr.up)) > 1e-9) throw ValidationError("projector.forward must be orthogonal to projector.up");
      if (p.contains("pattern_extent_m")) {
        pr.pattern_width = p.at("pattern_extent_m").at(0).get<double>();
        pr.pattern_height = p.at("pattern_extent_m").at(1).get<double>();
      }
      pr.power = get_or(p, "power", 1.0);
      pr.focal_length = p.contains("focal_length_m")
                            ? p.at("focal_length_m").get<double>()
                            : covering_focal_length(pr.position, pr.forward, pr.up, pr.pattern_width,
                                                    pr.pattern_height, s.wall);
      pr.pattern_spec = p.contains("pattern") ? texture_spec_from(p.at("pattern")) : TextureSpec{};
      pr.pattern = build_texture(pr.pattern_spec, base_dir);
      s.projector = std::move(pr);
    }

    if (j.contains("boundary_plane")) {
      const auto& b = j.at("boundary_plane");
      s.boundary.axis = axis_from(b.at("axis"));
      s.boundary.offset = b.at("offset_m").get<double>();
      if (b.contains("annotations")) {
        for (const auto& a : b.at("annotations")) {
          BoundaryAnnotation ann;
          ann.kind = a.at("kind").get<std::string>();
          ann.center = vec3_from(a.at("center_m"), "annotation.center_m");
          ann.half_size = vec3_or(a, "half_size_m", Vec3::Zero());
          s.boundary.annotations.push_back(ann);
        }
      }
    } else {
      s.boundary.axis = 0;
      s.boundary.offset = s.room.lo[0];
    }

    if (j.contains("medium")) {
      const auto& m = j.at("medium");
      s.medium.rho0_G = get_or(m, "rho0_G", s.medium.rho0_G);
      s.medium.T0 = get_or(m, "T0_K", s.medium.T0);
      s.medium.T_in = get_or(m, "Tin_K", s.medium.T_in);
    }

    if (j.contains("nondim")) {
      const auto& n = j.at("nondim");
      s.nondim.L = get_or(n, "L_m", s.nondim.L);
      s.nondim.U = get_or(n, "U_mps", s.nondim.U);
      s.nondim.e_g = unit_or_throw(vec3_or(n, "e_g", s.nondim.e_g), "nondim.e_g");
      if (n.contains("physical")) {
        const auto& ph = n.at("physical");
        s.nondim = nondim_from_physical(s.nondim.U, s.nondim.L, ph.at("nu_m2ps").get<double>(),
                                        ph.at("alpha_m2ps").get<double>(), ph.at("beta_per_K").get<double>(),
                                        get_or(ph, "g_mps2", 9.81), s.medium.delta_T(), s.nondim.e_g);
      }
      s.nondim.Re = get_or(n, "Re", s.nondim.Re);
      s.nondim.Pe = get_or(n, "Pe", s.nondim.Pe);
      s.nondim.Ri = get_or(n, "Ri", s.nondim.Ri);
    }

    if (j.contains("trace")) {
      const auto& t = j.at("trace");
      s.trace.step = get_or(t, "step_m", s.trace.step);
      s.trace.max_steps = get_or(t, "max_steps", s.trace.max_steps);
      s.trace.integrator = integrator_from(get_or<std::string>(t, "integrator", to_string(s.trace.integrator)));
    }
    if (j.contains("render")) {
      const auto& r = j.at("render");
      s.render.inverse_square = get_or(r, "inverse_square", s.render.inverse_square);
      s.render.trace_projector_leg = get_or(r, "trace_projector_leg", s.render.trace_projector_leg);
    }
    s.train = train_config_from_json(j.contains("train") ? j.at("train") : json(), TrainConfig{});
    if (j.contains("benchmark")) {
      const auto& b = j.at("benchmark");
      if (b.contains("plume")) {
        const auto& p = b.at("plume");
        s.benchmark.plume.center = vec3_or(p, "center_m", s.benchmark.plume.center);
        s.benchmark.plume.sigma = get_or(p, "sigma_m", s.benchmark.plume.sigma);
        s.benchmark.plume.delta_T = get_or(p, "delta_T_K", s.benchmark.plume.delta_T);
        s.benchmark.plume.w0 = get_or(p, "w0", s.benchmark.plume.w0);
      }
      s.benchmark.measurement_spp = get_or(b, "measurement_spp", s.benchmark.measurement_spp);
      s.benchmark.measurement_seed = get_or(b, "measurement_seed", s.benchmark.measurement_seed);
      s.benchmark.measurement_step = get_or(b, "measurement_step_m", s.benchmark.measurement_step);
      s.benchmark.eval_grid = get_or(b, "eval_grid", s.benchmark.eval_grid);
    }
    validate_scene(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scene config: ") + e.what());
  }
}

json scene_to_json(const Scene& s) {
  json j;
  j["room"] = {{"min_m", vec3_to(s.room.lo)}, {"max_m", vec3_to(s.room.hi)}};
  j["camera"] = {{"position_m", vec3_to(s.camera.position)},
                 {"forward", vec3_to(s.camera.forward)},
                 {"up", vec3_to(s.camera.up)},
                 {"focal_length_m", s.camera.focal_length},
                 {"sensor_extent_m", {s.camera.sensor_width, s.camera.sensor_height}},
                 {"resolution", {s.camera.rows, s.camera.cols}}};
  if (s.projector) {
    const auto& p = *s.projector;
    j["projector"] = {{"position_m", vec3_to(p.position)},
                      {"forward", vec3_to(p.forward)},
                      {"up", vec3_to(p.up)},
                      {"focal_length_m", p.focal_length},
                      {"pattern_extent_m", {p.pattern_width, p.pattern_height}},
                      {"power", p.power},
                      {"pattern", texture_spec_to(p.pattern_spec)}};
  }
  j["wall"] = {{"point_m", vec3_to(s.wall.point)},
               {"normal", vec3_to(s.wall.normal)},
               {"e2", vec3_to(s.wall.e2)},
               {"extent_m", {s.wall.width, s.wall.height}},
               {"texture", texture_spec_to(s.wall.texture_spec)}};
  json ann = json::array();
  for (const auto& a : s.boundary.annotations)
    ann.push_back({{"kind", a.kind}, {"center_m", vec3_to(a.center)}, {"half_size_m", vec3_to(a.half_size)}});
  j["boundary_plane"] = {{"axis", std::string(1, "xyz"[s.boundary.axis])}, {"offset_m", s.boundary.offset}, {"annotations", ann}};
  j["medium"] = {{"rho0_G", s.medium.rho0_G}, {"T0_K", s.medium.T0}, {"Tin_K", s.medium.T_in}};
  j["nondim"] = {{"Re", s.nondim.Re}, {"Pe", s.nondim.Pe}, {"Ri", s.nondim.Ri},
                 {"L_m", s.nondim.L}, {"U_mps", s.nondim.U}, {"e_g", vec3_to(s.nondim.e_g)}};
  j["trace"] = {{"step_m", s.trace.step}, {"max_steps", s.trace.max_steps}, {"integrator", to_string(s.trace.integrator)}};
  j["render"] = {{"inverse_square", s.render.inverse_square}, {"trace_projector_leg", s.render.trace_projector_leg}};
  j["train"] = train_config_to_json(s.train);
  const auto& b = s.benchmark;
  j["benchmark"] = {{"plume",
                     {{"center_m", vec3_to(b.plume.center)},
                      {"sigma_m", b.plume.sigma},
                      {"delta_T_K", b.plume.delta_T},
                      {"w0", b.plume.w0}}},
                    {"measurement_spp", b.measurement_spp},
                    {"measurement_seed", b.measurement_seed},
                    {"measurement_step_m", b.measurement_step},
                    {"eval_grid", b.eval_grid}};
  return j;
}

void validate_scene(const Scene& s) {
  if (s.room.degenerate()) throw ValidationError("room box must have max > min on every axis");

  const auto& c = s.camera;
  if (c.rows < 1 || c.cols < 1) throw ValidationError("camera.resolution must be >= 1x1");
  if (!(c.focal_length > 0.0)) throw ValidationError("camera.focal_length must be > 0");
  if (!(c.sensor_width > 0.0 && c.sensor_height > 0.0)) throw ValidationError("camera.sensor_extent must be > 0");
  if (std::abs(c.forward.norm() - 1.0) > 1e-9 || std::abs(c.up.norm() - 1.0) > 1e-9)
    throw ValidationError("camera.forward/up must be unit vectors");
  if (std::abs(c.forward.dot(c.up)) > 1e-9) throw ValidationError("camera.forward must be orthogonal to camera.up");

  const auto& w = s.wall;
  if (std::abs(w.normal.norm() - 1.0) > 1e-9) throw ValidationError("wall.normal must be a unit vector");
  if (!(w.width > 0.0 && w.height > 0.0)) throw ValidationError("wall.extent must be > 0");
  const double tol = 1e-9 * s.room.extent().maxCoeff();
  if (!s.room.contains(w.point, tol)) throw ValidationError("wall plane must lie on a face of or inside the room box");
  for (double v : w.texture.data)
    if (!(v >= 0.0)) throw ValidationError("wall texture must be nonnegative");

  auto check_viewpoint = [&](const Vec3& pos, const char* what) {
    if (s.room.contains(pos, -tol))
      throw ValidationError(std::string(what) + " must lie outside or on the room box");
    if (w.signed_distance(pos) <= 0.0)
      throw ValidationError(std::string(what) + " must be on the opposite side of the room from the wall");
  };
  check_viewpoint(c.position, "camera.position");

  if (s.projector) {
    const auto& p = *s.projector;
    if (!(p.focal_length > 0.0)) throw ValidationError("projector.focal_length must be > 0");
    if (std::abs(p.forward.dot(p.up)) > 1e-9) throw ValidationError("projector.forward must be orthogonal to projector.up");
    if (!(p.pattern_width > 0.0 && p.pattern_height > 0.0)) throw ValidationError("projector.pattern_extent must be > 0");
    if (!(p.power >= 0.0)) throw ValidationError("projector.power must be >= 0");
    for (double v : p.pattern.data)
      if (!(v >= 0.0)) throw ValidationError("projector pattern must be nonnegative");
    check_viewpoint(p.position, "projector.position");
  }

  if (s.boundary.axis < 0 || s.boundary.axis > 2) throw ValidationError("boundary_plane.axis must be x, y or z");
  if (s.boundary.offset < s.room.lo[s.boundary.axis] - tol || s.boundary.offset > s.room.hi[s.boundary.axis] + tol)
    throw ValidationError("boundary plane must lie on a face of or inside the room box");

  const auto& m = s.medium;
  if (!(m.rho0_G > 0.0)) throw ValidationError("medium.rho0_G must be > 0");
  if (!(m.T0 > 0.0)) throw ValidationError("medium.T0 must be > 0");
  if (m.T_in == m.T0) throw ValidationError("medium.Tin must differ from medium.T0");

  const auto& n = s.nondim;
  if (!(n.Re > 0.0) || !(n.Pe > 0.0)) throw ValidationError("nondim.Re and nondim.Pe must be > 0");
  if (!(n.L > 0.0) || !(n.U > 0.0)) throw ValidationError("nondim.L and nondim.U must be > 0");
  if (std::abs(n.e_g.norm() - 1.0) > 1e-9) throw ValidationError("nondim.e_g must be a unit vector");

  if (!(s.trace.step > 0.0)) throw ValidationError("trace.step must be > 0");
  if (s.trace.max_steps < 1) throw ValidationError("trace.max_steps must be >= 1");
  if (!(s.benchmark.plume.sigma > 0.0)) throw ValidationError("benchmark.plume.sigma must be > 0");
  if (s.benchmark.eval_grid < 2) throw ValidationError("benchmark.eval_grid must be >= 2");
  if (s.benchmark.measurement_spp < 1) throw ValidationError("benchmark.measurement_spp must be >= 1");
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene config: " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParseError("scene config " + path.string() + ": " + e.what());
  }
  return scene_from_json(j, path.parent_path());
}

PixelFootprint pixel_footprint(const Camera& cam, PixelIndex j) {
  if (j.row < 0 || j.row >= cam.rows || j.col < 0 || j.col >= cam.cols)
    throw std::out_of_range("pixel index out of range");
  PixelFootprint fp;
  fp.width = cam.sensor_width / cam.cols;
  fp.height = cam.sensor_height / cam.rows;
  // The sensor image is inverted: image column c maps to -right on the sensor,
  // image row r (top to bottom) maps to +up on the sensor.
  fp.axis_u = -cam.right();
  fp.axis_v = cam.up;
  const double su = ((j.col + 0.5) / cam.cols - 0.5) * cam.sensor_width;
  const double sv = ((j.row + 0.5) / cam.rows - 0.5) * cam.sensor_height;
  const Vec3 sensor_center = cam.position - cam.focal_length * cam.forward;
  fp.center = sensor_center + su * fp.axis_u + sv * fp.axis_v;
  fp.pinhole = cam.position;
  return fp;
}

}  // namespace bos
