#include "bostomo/cli.hpp"

#include "bostomo/gradcheck.hpp"
#include "bostomo/io.hpp"
#include "bostomo/optim.hpp"
#include "bostomo/oracle.hpp"
#include "bostomo/parallel.hpp"
#include "bostomo/pinn.hpp"
#include "bostomo/renderer.hpp"
#include "bostomo/scene.hpp"
#include "bostomo/tracer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

namespace bos::cli {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef BOSTOMO_VERSION
#define BOSTOMO_VERSION "0.0.0"
#endif

const char* version() { return BOSTOMO_VERSION; }

namespace {

/// Scene source: a config path, or the snapshot stored in a manifest being replayed.
struct SceneSource {
  std::string path;
  std::optional<json> snapshot;
  fs::path snapshot_base;

  Scene load() const {
    if (snapshot) return scene_from_json(*snapshot, snapshot_base);
    return load_scene(path);
  }
};

struct Context {
  std::vector<std::string> argv;
  SceneSource scene;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

fs::path scene_base(const Context& ctx) {
  if (ctx.scene.snapshot) return ctx.scene.snapshot_base;
  return fs::absolute(fs::path(ctx.scene.path)).parent_path();
}

void write_manifest(const fs::path& path, const Context& ctx, const std::string& cmd, const Scene& scene,
                    const json& seeds) {
  json m;
  m["tool"] = "bos_tomo";
  m["version"] = version();
  m["subcommand"] = cmd;
  m["argv"] = ctx.argv;
  m["scene"] = scene_to_json(scene);
  m["scene_base_dir"] = scene_base(ctx).string();
  m["seeds"] = seeds;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path) << m.dump(2) << '\n';
}

Image to_image(const RasterImage& r) {
  Image img;
  img.rows = r.rows;
  img.cols = r.cols;
  img.data = r.data;
  return img;
}

void save_image(const fs::path& path, const Image& img, bool png) {
  write_pfm(path, img.rows, img.cols, img.data);
  if (png) {
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    fs::path p = path;
    write_png(p.replace_extension(".png"), img.rows, img.cols, img.data, *lo, *hi > *lo ? *hi : *lo + 1.0);
  }
}

/// Refractive index of a temperature volume (channel 0 in K), or the ambient constant.
std::shared_ptr<const ScalarField> eta_field(const Scene& scene, const std::string& volume) {
  if (volume.empty()) return std::make_shared<ConstantField>(scene.ambient_eta());
  auto grid = std::make_shared<const VoxelGrid>(read_voxgrid(volume));
  auto T = std::make_shared<GridField>(grid, 0);
  return std::make_shared<EtaFromTemperature>(T, scene.medium);
}

TrainConfig train_config(const Scene& scene, const std::string& path) {
  if (path.empty()) return scene.train;
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open train config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError("train config " + path + ": " + e.what());
  }
  return train_config_from_json(j.contains("train") ? j.at("train") : j, scene.train);
}

AnalyticFlow flow_by_name(const Scene& scene, const std::string& name) {
  if (name == "ambient") return ambient_flow(scene.medium);
  if (name == "plume") return gaussian_plume(scene.benchmark.plume, scene.medium, scene.nondim);
  throw ValidationError("unknown flow '" + name + "' (expected plume or ambient)");
}

json train_seeds(const TrainConfig& t) {
  return {{"init", t.init_seed}, {"sampling", t.sampling_seed}, {"render", t.render_seed}};
}

std::function<void(const HistoryRow&)> progress(std::ostream& err, int every, const std::string& label) {
  if (every <= 0) return {};
  return [&err, every, label](const HistoryRow& r) {
    if (r.iteration % every == 0)
      err << label << "it " << r.iteration << "  total " << r.terms.total << "  bos " << r.terms.bos << "  boundary "
          << r.terms.boundary << "  pde " << r.terms.pde << '\n';
  };
}

// --- subcommands -------------------------------------------------------------------------

struct RenderArgs {
  std::string volume;
  int spp = 2;
  std::uint64_t seed = 7;
  std::string integrator;
  double step = 0.0;
  bool png = false;
  std::string out;
};

void cmd_render(const Context& ctx, const RenderArgs& a) {
  Scene scene = ctx.scene.load();
  if (!a.integrator.empty()) {
    if (a.integrator == "nonlinear") scene.trace.integrator = Integrator::Nonlinear;
    else if (a.integrator == "quasilinear") scene.trace.integrator = Integrator::Quasilinear;
    else throw ValidationError("unknown integrator '" + a.integrator + "'");
  }
  if (a.step > 0.0) scene.trace.step = a.step;
  const auto eta = eta_field(scene, a.volume);
  const Image img = render_image(scene, *eta, a.spp, a.seed);
  fs::create_directories(a.out);
  save_image(fs::path(a.out) / "img.pfm", img, a.png);
  write_manifest(fs::path(a.out) / "manifest.json", ctx, "render", scene, {{"render", a.seed}});
  *ctx.out << "wrote " << (fs::path(a.out) / "img.pfm").string() << '\n';
}

struct TraceArgs {
  std::string volume;
  int row = 0;
  int col = 0;
  std::uint64_t seed = 7;
  std::string out;
};

void cmd_trace(const Context& ctx, const TraceArgs& a) {
  const Scene scene = ctx.scene.load();
  if (a.row < 0 || a.row >= scene.camera.rows || a.col < 0 || a.col >= scene.camera.cols)
    throw ValidationError("pixel outside the sensor");
  const auto eta = eta_field(scene, a.volume);
  const PixelSample s = pixel_samples(scene.camera, PixelIndex{a.row, a.col}, 1, a.seed).front();
  const CameraRay ray = prepare_camera_ray(scene, s, scene.trace.step, scene.trace.max_steps);
  fs::create_directories(a.out);
  std::ofstream csv(fs::path(a.out) / "path.csv");
  csv << "t,x,y,z,vx,vy,vz\n";
  if (ray.enters_room) {
    const RayPath path = trace(*eta, Ray::launch(*eta, ray.entry, s.v_s), scene.room, scene.trace, &scene.wall);
    for (const auto& p : path.samples)
      csv << format_double(p.t) << ',' << format_double(p.x[0]) << ',' << format_double(p.x[1]) << ','
          << format_double(p.x[2]) << ',' << format_double(p.v[0]) << ',' << format_double(p.v[1]) << ','
          << format_double(p.v[2]) << '\n';
  }
  write_manifest(fs::path(a.out) / "manifest.json", ctx, "trace", scene, {{"pixel", a.seed}});
  *ctx.out << (ray.enters_room ? "wrote " : "ray misses the room; wrote header only to ")
           << (fs::path(a.out) / "path.csv").string() << '\n';
}

struct SynthArgs {
  std::string flow = "plume";
  bool png = false;
  std::string out;
};

void cmd_synthesize(const Context& ctx, const SynthArgs& a) {
  const Scene scene = ctx.scene.load();
  const AnalyticFlow f = flow_by_name(scene, a.flow);
  verify_derivatives(f, scene.room);
  const auto& b = scene.benchmark;
  const Measurement m = synthesize_measurement(scene, f, b.measurement_spp, b.measurement_seed, b.measurement_step);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_image(dir / "ref.pfm", m.ref, a.png);
  save_image(dir / "flow.pfm", m.flow, a.png);
  write_voxgrid(dir / "boundary.vox", boundary_grid(scene, f));
  write_voxgrid(dir / "truth.vox", flow_grid(scene, [&](const Vec3& x) { return truth_state(f, x, scene.medium, scene.nondim); },
                                              b.eval_grid));
  write_manifest(dir / "manifest.json", ctx, "synthesize", scene, {{"measurement", b.measurement_seed}});
  *ctx.out << "wrote ref.pfm, flow.pfm, boundary.vox, truth.vox to " << dir.string() << '\n';
}

struct ReconArgs {
  std::string measurement;
  std::string boundary;
  std::string config;
  std::string resume;
  int iterations = 0;
  int progress_every = 0;
  std::string out;
};

void cmd_reconstruct(const Context& ctx, const ReconArgs& a) {
  const Scene scene = ctx.scene.load();
  TrainConfig cfg = train_config(scene, a.config);
  if (a.iterations > 0) cfg.iterations = a.iterations;
  const Image meas = to_image(read_pfm(a.measurement));
  std::optional<BoundaryReference> ref;
  if (!a.boundary.empty())
    ref = make_boundary_reference(read_voxgrid(a.boundary), scene, cfg.boundary.min_scale);
  else if (cfg.weights.lambda_boundary > 0.0)
    throw ValidationError("--boundary is required when the boundary loss weight is non-zero");
  TrainOptions opts;
  opts.out_dir = fs::path(a.out);
  if (!a.resume.empty()) opts.resume = fs::path(a.resume);
  opts.on_iteration = progress(*ctx.err, a.progress_every, "");
  Scene snap = scene;
  snap.train = cfg;
  write_manifest(fs::path(a.out) / "manifest.json", ctx, "reconstruct", snap, train_seeds(cfg));
  const TrainResult r = train(scene, meas, ref ? &*ref : nullptr, cfg, opts);
  const auto& t = r.history.empty() ? LossTerms{} : r.history.back().terms;
  *ctx.out << "finished " << cfg.iterations << " iterations; final loss " << t.total << '\n';
}

struct EvalArgs {
  std::string checkpoint;
  std::string truth = "plume";
  int grid = 0;
  std::string out;
};

void cmd_evaluate(const Context& ctx, const EvalArgs& a) {
  const Scene scene = ctx.scene.load();
  const NeuralField nf = NeuralField::load(a.checkpoint);
  const AnalyticFlow f = flow_by_name(scene, a.truth);
  verify_derivatives(f, scene.room);
  const int n = a.grid > 0 ? a.grid : scene.benchmark.eval_grid;
  const Metrics m = evaluate(nf, f, scene, n);
  const ResidualStats r = network_residual_stats(nf, scene, 16);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  json j = metrics_json(m);
  j["residual_rms"] = {{"mass", r.mass_rms}, {"momentum", r.mom_rms}, {"heat", r.heat_rms}};
  j["grid"] = n;
  std::ofstream(dir / "metrics.json") << j.dump(2) << '\n';
  write_voxgrid(dir / "error.vox", error_volume(nf, f, scene, n));
  write_manifest(dir / "manifest.json", ctx, "evaluate", scene, json::object());
  *ctx.out << "T rmse " << m.T.rmse << " K (max " << m.T.max_abs << " K), p rmse " << m.p.rmse << ", u rmse "
           << m.u.rmse << '\n';
}

struct StudyArgs {
  std::string config;
  int iterations = 0;
  int progress_every = 0;
  std::string out;
};

void cmd_study(const Context& ctx, const StudyArgs& a) {
  const Scene scene = ctx.scene.load();
  TrainConfig cfg = train_config(scene, a.config);
  if (a.iterations > 0) cfg.iterations = a.iterations;
  const AnalyticFlow f = flow_by_name(scene, "plume");
  verify_derivatives(f, scene.room);
  const auto& b = scene.benchmark;
  const fs::path dir(a.out);
  Scene snap = scene;
  snap.train = cfg;
  json seeds = train_seeds(cfg);
  seeds["measurement"] = b.measurement_seed;
  write_manifest(dir / "manifest.json", ctx, "study", snap, seeds);
  const Measurement m = synthesize_measurement(scene, f, b.measurement_spp, b.measurement_seed, b.measurement_step);
  fs::create_directories(dir / "measurement");
  write_pfm(dir / "measurement" / "ref.pfm", m.ref.rows, m.ref.cols, m.ref.data);
  write_pfm(dir / "measurement" / "flow.pfm", m.flow.rows, m.flow.cols, m.flow.data);
  VoxelGrid bgrid = boundary_grid(scene, f);
  write_voxgrid(dir / "measurement" / "boundary.vox", bgrid);
  const BoundaryReference ref = make_boundary_reference(std::move(bgrid), scene, cfg.boundary.min_scale);
  StudyOptions so;
  so.out_dir = dir;
  so.eval_grid = b.eval_grid;
  if (a.progress_every > 0) {
    std::ostream& err = *ctx.err;
    const int every = a.progress_every;
    so.on_iteration = [&err, every](const std::string& name, const HistoryRow& r) {
      if (r.iteration % every == 0)
        err << name << " it " << r.iteration << "  total " << r.terms.total << '\n';
    };
  }
  const StudyReport rep = regime_study(scene, f, m.flow, ref, cfg, so);
  std::ifstream summary(dir / "summary.txt");
  *ctx.out << summary.rdbuf();
  (void)rep;
}

struct GradArgs {
  std::uint64_t seed = 7;
  std::string out;
};

int cmd_gradcheck(const Context& ctx, const GradArgs& a) {
  const Scene scene = ctx.scene.load();
  const GradcheckReport rep = run_gradcheck(scene, a.seed);
  std::ostringstream text;
  for (const auto& e : rep.entries)
    text << (e.passed() ? "ok    " : "FAIL  ") << e.name << ": max rel error " << e.max_rel_error << " (tol "
         << e.tolerance << ", " << e.checks << " checks)\n";
  *ctx.out << text.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream(fs::path(a.out) / "gradcheck.txt") << text.str();
    write_manifest(fs::path(a.out) / "manifest.json", ctx, "gradcheck", scene, {{"gradcheck", a.seed}});
  }
  if (!rep.passed()) {
    *ctx.err << "gradient check failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct FieldArgs {
  std::string checkpoint;
  int grid = 64;
  std::string out;
};

void cmd_eval_field(const Context& ctx, const FieldArgs& a) {
  const Scene scene = ctx.scene.load();
  const NeuralField nf = NeuralField::load(a.checkpoint);
  if (a.grid < 2) throw ValidationError("--grid must be >= 2");
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_voxgrid(out, flow_grid(scene, nf, a.grid));
  fs::path man = out;
  man += ".manifest.json";
  write_manifest(man, ctx, "eval-field", scene, json::object());
  *ctx.out << "wrote " << out.string() << '\n';
}

std::vector<std::string> strip_globals(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& s = args[i];
    if (s == "--threads" || s == "--from-manifest") {
      ++i;
      continue;
    }
    if (s.rfind("--threads=", 0) == 0 || s.rfind("--from-manifest=", 0) == 0) continue;
    out.push_back(s);
  }
  return out;
}

/// Replaces the value of `--out` in a recorded argv, or appends one.
std::vector<std::string> with_out(std::vector<std::string> argv, const std::string& out) {
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out" && i + 1 < argv.size()) {
      argv[i + 1] = out;
      return argv;
    }
    if (argv[i].rfind("--out=", 0) == 0) {
      argv[i] = "--out=" + out;
      return argv;
    }
  }
  argv.push_back("--out");
  argv.push_back(out);
  return argv;
}

int dispatch(const std::vector<std::string>& args, Context& ctx, bool replay);

int replay_manifest(const std::string& path, const std::string& out_override, Context& ctx) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open manifest " + path);
  json m;
  try {
    m = json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError("manifest " + path + ": " + e.what());
  }
  if (!m.contains("argv") || !m.contains("scene")) throw ValidationError("manifest lacks argv or scene");
  std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
  if (!out_override.empty()) argv = with_out(argv, out_override);
  ctx.scene.snapshot = m.at("scene");
  ctx.scene.snapshot_base = m.value("scene_base_dir", std::string());
  return dispatch(argv, ctx, true);
}

int dispatch(const std::vector<std::string>& args, Context& ctx, bool replay) {
  CLI::App app{"Single-view BOS tomography toolkit", "bos_tomo"};
  app.set_version_flag("--version", std::string(version()));
  int threads = 0;
  std::string manifest;
  std::string replay_out;
  app.add_option("--threads", threads, "Worker threads (falls back to BOS_TOMO_THREADS)")->check(CLI::PositiveNumber);
  auto* from = app.add_option("--from-manifest", manifest, "Re-run the command recorded in a manifest");
  app.add_option("--out", replay_out, "Output location when replaying a manifest")->needs(from);

  auto scene_opt = [&](CLI::App* sub) {
    auto* o = sub->add_option("--scene", ctx.scene.path, "Scene config (JSON)");
    if (!replay) o->required()->check(CLI::ExistingFile);
  };

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Render the sensor image for a temperature volume");
  scene_opt(render);
  render->add_option("--volume", ra.volume, "Temperature VOXGRID [K]; ambient when omitted")->check(CLI::ExistingFile);
  render->add_option("--spp", ra.spp, "Samples per pixel")->check(CLI::PositiveNumber);
  render->add_option("--seed", ra.seed, "Sample seed");
  render->add_option("--integrator", ra.integrator, "nonlinear or quasilinear")
      ->check(CLI::IsMember({"nonlinear", "quasilinear"}));
  render->add_option("--step", ra.step, "Trace step [m]")->check(CLI::PositiveNumber);
  render->add_flag("--png", ra.png, "Also write a PNG preview");
  render->add_option("--out", ra.out, "Output directory")->required();

  TraceArgs ta;
  auto* tr = app.add_subcommand("trace", "Trace one camera ray and dump its path as CSV");
  scene_opt(tr);
  tr->add_option("--volume", ta.volume, "Temperature VOXGRID [K]")->check(CLI::ExistingFile);
  tr->add_option("--row", ta.row, "Pixel row")->required();
  tr->add_option("--col", ta.col, "Pixel column")->required();
  tr->add_option("--seed", ta.seed, "Sample seed");
  tr->add_option("--out", ta.out, "Output directory")->required();

  SynthArgs sa;
  auto* syn = app.add_subcommand("synthesize", "Render reference and flow images of an analytic flow");
  scene_opt(syn);
  syn->add_option("--flow", sa.flow, "plume or ambient")->check(CLI::IsMember({"plume", "ambient"}));
  syn->add_flag("--png", sa.png, "Also write PNG previews");
  syn->add_option("--out", sa.out, "Output directory")->required();

  ReconArgs rc;
  auto* rec = app.add_subcommand("reconstruct", "Train a neural field on a measurement");
  scene_opt(rec);
  rec->add_option("--measurement", rc.measurement, "Flow image (PFM)")->required()->check(CLI::ExistingFile);
  rec->add_option("--boundary", rc.boundary, "Boundary VOXGRID")->check(CLI::ExistingFile);
  rec->add_option("--config", rc.config, "Train config (JSON); defaults to the scene's train block")
      ->check(CLI::ExistingFile);
  rec->add_option("--resume", rc.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  rec->add_option("--iterations", rc.iterations, "Override the iteration count")->check(CLI::PositiveNumber);
  rec->add_option("--progress", rc.progress_every, "Print losses every N iterations");
  rec->add_option("--out", rc.out, "Run directory")->required();

  EvalArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Compare a checkpoint against an analytic flow");
  scene_opt(ev);
  ev->add_option("--checkpoint", ea.checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", ea.truth, "plume or ambient")->check(CLI::IsMember({"plume", "ambient"}));
  ev->add_option("--grid", ea.grid, "Evaluation grid nodes per axis")->check(CLI::PositiveNumber);
  ev->add_option("--out", ea.out, "Output directory")->required();

  StudyArgs st;
  auto* study = app.add_subcommand("study", "Three-regime comparison on the plume benchmark");
  scene_opt(study);
  study->add_option("--config", st.config, "Train config (JSON)")->check(CLI::ExistingFile);
  study->add_option("--iterations", st.iterations, "Override the iteration count")->check(CLI::PositiveNumber);
  study->add_option("--progress", st.progress_every, "Print losses every N iterations");
  study->add_option("--out", st.out, "Output directory")->required();

  GradArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference derivative suite");
  scene_opt(gc);
  gc->add_option("--seed", ga.seed, "Instance seed");
  gc->add_option("--out", ga.out, "Optional output directory");

  FieldArgs fa;
  auto* ef = app.add_subcommand("eval-field", "Export T [K], p, u [m/s] of a checkpoint on a grid");
  scene_opt(ef);
  ef->add_option("--checkpoint", fa.checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
  ef->add_option("--grid", fa.grid, "Nodes per axis");
  ef->add_option("--out", fa.out, "Output VOXGRID path")->required();

  app.require_subcommand(0, 1);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
    if (!from->count() && app.get_subcommands().empty())
      throw CLI::RequiredError("a subcommand or --from-manifest");
    if (from->count() && !app.get_subcommands().empty())
      throw CLI::ValidationError("--from-manifest", "cannot be combined with a subcommand");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, *ctx.out, *ctx.err);
    if (code == 0) return kExitOk;
    *ctx.err << app.help();
    return kExitValidation;
  }

  if (threads > 0) set_threads(threads);
  if (from->count()) return replay_manifest(manifest, replay_out, ctx);
  ctx.argv = strip_globals(args);

  if (render->parsed()) cmd_render(ctx, ra);
  else if (tr->parsed()) cmd_trace(ctx, ta);
  else if (syn->parsed()) cmd_synthesize(ctx, sa);
  else if (rec->parsed()) cmd_reconstruct(ctx, rc);
  else if (ev->parsed()) cmd_evaluate(ctx, ea);
  else if (study->parsed()) cmd_study(ctx, st);
  else if (gc->parsed()) return cmd_gradcheck(ctx, ga);
  else if (ef->parsed()) cmd_eval_field(ctx, fa);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  try {
    return dispatch(args, ctx, false);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace bos::cli
