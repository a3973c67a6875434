#include "commands.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "ktopo/beso.hpp"
#include "ktopo/config.hpp"
#include "ktopo/equilibrium.hpp"
#include "ktopo/errors.hpp"
#include "ktopo/fixtures.hpp"
#include "ktopo/patch_spec.hpp"
#include "ktopo/pull_test.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo::cli {

namespace fs = std::filesystem;

namespace {

/// Output is written to `<out>.partial` and renamed into place on commit, so a reader never sees
/// a half-written directory under the requested name.
class StagedDir {
 public:
  explicit StagedDir(fs::path out) : final_(std::move(out)) {
    if (final_.empty()) throw ConfigError("--out is required");
    std::error_code ec;
    if (fs::exists(final_, ec) && !(fs::is_directory(final_, ec) && fs::is_empty(final_, ec))) {
      throw ConfigError("output directory " + final_.string() + " already exists and is not empty");
    }
    stage_ = final_;
    stage_ += ".partial";
    fs::remove_all(stage_, ec);
    fs::create_directories(stage_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  fs::path operator/(const std::string& name) const { return stage_ / name; }

  void commit() {
    std::error_code ec;
    if (fs::exists(final_, ec)) fs::remove(final_);
    fs::rename(stage_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path stage_;
  bool committed_ = false;
};

RunConfig load_config(const CommonOptions& opts, bool required) {
  RunConfig cfg;
  if (!opts.config.empty()) {
    cfg = load_run_config(opts.config);
  } else if (required) {
    throw ConfigError("--config is required");
  }
  if (opts.threads) cfg.threads = *opts.threads;
  if (!opts.labels.empty()) cfg.labels = fs::absolute(opts.labels).lexically_normal();
  set_thread_count(cfg.threads);
  return cfg;
}

std::string frame_name(const char* pattern, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, i);
  return buf;
}

GarmentPatch patch_from(const RunConfig& cfg, const SurfaceMesh& rest) {
  const PatchSpec spec = load_patch_spec(cfg.patch);
  return extract_patch(rest, spec.faces, spec.subdivisions, spec.attachments);
}

}  // namespace

int cmd_simulate(const CommonOptions& opts) {
  RunConfig cfg = load_config(opts, true);
  if (cfg.body_rest.empty()) throw ConfigError("config: paths.body_rest is required");
  if (cfg.patch.empty()) throw ConfigError("config: paths.patch is required");
  std::vector<fs::path> needed{cfg.body_rest, cfg.patch};
  if (!cfg.body_target.empty()) needed.push_back(cfg.body_target);
  needed.insert(needed.end(), cfg.motion.begin(), cfg.motion.end());
  if (!cfg.labels.empty()) needed.push_back(cfg.labels);
  require_files(needed);

  std::vector<SurfaceMesh> frames{load_obj(cfg.body_rest)};
  if (!cfg.motion.empty()) {
    for (const auto& m : cfg.motion) frames.push_back(load_obj(m));
  } else if (!cfg.body_target.empty()) {
    frames.push_back(load_obj(cfg.body_target));
  }
  const int last = static_cast<int>(frames.size()) - 1;
  const PoseSequence poses(std::move(frames), 0, last);
  GarmentPatch patch = patch_from(cfg, poses.rest());
  if (!cfg.labels.empty()) patch.design = read_labels(cfg.labels, patch.element_count());

  StagedDir out(opts.out);
  const auto states = evaluate_sequence(patch, poses, cfg.materials, cfg.solver, cfg.weights);

  std::ostringstream energy, audit;
  energy << "frame,converged,iterations,grad_norm,E_total,E_body,E_garment,E_attach,E_garment_J\n";
  audit << "frame,min_phi,penetrating,unsupported,unsupported_after_penetration\n";
  bool failed = false;
  for (std::size_t f = 0; f < states.size(); ++f) {
    const EquilibriumState& s = states[f];
    if (!s.converged) {
      failed = true;
      std::cerr << "frame " << f << ": " << s.status << " (grad_norm " << format_double(s.grad_norm)
                << ")\n";
    }
    if (s.positions.size() > 0) {
      write_obj(out / frame_name("frame_%03d.obj", static_cast<int>(f)), unflatten(s.positions),
                patch.mesh.faces());
    }
    if (cfg.solver.record_log) {
      write_iteration_log(out / frame_name("frame_%03d_log.csv", static_cast<int>(f)), s.log);
    }
    energy << f << ',' << (s.converged ? 1 : 0) << ',' << s.iterations << ','
           << format_double(s.grad_norm) << ',' << format_double(s.energy.total) << ','
           << format_double(s.energy.body) << ',' << format_double(s.energy.garment) << ','
           << format_double(s.energy.attach) << ',' << format_double(s.garment_joules) << '\n';
    audit << f << ',' << format_double(s.min_phi) << ',' << s.penetrating << ',' << s.unsupported
          << ',' << s.unsupported_after_penetration << '\n';
  }
  write_text_file(out / "energy.csv", energy.str());
  write_text_file(out / "penetration.csv", audit.str());
  write_text_file(out / "config.ini", to_string(cfg));
  out.commit();
  std::cout << "simulated " << states.size() << " frame(s); final E_garment "
            << format_double(states.back().garment_joules) << " J\n";
  return failed ? kExitNumerical : kExitOk;
}

int cmd_optimize(const CommonOptions& opts) {
  RunConfig cfg = load_config(opts, true);
  if (cfg.body_rest.empty()) throw ConfigError("config: paths.body_rest is required");
  if (cfg.body_target.empty()) throw ConfigError("config: paths.body_target is required");
  if (cfg.patch.empty()) throw ConfigError("config: paths.patch is required");
  require_files({cfg.body_rest, cfg.body_target, cfg.patch});

  const PoseSequence poses({load_obj(cfg.body_rest), load_obj(cfg.body_target)}, 0, 1);
  const GarmentPatch patch = patch_from(cfg, poses.rest());

  StagedDir out(opts.out);
  write_text_file(out / "config.ini", to_string(cfg));
  const auto observer = [&](const BesoIteration& it) {
    write_labels(out / frame_name("iter_%04d.labels", it.iteration), it.design);
    std::cout << "iter " << it.iteration << " area " << format_double(it.area_fraction)
              << " density_norm " << format_double(it.density_norm) << " solve_iters "
              << it.solve_iterations << '\n'
              << std::flush;
  };
  const BesoTrace trace =
      run_beso(patch, poses, cfg.materials, cfg.solver, cfg.beso, cfg.weights, observer);
  write_trace_csv((out / "trace.csv").string(), trace);
  if (!trace.final_design.empty()) write_labels(out / "final.labels", trace.final_design);
  if (trace.final_positions.size() > 0) {
    write_obj(out / "final.obj", unflatten(trace.final_positions), patch.mesh.faces());
  }
  out.commit();
  if (trace.aborted) {
    std::cerr << "optimization aborted: " << trace.message << '\n';
    return kExitNumerical;
  }
  const double final_density = trace.iterations.empty() ? 0.0 : trace.iterations.back().density_norm;
  std::cout << trace.message << "\nfinal density_norm " << format_double(final_density) << '\n';
  return kExitOk;
}

int cmd_pulltest(const CommonOptions& opts, const PullOptions& pull) {
  RunConfig cfg = load_config(opts, false);
  if (!pull.stencil.empty()) {
    cfg.stencil = is_stencil_name(pull.stencil) ? pull.stencil
                                                : fs::absolute(pull.stencil).lexically_normal().string();
  }
  if (!pull.strains.empty()) cfg.strains = pull.strains;
  if (pull.resolution) cfg.pull.resolution = *pull.resolution;

  PullTestSpec spec = cfg.pull;
  if (is_stencil_name(cfg.stencil)) {
    spec.stencil = parse_stencil(cfg.stencil);
  } else {
    spec.stencil = Stencil::File;
    spec.stencil_file = cfg.stencil;
    require_files({spec.stencil_file});
  }
  const std::vector<double> strains = parse_strain_schedule(cfg.strains);
  const PullFixture fixture = build_pull_fixture(spec);

  StagedDir out(opts.out);
  const ForceCurve curve = run_pull_test(fixture, cfg.materials, strains, cfg.pull_solver);
  write_force_curve_csv(out / "force.csv", curve);
  write_labels(out / "stencil.labels", fixture.patch.design);
  write_text_file(out / "config.ini", to_string(cfg));
  out.commit();

  bool failed = false;
  for (const auto& p : curve.points) {
    if (!p.converged) {
      failed = true;
      std::cerr << "strain " << format_double(p.strain) << ": equilibrium not converged\n";
    }
  }
  std::cout << "stencil " << cfg.stencil << " reinforced fraction "
            << format_double(fixture.reinforced_fraction) << "; force at strain "
            << format_double(curve.points.back().strain) << ": "
            << format_double(curve.points.back().force) << " N\n";
  return failed ? kExitNumerical : kExitOk;
}

int cmd_fixture(const CommonOptions& opts, const FixtureOptions& fx) {
  Fixture f;
  std::ostringstream extra;
  if (fx.name == "cylinder-bend") {
    CylinderBendParams p;
    if (fx.theta) p.target_angle_deg = *fx.theta;
    if (fx.rest_theta) p.rest_angle_deg = *fx.rest_theta;
    if (fx.radius) p.radius = *fx.radius;
    if (fx.length) p.length = *fx.length;
    if (fx.bend_length) p.bend_length = *fx.bend_length;
    if (fx.circumferential) p.circumferential = *fx.circumferential;
    if (fx.axial) p.axial = *fx.axial;
    if (fx.subdivisions) p.subdivisions = *fx.subdivisions;
    f = make_cylinder_bend(p);
  } else if (fx.name == "plane") {
    PlaneParams p;
    if (fx.size) p.size = *fx.size;
    if (fx.resolution) p.resolution = *fx.resolution;
    if (fx.stretch) p.stretch = *fx.stretch;
    if (fx.subdivisions) p.subdivisions = *fx.subdivisions;
    f = make_plane(p);
  } else {
    throw ConfigError("unknown fixture '" + fx.name + "' (expected cylinder-bend or plane)");
  }
  StagedDir out(opts.out);
  write_obj(out / "rest.obj", f.rest);
  write_obj(out / "target.obj", f.target);
  write_text_file(out / "patch.txt", to_string(f.patch));
  write_text_file(out / "config.ini",
                  "[paths]\nbody_rest = rest.obj\nbody_target = target.obj\npatch = patch.txt\n");
  out.commit();
  std::cout << "fixture " << fx.name << ": " << f.rest.vertex_count() << " vertices, "
            << f.rest.face_count() << " faces, " << f.patch.faces.size() << " patch faces\n";
  return kExitOk;
}

}  // namespace ktopo::cli
