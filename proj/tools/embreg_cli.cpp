// embreg: command-line driver for the registration stages.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "embreg/affine.hpp"
#include "embreg/coarse.hpp"
#include "embreg/config.hpp"
#include "embreg/features.hpp"
#include "embreg/instance.hpp"
#include "embreg/match.hpp"
#include "embreg/metrics.hpp"
#include "embreg/parallel.hpp"
#include "embreg/pipeline.hpp"
#include "embreg/synth.hpp"
#include "embreg/transform.hpp"
#include "embreg/vol1.hpp"

namespace fs = std::filesystem;
using namespace embreg;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override one config key (key=value)")->allow_extra_args(false);
    cmd->add_option("--threads", threads, "worker threads (1 = deterministic reference)")->check(CLI::PositiveNumber);
  }

  PipelineConfig load() const {
    PipelineConfig c = load_config(config_path, overrides);
    if (threads > 0) c.threads = threads;
    validate(c);
    set_thread_count(c.threads);
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

MatchSet load_matches(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return read_matches(in);
}

AffineTransform load_affine(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptContainer, path.string() + ": " + e.what());
  }
  return affine_from_json(j.is_object() && j.contains("affine") ? j["affine"] : j);
}

void print_report(const RegistrationReport& report, const std::string& json_path) {
  std::cout << format_table(report);
  if (!json_path.empty()) write_text(json_path, to_json(report).dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-driven 3D registration"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic moving/fixed pair");
  SynthSpec spec;
  std::vector<int> size{24, 24, 24};
  std::string synth_out;
  double max_degrees = 10.0, max_translation = 3.0;
  int landmark_step = 4;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--size", size, "D H W")->expected(3);
  synth->add_option("--channels", spec.channels);
  synth->add_option("--feature-sigma", spec.feature_sigma);
  synth->add_option("--amplitude", spec.warp_amplitude, "max |v| of the warp in voxels");
  synth->add_option("--warp-sigma", spec.warp_sigma);
  synth->add_option("--labels", spec.label_count);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--max-degrees", max_degrees);
  synth->add_option("--max-translation", max_translation);
  synth->add_option("--landmark-step", landmark_step);

  // match
  auto* match = app.add_subcommand("match", "cycle-consistent feature matching");
  Common match_common;
  match_common.attach(match);
  std::string moving_path, fixed_path, out_path;
  match->add_option("--moving", moving_path, "moving bundle manifest")->required();
  match->add_option("--fixed", fixed_path, "fixed bundle manifest")->required();
  match->add_option("--out", out_path, "matches text file (feature-grid coordinates)")->required();

  // affine
  auto* affine = app.add_subcommand("affine", "least-squares affine from matches");
  Common affine_common;
  affine_common.attach(affine);
  std::string matches_path;
  affine->add_option("--matches", matches_path)->required();
  affine->add_option("--out", out_path, "affine JSON")->required();

  // coarse
  auto* coarse = app.add_subcommand("coarse", "strided coarse displacement from matches");
  Common coarse_common;
  coarse_common.attach(coarse);
  std::string affine_path;
  coarse->add_option("--matches", matches_path)->required();
  coarse->add_option("--affine", affine_path, "affine JSON (identity if omitted)");
  coarse->add_option("--fixed", fixed_path, "fixed bundle manifest (grid)")->required();
  coarse->add_option("--out", out_path, "coarse lattice VOL1")->required();

  // instance
  auto* instance = app.add_subcommand("instance", "dense instance optimization");
  Common instance_common;
  instance_common.attach(instance);
  std::string transform_path;
  instance->add_option("--moving", moving_path)->required();
  instance->add_option("--fixed", fixed_path)->required();
  instance->add_option("--prior", transform_path, "transform manifest to refine");
  instance->add_option("--out", out_path, "output transform manifest")->required();

  // register
  auto* reg = app.add_subcommand("register", "full staged registration");
  Common reg_common;
  reg_common.attach(reg);
  std::string report_path;
  reg->add_option("--moving", moving_path)->required();
  reg->add_option("--fixed", fixed_path)->required();
  reg->add_option("--out", out_path, "output transform manifest")->required();
  reg->add_option("--report", report_path, "report JSON");

  // eval
  auto* eval = app.add_subcommand("eval", "metrics of a transform on a pair");
  eval->add_option("--moving", moving_path)->required();
  eval->add_option("--fixed", fixed_path)->required();
  eval->add_option("--transform", transform_path)->required();
  eval->add_option("--report", report_path, "report JSON");

  // jacobian
  auto* jac = app.add_subcommand("jacobian", "Jacobian determinant and folding fraction");
  std::string field_path;
  auto* jac_t = jac->add_option("--transform", transform_path, "transform manifest");
  auto* jac_f = jac->add_option("--field", field_path, "displacement or velocity VOL1");
  jac_t->excludes(jac_f);
  jac->add_option("--out", out_path, "determinant VOL1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*jac && transform_path.empty() && field_path.empty()) {
    std::cerr << "jacobian: one of --transform or --field is required\n";
    return 2;
  }

  try {
    if (*synth) {
      if (size.size() != 3) fail(ErrorKind::InvalidConfig, "--size needs D H W");
      spec.shape = GridShape(size[0], size[1], size[2]);
      const fs::path dir(synth_out);
      fs::create_directories(dir);
      const Atlas atlas = make_atlas(spec);
      const VelocityField v = random_smooth_warp(spec);
      const AffineTransform a = random_affine(spec.shape, spec.seed, max_degrees, max_translation);
      const SyntheticPair pair = make_pair(atlas, v, a, landmark_step);
      save_bundle(dir / "moving.json", pair.moving);
      save_bundle(dir / "fixed.json", pair.fixed);
      save_transform(dir / "ground_truth.json", pair.ground_truth);
      nlohmann::json manifest;
      manifest["moving"] = "moving.json";
      manifest["fixed"] = "fixed.json";
      manifest["ground_truth"] = "ground_truth.json";
      manifest["seed"] = spec.seed;
      manifest["shape"] = size;
      manifest["channels"] = spec.channels;
      manifest["warp_amplitude"] = spec.warp_amplitude;
      manifest["generating_affine"] = affine_to_json(a);
      write_text(dir / "manifest.json", manifest.dump(2) + "\n");
      std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
    } else if (*match) {
      const PipelineConfig c = match_common.load();
      const MatchSet m = match_features(c, load_bundle(moving_path).features, load_bundle(fixed_path).features);
      std::ofstream out(out_path);
      if (!out) fail(ErrorKind::Io, "cannot write " + out_path);
      write_matches(out, m);
      std::cout << m.size() << " matches\n";
    } else if (*affine) {
      const PipelineConfig c = affine_common.load();
      const AffineTransform a = rescale_affine(fit_affine(load_matches(matches_path)), c.feature_scale);
      nlohmann::json j;
      j["affine"] = affine_to_json(a);
      write_text(out_path, j.dump(2) + "\n");
    } else if (*coarse) {
      const PipelineConfig c = coarse_common.load();
      const AffineTransform a = affine_path.empty() ? AffineTransform::identity() : load_affine(affine_path);
      const MatchSet m = matches_to_image_grid(load_matches(matches_path), c.feature_scale);
      const GridShape grid = load_bundle(fixed_path).intensity.shape;
      const CoarseResult r = optimize_coarse_traced(m, a, grid, c.coarse_stride, c.coarse);
      write_vol1(out_path, to_vol1(r.field));
      std::cout << "objective " << r.trace.history.front() << " -> " << r.trace.history.back() << " in "
                << r.trace.iterations << " iterations\n";
    } else if (*instance) {
      PipelineConfig c = instance_common.load();
      const Bundle moving = load_bundle(moving_path);
      const Bundle fixed = load_bundle(fixed_path);
      c.affine_enabled = false;
      c.coarse_enabled = false;
      c.instance_enabled = true;
      const CompositeTransform prior = transform_path.empty() ? CompositeTransform::identity(fixed.intensity.shape)
                                                              : load_transform(transform_path);
      const PointMap map = compose(prior);
      const FeatureMap mf =
          warp_features(features_to_image_grid(moving.features, c.feature_scale, moving.intensity.shape), map);
      const FeatureMap ff = features_to_image_grid(fixed.features, c.feature_scale, fixed.intensity.shape);
      const bool use_intensity = c.instance.intensity != IntensityTerm::None;
      ScalarVolume mi;
      if (use_intensity) mi = warp_scalar(moving.intensity, map);
      const InstanceProblem problem{mf, ff, use_intensity ? &mi : nullptr, use_intensity ? &fixed.intensity : nullptr};
      InstanceResult r = optimize_instance(problem, DisplacementField(fixed.intensity.shape), c.instance);
      save_transform(out_path, CompositeTransform(prior.affine(), prior.coarse(), std::move(r.displacement)));
      std::cout << "objective " << r.trace.history.front() << " -> " << r.trace.history.back() << " in "
                << r.trace.iterations << " iterations\n";
    } else if (*reg) {
      const PipelineConfig c = reg_common.load();
      const PipelineResult r = run_pipeline(c, load_bundle(moving_path), load_bundle(fixed_path));
      save_transform(out_path, r.transform);
      print_report(r.report, report_path);
    } else if (*eval) {
      const Bundle moving = load_bundle(moving_path);
      const Bundle fixed = load_bundle(fixed_path);
      const CompositeTransform t = load_transform(transform_path);
      const Evaluation before = evaluate(CompositeTransform::identity(fixed.intensity.shape), moving, fixed);
      const Evaluation after = evaluate(t, moving, fixed);
      RegistrationReport report;
      if (before.dice) report.initial_mean_dice = before.dice->mean;
      report.initial_landmark_error = before.landmark_error;
      if (after.dice) {
        report.per_label_dice = after.dice->per_label;
        report.mean_dice = after.dice->mean;
      }
      report.mean_landmark_error = after.landmark_error;
      report.folding_fraction = after.folding_fraction;
      print_report(report, report_path);
    } else if (*jac) {
      ScalarVolume det;
      if (!transform_path.empty()) {
        det = jacobian_determinant(compose(load_transform(transform_path)));
      } else {
        const Vol1 c = read_vol1(field_path);
        const auto kind = c.attributes.find("kind");
        const std::string k = kind == c.attributes.end() ? "displacement" : kind->second;
        if (k == "velocity") {
          det = jacobian_determinant(integrate_svf(velocity_from(c)));
        } else if (k == "coarse") {
          const CoarseDisplacementField u = coarse_from(c);
          const Index3& n = u.lattice.shape.dims;
          det = jacobian_determinant(upsample_coarse(u, GridShape(n[0] * u.stride, n[1] * u.stride, n[2] * u.stride)));
        } else {
          det = jacobian_determinant(displacement_from(c));
        }
      }
      if (!out_path.empty()) {
        Vol1 c = to_vol1(det);
        c.attributes["kind"] = "jacobian";
        write_vol1(out_path, c);
      }
      std::cout << "folding_fraction " << folding_fraction(det) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
