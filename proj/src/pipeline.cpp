#include "embreg/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "embreg/affine.hpp"
#include "embreg/features.hpp"
#include "embreg/instance.hpp"
#include "embreg/parallel.hpp"
#include "embreg/vol1.hpp"

namespace embreg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
auto in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage '") + stage + "': " + e.what());
  }
}

StageReport stage_report(const char* name, double seconds, const Evaluation& e) {
  StageReport r;
  r.name = name;
  r.seconds = seconds;
  if (e.dice) r.mean_dice = e.dice->mean;
  r.landmark_error = e.landmark_error;
  r.folding_fraction = e.folding_fraction;
  return r;
}

void add_trace(StageReport& r, const DescentResult& trace) {
  r.extras["iterations"] = trace.iterations;
  if (!trace.history.empty()) {
    r.extras["objective_initial"] = trace.history.front();
    r.extras["objective_final"] = trace.history.back();
  }
}

}  // namespace

MatchSet match_features(const PipelineConfig& config, const FeatureMap& moving, const FeatureMap& fixed) {
  return filter_matches(sscc(moving, fixed, config.match_step, config.match_iterations), config.epsilon);
}

MatchSet matches_to_image_grid(const MatchSet& matches, int scale) {
  if (scale == 1) return matches;
  const double shift = 0.5 * (scale - 1);
  MatchSet out = matches;
  for (Match& m : out.pairs)
    for (int a = 0; a < 3; ++a) {
      m.moving[a] = scale * m.moving[a] + shift;
      m.fixed[a] = scale * m.fixed[a] + shift;
    }
  return out;
}

Evaluation evaluate(const CompositeTransform& transform, const Bundle& moving, const Bundle& fixed) {
  Evaluation e;
  const PointMap map = compose(transform);
  if (moving.labels && fixed.labels) e.dice = dice(warp_labels(*moving.labels, map), *fixed.labels);
  if (!moving.landmarks.empty() || !fixed.landmarks.empty())
    e.landmark_error =
        landmark_error(moving.landmarks, fixed.landmarks, [&](const Vec3& p) { return transform.map_point(p); },
                       moving.intensity.shape.spacing);
  e.folding_fraction = folding_fraction(jacobian_determinant(map));
  return e;
}

PipelineResult run_pipeline(const PipelineConfig& config, const Bundle& moving, const Bundle& fixed) {
  validate(config);
  set_thread_count(config.threads);
  const GridShape& grid = fixed.intensity.shape;
  validate(grid);
  validate(moving.intensity.shape);
  const int scale = config.feature_scale;

  PipelineResult out;
  RegistrationReport& report = out.report;

  const Evaluation initial = evaluate(CompositeTransform::identity(grid), moving, fixed);
  if (initial.dice) report.initial_mean_dice = initial.dice->mean;
  report.initial_landmark_error = initial.landmark_error;

  if (config.affine_enabled || config.coarse_enabled) {
    const auto t0 = Clock::now();
    const MatchSet feature_matches =
        in_stage("match", [&] { return match_features(config, moving.features, fixed.features); });
    out.matches = matches_to_image_grid(feature_matches, scale);
    report.stage_timings["match"] = seconds_since(t0);

    if (config.affine_enabled) {
      const auto t1 = Clock::now();
      const AffineTransform a = in_stage("affine", [&] {
        if (feature_matches.empty()) fail(ErrorKind::EmptyMatchSet, "no matches above the similarity threshold");
        return rescale_affine(fit_affine(feature_matches), scale);
      });
      const double secs = seconds_since(t1);
      out.transform = CompositeTransform(a, DisplacementField(grid), DisplacementField(grid));
      StageReport r = stage_report("affine", secs, evaluate(out.transform, moving, fixed));
      r.extras["matches"] = static_cast<double>(feature_matches.size());
      r.extras["residual"] = affine_residual(a, out.matches) / std::max<std::size_t>(1, out.matches.size());
      report.stage_timings["affine"] = secs;
      report.stages.push_back(std::move(r));
    } else {
      out.transform = CompositeTransform::identity(grid);
    }

    if (config.coarse_enabled) {
      const auto t1 = Clock::now();
      const AffineTransform& a = out.transform.affine();
      const CoarseResult coarse = in_stage("coarse", [&] {
        return optimize_coarse_traced(out.matches, a, grid, config.coarse_stride, config.coarse);
      });
      out.coarse = coarse.field;
      out.transform = CompositeTransform(a, coarse_to_fixed_frame(coarse.field, a, grid), DisplacementField(grid));
      const double secs = seconds_since(t1);
      StageReport r = stage_report("coarse", secs, evaluate(out.transform, moving, fixed));
      r.extras["matches"] = static_cast<double>(out.matches.size());
      add_trace(r, coarse.trace);
      report.stage_timings["coarse"] = secs;
      report.stages.push_back(std::move(r));
    }
  } else {
    out.transform = CompositeTransform::identity(grid);
  }

  if (config.instance_enabled) {
    const auto t1 = Clock::now();
    InstanceResult inst = in_stage("instance", [&] {
      const PointMap prior = compose(out.transform);
      const FeatureMap moving_features = features_to_image_grid(moving.features, scale, moving.intensity.shape);
      const FeatureMap fixed_features = features_to_image_grid(fixed.features, scale, grid);
      const FeatureMap warped_features = warp_features(moving_features, prior);
      const bool use_intensity = config.instance.intensity != IntensityTerm::None;
      ScalarVolume warped_intensity;
      if (use_intensity) warped_intensity = warp_scalar(moving.intensity, prior);
      const InstanceProblem problem{warped_features, fixed_features, use_intensity ? &warped_intensity : nullptr,
                                    use_intensity ? &fixed.intensity : nullptr};
      return optimize_instance(problem, DisplacementField(grid), config.instance);
    });
    out.transform = CompositeTransform(out.transform.affine(), out.transform.coarse(), std::move(inst.displacement));
    const double secs = seconds_since(t1);
    StageReport r = stage_report("instance", secs, evaluate(out.transform, moving, fixed));
    add_trace(r, inst.trace);
    report.stage_timings["instance"] = secs;
    report.stages.push_back(std::move(r));
  }

  const auto t2 = Clock::now();
  const Evaluation final_eval = evaluate(out.transform, moving, fixed);
  if (final_eval.dice) {
    report.per_label_dice = final_eval.dice->per_label;
    report.mean_dice = final_eval.dice->mean;
  }
  report.mean_landmark_error = final_eval.landmark_error;
  report.folding_fraction = final_eval.folding_fraction;
  report.stage_timings["evaluate"] = seconds_since(t2);
  return out;
}

nlohmann::json affine_to_json(const AffineTransform& a) {
  const auto v = a.row_major();
  return nlohmann::json(std::vector<double>(v.begin(), v.end()));
}

AffineTransform affine_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 16) fail(ErrorKind::CorruptContainer, "affine must be 16 numbers");
  std::array<double, 16> v{};
  for (std::size_t i = 0; i < 16; ++i) {
    if (!j[i].is_number()) fail(ErrorKind::CorruptContainer, "affine entries must be numbers");
    v[i] = j[i].get<double>();
  }
  return AffineTransform::from_row_major(v);
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptContainer, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::string member(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) fail(ErrorKind::CorruptContainer, std::string("manifest lacks '") + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

void save_transform(const std::filesystem::path& manifest, const CompositeTransform& transform) {
  const std::string stem = manifest.stem().string();
  const std::string coarse_name = stem + ".coarse.vol1";
  const std::string dense_name = stem + ".dense.vol1";
  const auto dir = manifest.parent_path();
  write_vol1(dir / coarse_name, to_vol1(transform.coarse()));
  write_vol1(dir / dense_name, to_vol1(transform.dense()));
  nlohmann::json j;
  j["affine"] = affine_to_json(transform.affine());
  j["coarse"] = coarse_name;
  j["dense"] = dense_name;
  write_json(manifest, j);
}

CompositeTransform load_transform(const std::filesystem::path& manifest) {
  const nlohmann::json j = read_json(manifest);
  if (!j.contains("affine") || !j.contains("coarse") || !j.contains("dense"))
    fail(ErrorKind::CorruptContainer, "transform manifest needs affine, coarse and dense");
  const auto dir = manifest.parent_path();
  const Vol1 coarse = read_vol1(dir / member(j, "coarse"));
  const Vol1 dense = read_vol1(dir / member(j, "dense"));
  return CompositeTransform(affine_from_json(j["affine"]), displacement_from(coarse), displacement_from(dense));
}


void save_bundle(const std::filesystem::path& manifest, const Bundle& bundle) {
  const std::string stem = manifest.stem().string();
  const auto dir = manifest.parent_path();
  nlohmann::json j;
  j["intensity"] = stem + ".intensity.vol1";
  j["features"] = stem + ".features.vol1";
  write_vol1(dir / j["intensity"].get<std::string>(), to_vol1(bundle.intensity));
  write_vol1(dir / j["features"].get<std::string>(), to_vol1(bundle.features));
  if (bundle.labels) {
    j["labels"] = stem + ".labels.vol1";
    write_vol1(dir / j["labels"].get<std::string>(), to_vol1(*bundle.labels));
  }
  j["landmarks"] = nlohmann::json::array();
  for (const Vec3& p : bundle.landmarks) j["landmarks"].push_back({p[0], p[1], p[2]});
  write_json(manifest, j);
}

Bundle load_bundle(const std::filesystem::path& manifest) {
  const nlohmann::json j = read_json(manifest);
  const auto dir = manifest.parent_path();
  Bundle b;
  b.intensity = scalar_from(read_vol1(dir / member(j, "intensity")));
  b.features = features_from(read_vol1(dir / member(j, "features")));
  if (j.contains("labels")) b.labels = labels_from(read_vol1(dir / member(j, "labels")));
  if (j.contains("landmarks")) {
    for (const auto& p : j["landmarks"]) {
      if (!p.is_array() || p.size() != 3) fail(ErrorKind::CorruptContainer, "landmarks must be [z, y, x] triples");
      b.landmarks.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
  }
  return b;
}

}  // namespace embreg
