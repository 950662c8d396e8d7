#include "embreg/instance.hpp"

#include <cmath>

#include "embreg/metrics.hpp"
#include "embreg/parallel.hpp"
#include "embreg/simd/kernels.hpp"

namespace embreg {

void validate(const InstanceObjectiveConfig& config) {
  if (config.lambda_sim < 0.0 || config.lambda_reg < 0.0)
    fail(ErrorKind::InvalidConfig, "instance loss weights must be >= 0");
  if (config.intensity == IntensityTerm::Lncc && (config.lncc_window < 3 || config.lncc_window % 2 == 0))
    fail(ErrorKind::InvalidConfig, "LNCC window must be odd and >= 3");
  if (config.svf_steps < 0) fail(ErrorKind::InvalidConfig, "SVF steps must be >= 0");
}

double sam_loss(const FeatureMap& warped, const FeatureMap& fixed) {
  if (!warped.shape().same_dims(fixed.shape())) fail(ErrorKind::ShapeMismatch, "feature maps differ in shape");
  if (warped.channels() != fixed.channels()) fail(ErrorKind::DimensionMismatch, "feature channel counts differ");
  const std::size_t n = fixed.voxel_count();
  std::vector<double> dots(n), wn(n), fn(n);
  const auto& k = simd::active();
  k.voxel_dot(warped.data().data(), fixed.data().data(), fixed.channels(), n, n, dots.data());
  k.voxel_dot(warped.data().data(), warped.data().data(), fixed.channels(), n, n, wn.data());
  k.voxel_dot(fixed.data().data(), fixed.data().data(), fixed.channels(), n, n, fn.data());
  const double mask2 = kMaskNorm * kMaskNorm;
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (wn[v] < mask2 || fn[v] < mask2) continue;
    sum += 1.0 - dots[v];
    ++valid;
  }
  if (valid == 0) fail(ErrorKind::EmptyOverlap, "every voxel is masked");
  return sum / static_cast<double>(valid);
}

template <class Tag>
double reg_loss(const VectorField<Tag>& field) {
  const GridShape& g = field.shape;
  double sum = 0.0;
  for (int z = 0; z < g.dims[0]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[2]; ++x) {
        const Vec3& here = field.at(z, y, x);
        if (z + 1 < g.dims[0]) {
          const Vec3 d = field.at(z + 1, y, x) - here;
          sum += dot(d, d);
        }
        if (y + 1 < g.dims[1]) {
          const Vec3 d = field.at(z, y + 1, x) - here;
          sum += dot(d, d);
        }
        if (x + 1 < g.dims[2]) {
          const Vec3 d = field.at(z, y, x + 1) - here;
          sum += dot(d, d);
        }
      }
  return sum / static_cast<double>(g.voxel_count());
}

template <class Tag>
std::vector<Vec3> reg_gradient(const VectorField<Tag>& field) {
  const GridShape& g = field.shape;
  std::vector<Vec3> grad(g.voxel_count());
  const double scale = 2.0 / static_cast<double>(g.voxel_count());
  const std::array<std::size_t, 3> step{static_cast<std::size_t>(g.dims[1]) * static_cast<std::size_t>(g.dims[2]),
                                        static_cast<std::size_t>(g.dims[2]), 1};
  for (std::size_t v = 0; v < grad.size(); ++v) {
    const Index3 idx = g.unravel(v);
    for (std::size_t a = 0; a < 3; ++a) {
      if (idx[a] + 1 >= g.dims[a]) continue;
      const Vec3 d = field.vectors[v + step[a]] - field.vectors[v];
      grad[v + step[a]] += scale * d;
      grad[v] -= scale * d;
    }
  }
  return grad;
}

template double reg_loss(const DisplacementField&);
template double reg_loss(const VelocityField&);
template std::vector<Vec3> reg_gradient(const DisplacementField&);
template std::vector<Vec3> reg_gradient(const VelocityField&);

namespace {

void check_problem(const GridShape& field_shape, const InstanceProblem& p, const InstanceObjectiveConfig& config) {
  validate(config);
  if (!field_shape.same_dims(p.fixed_features.shape()))
    fail(ErrorKind::ShapeMismatch, "instance field must live on the fixed feature grid");
  if (p.moving_features.channels() != p.fixed_features.channels())
    fail(ErrorKind::DimensionMismatch, "feature channel counts differ");
  if (config.intensity != IntensityTerm::None) {
    if (p.moving_intensity == nullptr || p.fixed_intensity == nullptr)
      fail(ErrorKind::InvalidConfig, "intensity term selected but intensity volumes are missing");
    if (!p.fixed_intensity->shape.same_dims(field_shape))
      fail(ErrorKind::ShapeMismatch, "fixed intensity must live on the fixed grid");
  }
}

// Feature and intensity dissimilarity of the warp x -> x + u(x), and
// optionally its gradient with respect to u.
double similarity_terms(const DisplacementField& u, const InstanceProblem& p, const InstanceObjectiveConfig& config,
                        std::vector<Vec3>* grad) {
  const FeatureMap& moving = p.moving_features;
  const FeatureMap& fixed = p.fixed_features;
  const int channels = fixed.channels();
  const std::size_t n = u.vectors.size();

  std::vector<double> term(n, 0.0);
  std::vector<unsigned char> valid(n, 0);
  std::vector<Vec3> local_grad(grad ? n : 0);

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> warped(static_cast<std::size_t>(channels));
    std::array<std::vector<double>, 3> dwarped;
    for (auto& d : dwarped) d.assign(static_cast<std::size_t>(channels), 0.0);
    for (std::size_t v = begin; v < end; ++v) {
      const Vec3 point = to_vec(u.shape.unravel(v)) + u.vectors[v];
      const TrilinearStencil s = make_stencil(moving.shape(), point);
      double len2 = 0.0, fixed2 = 0.0, raw_dot = 0.0;
      for (int c = 0; c < channels; ++c) {
        const auto ch = moving.channel(c);
        const auto cc = static_cast<std::size_t>(c);
        double w = 0.0, d0 = 0.0, d1 = 0.0, d2 = 0.0;
        for (std::size_t k = 0; k < 8; ++k) {
          const double m = ch[s.offsets[k]];
          w += s.weights[k] * m;
          d0 += s.dweights[0][k] * m;
          d1 += s.dweights[1][k] * m;
          d2 += s.dweights[2][k] * m;
        }
        warped[cc] = w;
        dwarped[0][cc] = d0;
        dwarped[1][cc] = d1;
        dwarped[2][cc] = d2;
        const double f = fixed.at(c, v);
        len2 += w * w;
        fixed2 += f * f;
        raw_dot += w * f;
      }
      const double len = std::sqrt(len2);
      if (len < kMaskNorm || fixed2 < kMaskNorm * kMaskNorm) continue;
      valid[v] = 1;
      const double cosine = raw_dot / len;
      term[v] = 1.0 - cosine;
      if (!grad) continue;
      // d(1 - <n/|n|, f>)/dn = -(f - cosine * n/|n|) / |n|
      Vec3 g;
      for (int c = 0; c < channels; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const double r = -(fixed.at(c, v) - cosine * warped[cc] / len) / len;
        for (int a = 0; a < 3; ++a) g[a] += r * dwarped[static_cast<std::size_t>(a)][cc];
      }
      local_grad[v] = g;
    }
  });

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (!valid[v]) continue;
    sum += term[v];
    ++count;
  }
  if (count == 0) fail(ErrorKind::EmptyOverlap, "every voxel is masked");
  double value = sum / static_cast<double>(count);
  if (grad) {
    grad->assign(n, Vec3{});
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t v = 0; v < n; ++v)
      if (valid[v]) (*grad)[v] = inv * local_grad[v];
  }

  if (config.intensity == IntensityTerm::None) return value;

  const ScalarVolume& mi = *p.moving_intensity;
  const ScalarVolume& fi = *p.fixed_intensity;
  ScalarVolume warped(fi.shape);
  std::vector<Vec3> dwarp(grad ? n : 0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const Vec3 point = to_vec(u.shape.unravel(v)) + u.vectors[v];
      const TrilinearStencil s = make_stencil(mi.shape, point);
      double w = 0.0;
      Vec3 d;
      for (std::size_t k = 0; k < 8; ++k) {
        const double m = mi.values[s.offsets[k]];
        w += s.weights[k] * m;
        for (int a = 0; a < 3; ++a) d[a] += s.dweights[static_cast<std::size_t>(a)][k] * m;
      }
      warped.values[v] = w;
      if (grad) dwarp[v] = d;
    }
  });
  if (config.intensity == IntensityTerm::Ncc) {
    value += 1.0 - ncc(warped, fi);
    if (grad) {
      const std::vector<double> dn = ncc_gradient(warped, fi);
      for (std::size_t v = 0; v < n; ++v) (*grad)[v] -= dn[v] * dwarp[v];
    }
  } else {
    value += 1.0 - lncc(warped, fi, config.lncc_window);
    if (grad) {
      const std::vector<double> dn = lncc_gradient(warped, fi, config.lncc_window);
      for (std::size_t v = 0; v < n; ++v) (*grad)[v] -= dn[v] * dwarp[v];
    }
  }
  return value;
}

}  // namespace

double instance_objective(const DisplacementField& u, const InstanceProblem& problem,
                          const InstanceObjectiveConfig& config) {
  check_problem(u.shape, problem, config);
  return config.lambda_sim * similarity_terms(u, problem, config, nullptr) + config.lambda_reg * reg_loss(u);
}

double instance_objective(const VelocityField& v, const InstanceProblem& problem,
                          const InstanceObjectiveConfig& config) {
  check_problem(v.shape, problem, config);
  const DisplacementField u = integrate_svf(v, config.svf_steps);
  return config.lambda_sim * similarity_terms(u, problem, config, nullptr) + config.lambda_reg * reg_loss(v);
}

double instance_objective_gradient(const DisplacementField& u, const InstanceProblem& problem,
                                   const InstanceObjectiveConfig& config, std::vector<Vec3>& grad) {
  check_problem(u.shape, problem, config);
  std::vector<Vec3> sim_grad;
  const double sim = similarity_terms(u, problem, config, &sim_grad);
  const std::vector<Vec3> rg = reg_gradient(u);
  grad.assign(u.vectors.size(), Vec3{});
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = config.lambda_sim * sim_grad[i] + config.lambda_reg * rg[i];
  return config.lambda_sim * sim + config.lambda_reg * reg_loss(u);
}

double instance_objective_gradient(const VelocityField& v, const InstanceProblem& problem,
                                   const InstanceObjectiveConfig& config, std::vector<Vec3>& grad) {
  check_problem(v.shape, problem, config);
  const std::vector<DisplacementField> trace = integrate_svf_trace(v, config.svf_steps);
  std::vector<Vec3> sim_grad;
  const double sim = similarity_terms(trace.back(), problem, config, &sim_grad);
  for (Vec3& g : sim_grad) g = config.lambda_sim * g;
  const VelocityField through = svf_backprop(trace, sim_grad);
  const std::vector<Vec3> rg = reg_gradient(v);
  grad.assign(v.vectors.size(), Vec3{});
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = through.vectors[i] + config.lambda_reg * rg[i];
  return config.lambda_sim * sim + config.lambda_reg * reg_loss(v);
}

namespace {

template <class Field>
DescentResult descend(Field start, const InstanceProblem& problem, const InstanceObjectiveConfig& config) {
  const std::size_t n = start.vectors.size();
  Field work = start;
  std::vector<Vec3> g;
  const ObjectiveFn objective = [&](std::span<const double> x, std::span<double> grad) {
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) work.vectors[i][c] = x[3 * i + static_cast<std::size_t>(c)];
    const double value = instance_objective_gradient(work, problem, config, g);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) grad[3 * i + static_cast<std::size_t>(c)] = g[i][c];
    return value;
  };
  std::vector<double> x0(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) x0[3 * i + static_cast<std::size_t>(c)] = start.vectors[i][c];
  DescentConfig dc;
  dc.step_size = config.step_size;
  dc.iterations = config.iterations;
  dc.convergence_tol = config.convergence_tol;
  return minimize(objective, std::move(x0), dc);
}

template <class Field>
Field unpack(const GridShape& shape, const std::vector<double>& x) {
  Field f(shape);
  for (std::size_t i = 0; i < f.vectors.size(); ++i)
    for (int c = 0; c < 3; ++c) f.vectors[i][c] = x[3 * i + static_cast<std::size_t>(c)];
  return f;
}

}  // namespace

InstanceResult optimize_instance(const InstanceProblem& problem, const DisplacementField& init,
                                 const InstanceObjectiveConfig& config) {
  check_problem(init.shape, problem, config);
  for (const Vec3& v : init.vectors)
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2]))
      fail(ErrorKind::NumericalDivergence, "initial field is not finite");

  InstanceResult r;
  if (config.parameterization == Parameterization::Displacement) {
    r.trace = descend(init, problem, config);
    r.displacement = unpack<DisplacementField>(init.shape, r.trace.x);
  } else {
    VelocityField start(init.shape);
    start.vectors = init.vectors;
    r.trace = descend(start, problem, config);
    r.velocity = unpack<VelocityField>(init.shape, r.trace.x);
    r.displacement = integrate_svf(r.velocity, config.svf_steps);
  }
  return r;
}

}  // namespace embreg
