#include "embreg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "embreg/error.hpp"

namespace embreg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorKind::InvalidConfig, "bad value '" + value + "' for " + key);
}

int to_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value);
  }
  if (used != value.size()) bad_value(key, value);
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

void validate(const PipelineConfig& c) {
  if (c.match_step < 1) fail(ErrorKind::InvalidConfig, "match.step must be >= 1");
  if (c.match_iterations < 1) fail(ErrorKind::InvalidConfig, "match.iterations must be >= 1");
  if (!(c.epsilon >= -1.0 && c.epsilon <= 1.0)) fail(ErrorKind::InvalidConfig, "match.epsilon must lie in [-1, 1]");
  if (c.feature_scale < 1) fail(ErrorKind::InvalidConfig, "feature.scale must be >= 1");
  if (c.coarse_stride < 1) fail(ErrorKind::InvalidConfig, "coarse.stride must be >= 1");
  if (!(c.coarse.step_size > 0.0)) fail(ErrorKind::InvalidConfig, "coarse.step must be > 0");
  if (c.coarse.iterations < 1) fail(ErrorKind::InvalidConfig, "coarse.iterations must be >= 1");
  if (!(c.coarse.reg_weight >= 0.0)) fail(ErrorKind::InvalidConfig, "coarse.lambda must be >= 0");
  if (!(c.coarse.convergence_tol >= 0.0)) fail(ErrorKind::InvalidConfig, "coarse.tol must be >= 0");
  if (c.threads < 1) fail(ErrorKind::InvalidConfig, "threads must be >= 1");
  validate(c.instance);
}

void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  auto& in = c.instance;
  if (key == "match.step") c.match_step = to_int(key, value);
  else if (key == "match.iterations") c.match_iterations = to_int(key, value);
  else if (key == "match.epsilon") c.epsilon = to_double(key, value);
  else if (key == "feature.scale") c.feature_scale = to_int(key, value);
  else if (key == "affine.enabled") c.affine_enabled = to_bool(key, value);
  else if (key == "coarse.enabled") c.coarse_enabled = to_bool(key, value);
  else if (key == "coarse.stride") c.coarse_stride = to_int(key, value);
  else if (key == "coarse.lambda") c.coarse.reg_weight = to_double(key, value);
  else if (key == "coarse.step") c.coarse.step_size = to_double(key, value);
  else if (key == "coarse.iterations") c.coarse.iterations = to_int(key, value);
  else if (key == "coarse.tol") c.coarse.convergence_tol = to_double(key, value);
  else if (key == "instance.enabled") c.instance_enabled = to_bool(key, value);
  else if (key == "instance.recipe") {
    if (value == "head") {
      in.lambda_sim = 1.0, in.lambda_reg = 100.0, in.intensity = IntensityTerm::Ncc;
    } else if (value == "chest") {
      in.lambda_sim = 1.0, in.lambda_reg = 50.0, in.intensity = IntensityTerm::Ncc;
    } else if (value == "abdomen") {
      in.lambda_sim = 0.01, in.lambda_reg = 10.0, in.intensity = IntensityTerm::Lncc;
    } else {
      bad_value(key, value);
    }
  } else if (key == "instance.lambda_sim") in.lambda_sim = to_double(key, value);
  else if (key == "instance.lambda_reg") in.lambda_reg = to_double(key, value);
  else if (key == "instance.intensity") {
    if (value == "none") in.intensity = IntensityTerm::None;
    else if (value == "ncc") in.intensity = IntensityTerm::Ncc;
    else if (value == "lncc") in.intensity = IntensityTerm::Lncc;
    else bad_value(key, value);
  } else if (key == "instance.lncc_window") in.lncc_window = to_int(key, value);
  else if (key == "instance.parameterization") {
    if (value == "displacement") in.parameterization = Parameterization::Displacement;
    else if (value == "svf") in.parameterization = Parameterization::Svf;
    else bad_value(key, value);
  } else if (key == "instance.svf_steps") in.svf_steps = to_int(key, value);
  else if (key == "instance.step") in.step_size = to_double(key, value);
  else if (key == "instance.iterations") in.iterations = to_int(key, value);
  else if (key == "instance.tol") in.convergence_tol = to_double(key, value);
  else if (key == "threads") c.threads = to_int(key, value);
  else fail(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

void apply_setting(PipelineConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) fail(ErrorKind::InvalidConfig, "expected key=value, got '" + std::string(assignment) + "'");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

PipelineConfig parse_config(std::string_view text, const PipelineConfig& base) {
  PipelineConfig c = base;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      apply_setting(c, std::string_view(line));
    } catch (const Error& e) {
      fail(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  PipelineConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    c = parse_config(buf.str());
  }
  for (const auto& o : overrides) apply_setting(c, std::string_view(o));
  validate(c);
  return c;
}

std::string to_text(const PipelineConfig& c) {
  const auto& in = c.instance;
  const char* intensity = in.intensity == IntensityTerm::None ? "none" : in.intensity == IntensityTerm::Ncc ? "ncc" : "lncc";
  std::ostringstream s;
  s << "match.step = " << c.match_step << "\n"
    << "match.iterations = " << c.match_iterations << "\n"
    << "match.epsilon = " << fmt(c.epsilon) << "\n"
    << "feature.scale = " << c.feature_scale << "\n"
    << "affine.enabled = " << (c.affine_enabled ? "true" : "false") << "\n"
    << "coarse.enabled = " << (c.coarse_enabled ? "true" : "false") << "\n"
    << "coarse.stride = " << c.coarse_stride << "\n"
    << "coarse.lambda = " << fmt(c.coarse.reg_weight) << "\n"
    << "coarse.step = " << fmt(c.coarse.step_size) << "\n"
    << "coarse.iterations = " << c.coarse.iterations << "\n"
    << "coarse.tol = " << fmt(c.coarse.convergence_tol) << "\n"
    << "instance.enabled = " << (c.instance_enabled ? "true" : "false") << "\n"
    << "instance.lambda_sim = " << fmt(in.lambda_sim) << "\n"
    << "instance.lambda_reg = " << fmt(in.lambda_reg) << "\n"
    << "instance.intensity = " << intensity << "\n"
    << "instance.lncc_window = " << in.lncc_window << "\n"
    << "instance.parameterization = " << (in.parameterization == Parameterization::Svf ? "svf" : "displacement") << "\n"
    << "instance.svf_steps = " << in.svf_steps << "\n"
    << "instance.step = " << fmt(in.step_size) << "\n"
    << "instance.iterations = " << in.iterations << "\n"
    << "instance.tol = " << fmt(in.convergence_tol) << "\n"
    << "threads = " << c.threads << "\n";
  return s.str();
}

}  // namespace embreg
