#include "embreg/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace embreg {

namespace {

// A centred sum of squares at or below this fraction of the raw sum of
// squares is treated as zero variance.
constexpr double kDegenerateRatio = 1e-12;

bool degenerate(double centred, double raw) { return !(centred > kDegenerateRatio * raw); }

void check_same(const ScalarVolume& a, const ScalarVolume& b) {
  if (!a.shape.same_dims(b.shape) || a.values.size() != b.values.size())
    fail(ErrorKind::ShapeMismatch, "intensity volumes differ in shape");
  if (a.values.empty()) fail(ErrorKind::ShapeMismatch, "empty intensity volume");
}

struct Moments {
  double mean_a, mean_b, saa, sbb, sab, raw_a, raw_b;
};

Moments moments(const ScalarVolume& a, const ScalarVolume& b) {
  const auto n = static_cast<double>(a.values.size());
  Moments m{};
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    m.mean_a += a.values[i];
    m.mean_b += b.values[i];
    m.raw_a += a.values[i] * a.values[i];
    m.raw_b += b.values[i] * b.values[i];
  }
  m.mean_a /= n;
  m.mean_b /= n;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double da = a.values[i] - m.mean_a;
    const double db = b.values[i] - m.mean_b;
    m.saa += da * da;
    m.sbb += db * db;
    m.sab += da * db;
  }
  if (degenerate(m.saa, m.raw_a) || degenerate(m.sbb, m.raw_b))
    fail(ErrorKind::DegenerateIntensity, "zero-variance intensity volume");
  return m;
}

// Sum over the truncated cube of half-width r around each voxel, computed by
// three separable prefix-sum passes.
std::vector<double> box_sum(const std::vector<double>& in, const GridShape& g, int r) {
  std::vector<double> cur = in;
  std::vector<double> next(in.size());
  const std::array<std::size_t, 3> stride{static_cast<std::size_t>(g.dims[1]) * static_cast<std::size_t>(g.dims[2]),
                                          static_cast<std::size_t>(g.dims[2]), 1};
  std::vector<double> prefix;
  for (int axis = 0; axis < 3; ++axis) {
    const auto ax = static_cast<std::size_t>(axis);
    const int n = g.dims[ax];
    prefix.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::size_t v = 0; v < in.size(); ++v) {
      const Index3 idx = g.unravel(v);
      if (idx[ax] != 0) continue;  // one line per start voxel
      for (int i = 0; i < n; ++i)
        prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + cur[v + static_cast<std::size_t>(i) * stride[ax]];
      for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - r);
        const int hi = std::min(n - 1, i + r);
        next[v + static_cast<std::size_t>(i) * stride[ax]] =
            prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)];
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

struct LocalStats {
  std::vector<double> ncc, alpha, beta, mean_a, mean_b;
};

LocalStats local_stats(const ScalarVolume& a, const ScalarVolume& b, int window) {
  if (window < 3 || window % 2 == 0) fail(ErrorKind::InvalidConfig, "LNCC window must be odd and >= 3");
  check_same(a, b);
  const int r = window / 2;
  const std::size_t n = a.values.size();
  std::vector<double> ab(n), aa(n), bb(n), ones(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto sa = box_sum(a.values, a.shape, r);
  const auto sb = box_sum(b.values, a.shape, r);
  const auto saa = box_sum(aa, a.shape, r);
  const auto sbb = box_sum(bb, a.shape, r);
  const auto sab = box_sum(ab, a.shape, r);
  const auto cnt = box_sum(ones, a.shape, r);

  LocalStats s;
  s.ncc.assign(n, 0.0);
  s.alpha.assign(n, 0.0);
  s.beta.assign(n, 0.0);
  s.mean_a.assign(n, 0.0);
  s.mean_b.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = cnt[i];
    const double va = saa[i] - sa[i] * sa[i] / k;
    const double vb = sbb[i] - sb[i] * sb[i] / k;
    s.mean_a[i] = sa[i] / k;
    s.mean_b[i] = sb[i] / k;
    if (degenerate(va, saa[i]) || degenerate(vb, sbb[i])) continue;
    const double cross = sab[i] - sa[i] * sb[i] / k;
    s.alpha[i] = 1.0 / std::sqrt(va * vb);
    s.ncc[i] = cross * s.alpha[i];
    s.beta[i] = s.ncc[i] / va;
  }
  return s;
}

}  // namespace

DiceResult dice(const LabelVolume& warped, const LabelVolume& fixed) {
  if (!warped.shape.same_dims(fixed.shape) || warped.labels.size() != fixed.labels.size())
    fail(ErrorKind::ShapeMismatch, "label volumes differ in shape");
  std::map<int, std::array<std::size_t, 3>> counts;  // |W|, |F|, |W & F|
  for (std::size_t i = 0; i < warped.labels.size(); ++i) {
    const int w = warped.labels[i];
    const int f = fixed.labels[i];
    if (w != 0) ++counts[w][0];
    if (f != 0) ++counts[f][1];
    if (w != 0 && w == f) ++counts[w][2];
  }
  DiceResult r;
  if (counts.empty()) return r;
  double sum = 0.0;
  for (const auto& [label, c] : counts) {
    const double d = 2.0 * static_cast<double>(c[2]) / static_cast<double>(c[0] + c[1]);
    r.per_label[label] = d;
    sum += d;
  }
  r.mean = sum / static_cast<double>(r.per_label.size());
  return r;
}

double ncc(const ScalarVolume& a, const ScalarVolume& b) {
  check_same(a, b);
  const Moments m = moments(a, b);
  return m.sab / std::sqrt(m.saa * m.sbb);
}

std::vector<double> ncc_gradient(const ScalarVolume& a, const ScalarVolume& b) {
  check_same(a, b);
  const Moments m = moments(a, b);
  const double root = std::sqrt(m.saa * m.sbb);
  const double value = m.sab / root;
  std::vector<double> g(a.values.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = (b.values[i] - m.mean_b) / root - value * (a.values[i] - m.mean_a) / m.saa;
  return g;
}

double lncc(const ScalarVolume& a, const ScalarVolume& b, int window) {
  const LocalStats s = local_stats(a, b, window);
  double sum = 0.0;
  for (double v : s.ncc) sum += v;
  return sum / static_cast<double>(s.ncc.size());
}

std::vector<double> lncc_gradient(const ScalarVolume& a, const ScalarVolume& b, int window) {
  const LocalStats s = local_stats(a, b, window);
  const int r = window / 2;
  const std::size_t n = s.ncc.size();
  std::vector<double> alpha_mb(n), beta_ma(n);
  for (std::size_t i = 0; i < n; ++i) {
    alpha_mb[i] = s.alpha[i] * s.mean_b[i];
    beta_ma[i] = s.beta[i] * s.mean_a[i];
  }
  // Windows are symmetric, so "windows containing j" is the window around j.
  const auto box_alpha = box_sum(s.alpha, a.shape, r);
  const auto box_alpha_mb = box_sum(alpha_mb, a.shape, r);
  const auto box_beta = box_sum(s.beta, a.shape, r);
  const auto box_beta_ma = box_sum(beta_ma, a.shape, r);
  std::vector<double> g(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j)
    g[j] = inv_n * (b.values[j] * box_alpha[j] - box_alpha_mb[j] - a.values[j] * box_beta[j] + box_beta_ma[j]);
  return g;
}

double landmark_error(std::span<const Vec3> moving, std::span<const Vec3> fixed,
                      const std::function<Vec3(const Vec3&)>& map, const std::array<double, 3>& spacing) {
  if (moving.size() != fixed.size()) fail(ErrorKind::PairingError, "landmark lists differ in length");
  if (moving.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < moving.size(); ++i) {
    Vec3 d = map(fixed[i]) - moving[i];
    for (int a = 0; a < 3; ++a) d[a] *= spacing[static_cast<std::size_t>(a)];
    sum += norm(d);
  }
  return sum / static_cast<double>(moving.size());
}

namespace {
nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }
std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}
}  // namespace

nlohmann::json to_json(const RegistrationReport& report) {
  nlohmann::json j;
  nlohmann::json dice_map = nlohmann::json::object();
  for (const auto& [label, d] : report.per_label_dice) dice_map[std::to_string(label)] = d;
  j["per_label_dice"] = dice_map;
  j["mean_dice"] = report.mean_dice;
  j["folding_fraction"] = report.folding_fraction;
  j["mean_landmark_error"] = optional_json(report.mean_landmark_error);
  j["initial_mean_dice"] = optional_json(report.initial_mean_dice);
  j["initial_landmark_error"] = optional_json(report.initial_landmark_error);
  j["stage_timings"] = report.stage_timings;
  nlohmann::json stages = nlohmann::json::array();
  for (const StageReport& s : report.stages) {
    stages.push_back({{"name", s.name},
                      {"seconds", s.seconds},
                      {"mean_dice", optional_json(s.mean_dice)},
                      {"landmark_error", optional_json(s.landmark_error)},
                      {"folding_fraction", optional_json(s.folding_fraction)},
                      {"extras", s.extras}});
  }
  j["stages"] = stages;
  return j;
}

RegistrationReport report_from_json(const nlohmann::json& j) {
  RegistrationReport r;
  for (const auto& [key, value] : j.at("per_label_dice").items()) r.per_label_dice[std::stoi(key)] = value.get<double>();
  r.mean_dice = j.at("mean_dice").get<double>();
  r.folding_fraction = j.at("folding_fraction").get<double>();
  r.mean_landmark_error = optional_from(j, "mean_landmark_error");
  r.initial_mean_dice = optional_from(j, "initial_mean_dice");
  r.initial_landmark_error = optional_from(j, "initial_landmark_error");
  r.stage_timings = j.at("stage_timings").get<std::map<std::string, double>>();
  for (const auto& s : j.at("stages")) {
    StageReport st;
    st.name = s.at("name").get<std::string>();
    st.seconds = s.at("seconds").get<double>();
    st.mean_dice = optional_from(s, "mean_dice");
    st.landmark_error = optional_from(s, "landmark_error");
    st.folding_fraction = optional_from(s, "folding_fraction");
    st.extras = s.at("extras").get<std::map<std::string, double>>();
    r.stages.push_back(std::move(st));
  }
  return r;
}

std::string format_table(const RegistrationReport& report) {
  std::ostringstream os;
  auto cell = [](const std::optional<double>& v, int precision) {
    std::ostringstream c;
    if (v)
      c << std::fixed << std::setprecision(precision) << *v;
    else
      c << "-";
    return c.str();
  };
  os << std::left << std::setw(12) << "stage" << std::right << std::setw(10) << "dice" << std::setw(12)
     << "landmark" << std::setw(10) << "fold%" << std::setw(10) << "seconds" << '\n';
  os << std::string(54, '-') << '\n';
  os << std::left << std::setw(12) << "initial" << std::right << std::setw(10) << cell(report.initial_mean_dice, 4)
     << std::setw(12) << cell(report.initial_landmark_error, 4) << std::setw(10) << "-" << std::setw(10) << "-"
     << '\n';
  for (const StageReport& s : report.stages) {
    std::optional<double> fold;
    if (s.folding_fraction) fold = 100.0 * *s.folding_fraction;
    os << std::left << std::setw(12) << s.name << std::right << std::setw(10) << cell(s.mean_dice, 4)
       << std::setw(12) << cell(s.landmark_error, 4) << std::setw(10) << cell(fold, 3) << std::setw(10)
       << cell(s.seconds, 3) << '\n';
  }
  os << std::string(54, '-') << '\n';
  for (const auto& [label, d] : report.per_label_dice)
    os << "label " << std::left << std::setw(6) << label << std::right << std::setw(10) << std::fixed
       << std::setprecision(4) << d << '\n';
  os << "mean dice " << std::fixed << std::setprecision(4) << report.mean_dice << "   folding "
     << std::setprecision(3) << 100.0 * report.folding_fraction << "%";
  if (report.mean_landmark_error) os << "   landmark " << std::setprecision(4) << *report.mean_landmark_error;
  os << '\n';
  return os.str();
}

}  // namespace embreg
