#include "embreg/match.hpp"

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>

#include "embreg/parallel.hpp"
#include "embreg/simd/kernels.hpp"

namespace embreg {

namespace {

constexpr std::size_t kTile = 2048;

void check_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.channels() != b.channels()) {
    std::ostringstream os;
    os << "feature channel counts differ: " << a.channels() << " vs " << b.channels();
    fail(ErrorKind::DimensionMismatch, os.str());
  }
}

// Linear index of the best query voxel for one key vector.
std::size_t best_query_voxel(std::span<const double> key, const FeatureMap& query, std::vector<double>& scores) {
  const auto& k = simd::active();
  const std::size_t n = query.voxel_count();
  const double* data = query.data().data();
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start < n; start += kTile) {
    const std::size_t len = std::min(kTile, n - start);
    k.score_key(key.data(), query.channels(), data + start, n, len, scores.data());
    const std::size_t i = k.argmax_first(scores.data(), len);
    if (scores[i] > best_score) {
      best_score = scores[i];
      best = start + i;
    }
  }
  return best;
}

// Resolves every key voxel (linear index into `from`) to its best voxel in
// `to`, filling `cache` for keys not already present.
void resolve(const std::vector<std::size_t>& keys, const FeatureMap& from, const FeatureMap& to,
             std::unordered_map<std::size_t, std::size_t>& cache) {
  std::vector<std::size_t> todo;
  for (std::size_t key : keys)
    if (cache.find(key) == cache.end()) todo.push_back(key);
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());

  std::vector<std::size_t> found(todo.size());
  parallel_for(todo.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(kTile);
    for (std::size_t i = begin; i < end; ++i) {
      const std::vector<double> key = from.vector_at(todo[i]);
      found[i] = best_query_voxel(key, to, scores);
    }
  });
  for (std::size_t i = 0; i < todo.size(); ++i) cache.emplace(todo[i], found[i]);
}

double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

}  // namespace

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::DimensionMismatch, "feature vector lengths differ");
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s = s + a[c] * b[c];
  return s;
}

PointSet select_points(const GridShape& domain, int step) {
  if (step < 1) fail(ErrorKind::InvalidStep, "sampling step must be >= 1");
  validate(domain);
  PointSet out;
  const int offset = step / 2;
  for (int z = offset; z < domain.dims[0]; z += step)
    for (int y = offset; y < domain.dims[1]; y += step)
      for (int x = offset; x < domain.dims[2]; x += step) out.points.push_back({z, y, x});
  return out;
}

PointSet find_points(const PointSet& keys, const FeatureMap& key_features, const FeatureMap& query_features) {
  check_channels(key_features, query_features);
  PointSet out;
  out.domain = keys.domain == Domain::Moving ? Domain::Fixed : Domain::Moving;
  out.points.resize(keys.points.size());
  for (const Index3& p : keys.points)
    if (!key_features.shape().contains(p)) fail(ErrorKind::InvalidCoordinate, "key point outside its grid");

  parallel_for(keys.points.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(kTile);
    for (std::size_t i = begin; i < end; ++i) {
      const std::vector<double> key = key_features.vector_at(key_features.shape().linear(keys.points[i]));
      out.points[i] = query_features.shape().unravel(best_query_voxel(key, query_features, scores));
    }
  });
  return out;
}

MatchSet sscc(const FeatureMap& moving, const FeatureMap& fixed, int step, int iterations) {
  if (iterations < 1) fail(ErrorKind::InvalidStep, "iteration count must be >= 1");
  check_channels(moving, fixed);
  const PointSet start = select_points(moving.shape(), step);

  std::unordered_map<std::size_t, std::size_t> m_to_f;
  std::unordered_map<std::size_t, std::size_t> f_to_m;

  std::vector<std::size_t> xm(start.points.size());
  for (std::size_t i = 0; i < xm.size(); ++i) xm[i] = moving.shape().linear(start.points[i]);
  std::vector<std::size_t> xf(xm.size());

  for (int k = 0; k < iterations; ++k) {
    resolve(xm, moving, fixed, m_to_f);
    for (std::size_t i = 0; i < xm.size(); ++i) xf[i] = m_to_f.at(xm[i]);
    resolve(xf, fixed, moving, f_to_m);
    for (std::size_t i = 0; i < xm.size(); ++i) xm[i] = f_to_m.at(xf[i]);
  }
  // One more forward pass decides which pairs are mutual best matches.
  resolve(xm, moving, fixed, m_to_f);

  MatchSet out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < xm.size(); ++i) {
    if (m_to_f.at(xm[i]) != xf[i]) continue;
    if (!seen.emplace(xm[i], xf[i]).second) continue;
    const std::vector<double> a = moving.vector_at(xm[i]);
    const std::vector<double> b = fixed.vector_at(xf[i]);
    out.pairs.push_back({to_vec(moving.shape().unravel(xm[i])), to_vec(fixed.shape().unravel(xf[i])),
                         clamp_score(similarity(a, b))});
  }
  return out;
}

MatchSet filter_matches(const MatchSet& matches, double epsilon) {
  MatchSet out;
  for (const Match& m : matches.pairs)
    if (m.score > epsilon) out.pairs.push_back(m);
  return out;
}

void write_matches(std::ostream& out, const MatchSet& matches) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (const Match& m : matches.pairs) {
    out << m.moving[0] << ' ' << m.moving[1] << ' ' << m.moving[2] << ' ' << m.fixed[0] << ' ' << m.fixed[1]
        << ' ' << m.fixed[2] << ' ' << m.score << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

MatchSet read_matches(std::istream& in) {
  MatchSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    Match m;
    if (!(ls >> m.moving[0] >> m.moving[1] >> m.moving[2] >> m.fixed[0] >> m.fixed[1] >> m.fixed[2] >> m.score))
      fail(ErrorKind::CorruptContainer, "malformed match line " + std::to_string(line_no));
    if (!std::isfinite(m.score) || m.score < -1.0 || m.score > 1.0)
      fail(ErrorKind::CorruptContainer, "match score out of [-1,1] on line " + std::to_string(line_no));
    out.pairs.push_back(m);
  }
  return out;
}

}  // namespace embreg
