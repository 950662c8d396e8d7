#pragma once

// Feature-space correspondence search: dot-product similarity, exhaustive
// argmax over the query lattice, and cycle-consistent stable sampling.

#include <iosfwd>
#include <span>
#include <vector>

#include "embreg/grid.hpp"

namespace embreg {

enum class Domain { Moving, Fixed };

struct PointSet {
  Domain domain = Domain::Moving;
  std::vector<Index3> points;
};

struct Match {
  Vec3 moving;
  Vec3 fixed;
  double score = 0.0;
};

struct MatchSet {
  std::vector<Match> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

double similarity(std::span<const double> a, std::span<const double> b);

// Regular lattice with offset floor(step/2) and stride `step` on each axis,
// ordered lexicographically by (z, y, x).
PointSet select_points(const GridShape& domain, int step);

// For each key, the query voxel whose feature has the largest dot product
// with the key's feature. Ties go to the lowest (z, y, x).
PointSet find_points(const PointSet& keys, const FeatureMap& key_features, const FeatureMap& query_features);

// Stable sampling via cycle consistency. Pairs that are not mutual best
// matches after `iterations` forward-backward rounds are dropped, and
// duplicate pairs are collapsed.
MatchSet sscc(const FeatureMap& moving, const FeatureMap& fixed, int step, int iterations);

// Keeps pairs with score strictly greater than epsilon, in order.
MatchSet filter_matches(const MatchSet& matches, double epsilon);

// One pair per line: "zm ym xm zf yf xf score".
void write_matches(std::ostream& out, const MatchSet& matches);
MatchSet read_matches(std::istream& in);

}  // namespace embreg
