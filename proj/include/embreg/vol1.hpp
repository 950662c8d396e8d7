#pragma once

// VOL1: the single binary container for volumes, feature maps and fields.
//
// All integers and floats are little-endian.
//
//   offset  size  field
//   0       4     magic "VOL1"
//   4       1     dtype code: 1 = u8, 2 = u16, 3 = f32, 4 = f64
//   5       3     reserved, zero
//   8       16    u32 D, H, W, C
//   24      24    f64 spacing (z, y, x)
//   48      4     u32 attribute count N
//   52      ...   N x { u32 key length, key bytes, u32 value length, value bytes }
//                 (UTF-8, keys strictly increasing bytewise in canonical files)
//   ...     ...   payload: C * D * H * W values, channel-major then z, y, x
//
// The file ends exactly at the end of the payload.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "embreg/coarse.hpp"
#include "embreg/grid.hpp"

namespace embreg {

enum class DType : std::uint8_t { U8 = 1, U16 = 2, F32 = 3, F64 = 4 };

std::size_t dtype_size(DType t);

struct Vol1 {
  DType dtype = DType::F64;
  GridShape shape;
  int channels = 1;
  std::map<std::string, std::string> attributes;
  std::vector<double> values;  // decoded payload, channel-major
};

std::vector<std::byte> encode_vol1(const Vol1& container);
Vol1 decode_vol1(std::span<const std::byte> bytes);

void write_vol1(const std::filesystem::path& path, const Vol1& container);
Vol1 read_vol1(const std::filesystem::path& path);

Vol1 to_vol1(const ScalarVolume& volume, DType dtype = DType::F64);
Vol1 to_vol1(const FeatureMap& features, DType dtype = DType::F64);
Vol1 to_vol1(const LabelVolume& labels);
Vol1 to_vol1(const DisplacementField& field);
Vol1 to_vol1(const VelocityField& field);
Vol1 to_vol1(const CoarseDisplacementField& field);

ScalarVolume scalar_from(const Vol1& c);
FeatureMap features_from(const Vol1& c);
LabelVolume labels_from(const Vol1& c);
DisplacementField displacement_from(const Vol1& c);
VelocityField velocity_from(const Vol1& c);
CoarseDisplacementField coarse_from(const Vol1& c);

}  // namespace embreg
