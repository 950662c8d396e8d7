#include "embreg/vol1.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace embreg {

namespace {

constexpr char kMagic[4] = {'V', 'O', 'L', '1'};
constexpr std::size_t kFixedHeader = 52;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void reserve(std::size_t n) { out_.reserve(n); }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(ErrorKind::CorruptContainer, std::string("truncated ") + what);
  }
  std::uint8_t u8() {
    need(1, "header");
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v = static_cast<std::uint16_t>(v | (static_cast<std::uint16_t>(u8()) << (8 * i)));
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n, "attribute");
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

void require_kind(const Vol1& c, const char* kind, int channels) {
  const auto it = c.attributes.find("kind");
  if (it != c.attributes.end() && it->second != kind)
    fail(ErrorKind::ShapeMismatch, std::string("container holds '") + it->second + "', expected '" + kind + "'");
  if (channels > 0 && c.channels != channels)
    fail(ErrorKind::ShapeMismatch, std::string("'") + kind + "' needs " + std::to_string(channels) + " channels");
}

template <class Tag>
Vol1 field_to_vol1(const VectorField<Tag>& field, const char* kind) {
  Vol1 c;
  c.shape = field.shape;
  c.channels = 3;
  c.attributes["kind"] = kind;
  const std::size_t n = field.vectors.size();
  c.values.resize(3 * n);
  for (std::size_t v = 0; v < n; ++v)
    for (int a = 0; a < 3; ++a) c.values[static_cast<std::size_t>(a) * n + v] = field.vectors[v][a];
  return c;
}

template <class Tag>
VectorField<Tag> field_from_vol1(const Vol1& c, const char* kind) {
  require_kind(c, kind, 3);
  VectorField<Tag> f(c.shape);
  const std::size_t n = f.vectors.size();
  for (std::size_t v = 0; v < n; ++v)
    for (int a = 0; a < 3; ++a) f.vectors[v][a] = c.values[static_cast<std::size_t>(a) * n + v];
  return f;
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::F32: return 4;
    case DType::F64: return 8;
  }
  fail(ErrorKind::CorruptContainer, "unknown dtype code");
}

std::vector<std::byte> encode_vol1(const Vol1& c) {
  validate(c.shape);
  if (c.channels < 1) fail(ErrorKind::CorruptContainer, "container needs at least one channel");
  const std::size_t count = static_cast<std::size_t>(c.channels) * c.shape.voxel_count();
  if (c.values.size() != count) fail(ErrorKind::ShapeMismatch, "payload size differs from header dimensions");

  Writer w;
  w.reserve(kFixedHeader + count * dtype_size(c.dtype));
  w.bytes(kMagic, 4);
  w.u8(static_cast<std::uint8_t>(c.dtype));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(c.shape.dims[static_cast<std::size_t>(a)]));
  w.u32(static_cast<std::uint32_t>(c.channels));
  for (int a = 0; a < 3; ++a) w.f64(c.shape.spacing[static_cast<std::size_t>(a)]);
  w.u32(static_cast<std::uint32_t>(c.attributes.size()));
  for (const auto& [key, value] : c.attributes) {
    w.str(key);
    w.str(value);
  }
  for (double v : c.values) {
    switch (c.dtype) {
      case DType::U8:
        if (v < 0 || v > 255 || v != std::floor(v)) fail(ErrorKind::CorruptContainer, "value not representable as u8");
        w.u8(static_cast<std::uint8_t>(v));
        break;
      case DType::U16:
        if (v < 0 || v > 65535 || v != std::floor(v)) fail(ErrorKind::CorruptContainer, "value not representable as u16");
        w.u16(static_cast<std::uint16_t>(v));
        break;
      case DType::F32: w.f32(static_cast<float>(v)); break;
      case DType::F64: w.f64(v); break;
    }
  }
  return w.take();
}

Vol1 decode_vol1(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorKind::NotVol1, "bad magic");
  Reader r(bytes.subspan(4));
  Vol1 c;
  const std::uint8_t code = r.u8();
  if (code < 1 || code > 4) fail(ErrorKind::CorruptContainer, "unknown dtype code " + std::to_string(code));
  c.dtype = static_cast<DType>(code);
  for (int i = 0; i < 3; ++i)
    if (r.u8() != 0) fail(ErrorKind::CorruptContainer, "reserved header bytes must be zero");
  std::array<std::uint32_t, 3> dims{};
  for (auto& d : dims) d = r.u32();
  const std::uint32_t channels = r.u32();
  std::array<double, 3> spacing{};
  for (auto& s : spacing) s = r.f64();
  for (int a = 0; a < 3; ++a) {
    if (dims[static_cast<std::size_t>(a)] == 0 || dims[static_cast<std::size_t>(a)] > (1u << 20))
      fail(ErrorKind::CorruptContainer, "dimension out of range");
    if (!(spacing[static_cast<std::size_t>(a)] > 0.0) || !std::isfinite(spacing[static_cast<std::size_t>(a)]))
      fail(ErrorKind::CorruptContainer, "spacing must be positive");
  }
  if (channels == 0 || channels > (1u << 16)) fail(ErrorKind::CorruptContainer, "channel count out of range");
  c.shape = GridShape(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]), spacing);
  c.channels = static_cast<int>(channels);

  const std::uint32_t n_attr = r.u32();
  std::string previous;
  for (std::uint32_t i = 0; i < n_attr; ++i) {
    std::string key = r.str();
    std::string value = r.str();
    if (i > 0 && key <= previous) fail(ErrorKind::CorruptContainer, "attribute keys must be strictly increasing");
    previous = key;
    c.attributes.emplace(std::move(key), std::move(value));
  }

  const std::size_t per_voxel = static_cast<std::size_t>(c.channels) * dtype_size(c.dtype);
  if (r.remaining() / per_voxel < c.shape.voxel_count()) fail(ErrorKind::CorruptContainer, "truncated payload");
  const std::size_t count = static_cast<std::size_t>(c.channels) * c.shape.voxel_count();
  const std::size_t payload = count * dtype_size(c.dtype);
  if (r.remaining() < payload) fail(ErrorKind::CorruptContainer, "truncated payload");
  if (r.remaining() > payload) fail(ErrorKind::CorruptContainer, "trailing bytes after payload");
  c.values.resize(count);
  for (double& v : c.values) {
    switch (c.dtype) {
      case DType::U8: v = r.u8(); break;
      case DType::U16: v = r.u16(); break;
      case DType::F32: v = r.f32(); break;
      case DType::F64: v = r.f64(); break;
    }
  }
  return c;
}

void write_vol1(const std::filesystem::path& path, const Vol1& container) {
  const std::vector<std::byte> bytes = encode_vol1(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

Vol1 read_vol1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_vol1(std::as_bytes(std::span<const char>(raw)));
}

Vol1 to_vol1(const ScalarVolume& volume, DType dtype) {
  Vol1 c;
  c.dtype = dtype;
  c.shape = volume.shape;
  c.attributes["kind"] = "scalar";
  c.values = volume.values;
  return c;
}

Vol1 to_vol1(const FeatureMap& features, DType dtype) {
  Vol1 c;
  c.dtype = dtype;
  c.shape = features.shape();
  c.channels = features.channels();
  c.attributes["kind"] = "features";
  c.values.assign(features.data().begin(), features.data().end());
  return c;
}

Vol1 to_vol1(const LabelVolume& labels) {
  Vol1 c;
  c.dtype = DType::U16;
  c.shape = labels.shape;
  c.attributes["kind"] = "labels";
  c.values.assign(labels.labels.begin(), labels.labels.end());
  return c;
}

Vol1 to_vol1(const DisplacementField& field) { return field_to_vol1(field, "displacement"); }
Vol1 to_vol1(const VelocityField& field) { return field_to_vol1(field, "velocity"); }

Vol1 to_vol1(const CoarseDisplacementField& field) {
  Vol1 c = field_to_vol1(field.lattice, "coarse");
  c.attributes["stride"] = std::to_string(field.stride);
  return c;
}

ScalarVolume scalar_from(const Vol1& c) {
  if (c.channels != 1) fail(ErrorKind::ShapeMismatch, "scalar volume needs one channel");
  ScalarVolume v(c.shape);
  v.values = c.values;
  return v;
}

FeatureMap features_from(const Vol1& c) {
  require_kind(c, "features", 0);
  FeatureMap f(c.shape, c.channels);
  std::copy(c.values.begin(), c.values.end(), f.data().begin());
  return f;
}

LabelVolume labels_from(const Vol1& c) {
  require_kind(c, "labels", 1);
  LabelVolume l(c.shape);
  for (std::size_t i = 0; i < l.labels.size(); ++i) {
    const double v = c.values[i];
    if (v < 0 || v > 65535 || v != std::floor(v)) fail(ErrorKind::CorruptContainer, "label value out of range");
    l.labels[i] = static_cast<std::uint16_t>(v);
  }
  return l;
}

DisplacementField displacement_from(const Vol1& c) { return field_from_vol1<DisplacementTag>(c, "displacement"); }
VelocityField velocity_from(const Vol1& c) { return field_from_vol1<VelocityTag>(c, "velocity"); }

CoarseDisplacementField coarse_from(const Vol1& c) {
  CoarseDisplacementField f;
  f.lattice = field_from_vol1<DisplacementTag>(c, "coarse");
  const auto it = c.attributes.find("stride");
  if (it == c.attributes.end()) fail(ErrorKind::CorruptContainer, "coarse field without stride attribute");
  try {
    f.stride = std::stoi(it->second);
  } catch (const std::exception&) {
    fail(ErrorKind::CorruptContainer, "bad stride attribute");
  }
  if (f.stride < 1) fail(ErrorKind::CorruptContainer, "stride must be >= 1");
  return f;
}

}  // namespace embreg
