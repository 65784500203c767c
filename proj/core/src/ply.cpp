#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

#include "splatcage/error.hpp"
#include "splatcage/splat.hpp"

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace splatcage {

std::size_t ply_type_size(PlyType type) {
  switch (type) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

namespace {

// Interpreted fields; everything else is carried as opaque bytes.
constexpr int kFieldCount = 14;
constexpr std::array<const char*, kFieldCount> kFields = {
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3"};

std::optional<PlyType> parse_type(const std::string& token) {
  static const std::map<std::string, PlyType> types = {
      {"char", PlyType::Int8},     {"int8", PlyType::Int8},      {"uchar", PlyType::UInt8},
      {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},    {"int16", PlyType::Int16},
      {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},  {"int", PlyType::Int32},
      {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},    {"uint32", PlyType::UInt32},
      {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
      {"float64", PlyType::Float64}};
  auto it = types.find(token);
  if (it == types.end()) return std::nullopt;
  return it->second;
}

int field_slot(const std::string& name) {
  for (int i = 0; i < kFieldCount; ++i) {
    if (name == kFields[i]) return i;
  }
  return -1;
}

double read_scalar(const std::uint8_t* p, PlyType type) {
  switch (type) {
    case PlyType::Float32: { float v; std::memcpy(&v, p, 4); return v; }
    case PlyType::Float64: { double v; std::memcpy(&v, p, 8); return v; }
    default: break;
  }
  throw Error(ErrorCode::MalformedHeader, "interpreted splat fields must be float or double");
}

void write_scalar(std::vector<std::uint8_t>& out, double value, PlyType type) {
  if (type == PlyType::Float64) {
    std::uint8_t b[8];
    std::memcpy(b, &value, 8);
    out.insert(out.end(), b, b + 8);
  } else {
    const float f = static_cast<float>(value);
    std::uint8_t b[4];
    std::memcpy(b, &f, 4);
    out.insert(out.end(), b, b + 4);
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

PlyLayout canonical_layout() {
  PlyLayout layout;
  for (int i = 0; i < kFieldCount; ++i) {
    layout.properties.push_back({kFields[i], PlyType::Float32, "float"});
  }
  return layout;
}

}  // namespace

SplatCloud parse_ply(std::span<const std::uint8_t> bytes) {
  // Header is ASCII, terminated by "end_header\n".
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const std::string_view terminator = "end_header\n";
  const auto end = text.find(terminator);
  if (text.substr(0, 4) != "ply\n" || end == std::string_view::npos) {
    throw Error(ErrorCode::MalformedHeader, "missing ply magic or end_header");
  }
  std::istringstream header(std::string(text.substr(0, end)));
  std::string line;
  std::getline(header, line);  // "ply"

  SplatCloud cloud;
  std::size_t vertex_count = 0;
  bool saw_format = false;
  bool in_vertex = false;
  bool saw_vertex = false;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty()) continue;
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt != "binary_little_endian") {
        throw Error(ErrorCode::MalformedHeader, "only binary_little_endian is supported, got " + fmt);
      }
      saw_format = true;
    } else if (keyword == "comment" || keyword == "obj_info") {
      cloud.layout.header_comments.push_back(line);
    } else if (keyword == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (name != "vertex" || saw_vertex || count < 0) {
        throw Error(ErrorCode::MalformedHeader, "expected a single 'element vertex N', got: " + line);
      }
      vertex_count = static_cast<std::size_t>(count);
      in_vertex = saw_vertex = true;
    } else if (keyword == "property") {
      std::string type_token, name;
      ls >> type_token;
      if (type_token == "list" || !in_vertex) {
        throw Error(ErrorCode::MalformedHeader, "unsupported property line: " + line);
      }
      ls >> name;
      auto type = parse_type(type_token);
      if (!type || name.empty()) throw Error(ErrorCode::MalformedHeader, "bad property line: " + line);
      cloud.layout.properties.push_back({name, *type, type_token});
    } else {
      throw Error(ErrorCode::MalformedHeader, "unexpected header line: " + line);
    }
  }
  if (!saw_format || !saw_vertex) {
    throw Error(ErrorCode::MalformedHeader, "header lacks format or vertex element");
  }

  std::array<int, kFieldCount> offsets;
  offsets.fill(-1);
  std::array<PlyType, kFieldCount> types{};
  std::size_t stride = 0;
  std::vector<std::pair<std::size_t, std::size_t>> extra_spans;  // (offset, size)
  for (const auto& prop : cloud.layout.properties) {
    const std::size_t size = ply_type_size(prop.type);
    const int slot = field_slot(prop.name);
    if (slot >= 0) {
      if (offsets[slot] >= 0) throw Error(ErrorCode::MalformedHeader, "duplicate property " + prop.name);
      offsets[slot] = static_cast<int>(stride);
      types[slot] = prop.type;
    } else {
      extra_spans.emplace_back(stride, size);
      cloud.layout.extra_stride += size;
    }
    stride += size;
  }
  for (int i = 0; i < kFieldCount; ++i) {
    if (offsets[i] < 0) throw Error(ErrorCode::MissingField, kFields[i]);
  }
  if (vertex_count == 0) throw Error(ErrorCode::EmptyCloud, "PLY has zero vertices");

  const std::size_t body = end + terminator.size();
  if (bytes.size() != body + vertex_count * stride) {
    throw Error(ErrorCode::MalformedHeader, "payload size does not match vertex count");
  }

  cloud.splats.resize(vertex_count);
  cloud.extra.resize(vertex_count * cloud.layout.extra_stride);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    const std::uint8_t* rec = bytes.data() + body + i * stride;
    auto get = [&](int slot) { return read_scalar(rec + offsets[slot], types[slot]); };
    Splat& s = cloud.splats[i];
    s.mu = Vec3(get(0), get(1), get(2));
    s.color = Vec3(get(3), get(4), get(5));
    s.opacity = sigmoid(get(6));
    s.scale = Vec3(std::exp(get(7)), std::exp(get(8)), std::exp(get(9)));
    const Quat raw(get(10), get(11), get(12), get(13));  // w, x, y, z
    const double norm = raw.norm();
    if (!(norm > 1e-12) || !std::isfinite(norm)) {
      throw Error(ErrorCode::NormalizationFailure, "zero or non-finite quaternion", i);
    }
    s.rot = Quat(raw.coeffs() / norm);
    std::uint8_t* dst = cloud.extra.data() + i * cloud.layout.extra_stride;
    for (const auto& [off, size] : extra_spans) {
      std::memcpy(dst, rec + off, size);
      dst += size;
    }
  }
  return cloud;
}

SplatCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ply(bytes);
}

std::vector<std::uint8_t> serialize_ply(const SplatCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "refusing to write an empty cloud");
  const PlyLayout layout = cloud.layout.properties.empty() ? canonical_layout() : cloud.layout;
  if (cloud.extra.size() != layout.extra_stride * cloud.count()) {
    throw Error(ErrorCode::InvalidArgument, "pass-through payload size does not match splat count");
  }

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : layout.header_comments) header << c << '\n';
  header << "element vertex " << cloud.count() << '\n';
  for (const auto& p : layout.properties) {
    header << "property " << (p.type_token.empty() ? "float" : p.type_token) << ' ' << p.name << '\n';
  }
  header << "end_header\n";
  const std::string h = header.str();

  std::vector<std::uint8_t> out(h.begin(), h.end());
  for (std::size_t i = 0; i < cloud.count(); ++i) {
    const Splat& s = cloud.splats[i];
    const std::array<double, kFieldCount> values = {
        s.mu.x(), s.mu.y(), s.mu.z(), s.color.x(), s.color.y(), s.color.z(), logit(s.opacity),
        std::log(s.scale.x()), std::log(s.scale.y()), std::log(s.scale.z()),
        s.rot.w(), s.rot.x(), s.rot.y(), s.rot.z()};
    const std::uint8_t* extra = cloud.extra.data() + i * layout.extra_stride;
    for (const auto& p : layout.properties) {
      const int slot = field_slot(p.name);
      if (slot >= 0) {
        write_scalar(out, values[slot], p.type);
      } else {
        const std::size_t size = ply_type_size(p.type);
        out.insert(out.end(), extra, extra + size);
        extra += size;
      }
    }
  }
  return out;
}

void save_ply(const SplatCloud& cloud, const std::filesystem::path& path) {
  const auto bytes = serialize_ply(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace splatcage
