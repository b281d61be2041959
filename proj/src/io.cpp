#include "ran/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace ran::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4, "requires 32-bit IEEE float");

template <typename T>
void swap_if_big_endian(std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (T& v : values) {
      auto* bytes = reinterpret_cast<unsigned char*>(&v);
      std::reverse(bytes, bytes + sizeof(T));
    }
  }
}

std::vector<char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_data_error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<size_t>(size));
  if (size > 0) in.read(bytes.data(), size);
  if (!in) throw invalid_data_error("short read on " + path.string());
  return bytes;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_data_error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw invalid_data_error("bad JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

struct Sidecar {
  Dims dims;
  Vec3d spacing{1.0, 1.0, 1.0};
  Index channels = 1;
  std::string dtype;
  std::string kind;
};

Sidecar parse_sidecar(const json& j, const fs::path& path) {
  Sidecar sc;
  try {
    const auto& dims = j.at("dims");
    if (!dims.is_array() || dims.size() != 3)
      throw invalid_data_error(path.string() + ": dims must be [T,H,W]");
    sc.dims = {dims[0].get<Index>(), dims[1].get<Index>(), dims[2].get<Index>()};
    const auto& sp = j.at("spacing");
    if (!sp.is_array() || sp.size() != 3)
      throw invalid_data_error(path.string() + ": spacing must be [sz,sy,sx]");
    sc.spacing = Vec3d(sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>());
    sc.channels = j.at("channels").get<Index>();
    sc.dtype = j.at("dtype").get<std::string>();
    sc.kind = j.value("kind", std::string());
  } catch (const json::exception& e) {
    throw invalid_data_error(path.string() + ": " + e.what());
  }
  if (sc.dims.t < 1 || sc.dims.h < 1 || sc.dims.w < 1 || sc.channels < 1)
    throw invalid_data_error(path.string() + ": non-positive dims or channels");
  return sc;
}

// minimal single-file NIfTI-1 reader: little-endian, float32 or uint8
struct NiftiData {
  Dims dims;
  Vec3d spacing;
  int16_t datatype = 0;
  std::vector<char> samples;
};

NiftiData read_nifti(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 352) throw invalid_data_error(path.string() + ": truncated NIfTI header");
  auto rd_i32 = [&](size_t off) {
    int32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  auto rd_i16 = [&](size_t off) {
    int16_t v;
    std::memcpy(&v, bytes.data() + off, 2);
    return v;
  };
  auto rd_f32 = [&](size_t off) {
    float v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  if constexpr (std::endian::native == std::endian::big)
    throw invalid_data_error("NIfTI reading is implemented for little-endian hosts only");

  if (rd_i32(0) != 348) {
    if (rd_i32(0) == 0x5C010000)
      throw invalid_data_error(path.string() + ": big-endian NIfTI files are not supported");
    throw invalid_data_error(path.string() + ": not a NIfTI-1 file (sizeof_hdr != 348)");
  }
  if (std::memcmp(bytes.data() + 344, "n+1", 3) != 0)
    throw invalid_data_error(path.string() + ": only single-file NIfTI (magic n+1) is supported");

  const int16_t ndim = rd_i16(40);
  if (ndim < 3 || ndim > 7)
    throw invalid_data_error(path.string() + ": unsupported NIfTI dimensionality");
  const Index nx = rd_i16(42), ny = rd_i16(44), nz = rd_i16(46);
  for (int d = 4; d <= ndim; ++d)
    if (rd_i16(size_t(40 + 2 * d)) > 1)
      throw invalid_data_error(path.string() + ": only 3-D NIfTI volumes are supported");

  NiftiData out;
  out.dims = {nz, ny, nx};
  out.spacing = Vec3d(double(rd_f32(88)), double(rd_f32(84)), double(rd_f32(80)));
  for (int c = 0; c < 3; ++c)
    if (!(out.spacing[c] > 0.0)) out.spacing[c] = 1.0;
  out.datatype = rd_i16(70);
  if (out.datatype != 16 && out.datatype != 2)
    throw invalid_data_error(path.string() +
                             ": unsupported NIfTI datatype (only float32 and uint8)");

  const size_t offset = size_t(rd_f32(108));
  const size_t elem = out.datatype == 16 ? 4 : 1;
  const size_t need = size_t(out.dims.count()) * elem;
  if (offset < 352 || bytes.size() < offset + need)
    throw invalid_data_error(path.string() + ": NIfTI data section truncated");
  out.samples.assign(bytes.begin() + std::streamoff(offset),
                     bytes.begin() + std::streamoff(offset + need));
  return out;
}

// NIfTI stores x fastest; so do we (x fastest within a slice, z slowest).
template <typename Out, typename In>
void copy_nifti_samples(const std::vector<char>& raw, Eigen::Array<Out, Eigen::Dynamic, 1>& dst) {
  const In* src = reinterpret_cast<const In*>(raw.data());
  for (Index i = 0; i < dst.size(); ++i) dst[i] = Out(src[i]);
}

std::vector<float> read_raw_f32(const fs::path& raw, Index expected) {
  auto bytes = read_file_bytes(raw);
  if (bytes.size() != size_t(expected) * 4)
    throw invalid_data_error(raw.string() + ": expected " + std::to_string(expected * 4) +
                             " bytes, found " + std::to_string(bytes.size()));
  std::vector<float> values(static_cast<size_t>(expected));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  swap_if_big_endian(values);
  return values;
}

std::vector<int32_t> read_raw_i32(const fs::path& raw, Index expected) {
  auto bytes = read_file_bytes(raw);
  if (bytes.size() != size_t(expected) * 4)
    throw invalid_data_error(raw.string() + ": expected " + std::to_string(expected * 4) +
                             " bytes, found " + std::to_string(bytes.size()));
  std::vector<int32_t> values(static_cast<size_t>(expected));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  swap_if_big_endian(values);
  return values;
}

bool is_nifti(const fs::path& path) { return path.extension() == ".nii"; }

json sidecar_json(Dims dims, const Vec3d& spacing, Index channels, const char* dtype,
                  const char* kind) {
  json j;
  j["dims"] = {dims.t, dims.h, dims.w};
  j["spacing"] = {spacing[0], spacing[1], spacing[2]};
  j["channels"] = channels;
  j["dtype"] = dtype;
  if (kind) j["kind"] = kind;
  return j;
}

}  // namespace

fs::path raw_path_for(const fs::path& sidecar) {
  fs::path p = sidecar;
  p.replace_extension(".raw");
  return p;
}

void atomic_write_bytes(const fs::path& path, const void* data, size_t size) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw invalid_data_error("cannot write " + tmp.string());
    if (size > 0) out.write(static_cast<const char*>(data), std::streamsize(size));
    if (!out) throw invalid_data_error("short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

void atomic_write_text(const fs::path& path, const std::string& text) {
  atomic_write_bytes(path, text.data(), text.size());
}

std::string fnv1a64_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  uint64_t h = 14695981039346656037ull;
  for (const char c : bytes) {
    h ^= uint64_t(uint8_t(c));
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

Volume read_volume(const fs::path& path) {
  if (is_nifti(path)) {
    const auto n = read_nifti(path);
    Volume vol(n.dims, 1, 0.0f, n.spacing);
    if (n.datatype == 16)
      copy_nifti_samples<float, float>(n.samples, vol.data);
    else
      copy_nifti_samples<float, uint8_t>(n.samples, vol.data);
    return vol;
  }
  const fs::path sidecar = path.extension() == ".raw" ? fs::path(path).replace_extension(".json")
                                                      : path;
  const auto sc = parse_sidecar(read_json_file(sidecar), sidecar);
  if (sc.dtype != "f32")
    throw invalid_data_error(sidecar.string() + ": volume dtype must be f32");
  if (sc.kind == "ddf")
    throw invalid_data_error(sidecar.string() + ": this is a displacement field, not a volume");
  Volume vol(sc.dims, sc.channels, 0.0f, sc.spacing);
  const auto values = read_raw_f32(raw_path_for(sidecar), vol.data.size());
  std::memcpy(vol.data.data(), values.data(), values.size() * 4);
  return vol;
}

DisplacementField read_field(const fs::path& path) {
  const fs::path sidecar = path.extension() == ".raw" ? fs::path(path).replace_extension(".json")
                                                      : path;
  const auto sc = parse_sidecar(read_json_file(sidecar), sidecar);
  if (sc.kind != "ddf")
    throw invalid_data_error(sidecar.string() + ": sidecar kind must be \"ddf\"");
  if (sc.dtype != "f32" || sc.channels != 3)
    throw invalid_data_error(sidecar.string() + ": a field needs dtype f32 and 3 channels");
  DisplacementField field(sc.dims);
  const auto values = read_raw_f32(raw_path_for(sidecar), field.data.size());
  std::memcpy(field.data.data(), values.data(), values.size() * 4);
  if (!field.data.allFinite())
    throw invalid_data_error(path.string() + ": field contains non-finite components");
  return field;
}

LabelVolume read_labels(const fs::path& path) {
  if (is_nifti(path)) {
    const auto n = read_nifti(path);
    if (n.datatype != 2)
      throw invalid_data_error(path.string() + ": label NIfTI must be uint8");
    LabelVolume labels(n.dims);
    copy_nifti_samples<int32_t, uint8_t>(n.samples, labels.data);
    return labels;
  }
  const fs::path sidecar = path.extension() == ".raw" ? fs::path(path).replace_extension(".json")
                                                      : path;
  const auto sc = parse_sidecar(read_json_file(sidecar), sidecar);
  if (sc.dtype != "i32" || sc.channels != 1)
    throw invalid_data_error(sidecar.string() + ": labels need dtype i32 and 1 channel");
  LabelVolume labels(sc.dims);
  const auto values = read_raw_i32(raw_path_for(sidecar), labels.data.size());
  std::memcpy(labels.data.data(), values.data(), values.size() * 4);
  labels.validate();
  return labels;
}

void write_volume(const fs::path& sidecar, const Volume& vol) {
  std::vector<float> values(static_cast<size_t>(vol.data.size()));
  std::memcpy(values.data(), vol.data.data(), values.size() * 4);
  swap_if_big_endian(values);
  atomic_write_bytes(raw_path_for(sidecar), values.data(), values.size() * 4);
  atomic_write_text(sidecar,
                    sidecar_json(vol.dims, vol.spacing, vol.channels, "f32", nullptr).dump(2) + "\n");
}

void write_field(const fs::path& sidecar, const DisplacementField& field) {
  std::vector<float> values(static_cast<size_t>(field.data.size()));
  std::memcpy(values.data(), field.data.data(), values.size() * 4);
  swap_if_big_endian(values);
  atomic_write_bytes(raw_path_for(sidecar), values.data(), values.size() * 4);
  atomic_write_text(
      sidecar, sidecar_json(field.dims, Vec3d(1, 1, 1), 3, "f32", "ddf").dump(2) + "\n");
}

void write_labels(const fs::path& sidecar, const LabelVolume& labels) {
  std::vector<int32_t> values(static_cast<size_t>(labels.data.size()));
  std::memcpy(values.data(), labels.data.data(), values.size() * 4);
  swap_if_big_endian(values);
  atomic_write_bytes(raw_path_for(sidecar), values.data(), values.size() * 4);
  atomic_write_text(
      sidecar, sidecar_json(labels.dims, Vec3d(1, 1, 1), 1, "i32", "labels").dump(2) + "\n");
}

}  // namespace ran::io
