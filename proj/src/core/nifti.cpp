#include "voxbench/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace voxbench {

static_assert(std::endian::native == std::endian::little, "voxbench assumes a little-endian host");

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

enum NiftiType : std::int16_t {
  DT_UINT8 = 2,
  DT_INT16 = 4,
  DT_INT32 = 8,
  DT_FLOAT32 = 16,
  DT_COMPLEX64 = 32,
  DT_FLOAT64 = 64,
  DT_RGB24 = 128,
  DT_INT8 = 256,
  DT_UINT16 = 512,
  DT_UINT32 = 768,
  DT_INT64 = 1024,
  DT_UINT64 = 1280,
  DT_FLOAT128 = 1536,
  DT_COMPLEX128 = 1792,
  DT_COMPLEX256 = 2048,
  DT_RGBA32 = 2304,
};

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    if (offset + sizeof(T) > bytes_.size()) throw Error(ErrorCode::format, "truncated header", offset);
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    if (swap_) v = byteswap_value(v);
    return v;
  }

  template <typename T>
  static T byteswap_value(T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    std::reverse(buf, buf + sizeof(T));
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

std::size_t datatype_size(std::int16_t datatype) {
  switch (datatype) {
    case DT_UINT8:
    case DT_INT8: return 1;
    case DT_INT16:
    case DT_UINT16: return 2;
    case DT_INT32:
    case DT_UINT32:
    case DT_FLOAT32: return 4;
    case DT_FLOAT64:
    case DT_INT64:
    case DT_UINT64: return 8;
    default: return 0;
  }
}

template <typename T>
double load_as_double(const std::uint8_t* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) v = HeaderReader::byteswap_value(v);
  return static_cast<double>(v);
}

double load_value(const std::uint8_t* p, std::int16_t datatype, bool swap) {
  switch (datatype) {
    case DT_UINT8: return load_as_double<std::uint8_t>(p, swap);
    case DT_INT8: return load_as_double<std::int8_t>(p, swap);
    case DT_INT16: return load_as_double<std::int16_t>(p, swap);
    case DT_UINT16: return load_as_double<std::uint16_t>(p, swap);
    case DT_INT32: return load_as_double<std::int32_t>(p, swap);
    case DT_UINT32: return load_as_double<std::uint32_t>(p, swap);
    case DT_FLOAT32: return load_as_double<float>(p, swap);
    case DT_FLOAT64: return load_as_double<double>(p, swap);
    case DT_INT64: return load_as_double<std::int64_t>(p, swap);
    case DT_UINT64: return load_as_double<std::uint64_t>(p, swap);
    default: return 0.0;
  }
}

// Quaternion -> rotation, following the NIfTI-1 qform definition.
Mat3 quaternion_to_rotation(double b, double c, double d, double qfac) {
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  Mat3 r{a * a + b * b - c * c - d * d, 2 * (b * c - a * d),         2 * (b * d + a * c),
         2 * (b * c + a * d),         a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
         2 * (b * d - a * c),         2 * (c * d + a * b),         a * a + d * d - c * c - b * b};
  if (qfac < 0) {
    for (int row = 0; row < 3; ++row) r[row * 3 + 2] = -r[row * 3 + 2];
  }
  return r;
}

double determinant(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

// Rotation -> quaternion (b, c, d) and qfac; inverse of quaternion_to_rotation.
void rotation_to_quaternion(Mat3 r, double& b, double& c, double& d, double& qfac) {
  qfac = determinant(r) < 0 ? -1.0 : 1.0;
  if (qfac < 0) {
    for (int row = 0; row < 3; ++row) r[row * 3 + 2] = -r[row * 3 + 2];
  }
  const double r11 = r[0], r12 = r[1], r13 = r[2];
  const double r21 = r[3], r22 = r[4], r23 = r[5];
  const double r31 = r[6], r32 = r[7], r33 = r[8];
  double a = r11 + r22 + r33 + 1.0;
  if (a > 0.5) {
    a = 0.5 * std::sqrt(a);
    b = 0.25 * (r32 - r23) / a;
    c = 0.25 * (r13 - r31) / a;
    d = 0.25 * (r21 - r12) / a;
  } else {
    const double xd = 1.0 + r11 - (r22 + r33);
    const double yd = 1.0 + r22 - (r11 + r33);
    const double zd = 1.0 + r33 - (r11 + r22);
    if (xd > 1.0) {
      b = 0.5 * std::sqrt(xd);
      c = 0.25 * (r12 + r21) / b;
      d = 0.25 * (r13 + r31) / b;
      a = 0.25 * (r32 - r23) / b;
    } else if (yd > 1.0) {
      c = 0.5 * std::sqrt(yd);
      b = 0.25 * (r12 + r21) / c;
      d = 0.25 * (r23 + r32) / c;
      a = 0.25 * (r13 - r31) / c;
    } else {
      d = 0.5 * std::sqrt(zd);
      b = 0.25 * (r13 + r31) / d;
      c = 0.25 * (r23 + r32) / d;
      a = 0.25 * (r21 - r12) / d;
    }
    if (a < 0.0) {
      b = -b;
      c = -c;
      d = -d;
    }
  }
}

struct Decoded {
  Dims dims;
  Geometry geometry;
  std::int16_t datatype = 0;
  double slope = 1.0;
  double inter = 0.0;
  std::size_t data_offset = kDataOffset;
  bool swap = false;
};

Decoded decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::format, "file shorter than a NIfTI-1 header", bytes.size());
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  Decoded h;
  if (sizeof_hdr == static_cast<std::int32_t>(kHeaderSize)) {
    h.swap = false;
  } else if (HeaderReader::byteswap_value(sizeof_hdr) == static_cast<std::int32_t>(kHeaderSize)) {
    h.swap = true;
  } else {
    throw Error(ErrorCode::format, "sizeof_hdr is not 348", 0);
  }
  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0) {
    throw Error(ErrorCode::format, "missing single-file NIfTI-1 magic 'n+1'", 344);
  }
  const HeaderReader r(bytes, h.swap);

  const auto ndim = r.get<std::int16_t>(40);
  if (ndim < 1 || ndim > 7) throw Error(ErrorCode::format, "dim[0] out of range", 40);
  if (ndim != 3) throw Error(ErrorCode::shape, "expected a 3D image, dim[0] = " + std::to_string(ndim));
  std::int64_t n[3];
  for (int a = 0; a < 3; ++a) {
    n[a] = r.get<std::int16_t>(42 + 2 * a);
    if (n[a] <= 0) throw Error(ErrorCode::format, "non-positive dimension", 42 + 2 * a);
  }
  h.dims = Dims{n[0], n[1], n[2]};

  h.datatype = r.get<std::int16_t>(70);
  switch (h.datatype) {
    case DT_RGB24:
    case DT_RGBA32:
    case DT_COMPLEX64:
    case DT_COMPLEX128:
    case DT_COMPLEX256:
    case DT_FLOAT128:
      throw Error(ErrorCode::unsupported_datatype, "datatype " + std::to_string(h.datatype) + " is not a real scalar");
    default: break;
  }
  const std::size_t elem = datatype_size(h.datatype);
  if (elem == 0) throw Error(ErrorCode::unsupported_datatype, "unknown datatype " + std::to_string(h.datatype));
  const auto bitpix = r.get<std::int16_t>(72);
  if (bitpix != static_cast<std::int16_t>(elem * 8)) throw Error(ErrorCode::format, "bitpix inconsistent with datatype", 72);

  const float vox_offset = r.get<float>(108);
  if (!(vox_offset >= static_cast<float>(kHeaderSize)) || !std::isfinite(vox_offset))
    throw Error(ErrorCode::format, "vox_offset before end of header", 108);
  h.data_offset = static_cast<std::size_t>(vox_offset);
  if (h.data_offset + h.dims.count() * elem > bytes.size())
    throw Error(ErrorCode::format, "voxel data truncated", bytes.size());

  const double slope = r.get<float>(112);
  const double inter = r.get<float>(116);
  if (slope != 0.0 && std::isfinite(slope)) {
    h.slope = slope;
    h.inter = std::isfinite(inter) ? inter : 0.0;
  }

  float pixdim[4];
  for (int i = 0; i < 4; ++i) pixdim[i] = r.get<float>(76 + 4 * i);

  const auto qform_code = r.get<std::int16_t>(252);
  const auto sform_code = r.get<std::int16_t>(254);
  Geometry g;
  if (sform_code > 0) {
    double a[3][4];
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 4; ++col) a[row][col] = r.get<float>(280 + 16 * row + 4 * col);
    for (int col = 0; col < 3; ++col) {
      const double norm = std::sqrt(a[0][col] * a[0][col] + a[1][col] * a[1][col] + a[2][col] * a[2][col]);
      if (!(norm > 0.0)) throw Error(ErrorCode::format, "degenerate sform column", 280 + 4 * col);
      g.spacing[col] = norm;
      for (int row = 0; row < 3; ++row) g.direction[row * 3 + col] = a[row][col] / norm;
    }
    for (int row = 0; row < 3; ++row) g.origin[row] = a[row][3];
  } else if (qform_code > 0) {
    const double qb = r.get<float>(256), qc = r.get<float>(260), qd = r.get<float>(264);
    const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
    g.direction = quaternion_to_rotation(qb, qc, qd, qfac);
    for (int a = 0; a < 3; ++a) {
      g.spacing[a] = std::abs(static_cast<double>(pixdim[a + 1]));
      g.origin[a] = r.get<float>(268 + 4 * a);
    }
  } else {
    for (int a = 0; a < 3; ++a) {
      const double s = std::abs(static_cast<double>(pixdim[a + 1]));
      g.spacing[a] = s > 0.0 ? s : 1.0;
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (!(g.spacing[a] > 0.0)) throw Error(ErrorCode::format, "non-positive voxel spacing", 80 + 4 * a);
  }
  try {
    validate_geometry(g);
  } catch (const Error&) {
    throw Error(ErrorCode::format, "orientation matrix is not orthonormal", sform_code > 0 ? 280 : 256);
  }
  h.geometry = g;
  return h;
}

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T v) {
  std::memcpy(buf.data() + offset, &v, sizeof(T));
}

std::vector<std::uint8_t> encode_header(Dims dims, const Geometry& g, std::int16_t datatype, std::int16_t bitpix) {
  if (dims.x > 32767 || dims.y > 32767 || dims.z > 32767)
    throw Error(ErrorCode::shape, "dimension exceeds NIfTI-1 limit of 32767");
  std::vector<std::uint8_t> buf(kDataOffset, 0);
  put<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
  buf[39] = 0;  // dim_info
  put<std::int16_t>(buf, 40, 3);
  put<std::int16_t>(buf, 42, static_cast<std::int16_t>(dims.x));
  put<std::int16_t>(buf, 44, static_cast<std::int16_t>(dims.y));
  put<std::int16_t>(buf, 46, static_cast<std::int16_t>(dims.z));
  for (int i = 4; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, 1);
  put<std::int16_t>(buf, 70, datatype);
  put<std::int16_t>(buf, 72, bitpix);

  double qb, qc, qd, qfac;
  rotation_to_quaternion(g.direction, qb, qc, qd, qfac);
  put<float>(buf, 76, static_cast<float>(qfac));
  for (int a = 0; a < 3; ++a) put<float>(buf, 80 + 4 * a, static_cast<float>(g.spacing[a]));
  for (int i = 4; i < 8; ++i) put<float>(buf, 76 + 4 * i, 1.0f);
  put<float>(buf, 108, static_cast<float>(kDataOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  buf[123] = 2;  // xyzt_units: mm
  const char descrip[] = "voxbench";
  std::memcpy(buf.data() + 148, descrip, sizeof(descrip) - 1);
  put<std::int16_t>(buf, 252, 1);
  put<std::int16_t>(buf, 254, 1);
  put<float>(buf, 256, static_cast<float>(qb));
  put<float>(buf, 260, static_cast<float>(qc));
  put<float>(buf, 264, static_cast<float>(qd));
  for (int a = 0; a < 3; ++a) put<float>(buf, 268 + 4 * a, static_cast<float>(g.origin[a]));
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col)
      put<float>(buf, 280 + 16 * row + 4 * col, static_cast<float>(g.direction[row * 3 + col] * g.spacing[col]));
    put<float>(buf, 280 + 16 * row + 12, static_cast<float>(g.origin[row]));
  }
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  return buf;
}

bool has_gz_extension(const std::filesystem::path& path) { return path.extension() == ".gz"; }

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw Error(ErrorCode::io, "cannot read '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  // windowBits 15 + 16 selects a gzip wrapper with a zeroed mtime field.
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorCode::io, "deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::io, "gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorCode::io, "inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 20);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::format, "corrupt gzip stream", zs.total_in);
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::format, "truncated gzip stream", zs.total_in);
    }
  }
  inflateEnd(&zs);
  return out;
}

Volume decode_nifti(std::span<const std::uint8_t> raw, Modality modality) {
  std::vector<std::uint8_t> inflated;
  std::span<const std::uint8_t> bytes = raw;
  if (is_gzip(raw)) {
    inflated = gzip_decompress(raw);
    bytes = inflated;
  }
  const Decoded h = decode_header(bytes);
  const std::size_t elem = datatype_size(h.datatype);
  const std::size_t n = h.dims.count();
  std::vector<float> voxels(n);
  const std::uint8_t* data = bytes.data() + h.data_offset;
  if (h.datatype == DT_FLOAT32 && !h.swap && h.slope == 1.0 && h.inter == 0.0) {
    std::memcpy(voxels.data(), data, n * sizeof(float));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = load_value(data + i * elem, h.datatype, h.swap);
      voxels[i] = static_cast<float>(h.slope * v + h.inter);
    }
  }
  return Volume(Grid3<float>(h.dims, std::move(voxels)), h.geometry, modality);
}

Volume read_nifti(const std::filesystem::path& path, Modality modality) {
  return decode_nifti(read_file_bytes(path), modality);
}

std::vector<std::uint8_t> encode_nifti(const Volume& vol) {
  std::vector<std::uint8_t> buf = encode_header(vol.dims(), vol.geometry(), DT_FLOAT32, 32);
  const auto values = vol.values();
  const std::size_t header = buf.size();
  buf.resize(header + values.size() * sizeof(float));
  std::memcpy(buf.data() + header, values.data(), values.size() * sizeof(float));
  return buf;
}

void write_nifti(const Volume& vol, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = encode_nifti(vol);
  if (has_gz_extension(path)) bytes = gzip_compress(bytes);
  write_file_bytes(path, bytes);
}

void write_mask_nifti(const Mask& mask, const Geometry& geometry, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = encode_header(mask.dims(), geometry, DT_UINT8, 8);
  bytes.insert(bytes.end(), mask.values().begin(), mask.values().end());
  if (has_gz_extension(path)) bytes = gzip_compress(bytes);
  write_file_bytes(path, bytes);
}

Mask read_mask_nifti(const std::filesystem::path& path) {
  const Volume v = read_nifti(path);
  Mask m(v.dims());
  const auto src = v.values();
  for (std::size_t i = 0; i < src.size(); ++i) m[i] = src[i] != 0.0f ? 1 : 0;
  return m;
}

}  // namespace voxbench
