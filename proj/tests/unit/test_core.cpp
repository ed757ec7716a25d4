#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/csv.hpp"
#include "voxbench/nifti.hpp"
#include "voxbench/resample.hpp"

using namespace voxbench;
using testutil::error_code_of;

TEST_CASE("grid layout is x-fastest") {
  Grid3<int> g(Dims{3, 4, 5});
  CHECK(g.index(1, 0, 0) == 1);
  CHECK(g.index(0, 1, 0) == 3);
  CHECK(g.index(0, 0, 1) == 12);
  g(2, 3, 4) = 7;
  CHECK(g[g.size() - 1] == 7);
  CHECK(g.row(3, 4).size() == 3);
  CHECK(error_code_of([] { Grid3<float>(Dims{2, 2, 2}, std::vector<float>(7)); }) == ErrorCode::shape);
}

TEST_CASE("errors carry code and optional byte offset") {
  const Error plain(ErrorCode::io, "x");
  CHECK(plain.code() == ErrorCode::io);
  CHECK_FALSE(plain.byte_offset().has_value());
  const Error fmt(ErrorCode::format, "bad", 344);
  CHECK(*fmt.byte_offset() == 344);
  CHECK(to_string(ErrorCode::incomplete_coverage) == "incomplete-coverage");
}

TEST_CASE("modality names round trip") {
  for (Modality m : {Modality::CT, Modality::CBCT, Modality::MRI_T1w, Modality::MRI_T2w, Modality::MRI_T2f,
                     Modality::PET})
    CHECK(parse_modality(to_string(m)) == m);
  CHECK_THROWS_AS(parse_modality("XR"), Error);
}

TEST_CASE("geometry validation") {
  Geometry g;
  CHECK_NOTHROW(validate_geometry(g));
  g.spacing = {1, 0, 1};
  CHECK_THROWS_AS(validate_geometry(g), Error);
  g.spacing = {1, 1, 1};
  g.direction = {1, 0, 0, 0, 2, 0, 0, 0, 1};
  CHECK_THROWS_AS(validate_geometry(g), Error);
  Geometry h;
  h.spacing = {2, 3, 4};
  h.origin = {10, 20, 30};
  const Vec3 w = h.world({1, 1, 1});
  CHECK(w[0] == 12);
  CHECK(w[1] == 23);
  CHECK(w[2] == 34);
}

TEST_CASE("rng matches the standard mt19937_64 reference value") {
  Rng rng(5489);
  for (int i = 0; i < 9999; ++i) rng.next_u64();
  CHECK(rng.next_u64() == 9981545732273789042ULL);
  Rng a(1), b(1);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
    CHECK(u.below(10) < 10);
  }
}

TEST_CASE("nifti float round trip preserves voxels and geometry") {
  testutil::TempDir dir("nifti");
  Geometry g;
  g.spacing = {0.8, 1.25, 2.5};
  g.origin = {-10.5, 4.25, 100};
  g.direction = {0, -1, 0, 1, 0, 0, 0, 0, 1};
  const Volume v(testutil::random_grid(Dims{7, 5, 3}, 1, -1000, 3000), g, Modality::CBCT);
  for (const char* name : {"a.nii", "a.nii.gz"}) {
    write_nifti(v, dir / name);
    const Volume r = read_nifti(dir / name, Modality::CBCT);
    CHECK(r.dims() == v.dims());
    CHECK(r.voxels().vector() == v.voxels().vector());
    for (int i = 0; i < 3; ++i) {
      CHECK(r.spacing()[i] == static_cast<double>(static_cast<float>(g.spacing[i])));
      CHECK(r.geometry().origin[i] == static_cast<double>(static_cast<float>(g.origin[i])));
    }
    for (int i = 0; i < 9; ++i) CHECK(r.geometry().direction[i] == doctest::Approx(g.direction[i]));
  }
  CHECK(encode_nifti(v) == encode_nifti(v));
  CHECK(read_file_bytes(dir / "a.nii.gz") == gzip_compress(encode_nifti(v)));
}

TEST_CASE("nifti int16 with scaling decodes to float") {
  const Volume v(Grid3<float>(Dims{2, 2, 1}, 0.0f), Geometry{}, Modality::CT);
  std::vector<std::uint8_t> bytes = encode_nifti(v);
  float vox_offset;
  std::memcpy(&vox_offset, bytes.data() + 108, 4);
  bytes.resize(static_cast<std::size_t>(vox_offset));
  const std::int16_t datatype = 4, bitpix = 16;
  std::memcpy(bytes.data() + 70, &datatype, 2);
  std::memcpy(bytes.data() + 72, &bitpix, 2);
  const float slope = 2.0f, inter = -1024.0f;
  std::memcpy(bytes.data() + 112, &slope, 4);
  std::memcpy(bytes.data() + 116, &inter, 4);
  for (std::int16_t s : {std::int16_t(0), std::int16_t(1), std::int16_t(-3), std::int16_t(1000)}) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&s);
    bytes.insert(bytes.end(), p, p + 2);
  }
  const Volume r = decode_nifti(bytes);
  CHECK(r(0, 0, 0) == -1024.0f);
  CHECK(r(1, 0, 0) == -1022.0f);
  CHECK(r(0, 1, 0) == -1030.0f);
  CHECK(r(1, 1, 0) == 976.0f);
}

TEST_CASE("nifti rejects a bad magic with its byte offset") {
  const Volume v(Grid3<float>(Dims{2, 2, 2}, 1.0f), Geometry{}, Modality::CT);
  std::vector<std::uint8_t> bytes = encode_nifti(v);
  bytes[344] = 'x';
  try {
    (void)decode_nifti(bytes);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
    REQUIRE(e.byte_offset().has_value());
    CHECK(*e.byte_offset() == 344);
  }
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 100);
  CHECK(error_code_of([&] { (void)decode_nifti(truncated); }) == ErrorCode::format);
}

TEST_CASE("masks round trip through nifti") {
  testutil::TempDir dir("mask");
  Mask m(Dims{4, 3, 2});
  m(1, 1, 1) = 1;
  m(3, 2, 0) = 1;
  write_mask_nifti(m, Geometry{}, dir / "m.nii.gz");
  CHECK(read_mask_nifti(dir / "m.nii.gz").vector() == m.vector());
}

TEST_CASE("resampling") {
  SUBCASE("same spacing is an exact copy") {
    const Volume v = testutil::random_volume(Dims{6, 5, 4}, 3);
    const Volume r = resample_trilinear(v, v.spacing(), 0.0f);
    CHECK(r.voxels().vector() == v.voxels().vector());
  }
  SUBCASE("output dims use ceil") {
    CHECK(resampled_dims(Dims{10, 10, 10}, {1.5, 1, 2}, {1, 1, 1}) == Dims{15, 10, 20});
    CHECK(resampled_dims(Dims{5, 5, 5}, {1, 1, 1}, {2, 2, 2}) == Dims{3, 3, 3});
  }
  SUBCASE("trilinear reproduces a linear field at interior points") {
    Geometry g;
    g.spacing = {2, 2, 2};
    Grid3<float> grid(Dims{8, 8, 8});
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) grid(x, y, z) = static_cast<float>(2.0 * x - 1.0 * y + 0.5 * z);
    const Volume v(grid, g, Modality::CT);
    const Volume r = resample_trilinear(v, {1, 1, 1}, -999.0f);
    for (int z = 0; z < 14; ++z)
      for (int y = 0; y < 14; ++y)
        for (int x = 0; x < 14; ++x)
          CHECK(r(x, y, z) == doctest::Approx(2.0 * x / 2 - 1.0 * y / 2 + 0.5 * z / 2).epsilon(1e-6));
  }
  SUBCASE("boundary modes outside the lattice") {
    const Volume v(Grid3<float>(Dims{2, 2, 2}, 5.0f), Geometry{}, Modality::CT);
    const Volume fill = resample_to_grid(v, {1, 1, 1}, Dims{4, 4, 4}, Boundary::fill, -1.0f);
    const Volume clamp = resample_to_grid(v, {1, 1, 1}, Dims{4, 4, 4}, Boundary::clamp, -1.0f);
    CHECK(fill(3, 3, 3) == -1.0f);
    CHECK(clamp(3, 3, 3) == 5.0f);
    CHECK(fill(1, 1, 1) == 5.0f);
  }
  SUBCASE("nearest-neighbour mask resampling keeps labels binary") {
    Mask m(Dims{4, 4, 4});
    m(2, 2, 2) = 1;
    const Mask r = resample_mask_nearest(m, {1, 1, 1}, {0.5, 0.5, 0.5}, Dims{8, 8, 8});
    CHECK(count(r) == 8);
  }
}

TEST_CASE("csv parsing and escaping") {
  const CsvTable t = parse_csv("a,b,c\n1,\"x,y\",\"he said \"\"hi\"\"\"\n2,,z\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[0][2] == "he said \"hi\"");
  CHECK(t.rows[1][1].empty());
  CHECK(t.column("c") == 2);
  CHECK(error_code_of([&] { (void)t.column("d"); }) == ErrorCode::configuration);
  CHECK(csv_line({"a,b", "c"}) == "\"a,b\",c");
  const CsvTable back = parse_csv("h1,h2\n" + csv_line({"a,b", "q\"q"}) + "\n");
  CHECK(back.rows[0][0] == "a,b");
  CHECK(back.rows[0][1] == "q\"q");
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 29.15, 1e22})
    CHECK(std::stod(format_double(v)) == v);
}
