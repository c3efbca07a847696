#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gunet/image_io.hpp"
#include "gunet/manifest.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using gunet::Rng;
using gunet::Tensor;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gunet_test_image_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST(Pnm, RoundTripWithinQuantisation) {
  Rng rng(1);
  for (std::size_t c : {1u, 3u}) {
    const Tensor t = oracle::random_tensor({1, c, 7, 5}, rng, 0, 1);
    const fs::path p = scratch(c == 3 ? "rt.ppm" : "rt.pgm");
    gunet::save_image(t, p);
    const Tensor r = gunet::load_image(p);
    EXPECT_EQ(r.shape(), t.shape());
    EXPECT_LE(gunet::max_abs_diff(r, t), 0.5 / 255 + 1e-12);
    // Already-quantised data survives exactly.
    gunet::save_image(r, p);
    EXPECT_EQ(gunet::load_image(p).storage(), r.storage());
  }
}

TEST(Pnm, ClampsOutOfRange) {
  Tensor t(1, 1, 1, 2);
  t[0] = -3;
  t[1] = 7;
  gunet::save_image(t, scratch("clamp.pgm"));
  const Tensor r = gunet::load_image(scratch("clamp.pgm"));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 1.0);
}

TEST(Pnm, HeaderCommentsAreSkipped) {
  write_bytes(scratch("comment.pgm"), std::string("P5\n# made by hand\n2 1\n255\n") + '\x00' + '\xff');
  const Tensor r = gunet::load_image(scratch("comment.pgm"));
  EXPECT_EQ(r.w(), 2u);
  EXPECT_EQ(r[1], 1.0);
}

TEST(Pnm, RejectsUnsupportedMaxval) {
  write_bytes(scratch("m16.ppm"), "P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00");
  EXPECT_THROW(gunet::load_image(scratch("m16.ppm")), gunet::DataError);
}

TEST(Pnm, RejectsTruncatedPayload) {
  write_bytes(scratch("short.ppm"), "P6\n4 4\n255\nabc");
  try {
    gunet::load_image(scratch("short.ppm"));
    FAIL();
  } catch (const gunet::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(Pnm, RejectsMalformedHeaders) {
  for (const std::string bad : {"P6\nfour 4\n255\n", "P6\n4", "", "P3\n1 1\n255\n0 0 0", "P6\n-2 2\n255\n"}) {
    write_bytes(scratch("bad.ppm"), bad);
    EXPECT_THROW(gunet::load_image(scratch("bad.ppm")), gunet::DataError) << bad;
  }
  EXPECT_THROW(gunet::load_image(scratch("does_not_exist.ppm")), gunet::DataError);
}

TEST(Pfm, RoundTripIsExactForFloatValues) {
  Rng rng(2);
  for (std::size_t c : {1u, 3u}) {
    Tensor t = oracle::random_tensor({1, c, 6, 9}, rng, -100, 100);
    for (double& v : t.storage()) v = double(float(v));
    const fs::path p = scratch("rt.pfm");
    gunet::save_image(t, p);
    EXPECT_EQ(gunet::load_image(p).storage(), t.storage());
  }
}

TEST(Pfm, GreyHeaderIsLittleEndianPf) {
  gunet::save_pfm(Tensor(1, 1, 2, 3, 1.5), scratch("hdr.pfm"));
  std::ifstream in(scratch("hdr.pfm"), std::ios::binary);
  std::string magic, w, h, scale;
  in >> magic >> w >> h >> scale;
  EXPECT_EQ(magic, "Pf");
  EXPECT_EQ(w, "3");
  EXPECT_EQ(h, "2");
  EXPECT_LT(std::stod(scale), 0.0);
}

TEST(Pfm, BottomToTopRowOrder) {
  // Two rows: the first stored scanline is the bottom row.
  std::string bytes = "Pf\n1 2\n-1.0\n";
  const float bottom = 2.0f, top = 5.0f;
  bytes.append(reinterpret_cast<const char*>(&bottom), 4).append(reinterpret_cast<const char*>(&top), 4);
  write_bytes(scratch("order.pfm"), bytes);
  const Tensor r = gunet::load_image(scratch("order.pfm"));
  EXPECT_EQ(r.at(0, 0, 0, 0), 5.0);
  EXPECT_EQ(r.at(0, 0, 1, 0), 2.0);
}

TEST(Pfm, BigEndianIsRead) {
  std::string bytes = "Pf\n1 1\n1.0\n";
  const unsigned char be[4] = {0x3f, 0xc0, 0x00, 0x00};  // 1.5f
  bytes.append(reinterpret_cast<const char*>(be), 4);
  write_bytes(scratch("be.pfm"), bytes);
  EXPECT_EQ(gunet::load_image(scratch("be.pfm"))[0], 1.5);
}

TEST(Pfm, RejectsTruncatedAndZeroScale) {
  write_bytes(scratch("short.pfm"), "PF\n2 2\n-1.0\n0123");
  EXPECT_THROW(gunet::load_image(scratch("short.pfm")), gunet::DataError);
  write_bytes(scratch("zero.pfm"), "Pf\n1 1\n0\n0000");
  EXPECT_THROW(gunet::load_image(scratch("zero.pfm")), gunet::DataError);
}

TEST(SaveImage, RejectsUnknownExtensionAndChannelCount) {
  EXPECT_THROW(gunet::save_image(Tensor(1, 3, 2, 2), scratch("x.png")), gunet::DataError);
  EXPECT_THROW(gunet::save_image(Tensor(1, 2, 2, 2), scratch("x.ppm")), gunet::DataError);
}

TEST(RunManifest, JsonRoundTrip) {
  gunet::RunManifest m;
  m.command = "spectra";
  m.args = {"spectra", "--arch", "tc", "--samples", "3"};
  m.seed = 0xFFFFFFFFFFFFFFFFull;
  m.analysis = {{"samples", 3}};
  m.outputs = {"a.pfm", "b.json"};
  m.write(scratch("manifest.json"));
  const auto r = gunet::RunManifest::read(scratch("manifest.json"));
  EXPECT_EQ(r.to_json(), m.to_json());
  EXPECT_EQ(r.seed, m.seed);
  write_bytes(scratch("not_manifest.json"), "{\"x\": 1}");
  EXPECT_THROW(gunet::RunManifest::read(scratch("not_manifest.json")), gunet::DataError);
  write_bytes(scratch("broken.json"), "{");
  EXPECT_THROW(gunet::RunManifest::read(scratch("broken.json")), gunet::DataError);
}
