#include <gtest/gtest.h>

#include "lsf/container.hpp"
#include "lsf/error.hpp"
#include "lsf/feature_store.hpp"
#include "lsf/random.hpp"

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(lsf::sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(lsf::sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Bytes, WriterReaderRoundTrip) {
  lsf::ByteWriter w;
  w.u8(7);
  w.u32(0xDEADBEEF);
  w.u64(1ull << 40);
  w.i64(-5);
  w.f32(1.5f);
  w.f64(-0.1);
  w.str("hello");
  lsf::ByteReader r(w.bytes());
  EXPECT_EQ(r.u8(), 7);
  EXPECT_EQ(r.u32(), 0xDEADBEEFu);
  EXPECT_EQ(r.u64(), 1ull << 40);
  EXPECT_EQ(r.i64(), -5);
  EXPECT_EQ(r.f32(), 1.5f);
  EXPECT_EQ(r.f64(), -0.1);
  EXPECT_EQ(r.str(), "hello");
  EXPECT_NO_THROW(r.expect_end());
}

TEST(Bytes, LittleEndianLayout) {
  lsf::ByteWriter w;
  w.u32(0x01020304);
  EXPECT_EQ(w.bytes(), (std::vector<std::uint8_t>{4, 3, 2, 1}));
}

TEST(Bytes, OverrunReportsOffset) {
  const std::uint8_t three[] = {1, 2, 3};
  lsf::ByteReader r(three);
  r.u8();
  try {
    r.u32();
    FAIL();
  } catch (const lsf::DecodeError& e) {
    EXPECT_EQ(e.offset(), 1u);
  }
}

TEST(Container, PackUnpack) {
  const std::vector<std::uint8_t> payload{1, 2, 3, 4, 5};
  const auto bytes = lsf::pack_container(lsf::make_kind("TEST"), 3, payload);
  EXPECT_EQ(bytes.size(), 20 + payload.size() + 32);
  const auto c = lsf::unpack_container(bytes, lsf::make_kind("TEST"));
  EXPECT_EQ(c.version, 3u);
  EXPECT_EQ(c.payload, payload);
  EXPECT_EQ(c.digest, lsf::sha256_hex(payload));
}

TEST(Container, RejectsCorruption) {
  const std::vector<std::uint8_t> payload{9, 9, 9};
  auto bytes = lsf::pack_container(lsf::make_kind("TEST"), 1, payload);
  EXPECT_THROW(lsf::unpack_container(bytes, lsf::make_kind("ABCD")), lsf::DecodeError);
  auto flipped = bytes;
  flipped[21] ^= 1;
  EXPECT_THROW(lsf::unpack_container(flipped, lsf::make_kind("TEST")), lsf::DecodeError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(lsf::unpack_container(truncated, lsf::make_kind("TEST")), lsf::DecodeError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(lsf::unpack_container(magic, lsf::make_kind("TEST")), lsf::DecodeError);
}

TEST(FeatureCache, RoundTripIsFloat32) {
  lsf::Rng rng(1);
  std::vector<lsf::FeatureTensor> ts(5);
  for (auto& t : ts) {
    t.values.resize(7, 2);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = static_cast<float>(rng.normal());
  }
  const auto back = lsf::decode_feature_cache(lsf::encode_feature_cache(ts));
  ASSERT_EQ(back.size(), ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) EXPECT_EQ(back[k], ts[k]);
}

TEST(FeatureCache, RejectsMixedShapes) {
  std::vector<lsf::FeatureTensor> ts(2);
  ts[0].values = Eigen::MatrixXd::Zero(3, 2);
  ts[1].values = Eigen::MatrixXd::Zero(4, 2);
  EXPECT_THROW(lsf::encode_feature_cache(ts), lsf::ParameterError);
}

TEST(Matrices, SaveLoad) {
  const auto path = std::filesystem::temp_directory_path() / "lsf_matrices_test.lsfb";
  std::vector<Eigen::MatrixXd> ms{Eigen::MatrixXd::Random(3, 4), Eigen::MatrixXd(0, 2), Eigen::MatrixXd::Random(1, 1)};
  lsf::save_matrices(path, lsf::kVectorsKind, ms);
  const auto back = lsf::load_matrices(path, lsf::kVectorsKind);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0], ms[0]);
  EXPECT_EQ(back[1].rows(), 0);
  EXPECT_EQ(back[1].cols(), 2);
  EXPECT_EQ(back[2], ms[2]);
  EXPECT_THROW(lsf::load_matrices(path, lsf::kNormKind), lsf::DecodeError);
  std::filesystem::remove(path);
}
