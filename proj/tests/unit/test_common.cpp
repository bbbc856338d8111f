#include <gtest/gtest.h>
#include <unistd.h>

#include "support.hpp"
#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/common/sha256.hpp"

using namespace wicas;

TEST(Hex, RoundTrip) {
  const Bytes b = {0x00, 0x01, 0xab, 0xff};
  EXPECT_EQ(to_hex(b), "0001abff");
  EXPECT_EQ(from_hex("0001ABff"), b);
  EXPECT_TRUE(from_hex("").empty());
}

TEST(Hex, Rejects) {
  EXPECT_THROW(from_hex("abc"), Error);
  EXPECT_THROW(from_hex("zz"), Error);
  EXPECT_THROW(array_from_hex<2>("aabbcc"), Error);
}

TEST(LittleEndian, Codecs) {
  Bytes b;
  put_u32_le(b, 0x01020304);
  put_u64_le(b, 0x1122334455667788ull);
  EXPECT_EQ(to_hex(b), "04030201" "8877665544332211");
  EXPECT_EQ(get_u32_le(b.data()), 0x01020304u);
  EXPECT_EQ(get_u64_le(b.data() + 4), 0x1122334455667788ull);
}

TEST(Sha256, GoldenVectors) {
  for (const auto& v : testing_support::golden()["sha256"]) {
    EXPECT_EQ(sha256(v["input"].get<std::string>()).hex(), v["hex"].get<std::string>());
  }
}

TEST(Sha256, IncrementalMatchesOneShot) {
  const std::string s(1000, 'q');
  Sha256 h;
  for (std::size_t i = 0; i < s.size(); i += 37) h.update(std::string_view(s).substr(i, 37));
  EXPECT_EQ(h.finish(), sha256(s));
}

TEST(Digest, OrderingIsBytewise) {
  Digest a, b;
  a.bytes[0] = 0x01;
  b.bytes[0] = 0xff;
  EXPECT_LT(a, b);
  EXPECT_EQ(Digest::from_hex(a.hex()), a);
}

TEST(Error, CarriesCodeAndName) {
  const Error e(Errc::OutOfGas, "need 5");
  EXPECT_EQ(e.code(), Errc::OutOfGas);
  EXPECT_STREQ(e.what(), "OutOfGas: need 5");
}

TEST(Files, WriteThenRead) {
  testing_support::TempDir dir;
  const Bytes data = {1, 2, 3, 0, 255};
  write_file(dir / "f.bin", data);
  EXPECT_EQ(read_file(dir / "f.bin"), data);
  EXPECT_THROW(read_file(dir / "missing"), Error);
}
