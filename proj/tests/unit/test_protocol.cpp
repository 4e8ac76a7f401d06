#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "spyrover/device.hpp"
#include "spyrover/protocol.hpp"

using namespace spyrover::protocol;

namespace {

nlohmann::json golden() {
  std::ifstream in(std::string(SPYROVER_GOLDEN_DIR) + "/protocol_vectors.json");
  return nlohmann::json::parse(in);
}

CommandFrame random_command(std::mt19937_64& rng) {
  const auto verb = static_cast<Verb>(rng() % 6);
  const auto [lo, hi] = arg_range(verb);
  std::uniform_int_distribution<std::int32_t> arg(lo, hi);
  return {verb, arg(rng), static_cast<std::uint16_t>(rng())};
}

TelemetryFrame random_telemetry(std::mt19937_64& rng) {
  auto in = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  TelemetryFrame t;
  t.seq = static_cast<std::uint16_t>(rng());
  t.battery_pct = in(0, 100);
  t.duty = in(0, 255);
  t.dir_left = static_cast<WireDirection>(in(0, 2));
  t.dir_right = static_cast<WireDirection>(in(0, 2));
  t.pan_deg = in(-90, 90);
  t.tilt_deg = in(-30, 60);
  t.leds = static_cast<std::uint8_t>(in(0, 255));
  t.link_rssi_dbm = in(-127, 0);
  if (in(0, 1)) t.pose = TelemetryPose{in(-999999, 999999), in(-999999, 999999), in(-18000, 18000)};
  return t;
}

}  // namespace

TEST(ProtocolEncode, StopMatchesHandXor) {
  const std::string body = " STP 0 0";
  const std::string expected = "C" + body + "*" + oracle::hex2(oracle::xor_checksum(body)) + "\n";
  EXPECT_EQ(encode_command(CommandFrame::stop(0)), expected);
  EXPECT_EQ(expected, "C STP 0 0*77\n");
}

TEST(ProtocolEncode, ForwardContainsFields) {
  const auto line = encode_command(CommandFrame::move(MoveDir::Forward, 7));
  EXPECT_NE(line.find("MOV 0 7"), std::string::npos);
  EXPECT_EQ(line, "C MOV 0 7*" + oracle::hex2(oracle::xor_checksum(" MOV 0 7")) + "\n");
}

TEST(ProtocolDecode, Taxonomy) {
  auto line = encode_command(CommandFrame::move(MoveDir::Forward, 7));
  line[line.size() - 2] = line[line.size() - 2] == '0' ? '1' : '0';
  EXPECT_EQ(decode_command(line).error(), DecodeError::BadChecksum);

  const std::string spd300 = "C SPD 300 1*" + oracle::hex2(oracle::xor_checksum(" SPD 300 1")) + "\n";
  EXPECT_EQ(decode_command(spd300).error(), DecodeError::ArgOutOfRange);
  const std::string fly = "C FLY 0 1*" + oracle::hex2(oracle::xor_checksum(" FLY 0 1")) + "\n";
  EXPECT_EQ(decode_command(fly).error(), DecodeError::UnknownVerb);
  EXPECT_EQ(decode_command("C MOV 0 7").error(), DecodeError::Malformed);
  EXPECT_EQ(decode_command("").error(), DecodeError::Malformed);
}

TEST(ProtocolGolden, CommandsEncodeAndDecodeBitExact) {
  for (const auto& v : golden()["commands"]) {
    const auto verb = verb_from_token(v["verb"].get<std::string>());
    ASSERT_TRUE(verb);
    const CommandFrame f{*verb, v["arg"].get<std::int32_t>(), v["seq"].get<std::uint16_t>()};
    const auto line = v["line"].get<std::string>();
    EXPECT_EQ(encode_command(f), line);
    const auto d = decode_command(line);
    ASSERT_TRUE(d) << line;
    EXPECT_EQ(*d, f);
  }
}

TEST(ProtocolGolden, TelemetryEncodeAndDecodeBitExact) {
  auto dir = [](const std::string& s) {
    return s == "F" ? WireDirection::Forward : s == "R" ? WireDirection::Reverse : WireDirection::Brake;
  };
  for (const auto& v : golden()["telemetry"]) {
    TelemetryFrame t;
    t.seq = v["seq"];
    t.battery_pct = v["battery_pct"];
    t.duty = v["duty"];
    t.dir_left = dir(v["dir_left"]);
    t.dir_right = dir(v["dir_right"]);
    t.pan_deg = v["pan_deg"];
    t.tilt_deg = v["tilt_deg"];
    t.leds = v["leds"];
    t.link_rssi_dbm = v["rssi_dbm"];
    if (v.contains("pose")) t.pose = TelemetryPose{v["pose"]["x_cm"], v["pose"]["y_cm"], v["pose"]["heading_cdeg"]};
    const auto line = v["line"].get<std::string>();
    EXPECT_EQ(encode_telemetry(t), line);
    const auto d = decode_telemetry(line);
    ASSERT_TRUE(d) << line;
    EXPECT_EQ(*d, t);
  }
}

TEST(ProtocolGolden, RejectsCarryTheDocumentedCode) {
  for (const auto& v : golden()["rejects"]) {
    const auto line = v["line"].get<std::string>();
    const auto d = decode_command(line);
    ASSERT_FALSE(d) << line;
    EXPECT_EQ(to_string(d.error()), v["error"].get<std::string>()) << line;
  }
}

TEST(ProtocolGolden, ErrorLines) {
  for (const auto& v : golden()["errors"]) {
    const auto code = decode_error_from_string(v["code"].get<std::string>());
    ASSERT_TRUE(code);
    EXPECT_EQ(encode_error(*code), v["line"].get<std::string>());
    EXPECT_EQ(decode_error(v["line"].get<std::string>()), code);
  }
  EXPECT_EQ(encode_error(DecodeError::Malformed).substr(0, 11), "E Malformed");
  EXPECT_FALSE(decode_error("E Nonsense*00\n"));
}

TEST(ProtocolTelemetry, C5MaskMatchesPanelBitOrder) {
  const auto panel = spyrover::device::LedPanel::from_mask(0xC5);
  EXPECT_TRUE(panel.power);
  EXPECT_FALSE(panel.rst);
  EXPECT_TRUE(panel.speed_ch1);
  EXPECT_FALSE(panel.speed_ch2);
  EXPECT_FALSE(panel.dir_ch1_fwd);
  EXPECT_FALSE(panel.dir_ch1_rev);
  EXPECT_TRUE(panel.dir_ch2_fwd);
  EXPECT_TRUE(panel.dir_ch2_rev);
  EXPECT_EQ(led_bit::kPower | led_bit::kSpeed1 | led_bit::kDir2Fwd | led_bit::kDir2Rev, 0xC5);

  TelemetryFrame t;
  t.leds = 0xC5;
  const auto line = encode_telemetry(t);
  EXPECT_NE(line.find(" C5 "), std::string::npos);
  EXPECT_EQ(decode_telemetry(line)->leds, 0xC5);
}

TEST(ProtocolTelemetry, OmittedPoseDecodesAbsent) {
  TelemetryFrame t;
  t.seq = 3;
  const auto d = decode_telemetry(encode_telemetry(t));
  ASSERT_TRUE(d);
  EXPECT_FALSE(d->pose.has_value());
}

TEST(ProtocolProperty, RoundTripRandomFrames) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100000; ++i) {
    const auto f = random_command(rng);
    const auto line = encode_command(f);
    ASSERT_LE(line.size(), kMaxLineBytes);
    const auto d = decode_command(line);
    ASSERT_TRUE(d) << line;
    ASSERT_EQ(*d, f);
  }
  for (int i = 0; i < 100000; ++i) {
    const auto t = random_telemetry(rng);
    const auto line = encode_telemetry(t);
    ASSERT_LE(line.size(), kMaxLineBytes);
    const auto d = decode_telemetry(line);
    ASSERT_TRUE(d) << line;
    ASSERT_EQ(*d, t);
  }
}

TEST(ProtocolProperty, PureAsciiAndDeterministic) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    const auto f = random_command(rng);
    const auto a = encode_command(f);
    EXPECT_EQ(a, encode_command(f));
    for (std::size_t k = 0; k + 1 < a.size(); ++k) {
      ASSERT_GE(static_cast<unsigned char>(a[k]), 0x20);
      ASSERT_LE(static_cast<unsigned char>(a[k]), 0x7E);
    }
    EXPECT_EQ(a.back(), '\n');
  }
}

TEST(ProtocolProperty, NoEncodingIsAStrictPrefixOfAnother) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) {
    const auto line = encode_command(random_command(rng));
    // Only the final byte is a newline, so a strict prefix is never terminated.
    EXPECT_EQ(line.find('\n'), line.size() - 1);
    for (std::size_t n = 0; n < line.size(); ++n) ASSERT_FALSE(decode_command(line.substr(0, n)));
  }
}

TEST(ProtocolProperty, ExhaustiveSingleByteCorruption) {
  const std::string lines[] = {encode_command(CommandFrame::pan(-45, 1234)), encode_telemetry(TelemetryFrame{})};
  for (const auto& original : lines) {
    const bool is_cmd = original[0] == 'C';
    for (std::size_t pos = 0; pos < original.size(); ++pos) {
      for (int b = 0; b < 256; ++b) {
        if (static_cast<unsigned char>(original[pos]) == b) continue;
        std::string bad = original;
        bad[pos] = static_cast<char>(b);
        const bool ok = is_cmd ? static_cast<bool>(decode_command(bad)) : static_cast<bool>(decode_telemetry(bad));
        ASSERT_FALSE(ok) << "pos " << pos << " byte " << b;
      }
    }
  }
}

TEST(ProtocolProperty, FuzzNeverCrashes) {
  std::mt19937_64 rng(1);
  const std::string alphabet = "CTE MOVSPDANTLGB0123456789-*\n\r+ABCDEF";
  std::size_t ok = 0;
  for (int i = 0; i < 200000; ++i) {
    std::string s(rng() % 70, '\0');
    for (auto& c : s) c = (rng() & 1) ? alphabet[rng() % alphabet.size()] : static_cast<char>(rng());
    ok += static_cast<bool>(decode_command(s)) + static_cast<bool>(decode_telemetry(s));
    (void)decode_error(s);
  }
  SUCCEED() << ok << " accidental valid lines";
}

TEST(ProtocolSeq, ModularComparison) {
  EXPECT_TRUE(seq_at_or_after(5, 5));
  EXPECT_TRUE(seq_at_or_after(6, 5));
  EXPECT_FALSE(seq_at_or_after(4, 5));
  EXPECT_TRUE(seq_at_or_after(2, 65534));
  EXPECT_FALSE(seq_at_or_after(65534, 2));
}
