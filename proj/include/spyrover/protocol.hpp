#pragma once

// Operator <-> rover wire protocol.
//
// Every frame is a single ASCII line:
//
//   C <VERB> <arg> <seq>*<XX>\n                                   command
//   T <seq> <bat> <duty> <dl> <dr> <pan> <tilt> <leds> <rssi> [x y h]*<XX>\n
//   E <code>*<XX>\n                                               error reply
//
// XX is the XOR of every byte strictly between the leading tag letter and
// '*', printed as two uppercase hex digits. Numbers are canonical decimal
// (no leading zeros, no '+', no "-0"). Lines never exceed kMaxLineBytes.

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace spyrover::protocol {

inline constexpr std::size_t kMaxLineBytes = 64;

enum class Verb : std::uint8_t { Move, Speed, Pan, Tilt, Stop, Ping };

/// MOV argument values.
enum class MoveDir : std::int32_t { Forward = 0, Backward = 1, Left = 2, Right = 3 };

enum class DecodeError : std::uint8_t { BadChecksum, UnknownVerb, ArgOutOfRange, Malformed };

constexpr std::string_view to_string(DecodeError e) noexcept {
  switch (e) {
    case DecodeError::BadChecksum: return "BadChecksum";
    case DecodeError::UnknownVerb: return "UnknownVerb";
    case DecodeError::ArgOutOfRange: return "ArgOutOfRange";
    case DecodeError::Malformed: return "Malformed";
  }
  return "Malformed";
}

constexpr std::optional<DecodeError> decode_error_from_string(std::string_view s) noexcept {
  for (auto e : {DecodeError::BadChecksum, DecodeError::UnknownVerb, DecodeError::ArgOutOfRange,
                 DecodeError::Malformed}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

constexpr std::string_view verb_token(Verb v) noexcept {
  switch (v) {
    case Verb::Move: return "MOV";
    case Verb::Speed: return "SPD";
    case Verb::Pan: return "PAN";
    case Verb::Tilt: return "TLT";
    case Verb::Stop: return "STP";
    case Verb::Ping: return "PNG";
  }
  return "PNG";
}

constexpr std::optional<Verb> verb_from_token(std::string_view s) noexcept {
  for (auto v : {Verb::Move, Verb::Speed, Verb::Pan, Verb::Tilt, Verb::Stop, Verb::Ping}) {
    if (verb_token(v) == s) return v;
  }
  return std::nullopt;
}

/// Inclusive legal argument range per verb. PAN/TLT accept a wider window
/// than the servo limits; the device clamps.
constexpr std::pair<std::int32_t, std::int32_t> arg_range(Verb v) noexcept {
  switch (v) {
    case Verb::Move: return {0, 3};
    case Verb::Speed: return {0, 255};
    case Verb::Pan:
    case Verb::Tilt: return {-180, 180};
    case Verb::Stop:
    case Verb::Ping: return {0, 0};
  }
  return {0, 0};
}

struct CommandFrame {
  Verb verb = Verb::Ping;
  std::int32_t arg = 0;
  std::uint16_t seq = 0;

  static constexpr CommandFrame move(MoveDir d, std::uint16_t seq = 0) {
    return {Verb::Move, static_cast<std::int32_t>(d), seq};
  }
  static constexpr CommandFrame speed(std::int32_t duty, std::uint16_t seq = 0) {
    return {Verb::Speed, duty, seq};
  }
  static constexpr CommandFrame pan(std::int32_t deg, std::uint16_t seq = 0) { return {Verb::Pan, deg, seq}; }
  static constexpr CommandFrame tilt(std::int32_t deg, std::uint16_t seq = 0) { return {Verb::Tilt, deg, seq}; }
  static constexpr CommandFrame stop(std::uint16_t seq = 0) { return {Verb::Stop, 0, seq}; }
  static constexpr CommandFrame ping(std::uint16_t seq = 0) { return {Verb::Ping, 0, seq}; }

  friend constexpr bool operator==(const CommandFrame&, const CommandFrame&) = default;
};

constexpr bool arg_in_range(Verb v, std::int64_t arg) noexcept {
  auto [lo, hi] = arg_range(v);
  return arg >= lo && arg <= hi;
}

/// Wire direction letters in telemetry.
enum class WireDirection : std::uint8_t { Forward, Reverse, Brake };

constexpr char direction_letter(WireDirection d) noexcept {
  switch (d) {
    case WireDirection::Forward: return 'F';
    case WireDirection::Reverse: return 'R';
    case WireDirection::Brake: return 'B';
  }
  return 'B';
}

struct TelemetryPose {
  std::int32_t x_cm = 0;
  std::int32_t y_cm = 0;
  std::int32_t heading_cdeg = 0;

  friend constexpr bool operator==(const TelemetryPose&, const TelemetryPose&) = default;
};

/// LED mask bits, LSB first: power, rst, spd1, spd2, d1f, d1r, d2f, d2r.
namespace led_bit {
inline constexpr std::uint8_t kPower = 1u << 0;
inline constexpr std::uint8_t kRst = 1u << 1;
inline constexpr std::uint8_t kSpeed1 = 1u << 2;
inline constexpr std::uint8_t kSpeed2 = 1u << 3;
inline constexpr std::uint8_t kDir1Fwd = 1u << 4;
inline constexpr std::uint8_t kDir1Rev = 1u << 5;
inline constexpr std::uint8_t kDir2Fwd = 1u << 6;
inline constexpr std::uint8_t kDir2Rev = 1u << 7;
}  // namespace led_bit

struct TelemetryFrame {
  std::uint16_t seq = 0;  // last applied command seq
  std::int32_t battery_pct = 0;
  std::int32_t duty = 0;
  WireDirection dir_left = WireDirection::Brake;
  WireDirection dir_right = WireDirection::Brake;
  std::int32_t pan_deg = 0;
  std::int32_t tilt_deg = 0;
  std::uint8_t leds = 0;
  std::int32_t link_rssi_dbm = -40;
  std::optional<TelemetryPose> pose;

  friend bool operator==(const TelemetryFrame&, const TelemetryFrame&) = default;
};

namespace telemetry_limits {
inline constexpr std::int32_t kPanMin = -90, kPanMax = 90;
inline constexpr std::int32_t kTiltMin = -30, kTiltMax = 60;
inline constexpr std::int32_t kRssiMin = -127, kRssiMax = 0;
inline constexpr std::int32_t kPosMaxCm = 999999;
inline constexpr std::int32_t kHeadingMaxCdeg = 18000;
}  // namespace telemetry_limits

/// Either a decoded value or the reason decoding failed.
template <class T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(DecodeError e) : v_(e) {}           // NOLINT(google-explicit-constructor)

  bool has_value() const noexcept { return std::holds_alternative<T>(v_); }
  explicit operator bool() const noexcept { return has_value(); }
  const T& value() const { return std::get<T>(v_); }
  const T& operator*() const { return value(); }
  const T* operator->() const { return &value(); }
  DecodeError error() const { return std::get<DecodeError>(v_); }

 private:
  std::variant<T, DecodeError> v_;
};

namespace detail {

inline constexpr char kHex[] = "0123456789ABCDEF";

constexpr std::uint8_t xor_bytes(std::string_view s) noexcept {
  std::uint8_t x = 0;
  for (char c : s) x ^= static_cast<std::uint8_t>(c);
  return x;
}

inline void append_int(std::string& out, std::int64_t v) {
  std::array<char, 24> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  out.append(buf.data(), end);
}

inline void append_hex2(std::string& out, std::uint8_t v) {
  out.push_back(kHex[v >> 4]);
  out.push_back(kHex[v & 0x0F]);
}

inline std::optional<std::uint8_t> hex_digit(char c) noexcept {
  if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
  if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
  return std::nullopt;
}

inline std::optional<std::uint8_t> parse_hex2(std::string_view s) noexcept {
  if (s.size() != 2) return std::nullopt;
  auto hi = hex_digit(s[0]);
  auto lo = hex_digit(s[1]);
  if (!hi || !lo) return std::nullopt;
  return static_cast<std::uint8_t>((*hi << 4) | *lo);
}

/// Canonical signed decimal, at most 10 digits.
inline std::optional<std::int64_t> parse_canonical_int(std::string_view s) noexcept {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  if (s[0] == '-') i = 1;
  std::string_view digits = s.substr(i);
  if (digits.empty() || digits.size() > 10) return std::nullopt;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
  if (i == 1 && digits == "0") return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ' ') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Seals "<tag><body>" into a full line with checksum and terminator.
inline std::string seal(char tag, std::string_view body) {
  std::string line;
  line.reserve(body.size() + 5);
  line.push_back(tag);
  line.append(body);
  line.push_back('*');
  append_hex2(line, xor_bytes(body));
  line.push_back('\n');
  return line;
}

/// Validates framing and checksum; on success yields the body between the
/// tag and '*', which begins with a space.
inline Result<std::string_view> unseal(std::string_view line, char tag) {
  if (line.size() > kMaxLineBytes || line.size() < 6) return DecodeError::Malformed;
  if (line.back() != '\n') return DecodeError::Malformed;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (c < 0x20 || c > 0x7E) return DecodeError::Malformed;
  }
  if (line[0] != tag || line[1] != ' ') return DecodeError::Malformed;
  const std::size_t star = line.size() - 4;
  if (line[star] != '*') return DecodeError::Malformed;
  const std::string_view body = line.substr(1, star - 1);
  if (body.find('*') != std::string_view::npos) return DecodeError::Malformed;
  const auto sum = parse_hex2(line.substr(star + 1, 2));
  if (!sum) return DecodeError::Malformed;
  if (*sum != xor_bytes(body)) return DecodeError::BadChecksum;
  return body;
}

}  // namespace detail

/// Checksum of the bytes between the tag letter and '*'.
constexpr std::uint8_t checksum(std::string_view body) noexcept { return detail::xor_bytes(body); }

inline std::string encode_command(const CommandFrame& cmd) {
  std::string body = " ";
  body.append(verb_token(cmd.verb));
  body.push_back(' ');
  detail::append_int(body, cmd.arg);
  body.push_back(' ');
  detail::append_int(body, cmd.seq);
  return detail::seal('C', body);
}

inline Result<CommandFrame> decode_command(std::string_view line) {
  auto body = detail::unseal(line, 'C');
  if (!body) return body.error();
  const auto tokens = detail::split_spaces(body->substr(1));
  if (tokens.size() != 3) return DecodeError::Malformed;
  const auto verb = verb_from_token(tokens[0]);
  if (!verb) {
    // Anything shaped like a verb but not in the vocabulary.
    if (tokens[0].empty()) return DecodeError::Malformed;
    return DecodeError::UnknownVerb;
  }
  const auto arg = detail::parse_canonical_int(tokens[1]);
  const auto seq = detail::parse_canonical_int(tokens[2]);
  if (!arg || !seq) return DecodeError::Malformed;
  if (!arg_in_range(*verb, *arg)) return DecodeError::ArgOutOfRange;
  if (*seq < 0 || *seq > 65535) return DecodeError::ArgOutOfRange;
  return CommandFrame{*verb, static_cast<std::int32_t>(*arg), static_cast<std::uint16_t>(*seq)};
}

inline std::string encode_telemetry(const TelemetryFrame& t) {
  std::string body;
  auto field = [&body](std::int64_t v) {
    body.push_back(' ');
    detail::append_int(body, v);
  };
  field(t.seq);
  field(t.battery_pct);
  field(t.duty);
  body.push_back(' ');
  body.push_back(direction_letter(t.dir_left));
  body.push_back(' ');
  body.push_back(direction_letter(t.dir_right));
  field(t.pan_deg);
  field(t.tilt_deg);
  body.push_back(' ');
  detail::append_hex2(body, t.leds);
  field(t.link_rssi_dbm);
  if (t.pose) {
    field(t.pose->x_cm);
    field(t.pose->y_cm);
    field(t.pose->heading_cdeg);
  }
  return detail::seal('T', body);
}

inline Result<TelemetryFrame> decode_telemetry(std::string_view line) {
  using namespace telemetry_limits;
  auto body = detail::unseal(line, 'T');
  if (!body) return body.error();
  const auto tok = detail::split_spaces(body->substr(1));
  if (tok.size() != 9 && tok.size() != 12) return DecodeError::Malformed;

  std::array<std::int64_t, 12> num{};
  for (std::size_t i = 0; i < tok.size(); ++i) {
    if (i == 3 || i == 4 || i == 7) continue;
    const auto v = detail::parse_canonical_int(tok[i]);
    if (!v) return DecodeError::Malformed;
    num[i] = *v;
  }
  auto dir = [](std::string_view s) -> std::optional<WireDirection> {
    if (s == "F") return WireDirection::Forward;
    if (s == "R") return WireDirection::Reverse;
    if (s == "B") return WireDirection::Brake;
    return std::nullopt;
  };
  const auto dl = dir(tok[3]);
  const auto dr = dir(tok[4]);
  const auto leds = detail::parse_hex2(tok[7]);
  if (!leds) return DecodeError::Malformed;
  if (!dl || !dr) return DecodeError::ArgOutOfRange;

  auto within = [](std::int64_t v, std::int64_t lo, std::int64_t hi) { return v >= lo && v <= hi; };
  if (!within(num[0], 0, 65535) || !within(num[1], 0, 100) || !within(num[2], 0, 255) ||
      !within(num[5], kPanMin, kPanMax) || !within(num[6], kTiltMin, kTiltMax) ||
      !within(num[8], kRssiMin, kRssiMax)) {
    return DecodeError::ArgOutOfRange;
  }

  TelemetryFrame t;
  t.seq = static_cast<std::uint16_t>(num[0]);
  t.battery_pct = static_cast<std::int32_t>(num[1]);
  t.duty = static_cast<std::int32_t>(num[2]);
  t.dir_left = *dl;
  t.dir_right = *dr;
  t.pan_deg = static_cast<std::int32_t>(num[5]);
  t.tilt_deg = static_cast<std::int32_t>(num[6]);
  t.leds = *leds;
  t.link_rssi_dbm = static_cast<std::int32_t>(num[8]);
  if (tok.size() == 12) {
    if (!within(num[9], -kPosMaxCm, kPosMaxCm) || !within(num[10], -kPosMaxCm, kPosMaxCm) ||
        !within(num[11], -kHeadingMaxCdeg, kHeadingMaxCdeg)) {
      return DecodeError::ArgOutOfRange;
    }
    t.pose = TelemetryPose{static_cast<std::int32_t>(num[9]), static_cast<std::int32_t>(num[10]),
                           static_cast<std::int32_t>(num[11])};
  }
  return t;
}

inline std::string encode_error(DecodeError e) {
  std::string body = " ";
  body.append(to_string(e));
  return detail::seal('E', body);
}

/// The code carried by an E line, or nullopt when the line is not one.
inline std::optional<DecodeError> decode_error(std::string_view line) {
  auto body = detail::unseal(line, 'E');
  if (!body || body->size() < 2 || (*body)[0] != ' ') return std::nullopt;
  return decode_error_from_string(body->substr(1));
}

/// Modular sequence comparison: true when `a` is at or after `b` within
/// half the sequence space.
constexpr bool seq_at_or_after(std::uint16_t a, std::uint16_t b) noexcept {
  return static_cast<std::uint16_t>(a - b) < 0x8000u;
}

}  // namespace spyrover::protocol
