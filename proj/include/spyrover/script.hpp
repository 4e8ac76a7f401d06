#pragma once

// Operator command text ("SPD 128", "MOV F", "STP") and drive scripts:
//
//   # square
//   AT 0.00 SPD 150
//   AT 0.02 MOV 0
//
// Times are simulation seconds, strictly increasing.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spyrover/protocol.hpp"

namespace spyrover::script {

namespace detail {
inline std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}
}  // namespace detail

/// Parses "<VERB> [arg]" into a frame with seq 0, applying the same range
/// checks as the wire decoder. MOV also takes F/B/L/R.
inline protocol::Result<protocol::CommandFrame> parse_command_text(std::string_view text) {
  using protocol::DecodeError;
  const auto w = detail::words(text);
  if (w.empty() || w.size() > 2) return DecodeError::Malformed;
  const auto verb = protocol::verb_from_token(detail::upper(w[0]));
  if (!verb) return DecodeError::UnknownVerb;
  std::int64_t arg = 0;
  if (w.size() == 2) {
    const std::string a = detail::upper(w[1]);
    if (*verb == protocol::Verb::Move && a.size() == 1 && std::string_view("FBLR").find(a[0]) != std::string_view::npos) {
      arg = static_cast<std::int64_t>(std::string_view("FBLR").find(a[0]));
    } else {
      auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), arg);
      if (ec == std::errc::result_out_of_range) return DecodeError::ArgOutOfRange;
      if (ec != std::errc{} || ptr != a.data() + a.size()) return DecodeError::Malformed;
    }
  } else if (*verb != protocol::Verb::Stop && *verb != protocol::Verb::Ping) {
    return DecodeError::Malformed;
  }
  if (!protocol::arg_in_range(*verb, arg)) return DecodeError::ArgOutOfRange;
  return protocol::CommandFrame{*verb, static_cast<std::int32_t>(arg), 0};
}

struct ScriptStep {
  double at_s = 0.0;
  std::string text;
  protocol::CommandFrame frame;
  std::size_t line_no = 0;
};

struct DriveScript {
  std::vector<ScriptStep> steps;

  double duration_s() const noexcept { return steps.empty() ? 0.0 : steps.back().at_s; }
};

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline DriveScript parse_script(std::string_view text) {
  DriveScript script;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto w = detail::words(line);
    if (w.empty()) continue;
    auto fail = [line_no](const std::string& why) {
      return ScriptError("script line " + std::to_string(line_no) + ": " + why);
    };
    if (w.size() < 3 || detail::upper(w[0]) != "AT") throw fail("expected 'AT <seconds> <command>'");
    double at = 0.0;
    auto [ptr, ec] = std::from_chars(w[1].data(), w[1].data() + w[1].size(), at);
    if (ec != std::errc{} || ptr != w[1].data() + w[1].size() || !(at >= 0.0)) throw fail("bad time '" + std::string(w[1]) + "'");
    if (!script.steps.empty() && !(at > script.steps.back().at_s)) throw fail("times must be strictly increasing");
    std::string cmd(w[2]);
    if (w.size() > 3) {
      cmd += ' ';
      cmd += w[3];
    }
    if (w.size() > 4) throw fail("too many fields");
    const auto frame = parse_command_text(cmd);
    if (!frame) throw fail("invalid command '" + cmd + "': " + std::string(protocol::to_string(frame.error())));
    script.steps.push_back({at, cmd, *frame, line_no});
  }
  return script;
}

inline DriveScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot open script: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_script(ss.str());
}

}  // namespace spyrover::script
