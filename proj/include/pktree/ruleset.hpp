#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pktree {

inline constexpr int kNumDims = 5;

enum Dim : int { kSrcIp = 0, kDstIp = 1, kSrcPort = 2, kDstPort = 3, kProto = 4 };

// Bit width of each header field, in dimension order.
inline constexpr std::array<int, kNumDims> kDimBits = {32, 32, 16, 16, 8};

inline constexpr const char* kDimNames[kNumDims] = {"src_ip", "dst_ip", "src_port",
                                                    "dst_port", "proto"};

constexpr std::uint64_t dim_max(int dim) {
  return (std::uint64_t{1} << kDimBits[dim]) - 1;
}

// Closed interval [lo, hi]; closed ends avoid off-by-one at dimension maxima.
struct Interval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  std::uint64_t length() const { return hi - lo + 1; }
  bool contains(std::uint64_t v) const { return lo <= v && v <= hi; }
  bool overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Packet {
  std::array<std::uint32_t, kNumDims> fields{};

  std::uint32_t operator[](int dim) const { return fields[static_cast<std::size_t>(dim)]; }
  std::uint32_t& operator[](int dim) { return fields[static_cast<std::size_t>(dim)]; }
};

// Axis-aligned hyper-rectangle over the five header fields.
struct Region {
  std::array<Interval, kNumDims> ranges{};

  const Interval& operator[](int dim) const { return ranges[static_cast<std::size_t>(dim)]; }
  Interval& operator[](int dim) { return ranges[static_cast<std::size_t>(dim)]; }

  bool contains(const Packet& pkt) const {
    for (int d = 0; d < kNumDims; ++d) {
      if (!ranges[d].contains(pkt[d])) return false;
    }
    return true;
  }

  std::uint64_t width(int dim) const { return ranges[static_cast<std::size_t>(dim)].length(); }

  static Region full_space() {
    Region r;
    for (int d = 0; d < kNumDims; ++d) r[d] = {0, dim_max(d)};
    return r;
  }

  static Region point(const Packet& pkt) {
    Region r;
    for (int d = 0; d < kNumDims; ++d) r[d] = {pkt[d], pkt[d]};
    return r;
  }

  friend bool operator==(const Region&, const Region&) = default;
};

struct Rule {
  std::uint32_t priority = 0;  // list index; lower index wins
  std::array<Interval, kNumDims> ranges{};

  const Interval& operator[](int dim) const { return ranges[static_cast<std::size_t>(dim)]; }
  Interval& operator[](int dim) { return ranges[static_cast<std::size_t>(dim)]; }

  bool is_match_all() const {
    for (int d = 0; d < kNumDims; ++d) {
      if (ranges[d].lo != 0 || ranges[d].hi != dim_max(d)) return false;
    }
    return true;
  }

  friend bool operator==(const Rule&, const Rule&) = default;
};

// Ordered rule list; order defines priority. Immutable after parse.
struct RuleSet {
  std::vector<Rule> rules;

  std::size_t size() const { return rules.size(); }
  bool empty() const { return rules.empty(); }
  const Rule& operator[](std::size_t i) const { return rules[i]; }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

// Parses ClassBench filter text: one rule per '@' line,
//   @sip/plen dip/plen spl : sph dpl : dph proto/mask [flags...]
// '#' comment lines and blank lines are skipped. Trailing fields after the
// protocol are ignored; a note per affected line is appended to `warnings`.
RuleSet parse_classbench(std::string_view text, std::vector<std::string>* warnings = nullptr);

// Serializes back to ClassBench text. Requires IP ranges to be
// prefix-expressible and protocol to be exact or wildcard (always true for
// parsed rule sets).
std::string to_classbench(const RuleSet& rs);

// Canonical JSON dump of the rules ([lo,hi] pairs plus priority).
std::string rules_json_dump(const RuleSet& rs);

bool rule_matches(const Rule& rule, const Packet& pkt);

// Highest-priority (smallest index) matching rule, if any.
std::optional<std::uint32_t> linear_match(const RuleSet& rs, const Packet& pkt);

bool rule_intersects(const Rule& rule, const Region& region);

// Deterministic packet sample: a mix of uniform draws and draws targeted at
// rule boxes (corners and interiors) so every reachable rule is hit with high
// probability. n must be >= 1.
std::vector<Packet> sample_packets(const RuleSet& rs, std::size_t n, std::uint64_t seed);

}  // namespace pktree
