#include "pktree/ruleset.hpp"

#include <bit>
#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pktree/rng.hpp"

namespace pktree {
namespace {

using json = nlohmann::ordered_json;

struct LineLexer {
  std::string_view text;
  std::size_t pos = 0;

  bool eat_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    return pos < text.size();
  }

  std::optional<std::string_view> next_token() {
    if (!eat_ws()) return std::nullopt;
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t') ++pos;
    return text.substr(start, pos - start);
  }
};

std::uint64_t parse_uint(std::string_view tok, std::size_t line, const char* what,
                         std::uint64_t max) {
  std::uint64_t value = 0;
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    base = 16;
    tok.remove_prefix(2);
  }
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value, base);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(tok) + "'");
  }
  if (value > max) {
    throw ParseError(line, std::string(what) + " out of range: " + std::string(tok));
  }
  return value;
}

Interval parse_prefix(std::string_view tok, std::size_t line, const char* what) {
  auto slash = tok.find('/');
  if (slash == std::string_view::npos) {
    throw ParseError(line, std::string(what) + " missing '/len': " + std::string(tok));
  }
  std::string_view addr = tok.substr(0, slash);
  std::string_view len_str = tok.substr(slash + 1);
  std::uint64_t len = parse_uint(len_str, line, "prefix length", 32);

  std::uint32_t ip = 0;
  std::size_t start = 0;
  for (int octet = 0; octet < 4; ++octet) {
    std::size_t dot = octet < 3 ? addr.find('.', start) : addr.size();
    if (dot == std::string_view::npos) {
      throw ParseError(line, std::string(what) + " malformed address: " + std::string(tok));
    }
    std::uint64_t v = parse_uint(addr.substr(start, dot - start), line, "address octet", 255);
    ip = (ip << 8) | static_cast<std::uint32_t>(v);
    start = dot + 1;
  }

  // Address bits below the prefix length are masked off so the interval is
  // exactly [p, p + 2^(32-len) - 1] with p aligned.
  std::uint64_t span = std::uint64_t{1} << (32 - len);
  std::uint64_t lo = (static_cast<std::uint64_t>(ip) / span) * span;
  return Interval{lo, lo + span - 1};
}

Interval parse_port_range(LineLexer& lex, std::size_t line, const char* what) {
  auto lo_tok = lex.next_token();
  auto colon = lex.next_token();
  auto hi_tok = lex.next_token();
  if (!lo_tok || !colon || !hi_tok || *colon != ":") {
    throw ParseError(line, std::string(what) + " range must be 'lo : hi'");
  }
  std::uint64_t lo = parse_uint(*lo_tok, line, what, 0xFFFF);
  std::uint64_t hi = parse_uint(*hi_tok, line, what, 0xFFFF);
  if (lo > hi) {
    throw ParseError(line, std::string(what) + " range has lo > hi");
  }
  return Interval{lo, hi};
}

Interval parse_protocol(std::string_view tok, std::size_t line) {
  auto slash = tok.find('/');
  if (slash == std::string_view::npos) {
    throw ParseError(line, "protocol missing '/mask': " + std::string(tok));
  }
  std::uint64_t value = parse_uint(tok.substr(0, slash), line, "protocol", 0xFF);
  std::uint64_t mask = parse_uint(tok.substr(slash + 1), line, "protocol mask", 0xFF);
  if (mask == 0xFF) return Interval{value, value};
  if (mask == 0x00) return Interval{0, 0xFF};
  throw ParseError(line, "unsupported protocol mask (only 0x00 and 0xFF)");
}

// Interval -> "a.b.c.d/len"; requires a power-of-two aligned range.
std::string prefix_string(const Interval& iv) {
  std::uint64_t span = iv.hi - iv.lo + 1;
  if (!std::has_single_bit(span) || iv.lo % span != 0) {
    throw std::invalid_argument("IP range is not prefix-expressible");
  }
  int len = 32 - std::countr_zero(span);
  auto ip = static_cast<std::uint32_t>(iv.lo);
  std::ostringstream out;
  out << ((ip >> 24) & 0xFF) << '.' << ((ip >> 16) & 0xFF) << '.' << ((ip >> 8) & 0xFF) << '.'
      << (ip & 0xFF) << '/' << len;
  return out.str();
}

}  // namespace

RuleSet parse_classbench(std::string_view text, std::vector<std::string>* warnings) {
  RuleSet rs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;
    if (end == text.size() && line.empty()) break;

    LineLexer lex{line};
    if (!lex.eat_ws()) continue;            // blank
    if (line[lex.pos] == '#') continue;     // comment
    if (line[lex.pos] != '@') {
      throw ParseError(line_no, "rule line must begin with '@'");
    }
    ++lex.pos;

    Rule rule;
    rule.priority = static_cast<std::uint32_t>(rs.rules.size());
    auto sip = lex.next_token();
    if (!sip) throw ParseError(line_no, "missing source prefix");
    rule[kSrcIp] = parse_prefix(*sip, line_no, "source prefix");
    auto dip = lex.next_token();
    if (!dip) throw ParseError(line_no, "missing destination prefix");
    rule[kDstIp] = parse_prefix(*dip, line_no, "destination prefix");
    rule[kSrcPort] = parse_port_range(lex, line_no, "source port");
    rule[kDstPort] = parse_port_range(lex, line_no, "destination port");
    auto proto = lex.next_token();
    if (!proto) throw ParseError(line_no, "missing protocol");
    rule[kProto] = parse_protocol(*proto, line_no);

    if (lex.next_token() && warnings) {
      warnings->push_back("line " + std::to_string(line_no) +
                          ": ignoring trailing fields after protocol");
    }
    rs.rules.push_back(rule);
  }
  return rs;
}

std::string to_classbench(const RuleSet& rs) {
  std::ostringstream out;
  for (const Rule& r : rs.rules) {
    out << '@' << prefix_string(r[kSrcIp]) << '\t' << prefix_string(r[kDstIp]) << '\t'
        << r[kSrcPort].lo << " : " << r[kSrcPort].hi << '\t' << r[kDstPort].lo << " : "
        << r[kDstPort].hi << '\t';
    const Interval& p = r[kProto];
    char buf[16];
    if (p.lo == 0 && p.hi == 0xFF) {
      out << "0x00/0x00";
    } else if (p.lo == p.hi) {
      std::snprintf(buf, sizeof(buf), "0x%02llX/0xFF", static_cast<unsigned long long>(p.lo));
      out << buf;
    } else {
      throw std::invalid_argument("protocol range is neither exact nor wildcard");
    }
    out << '\n';
  }
  return out.str();
}

std::string rules_json_dump(const RuleSet& rs) {
  json doc;
  doc["dimensions"] = json::array();
  for (int d = 0; d < kNumDims; ++d) doc["dimensions"].push_back(kDimNames[d]);
  doc["rules"] = json::array();
  for (const Rule& r : rs.rules) {
    json ranges = json::array();
    for (int d = 0; d < kNumDims; ++d) ranges.push_back({r[d].lo, r[d].hi});
    doc["rules"].push_back({{"priority", r.priority}, {"ranges", ranges}});
  }
  return doc.dump(2) + "\n";
}

bool rule_matches(const Rule& rule, const Packet& pkt) {
  for (int d = 0; d < kNumDims; ++d) {
    if (!rule[d].contains(pkt[d])) return false;
  }
  return true;
}

std::optional<std::uint32_t> linear_match(const RuleSet& rs, const Packet& pkt) {
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    if (rule_matches(rs.rules[i], pkt)) return static_cast<std::uint32_t>(i);
  }
  return std::nullopt;
}

bool rule_intersects(const Rule& rule, const Region& region) {
  for (int d = 0; d < kNumDims; ++d) {
    if (!rule[d].overlaps(region[d])) return false;
  }
  return true;
}

std::vector<Packet> sample_packets(const RuleSet& rs, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_packets: n must be >= 1");
  Rng rng = make_rng(seed, 0x7061636b6574ULL);
  std::vector<Packet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Packet pkt;
    bool targeted = !rs.empty() && (i % 2 == 1);
    if (targeted) {
      // Round-robin over rules so small samples still cover every rule.
      const Rule& r = rs.rules[(i / 2) % rs.size()];
      for (int d = 0; d < kNumDims; ++d) {
        const Interval& iv = r[d];
        std::uint64_t v;
        switch (uniform_u64(rng, 3)) {
          case 0: v = iv.lo; break;
          case 1: v = iv.hi; break;
          default: v = iv.lo + uniform_u64(rng, iv.length()); break;
        }
        pkt[d] = static_cast<std::uint32_t>(v);
      }
    } else {
      for (int d = 0; d < kNumDims; ++d) {
        pkt[d] = static_cast<std::uint32_t>(uniform_u64(rng, dim_max(d) + 1));
      }
    }
    out.push_back(pkt);
  }
  return out;
}

}  // namespace pktree
