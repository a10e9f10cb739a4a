#include "datpg/discrete_sim.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "datpg/rng.hpp"

#ifdef DATPG_HAVE_OPENMP
#include <omp.h>
#endif

namespace datpg {

Pattern pattern_from_string(std::string_view bits) {
  Pattern p;
  p.reserve(bits.size());
  for (char c : bits) {
    switch (c) {
      case '0': p.push_back(Logic::k0); break;
      case '1': p.push_back(Logic::k1); break;
      case 'X':
      case 'x': p.push_back(Logic::kX); break;
      default:
        throw Error(ErrorCode::kPatternLengthMismatch,
                    std::string("invalid pattern character '") + c + "'");
    }
  }
  return p;
}

std::string to_string(const Pattern& pattern) {
  std::string s;
  s.reserve(pattern.size());
  for (Logic v : pattern) s.push_back(v == Logic::k0 ? '0' : v == Logic::k1 ? '1' : 'X');
  return s;
}

bool has_x(const Pattern& pattern) {
  for (Logic v : pattern) {
    if (v == Logic::kX) return true;
  }
  return false;
}

std::size_t specified_bits(const Pattern& pattern) {
  std::size_t n = 0;
  for (Logic v : pattern) n += v != Logic::kX;
  return n;
}

std::vector<Pattern> parse_patterns(std::string_view text, std::size_t num_pis) {
  std::vector<Pattern> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' ||
                             line.back() == '\t')) {
      line.pop_back();
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    Pattern p = pattern_from_string(std::string_view(line).substr(first));
    if (p.size() != num_pis) {
      throw Error(ErrorCode::kPatternLengthMismatch,
                  "pattern line " + std::to_string(line_no) + " has " +
                      std::to_string(p.size()) + " bits, expected " +
                      std::to_string(num_pis));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Pattern> read_patterns_file(const std::string& path,
                                        std::size_t num_pis) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open pattern file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_patterns(buffer.str(), num_pis);
}

std::string write_patterns(std::span<const Pattern> patterns) {
  std::string out;
  for (const auto& p : patterns) {
    out += to_string(p);
    out += '\n';
  }
  return out;
}

namespace {

constexpr std::uint64_t kAllOnes = ~std::uint64_t{0};

struct TwoValued {
  using Word = std::uint64_t;
  static Word constant(bool one) { return one ? kAllOnes : 0; }
  static Word op_and(Word a, Word b) { return a & b; }
  static Word op_or(Word a, Word b) { return a | b; }
  static Word op_xor(Word a, Word b) { return a ^ b; }
  static Word op_not(Word a) { return ~a; }
  static std::uint64_t differ(Word a, Word b) { return a ^ b; }
};

// Dual-rail 0/1/X: `one` lanes are 1, `zero` lanes are 0, neither is X.
struct Tri {
  std::uint64_t one = 0;
  std::uint64_t zero = 0;
};

struct ThreeValued {
  using Word = Tri;
  static Word constant(bool one) { return one ? Tri{kAllOnes, 0} : Tri{0, kAllOnes}; }
  static Word op_and(Word a, Word b) { return {a.one & b.one, a.zero | b.zero}; }
  static Word op_or(Word a, Word b) { return {a.one | b.one, a.zero & b.zero}; }
  static Word op_xor(Word a, Word b) {
    return {(a.one & b.zero) | (a.zero & b.one), (a.one & b.one) | (a.zero & b.zero)};
  }
  static Word op_not(Word a) { return {a.zero, a.one}; }
  static std::uint64_t differ(Word a, Word b) {
    return (a.one & b.zero) | (a.zero & b.one);
  }
};

template <class V, class Get>
typename V::Word eval_node(NodeKind kind, std::span<const NodeId> fanins,
                           Get&& get) {
  using W = typename V::Word;
  auto fold = [&](W (*op)(W, W)) {
    W acc = get(fanins[0]);
    for (std::size_t i = 1; i < fanins.size(); ++i) acc = op(acc, get(fanins[i]));
    return acc;
  };
  switch (kind) {
    case NodeKind::kAnd: return fold(V::op_and);
    case NodeKind::kNand: return V::op_not(fold(V::op_and));
    case NodeKind::kOr: return fold(V::op_or);
    case NodeKind::kNor: return V::op_not(fold(V::op_or));
    case NodeKind::kXor: return fold(V::op_xor);
    case NodeKind::kXnor: return V::op_not(fold(V::op_xor));
    case NodeKind::kNot: return V::op_not(get(fanins[0]));
    case NodeKind::kBuf:
    case NodeKind::kBranch: return get(fanins[0]);
    case NodeKind::kConst0: return V::constant(false);
    case NodeKind::kConst1: return V::constant(true);
    case NodeKind::kInput: break;
  }
  return V::constant(false);
}

// Fault-free values for one word of patterns; inputs preset by caller.
template <class V>
void good_sim(const CircuitGraph& g, std::vector<typename V::Word>& values) {
  for (std::size_t l = 0; l < g.levels.size(); ++l) {
    for (NodeId v : g.levels[l]) {
      const NodeKind k = g.kinds[v];
      if (k == NodeKind::kInput) continue;
      values[v] = eval_node<V>(k, g.fanins(v),
                               [&](NodeId u) { return values[u]; });
    }
  }
}

struct ConeInfo {
  std::vector<NodeId> nodes;     // site first, topological
  std::vector<NodeId> po_nodes;  // distinct output nodes inside the cone
};

std::vector<ConeInfo> build_cones(const CircuitGraph& g,
                                  std::span<const FaultSpec> faults) {
  std::vector<std::uint8_t> is_po(g.size(), 0);
  for (NodeId po : g.po_nodes) is_po[po] = 1;
  std::vector<ConeInfo> cones(faults.size());
  for (std::size_t f = 0; f < faults.size(); ++f) {
    const FaultSpec& fault = faults[f];
    if (fault.site < 0 || static_cast<std::size_t>(fault.site) >= g.size() ||
        fault.stuck_value > 1) {
      throw Error(ErrorCode::kFaultSiteInvalid,
                  "invalid fault site " + std::to_string(fault.site));
    }
    cones[f].nodes = fanout_cone(g, fault.site);
    for (NodeId v : cones[f].nodes) {
      if (is_po[v]) cones[f].po_nodes.push_back(v);
    }
  }
  return cones;
}

// Scratch for re-simulating one fault cone over a word of patterns.
template <class V>
class ConeSimulator {
 public:
  explicit ConeSimulator(std::size_t n) : bad_(n), stamp_(n, 0) {}

  std::uint64_t detect(const CircuitGraph& g, const ConeInfo& cone,
                       const FaultSpec& fault,
                       const std::vector<typename V::Word>& good) {
    if (cone.po_nodes.empty()) return 0;
    ++epoch_;
    bad_[fault.site] = V::constant(fault.stuck_value != 0);
    stamp_[fault.site] = epoch_;
    auto get = [&](NodeId u) { return stamp_[u] == epoch_ ? bad_[u] : good[u]; };
    for (std::size_t i = 1; i < cone.nodes.size(); ++i) {
      const NodeId v = cone.nodes[i];
      bad_[v] = eval_node<V>(g.kinds[v], g.fanins(v), get);
      stamp_[v] = epoch_;
    }
    std::uint64_t diff = 0;
    for (NodeId po : cone.po_nodes) diff |= V::differ(good[po], bad_[po]);
    return diff;
  }

 private:
  std::vector<typename V::Word> bad_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

void check_length(const CircuitGraph& g, const Pattern& p) {
  if (p.size() != g.num_pis()) {
    throw Error(ErrorCode::kPatternLengthMismatch,
                "pattern has " + std::to_string(p.size()) + " bits, circuit has " +
                    std::to_string(g.num_pis()) + " inputs");
  }
}

// Packs up to 64 patterns (starting at `first`) into per-PI words.
template <class V>
void load_patterns(const CircuitGraph& g, std::span<const Pattern> patterns,
                   std::size_t first, std::vector<typename V::Word>& values) {
  const std::size_t count = std::min<std::size_t>(64, patterns.size() - first);
  for (std::size_t i = 0; i < g.num_pis(); ++i) {
    std::uint64_t one = 0, zero = 0;
    for (std::size_t lane = 0; lane < count; ++lane) {
      const Logic b = patterns[first + lane][i];
      if (b == Logic::k1) one |= std::uint64_t{1} << lane;
      if (b == Logic::k0) zero |= std::uint64_t{1} << lane;
    }
    if constexpr (std::is_same_v<V, TwoValued>) {
      values[g.pi_nodes[i]] = one;
    } else {
      values[g.pi_nodes[i]] = Tri{one, zero};
    }
  }
}

std::uint64_t lane_mask(std::size_t count) {
  return count >= 64 ? kAllOnes : (std::uint64_t{1} << count) - 1;
}

int thread_count() {
#ifdef DATPG_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class V>
DetectionReport fault_simulate_impl(const CircuitGraph& g,
                                    std::span<const FaultSpec> faults,
                                    std::span<const Pattern> patterns) {
  DetectionReport report;
  report.num_patterns = patterns.size();
  const std::size_t words = (patterns.size() + 63) / 64;
  report.detected.assign(faults.size(), std::vector<std::uint64_t>(words, 0));
  report.first_detection.assign(faults.size(), -1);
  const auto cones = build_cones(g, faults);

  std::vector<typename V::Word> good(g.size());
  std::vector<ConeSimulator<V>> sims;
  for (int t = 0; t < thread_count(); ++t) sims.emplace_back(g.size());

  for (std::size_t w = 0; w < words; ++w) {
    load_patterns<V>(g, patterns, w * 64, good);
    good_sim<V>(g, good);
    const std::uint64_t valid = lane_mask(patterns.size() - w * 64);
    const auto nf = static_cast<std::int64_t>(faults.size());
#ifdef DATPG_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (std::int64_t f = 0; f < nf; ++f) {
#ifdef DATPG_HAVE_OPENMP
      auto& sim = sims[omp_get_thread_num()];
#else
      auto& sim = sims[0];
#endif
      report.detected[f][w] = sim.detect(g, cones[f], faults[f], good) & valid;
    }
  }
  for (std::size_t f = 0; f < faults.size(); ++f) {
    for (std::size_t w = 0; w < words; ++w) {
      if (report.detected[f][w]) {
        report.first_detection[f] =
            static_cast<std::int64_t>(w * 64 + std::countr_zero(report.detected[f][w]));
        ++report.detected_count;
        break;
      }
    }
  }
  return report;
}

}  // namespace

std::vector<std::uint8_t> eval(const CircuitGraph& graph, const Pattern& pattern) {
  check_length(graph, pattern);
  if (has_x(pattern)) {
    throw Error(ErrorCode::kPatternLengthMismatch,
                "eval requires a fully specified pattern");
  }
  std::vector<std::uint64_t> values(graph.size(), 0);
  load_patterns<TwoValued>(graph, std::span<const Pattern>(&pattern, 1), 0, values);
  good_sim<TwoValued>(graph, values);
  std::vector<std::uint8_t> out;
  out.reserve(graph.num_pos());
  for (NodeId po : graph.po_nodes) out.push_back(values[po] & 1u);
  return out;
}

bool detects(const CircuitGraph& graph, const FaultSpec& fault,
             const Pattern& pattern) {
  check_length(graph, pattern);
  if (has_x(pattern)) return detects_with_x(graph, fault, pattern);
  const auto cones = build_cones(graph, std::span<const FaultSpec>(&fault, 1));
  std::vector<std::uint64_t> good(graph.size(), 0);
  load_patterns<TwoValued>(graph, std::span<const Pattern>(&pattern, 1), 0, good);
  good_sim<TwoValued>(graph, good);
  ConeSimulator<TwoValued> sim(graph.size());
  return sim.detect(graph, cones[0], fault, good) & 1u;
}

bool detects_with_x(const CircuitGraph& graph, const FaultSpec& fault,
                    const Pattern& pattern) {
  check_length(graph, pattern);
  const auto cones = build_cones(graph, std::span<const FaultSpec>(&fault, 1));
  std::vector<Tri> good(graph.size());
  load_patterns<ThreeValued>(graph, std::span<const Pattern>(&pattern, 1), 0, good);
  good_sim<ThreeValued>(graph, good);
  ConeSimulator<ThreeValued> sim(graph.size());
  return sim.detect(graph, cones[0], fault, good) & 1u;
}

std::vector<Detectability> exhaustive_detectability(
    const CircuitGraph& graph, std::span<const FaultSpec> faults,
    std::size_t bound) {
  const std::size_t n = graph.num_pis();
  if (n > bound || n > 40) {
    throw Error(ErrorCode::kTooManyInputs,
                std::to_string(n) + " inputs exceed the enumeration bound of " +
                    std::to_string(std::min<std::size_t>(bound, 40)));
  }
  const auto cones = build_cones(graph, faults);
  std::vector<Detectability> out(faults.size());
  std::size_t remaining = faults.size();
  const std::uint64_t total = std::uint64_t{1} << n;
  const std::uint64_t words = (total + 63) / 64;
  const std::uint64_t valid_last = lane_mask(total - (words - 1) * 64);

  // Lane patterns for the six least significant pattern bits.
  static constexpr std::uint64_t kLaneBits[6] = {
      0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
      0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};

  std::vector<std::uint64_t> good(graph.size(), 0);
  ConeSimulator<TwoValued> sim(graph.size());
  for (std::uint64_t w = 0; w < words && remaining > 0; ++w) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bit = n - 1 - i;
      good[graph.pi_nodes[i]] =
          bit < 6 ? kLaneBits[bit] : (((w >> (bit - 6)) & 1u) ? kAllOnes : 0);
    }
    good_sim<TwoValued>(graph, good);
    const std::uint64_t valid = w + 1 == words ? valid_last : kAllOnes;
    for (std::size_t f = 0; f < faults.size(); ++f) {
      if (out[f].detectable) continue;
      const std::uint64_t hit = sim.detect(graph, cones[f], faults[f], good) & valid;
      if (!hit) continue;
      const std::uint64_t p = w * 64 + static_cast<std::uint64_t>(std::countr_zero(hit));
      out[f].detectable = true;
      out[f].witness.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        out[f].witness[i] = ((p >> (n - 1 - i)) & 1u) ? Logic::k1 : Logic::k0;
      }
      --remaining;
    }
  }
  return out;
}

Detectability exhaustive_detectability(const CircuitGraph& graph,
                                       const FaultSpec& fault, std::size_t bound) {
  return exhaustive_detectability(graph, std::span<const FaultSpec>(&fault, 1),
                                  bound)[0];
}

DetectionReport fault_simulate(const CircuitGraph& graph,
                               std::span<const FaultSpec> faults,
                               std::span<const Pattern> patterns) {
  bool any_x = false;
  for (const auto& p : patterns) {
    check_length(graph, p);
    any_x = any_x || has_x(p);
  }
  return any_x ? fault_simulate_impl<ThreeValued>(graph, faults, patterns)
               : fault_simulate_impl<TwoValued>(graph, faults, patterns);
}

std::vector<std::int64_t> random_pattern_detection(
    const CircuitGraph& graph, std::span<const FaultSpec> faults,
    std::size_t count, std::uint64_t seed) {
  const auto cones = build_cones(graph, faults);
  std::vector<std::int64_t> first(faults.size(), -1);
  std::vector<std::size_t> live(faults.size());
  for (std::size_t f = 0; f < live.size(); ++f) live[f] = f;
  const CounterRng rng(seed, 0x7a11);
  std::vector<std::uint64_t> good(graph.size(), 0);
  ConeSimulator<TwoValued> sim(graph.size());
  const std::size_t words = (count + 63) / 64;
  for (std::size_t w = 0; w < words && !live.empty(); ++w) {
    for (std::size_t i = 0; i < graph.num_pis(); ++i) {
      good[graph.pi_nodes[i]] = rng.bits({w, i});
    }
    good_sim<TwoValued>(graph, good);
    const std::uint64_t valid = lane_mask(count - w * 64);
    std::size_t kept = 0;
    for (std::size_t f : live) {
      const std::uint64_t hit = sim.detect(graph, cones[f], faults[f], good) & valid;
      if (hit) {
        first[f] = static_cast<std::int64_t>(w * 64 + std::countr_zero(hit));
      } else {
        live[kept++] = f;
      }
    }
    live.resize(kept);
  }
  return first;
}

std::string report_csv(const CircuitGraph& graph,
                       std::span<const FaultSpec> faults,
                       const DetectionReport& report) {
  std::ostringstream os;
  os << "fault_id,site_net,stuck_value,detected_by\n";
  for (std::size_t f = 0; f < faults.size(); ++f) {
    os << f << ',' << graph.labels[faults[f].site] << ','
       << static_cast<int>(faults[f].stuck_value) << ',';
    if (report.first_detection[f] >= 0) {
      os << report.first_detection[f];
    } else {
      os << '-';
    }
    os << '\n';
  }
  return os.str();
}

void simulate_words(const CircuitGraph& graph,
                    std::span<const std::uint64_t> pi_words, std::size_t words,
                    std::vector<std::uint64_t>& node_words) {
  if (pi_words.size() != graph.num_pis() * words) {
    throw Error(ErrorCode::kShapeMismatch, "simulate_words: input shape mismatch");
  }
  node_words.assign(graph.size() * words, 0);
  for (std::size_t i = 0; i < graph.num_pis(); ++i) {
    std::copy_n(pi_words.begin() + static_cast<std::ptrdiff_t>(i * words), words,
                node_words.begin() + static_cast<std::ptrdiff_t>(graph.pi_nodes[i] * words));
  }
  for (std::size_t l = 0; l < graph.levels.size(); ++l) {
    for (NodeId v : graph.levels[l]) {
      const NodeKind k = graph.kinds[v];
      if (k == NodeKind::kInput) continue;
      std::uint64_t* out = node_words.data() + static_cast<std::size_t>(v) * words;
      const auto fanins = graph.fanins(v);
      for (std::size_t w = 0; w < words; ++w) {
        out[w] = eval_node<TwoValued>(k, fanins, [&](NodeId u) {
          return node_words[static_cast<std::size_t>(u) * words + w];
        });
      }
    }
  }
}

}  // namespace datpg
