#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datpg/circuit_graph.hpp"

namespace datpg {

enum class Logic : std::uint8_t { k0 = 0, k1 = 1, kX = 2 };

// One value per primary input, in netlist PI order.
using Pattern = std::vector<Logic>;

Pattern pattern_from_string(std::string_view bits);
std::string to_string(const Pattern& pattern);
bool has_x(const Pattern& pattern);
std::size_t specified_bits(const Pattern& pattern);

// Pattern file: one pattern per line over {0,1,X}; blank lines skipped.
std::vector<Pattern> parse_patterns(std::string_view text, std::size_t num_pis);
std::vector<Pattern> read_patterns_file(const std::string& path,
                                        std::size_t num_pis);
std::string write_patterns(std::span<const Pattern> patterns);

// Fault-free primary-output values for a fully specified pattern.
std::vector<std::uint8_t> eval(const CircuitGraph& graph, const Pattern& pattern);

// I_f(x): 1 iff some primary output differs between the fault-free and the
// faulty circuit. Patterns containing X are routed to detects_with_x.
bool detects(const CircuitGraph& graph, const FaultSpec& fault,
             const Pattern& pattern);

// Pessimistic three-valued check: only a 0/1 versus 1/0 difference at an
// output counts as detection.
bool detects_with_x(const CircuitGraph& graph, const FaultSpec& fault,
                    const Pattern& pattern);

struct Detectability {
  bool detectable = false;
  Pattern witness;  // first detecting pattern in enumeration order
};

inline constexpr std::size_t kDefaultEnumerationBound = 20;

// Enumerates all 2^n patterns, PI 0 being the most significant bit.
Detectability exhaustive_detectability(
    const CircuitGraph& graph, const FaultSpec& fault,
    std::size_t bound = kDefaultEnumerationBound);
std::vector<Detectability> exhaustive_detectability(
    const CircuitGraph& graph, std::span<const FaultSpec> faults,
    std::size_t bound = kDefaultEnumerationBound);

struct DetectionReport {
  std::size_t num_patterns = 0;
  std::vector<std::vector<std::uint64_t>> detected;  // [fault][pattern word]
  std::vector<std::int64_t> first_detection;         // -1 when undetected
  std::size_t detected_count = 0;

  bool is_detected(std::size_t fault, std::size_t pattern) const {
    return (detected[fault][pattern / 64] >> (pattern % 64)) & 1u;
  }
};

// Full fault x pattern detection matrix (no fault dropping).
DetectionReport fault_simulate(const CircuitGraph& graph,
                               std::span<const FaultSpec> faults,
                               std::span<const Pattern> patterns);

// First detecting index per fault among `count` uniformly random fully
// specified patterns, with fault dropping; -1 when never detected.
std::vector<std::int64_t> random_pattern_detection(
    const CircuitGraph& graph, std::span<const FaultSpec> faults,
    std::size_t count, std::uint64_t seed);

// CSV: fault_id,site_net,stuck_value,detected_by
std::string report_csv(const CircuitGraph& graph,
                       std::span<const FaultSpec> faults,
                       const DetectionReport& report);

// Two-valued bit-parallel simulation of every node. pi_words is laid out
// [num_pis x words]; node_words is resized to [size() x words].
void simulate_words(const CircuitGraph& graph,
                    std::span<const std::uint64_t> pi_words, std::size_t words,
                    std::vector<std::uint64_t>& node_words);

}  // namespace datpg
