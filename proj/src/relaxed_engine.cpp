#include "datpg/relaxed_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#ifdef DATPG_HAVE_OPENMP
#include <omp.h>
#endif

namespace datpg {

namespace {

// Factor whose product over the other fan-ins gives each partial derivative,
// and the sign in front of that product.
double partial_factor(NodeKind kind, double a) {
  switch (kind) {
    case NodeKind::kAnd:
    case NodeKind::kNand: return a;
    case NodeKind::kOr:
    case NodeKind::kNor: return 1.0 - a;
    case NodeKind::kXor:
    case NodeKind::kXnor: return 1.0 - 2.0 * a;
    default: return 1.0;
  }
}

double partial_sign(NodeKind kind) {
  switch (kind) {
    case NodeKind::kNand:
    case NodeKind::kNor:
    case NodeKind::kXnor:
    case NodeKind::kNot: return -1.0;
    default: return 1.0;
  }
}

bool is_and_family(NodeKind k) { return k == NodeKind::kAnd || k == NodeKind::kNand; }

int worker_count() {
#ifdef DATPG_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Splits [0, samples) into per-worker slices aligned to 8 samples.
std::vector<std::size_t> slice_bounds(std::size_t samples) {
  const std::size_t workers = static_cast<std::size_t>(std::max(1, worker_count()));
  std::size_t chunk = (samples + workers - 1) / workers;
  chunk = std::max<std::size_t>(8, (chunk + 7) / 8 * 8);
  std::vector<std::size_t> bounds{0};
  while (bounds.back() < samples) bounds.push_back(std::min(samples, bounds.back() + chunk));
  return bounds;
}

}  // namespace

double gate_fn(NodeKind kind, std::span<const double> in) {
  switch (kind) {
    case NodeKind::kAnd:
    case NodeKind::kNand: {
      double x = in[0];
      for (std::size_t i = 1; i < in.size(); ++i) x *= in[i];
      return kind == NodeKind::kAnd ? x : 1.0 - x;
    }
    case NodeKind::kOr: {
      double x = in[0];
      for (std::size_t i = 1; i < in.size(); ++i) x = x + in[i] - x * in[i];
      return x;
    }
    case NodeKind::kNor: {
      double x = 1.0 - in[0];
      for (std::size_t i = 1; i < in.size(); ++i) x *= 1.0 - in[i];
      return x;
    }
    case NodeKind::kXor:
    case NodeKind::kXnor: {
      double x = in[0];
      for (std::size_t i = 1; i < in.size(); ++i) x = x + in[i] - 2.0 * x * in[i];
      return kind == NodeKind::kXor ? x : 1.0 - x;
    }
    case NodeKind::kNot: return 1.0 - in[0];
    case NodeKind::kBuf:
    case NodeKind::kBranch: return in[0];
    case NodeKind::kConst0: return 0.0;
    case NodeKind::kConst1: return 1.0;
    case NodeKind::kInput: break;
  }
  return 0.0;
}

double gate_partial(NodeKind kind, std::span<const double> in, std::size_t pin) {
  switch (kind) {
    case NodeKind::kNot: return -1.0;
    case NodeKind::kBuf:
    case NodeKind::kBranch: return 1.0;
    case NodeKind::kConst0:
    case NodeKind::kConst1:
    case NodeKind::kInput: return 0.0;
    default: break;
  }
  double p = partial_sign(kind);
  for (std::size_t j = 0; j < in.size(); ++j) {
    if (j != pin) p *= partial_factor(kind, in[j]);
  }
  return p;
}

RelaxedEngine::RelaxedEngine(const CircuitGraph& graph, EngineOptions options)
    : graph_(&graph), options_(options), tape_pos_(graph.size(), 0) {
  std::size_t cursor = 0;
  for (const auto& level : graph.levels) {
    for (NodeId v : level) {
      tape_pos_[v] = static_cast<std::int32_t>(cursor);
      cursor += graph.fanins(v).size();
    }
  }
  tape_edges_ = cursor;
}

void RelaxedEngine::forward(std::span<const double> pi_values, std::size_t samples,
                            ValueTensor& values, BackwardTape* tape) const {
  const CircuitGraph& g = *graph_;
  if (pi_values.size() != g.num_pis() * samples) {
    throw Error(ErrorCode::kShapeMismatch,
                "forward: expected " + std::to_string(g.num_pis() * samples) +
                    " input values, got " + std::to_string(pi_values.size()));
  }
  values.rows = g.size();
  values.samples = samples;
  values.data.resize(g.size() * samples);
  if (tape) {
    tape->graph = &g;
    tape->samples = samples;
    tape->fanin_values.resize(tape_edges_ * samples);
  }
  const auto bounds = slice_bounds(samples);
  const auto slices = static_cast<std::int64_t>(bounds.size()) - 1;
#ifdef DATPG_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t c = 0; c < slices; ++c) {
    forward_slice(pi_values, samples, bounds[c], bounds[c + 1], values, tape);
  }
}

void RelaxedEngine::forward_slice(std::span<const double> pi_values,
                                  std::size_t S, std::size_t begin,
                                  std::size_t end, ValueTensor& values,
                                  BackwardTape* tape) const {
  const CircuitGraph& g = *graph_;
  const std::size_t len = end - begin;
  double* val = values.data.data();
  for (std::size_t i = 0; i < g.num_pis(); ++i) {
    std::copy_n(pi_values.data() + i * S + begin, len,
                val + static_cast<std::size_t>(g.pi_nodes[i]) * S + begin);
  }
  const double* in_ptr[2];
  for (std::size_t l = 0; l < g.levels.size(); ++l) {
    for (NodeId v : g.levels[l]) {
      const NodeKind kind = g.kinds[v];
      double* out = val + static_cast<std::size_t>(v) * S + begin;
      if (kind == NodeKind::kInput) continue;
      if (kind == NodeKind::kConst0 || kind == NodeKind::kConst1) {
        std::fill_n(out, len, kind == NodeKind::kConst1 ? 1.0 : 0.0);
        continue;
      }
      const auto fanins = g.fanins(v);
      const std::size_t k = fanins.size();
      if (tape) {
        double* buf = tape->fanin_values.data() +
                      static_cast<std::size_t>(tape_pos_[v]) * S + begin;
        for (std::size_t j = 0; j < k; ++j) {
          std::copy_n(val + static_cast<std::size_t>(fanins[j]) * S + begin, len,
                      buf + j * S);
        }
      }
      if (k == 1) {
        const double* a = val + static_cast<std::size_t>(fanins[0]) * S + begin;
        if (kind == NodeKind::kNot) {
          for (std::size_t s = 0; s < len; ++s) out[s] = 1.0 - a[s];
        } else {
          std::copy_n(a, len, out);
        }
        continue;
      }
      if (k == 2) {
        in_ptr[0] = val + static_cast<std::size_t>(fanins[0]) * S + begin;
        in_ptr[1] = val + static_cast<std::size_t>(fanins[1]) * S + begin;
        const double* a = in_ptr[0];
        const double* b = in_ptr[1];
        switch (kind) {
          case NodeKind::kAnd:
            for (std::size_t s = 0; s < len; ++s) out[s] = a[s] * b[s];
            break;
          case NodeKind::kNand:
            for (std::size_t s = 0; s < len; ++s) out[s] = 1.0 - a[s] * b[s];
            break;
          case NodeKind::kOr:
            for (std::size_t s = 0; s < len; ++s) out[s] = a[s] + b[s] - a[s] * b[s];
            break;
          case NodeKind::kNor:
            for (std::size_t s = 0; s < len; ++s) out[s] = (1.0 - a[s]) * (1.0 - b[s]);
            break;
          case NodeKind::kXor:
            for (std::size_t s = 0; s < len; ++s) out[s] = a[s] + b[s] - 2.0 * a[s] * b[s];
            break;
          case NodeKind::kXnor:
            for (std::size_t s = 0; s < len; ++s)
              out[s] = 1.0 - (a[s] + b[s] - 2.0 * a[s] * b[s]);
            break;
          default:
            break;
        }
        continue;
      }
      const double* a0 = val + static_cast<std::size_t>(fanins[0]) * S + begin;
      if (kind == NodeKind::kNor) {
        for (std::size_t s = 0; s < len; ++s) out[s] = 1.0 - a0[s];
      } else {
        std::copy_n(a0, len, out);
      }
      for (std::size_t j = 1; j < k; ++j) {
        const double* a = val + static_cast<std::size_t>(fanins[j]) * S + begin;
        switch (kind) {
          case NodeKind::kAnd:
          case NodeKind::kNand:
            for (std::size_t s = 0; s < len; ++s) out[s] *= a[s];
            break;
          case NodeKind::kOr:
            for (std::size_t s = 0; s < len; ++s) out[s] = out[s] + a[s] - out[s] * a[s];
            break;
          case NodeKind::kNor:
            for (std::size_t s = 0; s < len; ++s) out[s] *= 1.0 - a[s];
            break;
          case NodeKind::kXor:
          case NodeKind::kXnor:
            for (std::size_t s = 0; s < len; ++s)
              out[s] = out[s] + a[s] - 2.0 * out[s] * a[s];
            break;
          default:
            break;
        }
      }
      if (kind == NodeKind::kNand || kind == NodeKind::kXnor) {
        for (std::size_t s = 0; s < len; ++s) out[s] = 1.0 - out[s];
      }
    }
  }
}

std::vector<double> RelaxedEngine::backward(const BackwardTape& tape,
                                            ValueTensor& adjoint) const {
  const CircuitGraph& g = *graph_;
  if (tape.graph != graph_ || tape.fanin_values.size() != tape_edges_ * tape.samples ||
      adjoint.rows != g.size() || adjoint.samples != tape.samples ||
      adjoint.data.size() != g.size() * tape.samples) {
    throw Error(ErrorCode::kTapeMismatch, "backward: tape does not match engine or adjoint");
  }
  const auto bounds = slice_bounds(tape.samples);
  const auto slices = static_cast<std::int64_t>(bounds.size()) - 1;
#ifdef DATPG_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t c = 0; c < slices; ++c) {
    backward_slice(tape, bounds[c], bounds[c + 1], adjoint);
  }
  const std::size_t S = tape.samples;
  std::vector<double> grads(g.num_pis() * S);
  for (std::size_t i = 0; i < g.num_pis(); ++i) {
    std::copy_n(adjoint.data.data() + static_cast<std::size_t>(g.pi_nodes[i]) * S, S,
                grads.data() + i * S);
  }
  return grads;
}

void RelaxedEngine::backward_slice(const BackwardTape& tape, std::size_t begin,
                                   std::size_t end, ValueTensor& adjoint) const {
  const CircuitGraph& g = *graph_;
  const std::size_t S = tape.samples;
  const std::size_t len = end - begin;
  double* adj = adjoint.data.data();
  const double scale_and = options_.corrupt_and_partial ? 1.01 : 1.0;
  std::vector<double> term;

  for (std::size_t l = g.levels.size(); l-- > 1;) {
    const auto& level = g.levels[l];
    for (auto it = level.rbegin(); it != level.rend(); ++it) {
      const NodeId v = *it;
      const NodeKind kind = g.kinds[v];
      if (kind == NodeKind::kConst0 || kind == NodeKind::kConst1 ||
          kind == NodeKind::kInput) {
        continue;
      }
      const double* gout = adj + static_cast<std::size_t>(v) * S + begin;
      const auto fanins = g.fanins(v);
      const std::size_t k = fanins.size();
      const double* buf = tape.fanin_values.data() +
                          static_cast<std::size_t>(tape_pos_[v]) * S + begin;
      if (k == 1) {
        double* ga = adj + static_cast<std::size_t>(fanins[0]) * S + begin;
        if (kind == NodeKind::kNot) {
          for (std::size_t s = 0; s < len; ++s) ga[s] -= gout[s];
        } else {
          for (std::size_t s = 0; s < len; ++s) ga[s] += gout[s];
        }
        continue;
      }
      const double sign = partial_sign(kind) * (is_and_family(kind) ? scale_and : 1.0);
      if (k == 2) {
        const double* a = buf;
        const double* b = buf + S;
        double* ga = adj + static_cast<std::size_t>(fanins[0]) * S + begin;
        double* gb = adj + static_cast<std::size_t>(fanins[1]) * S + begin;
        switch (kind) {
          case NodeKind::kAnd:
          case NodeKind::kNand:
            for (std::size_t s = 0; s < len; ++s) {
              const double go = sign * gout[s];
              ga[s] += go * b[s];
              gb[s] += go * a[s];
            }
            break;
          case NodeKind::kOr:
          case NodeKind::kNor:
            for (std::size_t s = 0; s < len; ++s) {
              const double go = sign * gout[s];
              ga[s] += go * (1.0 - b[s]);
              gb[s] += go * (1.0 - a[s]);
            }
            break;
          case NodeKind::kXor:
          case NodeKind::kXnor:
            for (std::size_t s = 0; s < len; ++s) {
              const double go = sign * gout[s];
              ga[s] += go * (1.0 - 2.0 * b[s]);
              gb[s] += go * (1.0 - 2.0 * a[s]);
            }
            break;
          default:
            break;
        }
        continue;
      }
      // n-ary: partial for pin j is sign * prod_{i != j} factor(a_i), built
      // one fan-in row at a time so the inner loops stay over samples.
      term.resize(len);
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t s = 0; s < len; ++s) term[s] = sign * gout[s];
        for (std::size_t i = 0; i < k; ++i) {
          if (i == j) continue;
          const double* a = buf + i * S;
          switch (kind) {
            case NodeKind::kAnd:
            case NodeKind::kNand:
              for (std::size_t s = 0; s < len; ++s) term[s] *= a[s];
              break;
            case NodeKind::kOr:
            case NodeKind::kNor:
              for (std::size_t s = 0; s < len; ++s) term[s] *= 1.0 - a[s];
              break;
            default:
              for (std::size_t s = 0; s < len; ++s) term[s] *= 1.0 - 2.0 * a[s];
              break;
          }
        }
        double* ga = adj + static_cast<std::size_t>(fanins[j]) * S + begin;
        for (std::size_t s = 0; s < len; ++s) ga[s] += term[s];
      }
    }
  }
}

std::string RelaxedEngine::level_stats(const ValueTensor& values) const {
  const CircuitGraph& g = *graph_;
  std::ostringstream os;
  os << "level,nodes,min,mean,max\n";
  for (std::size_t l = 0; l < g.levels.size(); ++l) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    std::size_t count = 0;
    for (NodeId v : g.levels[l]) {
      for (double x : values.row(static_cast<std::size_t>(v))) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sum += x;
        ++count;
      }
    }
    os << l << ',' << g.levels[l].size() << ',' << lo << ','
       << (count ? sum / static_cast<double>(count) : 0.0) << ',' << hi << '\n';
  }
  return os.str();
}

SurrogateResult surrogate_S(const ValueTensor& values,
                            std::span<const NodeId> free_pos,
                            std::span<const NodeId> faulty_pos,
                            std::span<const std::int32_t> observed) {
  if (free_pos.size() != faulty_pos.size()) {
    throw Error(ErrorCode::kShapeMismatch, "surrogate_S: output tables differ in length");
  }
  const std::size_t S = values.samples;
  SurrogateResult r{std::vector<double>(S, 0.0), std::vector<std::int32_t>(S, -1)};
  for (std::int32_t j : observed) {
    const double* a = values.data.data() + static_cast<std::size_t>(free_pos[j]) * S;
    const double* b = values.data.data() + static_cast<std::size_t>(faulty_pos[j]) * S;
    for (std::size_t s = 0; s < S; ++s) {
      const double d = std::abs(a[s] - b[s]);
      if (d > r.value[s]) {
        r.value[s] = d;
        r.argmax[s] = j;
      }
    }
  }
  return r;
}

SurrogateResult surrogate_S(std::span<const double> po_free,
                            std::span<const double> po_faulty,
                            std::size_t num_pos, std::size_t samples) {
  if (po_free.size() != num_pos * samples || po_faulty.size() != num_pos * samples) {
    throw Error(ErrorCode::kShapeMismatch, "surrogate_S: shape mismatch");
  }
  SurrogateResult r{std::vector<double>(samples, 0.0),
                    std::vector<std::int32_t>(samples, -1)};
  for (std::size_t j = 0; j < num_pos; ++j) {
    for (std::size_t s = 0; s < samples; ++s) {
      const double d = std::abs(po_free[j * samples + s] - po_faulty[j * samples + s]);
      if (d > r.value[s]) {
        r.value[s] = d;
        r.argmax[s] = static_cast<std::int32_t>(j);
      }
    }
  }
  return r;
}

void backprop_surrogate(const ValueTensor& values, const SurrogateResult& sr,
                        std::span<const NodeId> free_pos,
                        std::span<const NodeId> faulty_pos,
                        std::span<const double> weight, ValueTensor& adjoint) {
  const std::size_t S = values.samples;
  if (weight.size() != S || sr.argmax.size() != S || adjoint.samples != S) {
    throw Error(ErrorCode::kShapeMismatch, "backprop_surrogate: shape mismatch");
  }
  for (std::size_t s = 0; s < S; ++s) {
    const std::int32_t j = sr.argmax[s];
    if (j < 0 || weight[s] == 0.0) continue;
    const std::size_t a = static_cast<std::size_t>(free_pos[j]) * S + s;
    const std::size_t b = static_cast<std::size_t>(faulty_pos[j]) * S + s;
    const double sign = values.data[a] > values.data[b] ? 1.0 : -1.0;
    adjoint.data[a] += weight[s] * sign;
    adjoint.data[b] -= weight[s] * sign;
  }
}

}  // namespace datpg
