#ifndef TRACE_ENRICH_VITERBI_HPP
#define TRACE_ENRICH_VITERBI_HPP

#include <cstddef>
#include <limits>
#include <vector>

#include "trace_enrich/errors.hpp"

namespace trace_enrich {

inline constexpr double kImpossibleLogProb = -std::numeric_limits<double>::infinity();

struct ViterbiResult {
  std::vector<std::size_t> states;        // chosen state per layer
  std::vector<std::size_t> chain_starts;  // layers where the recursion restarted
};

/// Max-sum Viterbi over layered states.
///
/// `emissions[t][j]` is the log-probability of state j at layer t and
/// `transitions(t)` returns the matrix [i][j] of log-probabilities from
/// layer t-1 to layer t. Scores accumulate left to right as
/// (score + transition) + emission. Ties go to the lowest state index, both
/// for back-pointers and for the final state. When every state of a layer is
/// unreachable, the chain is closed at the previous layer and a new one
/// starts from the emissions alone.
template <class TransitionFn>
ViterbiResult viterbi(const std::vector<std::vector<double>>& emissions, TransitionFn&& transitions) {
  ViterbiResult out;
  const std::size_t layers = emissions.size();
  if (layers == 0) return out;
  for (const auto& e : emissions)
    if (e.empty()) throw InvalidArgument("viterbi layer without states");

  out.states.assign(layers, 0);
  std::vector<std::vector<std::size_t>> back(layers);
  std::vector<double> score = emissions[0];
  std::size_t chain_start = 0;
  out.chain_starts.push_back(0);

  auto argmax = [](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;
    return best;
  };
  auto backtrack = [&](std::size_t last, const std::vector<double>& last_score) {
    std::size_t s = argmax(last_score);
    for (std::size_t t = last;; --t) {
      out.states[t] = s;
      if (t == chain_start) break;
      s = back[t][s];
    }
  };

  for (std::size_t t = 1; t < layers; ++t) {
    const auto& trans = transitions(t);
    const std::size_t n = emissions[t].size();
    std::vector<double> next(n, kImpossibleLogProb);
    back[t].assign(n, 0);
    bool reachable = false;
    for (std::size_t j = 0; j < n; ++j) {
      double best = kImpossibleLogProb;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < score.size(); ++i) {
        if (score[i] == kImpossibleLogProb || trans[i][j] == kImpossibleLogProb) continue;
        const double s = score[i] + trans[i][j];
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      if (best != kImpossibleLogProb) {
        next[j] = best + emissions[t][j];
        back[t][j] = arg;
        reachable = true;
      }
    }
    if (!reachable) {
      backtrack(t - 1, score);
      chain_start = t;
      out.chain_starts.push_back(t);
      next = emissions[t];
    }
    score = std::move(next);
  }
  backtrack(layers - 1, score);
  return out;
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_VITERBI_HPP
