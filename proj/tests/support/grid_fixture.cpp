#include "grid_fixture.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "trustroute/providers/embedding.hpp"

namespace fixtures {

namespace {

long long key9(double x) { return std::llround(x * 1e9); }

bool is_default(const oracle::Cell& c) {
  return std::abs(c.ws - 0.2) < 1e-9 && std::abs(c.wd - 0.4) < 1e-9 && std::abs(c.wl - 0.4) < 1e-9 &&
         std::abs(c.alpha - 0.5) < 1e-9 && std::abs(c.beta - 1.1) < 1e-9;
}

}  // namespace

std::size_t EngineeredGrid::find(double ws, double wd, double wl, double alpha, double beta) const {
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-9; };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (near(c.ws, ws) && near(c.wd, wd) && near(c.wl, wl) && near(c.alpha, alpha) && near(c.beta, beta)) return i;
  }
  return cells.size();
}

EngineeredGrid engineer_grid(std::uint64_t seed, std::size_t pool) {
  EngineeredGrid g;
  g.weight_axis = {0.2, 0.4, 0.8};
  g.alphas = {0.3, 0.5, 0.7};
  g.betas = {0.9, 1.1, 1.3};
  g.pool = pool;

  std::set<std::tuple<long long, long long, long long>> seen;
  for (double s : g.weight_axis) {
    for (double d : g.weight_axis) {
      for (double l : g.weight_axis) {
        const double t = s + d + l;
        if (!seen.insert({key9(s / t), key9(d / t), key9(l / t)}).second) continue;
        for (double a : g.alphas) {
          for (double b : g.betas) {
            if (b > a) g.cells.push_back({s / t, d / t, l / t, a, b, 3});
          }
        }
      }
    }
  }
  std::size_t def = g.cells.size();
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    if (is_default(g.cells[i])) def = i;
  }
  if (def == g.cells.size()) throw std::logic_error("grid lacks the default cell");

  trustroute::HashingEmbedder emb;
  oracle::Similarity sim(emb);
  Lexicon lex(seed);
  struct Candidate {
    CaseSpec spec;
    std::vector<std::string> outcomes;
  };
  std::vector<Candidate> candidates;
  const int n = g.world.n();
  for (std::size_t k = 0; k < pool; ++k) {
    auto spec = random_case(static_cast<int>(k + 1), lex, n);
    Candidate cand{spec, {}};
    bool decisive = true;
    for (const auto& cell : g.cells) {
      const auto r = oracle::simulate(spec, n, cell, sim);
      if (r.margin < 1e-6) {
        decisive = false;
        break;
      }
      cand.outcomes.push_back(r.outcome);
    }
    if (decisive) candidates.push_back(std::move(cand));
  }

  // Greedy cover: every non-default cell must mislabel at least one kept case.
  std::vector<bool> covered(g.cells.size(), false);
  covered[def] = true;
  std::vector<std::size_t> kept;
  for (;;) {
    std::size_t best = candidates.size(), best_gain = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      std::size_t gain = 0;
      for (std::size_t i = 0; i < g.cells.size(); ++i) {
        if (!covered[i] && candidates[c].outcomes[i] != candidates[c].outcomes[def]) ++gain;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    if (best == candidates.size()) break;
    kept.push_back(best);
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      if (candidates[best].outcomes[i] != candidates[best].outcomes[def]) covered[i] = true;
    }
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) throw std::runtime_error("candidate pool cannot separate every cell from the defaults");
  }

  // Pad with a few more decisive cases per scenario so every gold label is
  // represented; they can only widen the defaults' lead.
  std::map<std::string, int> per_label;
  for (std::size_t c : kept) ++per_label[candidates[c].outcomes[def]];
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& count = per_label[candidates[c].outcomes[def]];
    if (count >= 3 || std::find(kept.begin(), kept.end(), c) != kept.end()) continue;
    ++count;
    kept.push_back(c);
  }

  // Keys stay as simulated: the tag is part of every scored text.
  g.expected.assign(g.cells.size(), 0);
  for (std::size_t c : kept) {
    auto spec = candidates[c].spec;
    spec.gold = trustroute::strategy_from_string(candidates[c].outcomes[def]);
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      if (candidates[c].outcomes[i] == candidates[c].outcomes[def]) ++g.expected[i];
    }
    g.world.add(std::move(spec));
  }
  return g;
}

}  // namespace fixtures
