#include "changeblind/sequence.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "changeblind/csv.hpp"
#include "changeblind/error.hpp"
#include "changeblind/rng.hpp"
#include "json.hpp"

namespace changeblind::data {

std::vector<std::size_t> SequencePlan::breaks(std::size_t slot) const {
  std::vector<std::size_t> out;
  if (break_every == 0 || slot >= sequences.size()) return out;
  for (std::size_t i = break_every; i <= sequences[slot].size(); i += break_every) out.push_back(i);
  return out;
}

std::pair<double, double> target_rank_range(std::size_t length) {
  const double span = length > 0 ? static_cast<double>(length - 1) : 0.0;
  return {1.0 + kRankMargin * span, static_cast<double>(length) - kRankMargin * span};
}

namespace {

// Position in [0, 1] of a 0-based rank.
double normalised(std::size_t rank, std::size_t length) {
  return length > 1 ? static_cast<double>(rank) / static_cast<double>(length - 1) : 0.5;
}

}  // namespace

SequencePlan generate_sequences(std::span<const std::string> pair_ids,
                                std::span<const std::size_t> lengths, std::uint64_t seed) {
  std::vector<std::string> ids(pair_ids.begin(), pair_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("duplicate pair ids in sequence request");
  }
  for (const auto& id : ids) {
    if (!csv::valid_identifier(id)) throw ValidationError("invalid pair id '" + id + "'");
  }
  const std::size_t n = ids.size();
  for (std::size_t len : lengths) {
    if (len == 0 || len > n) {
      throw ValidationError("sequence length " + std::to_string(len) + " is infeasible for " +
                            std::to_string(n) + " pairs");
    }
  }

  SequencePlan plan;
  plan.seed = seed;
  plan.pair_ids = ids;
  if (lengths.empty()) return plan;

  // Evenly spaced targets in [margin, 1 - margin], randomly assigned.
  std::vector<double> target(n);
  {
    std::vector<std::size_t> slots(n);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0}));
    shuffle(std::span<std::size_t>(slots), rng);
    for (std::size_t p = 0; p < n; ++p) {
      target[p] = kRankMargin +
                  (1.0 - 2.0 * kRankMargin) * (static_cast<double>(slots[p]) + 0.5) /
                      static_cast<double>(n);
    }
  }

  // Deal pairs (least exposed first) and order them by jittered target.
  std::vector<std::size_t> exposure(n, 0);
  std::vector<std::vector<std::size_t>> seqs;
  for (std::size_t o = 0; o < lengths.size(); ++o) {
    Rng rng(derive_seed(seed, {1, o}));
    std::vector<std::size_t> cand(n);
    std::iota(cand.begin(), cand.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(cand), rng);
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return exposure[a] < exposure[b]; });
    cand.resize(lengths[o]);
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t p : cand) {
      ++exposure[p];
      const double jitter = (2.0 * uniform_real(rng) - 1.0) * kRankMargin;
      keyed.emplace_back(target[p] + jitter, p);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> seq;
    for (const auto& kp : keyed) seq.push_back(kp.second);
    seqs.push_back(std::move(seq));
  }

  // Local swaps: minimise sum_p (mean normalised position - target)^2.
  std::vector<double> pos_sum(n, 0.0);
  for (const auto& seq : seqs) {
    for (std::size_t r = 0; r < seq.size(); ++r) pos_sum[seq[r]] += normalised(r, seq.size());
  }
  auto err = [&](std::size_t p, double sum) {
    const double d = sum / static_cast<double>(exposure[p]) - target[p];
    return d * d;
  };
  constexpr int kMaxPasses = 50;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    bool improved = false;
    for (auto& seq : seqs) {
      const std::size_t len = seq.size();
      for (std::size_t i = 0; i + 1 < len; ++i) {
        for (std::size_t j = i + 1; j < len; ++j) {
          const std::size_t a = seq[i], b = seq[j];
          const double delta = normalised(j, len) - normalised(i, len);
          const double before = err(a, pos_sum[a]) + err(b, pos_sum[b]);
          const double after = err(a, pos_sum[a] + delta) + err(b, pos_sum[b] - delta);
          if (after < before - 1e-15) {
            pos_sum[a] += delta;
            pos_sum[b] -= delta;
            std::swap(seq[i], seq[j]);
            improved = true;
          }
        }
      }
    }
    if (!improved) break;
  }

  for (const auto& seq : seqs) {
    std::vector<std::string> names;
    for (std::size_t p : seq) names.push_back(ids[p]);
    plan.sequences.push_back(std::move(names));
  }
  return plan;
}

SequencePlan generate_sequences(std::size_t n_observers, std::span<const std::string> pair_ids,
                                std::uint64_t seed) {
  const std::vector<std::size_t> lengths(n_observers, pair_ids.size());
  return generate_sequences(pair_ids, lengths, seed);
}

std::map<std::string, std::size_t> exposure_counts(const SequencePlan& plan) {
  std::map<std::string, std::size_t> counts;
  for (const auto& id : plan.pair_ids) counts[id] = 0;
  for (const auto& seq : plan.sequences) {
    for (const auto& id : seq) ++counts[id];
  }
  return counts;
}

std::map<std::string, double> average_ranks(const SequencePlan& plan) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& seq : plan.sequences) {
    for (std::size_t r = 0; r < seq.size(); ++r) {
      auto& a = acc[seq[r]];
      a.first += static_cast<double>(r + 1);
      a.second += 1;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [id, a] : acc) out[id] = a.first / static_cast<double>(a.second);
  return out;
}

double ks_uniform(std::span<const double> values, double lo, double hi) {
  if (values.empty()) throw ValidationError("KS statistic of an empty sample");
  if (!(hi > lo)) throw ValidationError("KS reference interval is empty");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double m = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
  }
  return d;
}

std::string plan_to_json(const SequencePlan& plan) {
  nlohmann::ordered_json j;
  j["seed"] = plan.seed;
  j["break_every"] = plan.break_every;
  j["pair_ids"] = plan.pair_ids;
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < plan.sequences.size(); ++s) {
    nlohmann::ordered_json e;
    e["slot"] = s;
    e["pairs"] = plan.sequences[s];
    e["breaks_after"] = plan.breaks(s);
    slots.push_back(std::move(e));
  }
  j["slots"] = std::move(slots);
  return j.dump(2) + "\n";
}

SequencePlan plan_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    SequencePlan plan;
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.break_every = j.value("break_every", kBreakEvery);
    plan.pair_ids = j.at("pair_ids").get<std::vector<std::string>>();
    const std::set<std::string> known(plan.pair_ids.begin(), plan.pair_ids.end());
    for (const auto& e : j.at("slots")) {
      auto seq = e.at("pairs").get<std::vector<std::string>>();
      std::set<std::string> seen;
      for (const auto& id : seq) {
        if (!known.contains(id)) throw ValidationError("plan slot uses unknown pair " + id);
        if (!seen.insert(id).second) throw ValidationError("plan slot repeats pair " + id);
      }
      plan.sequences.push_back(std::move(seq));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("plan schema mismatch: ") + e.what());
  }
}

}  // namespace changeblind::data
