#pragma once

// Independent reimplementations shared by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "culcap/policy.hpp"

namespace culcap::oracle {

// Toy params over V tokens with BOS = 0, EOS = 1.
inline PolicyParams toy_params(std::size_t v, std::size_t max_len, Rng* rng, double scale = 1.0) {
  PolicyParams p;
  p.tables = ParamTables::zeros(v);
  p.max_len = max_len;
  p.bos = 0;
  p.eos = 1;
  if (rng) {
    for (std::size_t i = 0; i < p.tables.num_entries(); ++i) {
      p.tables.at_flat(i) = scale * (2.0 * uniform01(*rng) - 1.0);
    }
  }
  return p;
}

inline TokenSeq random_sequence(Rng& rng, std::size_t v, std::size_t max_len) {
  const std::size_t len = 1 + uniform_index(rng, max_len);
  TokenSeq y;
  for (std::size_t t = 0; t + 1 < len; ++t) {
    y.push_back(static_cast<TokenId>(2 + uniform_index(rng, v - 2)));
  }
  y.push_back(uniform01(rng) < 0.5 ? 1 : static_cast<TokenId>(2 + uniform_index(rng, v - 2)));
  return y;
}

// Central differences over every parameter; worst relative error.
inline double max_rel_error(const GradientBuffer& analytic,
                            const std::function<double(const PolicyParams&)>& f,
                            const PolicyParams& p) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.tables.num_entries(); ++i) {
    PolicyParams plus = p, minus = p;
    plus.tables.at_flat(i) += h;
    minus.tables.at_flat(i) -= h;
    const double fd = (f(plus) - f(minus)) / (2.0 * h);
    const double an = analytic.tables.at_flat(i);
    const double err = std::abs(fd - an) / std::max(1e-6, std::max(std::abs(fd), std::abs(an)));
    if (std::abs(fd - an) > 1e-9) worst = std::max(worst, err);
  }
  return worst;
}

// Finite-difference checks of the SFT loss on `instances` random problems.
inline double sft_gradient_error(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    PolicyParams p = toy_params(6 + trial % 10, 4, &rng);
    std::vector<TokenSeq> descs, ys;
    for (int i = 0; i < 3; ++i) {
      descs.push_back({static_cast<TokenId>(2 + uniform_index(rng, p.vocab_size() - 2)),
                       static_cast<TokenId>(2 + uniform_index(rng, p.vocab_size() - 2))});
      TokenSeq y = random_sequence(rng, p.vocab_size(), 3);
      if (y.back() != 1) y.push_back(1);
      ys.push_back(y);
    }
    std::vector<SftExample> batch;
    for (int i = 0; i < 3; ++i) {
      batch.push_back(SftExample{descs[i], static_cast<CultureContext>(i % 3), ys[i]});
    }
    auto lg = sft_loss_and_grad(p, batch);
    worst = std::max(worst, max_rel_error(lg.grad, [&](const PolicyParams& q) {
                       return sft_loss(q, batch);
                     }, p));
  }
  return worst;
}

inline double score_function_gradient_error(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    PolicyParams p = toy_params(5 + (2 * trial) % 12, 4, &rng);
    TokenSeq desc = {2, static_cast<TokenId>(2 + uniform_index(rng, p.vocab_size() - 2))};
    TokenSeq y = random_sequence(rng, p.vocab_size(), 4);
    Condition cond{desc, CultureContext::kWestern};
    auto g = policy_gradient_term(p, cond, y, 1.0);
    worst = std::max(worst, max_rel_error(g, [&](const PolicyParams& q) {
                       return log_prob(q, cond, y);
                     }, p));
  }
  return worst;
}

// The rubric formulas written over strings.
struct RubricScore {
  double ir, cf, sr, ra, hu, cr, total;
};

inline RubricScore rubric_score(const std::vector<std::string>& cap,
                                const std::vector<std::string>& desc,
                                const std::set<std::string>& markers, bool no_context,
                                const std::vector<std::string>& ref,
                                const std::array<double, 6>& w) {
  RubricScore s{0, 0, 0, 0, 0, 0, 0};
  if (cap.empty()) return s;
  const double n = static_cast<double>(cap.size());
  std::set<std::string> uniq(cap.begin(), cap.end());
  int overlap = 0;
  for (const auto& d : std::set<std::string>(desc.begin(), desc.end())) overlap += uniq.count(d);
  s.ir = 10.0 * overlap / static_cast<double>(std::min(cap.size(), desc.size()));
  if (no_context) {
    s.cf = 5.0;
  } else {
    int m = 0;
    for (const auto& t : cap) m += markers.count(t);
    s.cf = m >= 2 ? 10.0 : 5.0 * m;
  }
  s.sr = 10.0 * static_cast<double>(uniq.size()) / n;
  if (cap.size() < 2) {
    s.ra = 10.0;
  } else {
    std::map<std::pair<std::string, std::string>, int> seen;
    int repeats = 0;
    for (std::size_t i = 0; i + 1 < cap.size(); ++i) {
      if (seen[{cap[i], cap[i + 1]}]++ > 0) ++repeats;
    }
    s.ra = 10.0 - 10.0 * repeats / (n - 1.0);
  }
  s.hu = 2.0;
  for (std::size_t i = 0; i + 1 < cap.size(); ++i) {
    if (cap[i] == desc[0] && cap[i + 1] == desc[1]) s.hu = 10.0;
  }
  if (ref.empty()) {
    s.cr = 5.0;
  } else {
    std::set<std::string> r(ref.begin(), ref.end()), all = uniq;
    int inter = 0;
    for (const auto& t : r) inter += uniq.count(t);
    all.insert(r.begin(), r.end());
    s.cr = 10.0 * (1.0 - static_cast<double>(inter) / static_cast<double>(all.size()));
  }
  s.total = w[0] * s.ir + w[1] * s.cf + w[2] * s.sr + w[3] * s.ra + w[4] * s.hu + w[5] * s.cr;
  return s;
}

inline std::string ranking_body(const nlohmann::json& req, const nlohmann::json& ranking) {
  return nlohmann::json{{"task_id", req["task_id"]}, {"ranking", ranking}}.dump();
}

// 20 malformed replies to a 5-candidate ranking request.
inline std::vector<std::function<std::string(const nlohmann::json&)>> malformed_rankings() {
  using nlohmann::json;
  using R = std::function<std::string(const json&)>;
  std::vector<R> out;
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3, 3}); });
  out.push_back([](const json& q) { return ranking_body(q, {4, 4, 4, 4, 4}); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 0, 1, 2, 3}); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3, 5}); });
  out.push_back([](const json& q) { return ranking_body(q, {-1, 0, 1, 2, 3}); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3, 99}); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3}); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3, 4, 0}); });
  out.push_back([](const json& q) { return ranking_body(q, json::array()); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3.5, 4}); });
  out.push_back([](const json& q) { return ranking_body(q, {"0", "1", "2", "3", "4"}); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, nullptr, 4}); });
  out.push_back([](const json& q) { return ranking_body(q, "0,1,2,3,4"); });
  out.push_back([](const json& q) { return ranking_body(q, {0, 1, 2, 3, 4}).substr(0, 30); });
  out.push_back([](const json&) { return std::string(R"({"ranking": [0, 1, 2)"); });
  out.push_back([](const json&) { return std::string(""); });
  out.push_back([](const json&) { return std::string("[0, 1, 2, 3, 4]"); });
  out.push_back([](const json&) { return std::string(R"({"rank": [0, 1, 2, 3, 4]})"); });
  out.push_back([](const json&) {
    return std::string(R"({"task_id": "someone-else", "ranking": [0, 1, 2, 3, 4]})");
  });
  out.push_back([](const json&) { return std::string("The best caption is number 2."); });
  return out;
}

// Seeded human subset, derived without the library helper.
inline std::set<std::string> human_subset(std::vector<std::string> keys, double f,
                                          std::uint64_t seed) {
  std::set<std::string> uniq(keys.begin(), keys.end());
  std::vector<std::string> v(uniq.begin(), uniq.end());
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(v.size()) * f + 0.5));
  Rng rng(seed);
  seeded_shuffle(v, rng);
  return {v.begin(), v.begin() + static_cast<long>(n)};
}

}  // namespace culcap::oracle
