#include "dibc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dibc/error.hpp"

namespace dibc {
namespace {

double plogp(double count, double n) {
  if (count <= 0.0) return 0.0;
  const double p = count / n;
  return p * std::log(p);
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double vi_distance(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ParameterError("labelings differ in length");
  if (a.empty()) return 0.0;
  std::map<int, std::int64_t> ra, rb;
  std::map<std::pair<int, int>, std::int64_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ra[a[i]];
    ++rb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double n = static_cast<double>(a.size());
  double vi = 0.0;
  // H(a) + H(b) - 2 I = 2 H(a,b) - H(a) - H(b)
  for (const auto& [k, v] : joint) vi -= 2.0 * plogp(static_cast<double>(v), n);
  for (const auto& [k, v] : ra) vi += plogp(static_cast<double>(v), n);
  for (const auto& [k, v] : rb) vi += plogp(static_cast<double>(v), n);
  return std::max(0.0, vi);
}

std::size_t CandidateCounts::entries() const {
  std::size_t e = marginal.size();
  for (const auto& t : joint) e += t.size();
  return e;
}

std::int64_t CandidateCounts::total() const {
  std::int64_t n = 0;
  for (const auto& [k, v] : marginal) n += v;
  return n;
}

CandidateCounts local_counts(std::span<const std::vector<int>> samples, std::size_t candidate) {
  if (candidate >= samples.size()) throw ParameterError("candidate index out of range");
  const auto& cand = samples[candidate];
  CandidateCounts out;
  out.joint.resize(samples.size());
  for (int j : cand) ++out.marginal[j];
  for (std::size_t t = 0; t < samples.size(); ++t) {
    if (samples[t].size() != cand.size()) throw ParameterError("samples differ in length");
    auto& table = out.joint[t];
    for (std::size_t i = 0; i < cand.size(); ++i) ++table[{samples[t][i], cand[i]}];
  }
  return out;
}

void merge_counts(CandidateCounts& into, const CandidateCounts& part) {
  if (into.joint.empty()) into.joint.resize(part.joint.size());
  if (into.joint.size() != part.joint.size()) throw ParameterError("count tables cover different sample sets");
  for (const auto& [k, v] : part.marginal) into.marginal[k] += v;
  for (std::size_t t = 0; t < part.joint.size(); ++t) {
    for (const auto& [k, v] : part.joint[t]) into.joint[t][k] += v;
  }
}

double estimate_expected_vi(const CandidateCounts& counts, std::int64_t N) {
  if (counts.joint.empty()) throw ParameterError("no samples in the count table");
  if (N <= 0) throw ParameterError("N must be positive");
  const double n = static_cast<double>(N);
  double first = 0.0;
  for (const auto& [k, v] : counts.marginal) first += plogp(static_cast<double>(v), n);
  double second = 0.0;
  for (const auto& table : counts.joint) {
    for (const auto& [k, v] : table) second += plogp(static_cast<double>(v), n);
  }
  return first - 2.0 / static_cast<double>(counts.joint.size()) * second;
}

double estimate_expected_binder(const CandidateCounts& counts, std::int64_t N) {
  if (counts.joint.empty()) throw ParameterError("no samples in the count table");
  if (N < 2) return 0.0;
  const double n = static_cast<double>(N);
  double cand_pairs = 0.0;
  for (const auto& [k, v] : counts.marginal) cand_pairs += choose2(static_cast<double>(v));
  double total = 0.0;
  for (const auto& table : counts.joint) {
    std::map<int, double> rows;
    double both = 0.0;
    for (const auto& [k, v] : table) {
      rows[k.first] += static_cast<double>(v);
      both += choose2(static_cast<double>(v));
    }
    double sample_pairs = 0.0;
    for (const auto& [k, v] : rows) sample_pairs += choose2(v);
    total += sample_pairs + cand_pairs - 2.0 * both;
  }
  return total / static_cast<double>(counts.joint.size()) / choose2(n);
}

std::vector<std::size_t> choose_candidates(std::size_t t, std::size_t m, Rng& rng) {
  if (m > t) throw ConfigError("more candidates requested than samples available");
  std::vector<std::size_t> index(t);
  std::iota(index.begin(), index.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(t - i));
    std::swap(index[i], index[j]);
  }
  index.resize(m);
  std::sort(index.begin(), index.end());
  return index;
}

std::size_t argmin_score(std::span<const double> scores) {
  if (scores.empty()) throw ParameterError("no scores to compare");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

}  // namespace dibc
