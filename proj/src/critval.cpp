#include "saql/critval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "saql/parallel.hpp"
#include "saql/types.hpp"

namespace saql {

std::int64_t CriticalValueTable::key(double x) { return static_cast<std::int64_t>(std::llround(x * 1e9)); }

void CriticalValueTable::set(double beta, double prob, double quantile) {
  rows_[key(beta)][key(prob)] = {prob, quantile};
  beta_values_[key(beta)] = beta;
}

bool CriticalValueTable::contains(double beta, double prob) const {
  auto it = rows_.find(key(beta));
  return it != rows_.end() && it->second.count(key(prob)) > 0;
}

std::vector<double> CriticalValueTable::betas() const {
  std::vector<double> out;
  for (const auto& [k, b] : beta_values_) out.push_back(b);
  return out;
}

std::vector<std::pair<double, double>> CriticalValueTable::row(double beta) const {
  std::vector<std::pair<double, double>> out;
  auto it = rows_.find(key(beta));
  if (it == rows_.end()) return out;
  for (const auto& [k, pq] : it->second) out.push_back(pq);
  return out;
}

double CriticalValueTable::quantile(double beta, double prob) const {
  auto it = rows_.find(key(beta));
  if (it != rows_.end()) {
    auto jt = it->second.find(key(prob));
    if (jt != it->second.end()) return jt->second.second;
  }
  std::ostringstream msg;
  msg << "no critical value for beta=" << beta << ", p=" << prob << "; available betas:";
  for (double b : betas()) msg << ' ' << b;
  throw std::out_of_range(msg.str());
}

namespace {

std::string prob_label(double p) {
  std::ostringstream os;
  os.precision(10);
  os << p;
  return os.str();
}

}  // namespace

nlohmann::json CriticalValueTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (double b : betas()) {
    nlohmann::json qs = nlohmann::json::object();
    for (const auto& [p, q] : row(b)) qs[prob_label(p)] = q;
    rows.push_back({{"beta", b}, {"quantiles", qs}});
  }
  return {{"meta",
           {{"n_steps", meta.n_steps}, {"n_reps", meta.n_reps}, {"seed", meta.seed}, {"command", meta.command}}},
          {"rows", rows}};
}

CriticalValueTable CriticalValueTable::from_json(const nlohmann::json& j) {
  CriticalValueTable t;
  const auto& m = j.at("meta");
  t.meta.n_steps = m.at("n_steps").get<std::size_t>();
  t.meta.n_reps = m.at("n_reps").get<std::size_t>();
  t.meta.seed = m.at("seed").get<std::uint64_t>();
  t.meta.command = m.value("command", std::string{});
  for (const auto& row : j.at("rows")) {
    const double beta = row.at("beta").get<double>();
    for (const auto& [label, q] : row.at("quantiles").items()) t.set(beta, std::stod(label), q.get<double>());
  }
  return t;
}

void CriticalValueTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

CriticalValueTable CriticalValueTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open critical value table '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed critical value table '" + path + "': " + e.what());
  }
}

std::vector<double> simulate_kappa(double beta, std::size_t n_steps, std::size_t n_reps, std::uint64_t seed,
                                   unsigned threads) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("simulate_kappa: beta must lie in [0,1)");
  if (n_steps < 2) throw std::invalid_argument("simulate_kappa: n_steps must be >= 2");
  if (n_reps < 1) throw std::invalid_argument("simulate_kappa: n_reps must be >= 1");

  const double n = static_cast<double>(n_steps);
  std::vector<double> weight(n_steps), grid(n_steps);
  for (std::size_t i = 0; i < n_steps; ++i) {
    grid[i] = static_cast<double>(i + 1) / n;
    weight[i] = std::sqrt(1.0 - beta) * std::pow(grid[i], -beta / 2.0) / std::sqrt(n);
  }

  std::vector<double> out(n_reps);
  parallel_for(n_reps, threads, [&](std::size_t rep) {
    Rng rng = make_rng(seed, rep);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Path M(k/n), then the bridge integral as a right-endpoint Riemann sum.
    thread_local std::vector<double> path;
    path.resize(n_steps);
    double m = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
      m += weight[i] * normal(rng);
      path[i] = m;
    }
    const double m1 = path.back();
    double ss = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double b = path[k] - grid[k] * m1;
      ss += b * b;
    }
    out[rep] = m1 / std::sqrt(ss / n);
  });
  return out;
}

std::map<double, double> quantiles(std::span<const double> samples, std::span<const double> probs) {
  if (samples.empty()) throw std::invalid_argument("quantiles: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::map<double, double> out;
  const double last = static_cast<double>(sorted.size() - 1);
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantiles: probabilities must lie in (0,1)");
    const double h = last * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    out[p] = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  }
  return out;
}

CriticalValueTable build_table(std::span<const double> betas, std::size_t n_steps, std::size_t n_reps,
                               std::uint64_t seed, unsigned threads) {
  CriticalValueTable table;
  table.meta = {n_steps, n_reps, seed, {}};
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const auto samples = simulate_kappa(betas[i], n_steps, n_reps, seed + i, threads);
    for (const auto& [p, q] : quantiles(samples, kCriticalLevels)) table.set(betas[i], p, q);
  }
  return table;
}

double lookup(const CriticalValueTable& table, double beta, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("lookup: alpha must lie in (0,1)");
  return table.quantile(beta, 1.0 - alpha / 2.0);
}

CriticalValueTable reference_table() {
  // Upper half of each row; the law is symmetric about zero.
  static constexpr double kRows[4][5] = {
      {0.0, 3.894, 5.335, 6.785, 8.581},
      {0.2, 3.820, 5.197, 6.628, 8.393},
      {0.3, 3.746, 5.101, 6.482, 8.149},
      {0.5, 3.539, 4.751, 6.013, 7.593},
  };
  static constexpr double kUpper[4] = {0.90, 0.95, 0.975, 0.99};
  CriticalValueTable t;
  t.meta = {1000, 50000, 1000, "reference"};
  for (const auto& r : kRows) {
    t.set(r[0], 0.5, 0.0);
    for (int k = 0; k < 4; ++k) {
      t.set(r[0], kUpper[k], r[k + 1]);
      t.set(r[0], 1.0 - kUpper[k], -r[k + 1]);
    }
  }
  return t;
}

}  // namespace saql
