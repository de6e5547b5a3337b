#include "msdc/chain_structure.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "msdc/pade.h"
#include "msdc/stability.h"

namespace msdc {

namespace {

using cd = std::complex<double>;

struct LogValue {
  double log_abs = 0.0;
  cd unit{1.0, 0.0};
};

double row_abs_sum(const ChainRow& r) {
  return std::abs(r.v_front) + std::abs(r.h_own) + std::abs(r.v_own) +
         std::abs(r.h_rear) + std::abs(r.v_rear);
}

}  // namespace

ChainStructure::ChainStructure(std::vector<ChainRow> rows)
    : rows_(std::move(rows)) {
  if (rows_.empty()) throw InvalidArgument("chain structure needs a vehicle");
  tau_index_.reserve(rows_.size());
  for (const auto& r : rows_) {
    auto it = std::find(distinct_taus_.begin(), distinct_taus_.end(), r.tau);
    if (it == distinct_taus_.end()) {
      distinct_taus_.push_back(r.tau);
      tau_index_.push_back(distinct_taus_.size() - 1);
    } else {
      tau_index_.push_back(
          static_cast<std::size_t>(it - distinct_taus_.begin()));
    }
  }
}

ChainStructure ChainStructure::from_vehicles(
    const std::vector<VehicleParams>& vehicles) {
  std::vector<ChainRow> rows(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& p = vehicles[i];
    ChainRow& r = rows[i];
    r.tau = p.tau;
    r.v_front = p.c / p.m;
    r.h_own = p.k / p.m;
    r.v_own = (-p.k * p.beta - p.c) / p.m;
    if (i + 1 < vehicles.size()) {
      const auto& rear = vehicles[i + 1];
      r.v_own -= p.alpha * rear.c / p.m;
      r.h_rear = -p.alpha * rear.k / p.m;
      r.v_rear = p.alpha * (rear.k * rear.beta + rear.c) / p.m;
    }
  }
  return ChainStructure(std::move(rows));
}

std::optional<ChainStructure> ChainStructure::from_system(
    const LinearizedSystem& sys) {
  const auto n = static_cast<Eigen::Index>(sys.vehicles());
  const Eigen::Index dim = 2 * n;
  if (n == 0 || sys.a0.rows() != dim || sys.a_delayed.size() != sys.vehicles()) {
    return std::nullopt;
  }
  Eigen::MatrixXd expected_a0 = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    expected_a0(2 * i, 2 * i + 1) = -1.0;
    if (i > 0) expected_a0(2 * i, 2 * i - 1) = 1.0;
  }
  if (sys.a0 != expected_a0) return std::nullopt;
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(dim);
  e0(0) = 1.0;
  if (sys.b_now != e0) return std::nullopt;
  for (Eigen::Index r = 0; r < dim; ++r) {
    if (r != 1 && sys.b_delayed(r) != 0.0) return std::nullopt;
  }

  std::vector<ChainRow> rows(sys.vehicles());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ad = sys.a_delayed[static_cast<std::size_t>(i)];
    const Eigen::Index row = 2 * i + 1;
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index col = 0; col < dim; ++col) {
        const bool allowed = r == row && col >= 2 * i - 1 && col <= 2 * i + 3;
        if (!allowed && ad(r, col) != 0.0) return std::nullopt;
      }
    }
    ChainRow& cr = rows[static_cast<std::size_t>(i)];
    cr.tau = sys.delays[static_cast<std::size_t>(i)];
    cr.v_front = i == 0 ? sys.b_delayed(1) : ad(row, 2 * i - 1);
    cr.h_own = ad(row, 2 * i);
    cr.v_own = ad(row, 2 * i + 1);
    if (i + 1 < n) {
      cr.h_rear = ad(row, 2 * i + 2);
      cr.v_rear = ad(row, 2 * i + 3);
    }
  }
  return ChainStructure(std::move(rows));
}

void ChainStructure::delay_factors(cd s, int pade_order,
                                   std::vector<cd>& out) const {
  out.resize(distinct_taus_.size());
  for (std::size_t j = 0; j < distinct_taus_.size(); ++j) {
    const double tau = distinct_taus_[j];
    if (tau == 0.0) {
      out[j] = 1.0;
    } else if (pade_order == 0) {
      out[j] = std::exp(-s * tau);
    } else {
      out[j] = pade(tau, pade_order)(s);
    }
  }
}

namespace {

// Tridiagonal speed system T(s) v = rhs: T = s * (Schur complement of the
// headway block), which keeps every entry polynomial in s times a delay
// factor.
struct Tridiagonal {
  std::vector<cd> sub, diag, sup;
};

void assemble(const std::vector<ChainRow>& rows,
              const std::vector<std::size_t>& tau_index,
              const std::vector<cd>& factors, cd s, Tridiagonal& t) {
  const std::size_t n = rows.size();
  t.sub.assign(n, 0.0);
  t.diag.assign(n, 0.0);
  t.sup.assign(n, 0.0);
  const cd s2 = s * s;
  for (std::size_t i = 0; i < n; ++i) {
    const ChainRow& r = rows[i];
    const cd p = factors[tau_index[i]];
    if (i > 0) t.sub[i] = -p * (s * r.v_front + r.h_own);
    t.diag[i] = s2 - p * (s * r.v_own - r.h_own + r.h_rear);
    if (i + 1 < n) t.sup[i] = -p * (s * r.v_rear - r.h_rear);
  }
}

}  // namespace

std::optional<std::vector<cd>> ChainStructure::transfer(cd s) const {
  std::vector<cd> factors;
  delay_factors(s, 0, factors);
  Tridiagonal t;
  assemble(rows_, tau_index_, factors, s, t);
  const std::size_t n = rows_.size();
  std::vector<cd> rhs(n, 0.0);
  rhs[0] = factors[tau_index_[0]] * (rows_[0].h_own + s * rows_[0].v_front);

  std::vector<cd> cp(n), dp(n);
  for (std::size_t i = 0; i < n; ++i) {
    cd pivot = t.diag[i];
    cd right = rhs[i];
    if (i > 0) {
      pivot -= t.sub[i] * cp[i - 1];
      right -= t.sub[i] * dp[i - 1];
    }
    const double scale =
        std::abs(t.diag[i]) + std::abs(t.sub[i]) + std::abs(t.sup[i]);
    if (!(std::abs(pivot) > 1e-13 * scale)) return std::nullopt;
    cp[i] = t.sup[i] / pivot;
    dp[i] = right / pivot;
  }
  std::vector<cd> v(n);
  v[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) v[i] = dp[i] - cp[i] * v[i + 1];
  for (const auto& g : v) {
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) return std::nullopt;
  }
  return v;
}

std::optional<int> ChainStructure::count_unstable_roots(int pade_order,
                                                        double shift) const {
  if (pade_order < 1) throw InvalidArgument("pade order must be >= 1");
  const std::size_t n = rows_.size();
  const double pi = std::numbers::pi;

  // Row-sum bound on |lambda| of the augmented matrix sets how far along
  // the axis the phase has to be followed.
  int degree = static_cast<int>(2 * n);
  double rho = 2.0;
  std::vector<PadeApproximant> approximants;
  for (double tau : distinct_taus_) {
    approximants.push_back(tau == 0.0 ? pade(0.0, 1) : pade(tau, pade_order));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double coeff = row_abs_sum(rows_[i]);
    if (rows_[i].tau == 0.0) {
      rho = std::max(rho, coeff);
      continue;
    }
    degree += pade_order;
    const auto real = realize(approximants[tau_index_[i]]);
    rho = std::max(rho, std::abs(real.d) * coeff + real.c.cwiseAbs().sum());
    for (int j = 0; j < real.states(); ++j) {
      rho = std::max(rho, real.a.row(j).cwiseAbs().sum() +
                              std::abs(real.b(j)) * coeff);
    }
  }

  std::vector<cd> factors(distinct_taus_.size());
  Tridiagonal t;
  auto evaluate = [&](double omega) -> std::optional<LogValue> {
    const cd s(-shift, omega);
    for (std::size_t j = 0; j < distinct_taus_.size(); ++j) {
      factors[j] = distinct_taus_[j] == 0.0 ? cd(1.0) : approximants[j](s);
    }
    assemble(rows_, tau_index_, factors, s, t);
    // det T by the three-term recurrence, renormalized each step; the scale
    // is kept in log form.
    cd prev2 = 1.0;
    cd prev1 = t.diag[0];
    double log_scale = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      cd d = t.diag[i] * prev1 - t.sub[i] * t.sup[i - 1] * prev2;
      double sc = std::abs(d);
      if (sc == 0.0) sc = std::abs(prev1);
      if (sc == 0.0 || !std::isfinite(sc)) return std::nullopt;
      d /= sc;
      prev1 /= sc;
      log_scale += std::log(sc);
      prev2 = prev1;
      prev1 = d;
    }
    const double mag = std::abs(prev1);
    if (!(mag > 0.0) || !std::isfinite(mag)) return std::nullopt;
    return LogValue{log_scale + std::log(mag), prev1 / mag};
  };

  auto start = evaluate(0.0);
  if (!start) return std::nullopt;
  const double phase0 = std::arg(start->unit);
  double phase = phase0;
  LogValue prev = *start;
  double omega = 0.0;
  double step = 1e-3;
  double omega_stop = 100.0 * degree * rho;
  const double max_turn = pi / 8.0;

  for (int extension = 0; extension < 4; ++extension) {
    while (omega < omega_stop) {
      const double trial = std::min(omega + step, omega_stop);
      auto next = evaluate(trial);
      if (!next) return std::nullopt;
      const double turn = std::arg(next->unit * std::conj(prev.unit));
      if (std::abs(turn) > max_turn) {
        step *= 0.5;
        if (step < 1e-12 * (1.0 + omega)) return std::nullopt;
        continue;
      }
      phase += turn;
      omega = trial;
      prev = *next;
      step = std::min(2.0 * step, std::max(0.05 * omega, 1e-3));
    }
    // F(jw) -> (jw)^{2N}; the residual ratio must be close to one before
    // the remaining rotation can be closed analytically.
    const cd ratio_unit = prev.unit * ((n % 2 == 0) ? 1.0 : -1.0);
    const double log_ratio = prev.log_abs - 2.0 * static_cast<double>(n) *
                                                std::log(omega);
    if (std::abs(log_ratio) < 0.1 && std::abs(std::arg(ratio_unit)) < 0.1) {
      const double phase_inf = phase - std::arg(ratio_unit);
      const double z = static_cast<double>(n) - (phase_inf - phase0) / pi;
      const double rounded = std::round(z);
      if (std::abs(z - rounded) > 0.2 || rounded < 0.0) return std::nullopt;
      return static_cast<int>(rounded);
    }
    omega_stop *= 10.0;
  }
  return std::nullopt;
}

}  // namespace msdc
