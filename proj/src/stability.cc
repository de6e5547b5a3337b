#include "msdc/stability.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "msdc/chain_structure.h"
#include "msdc/pade.h"

namespace msdc {

namespace {

using cd = std::complex<double>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Parlett-Reinsch diagonal balancing with power-of-two factors; the
// spectrum is unchanged and the eigenvalues of badly scaled Pade blocks
// come out more accurately.
void balance(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  constexpr double radix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double col = 0.0, row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        col += std::abs(a(j, i));
        row += std::abs(a(i, j));
      }
      if (col == 0.0 || row == 0.0) continue;
      double g = row / radix;
      double f = 1.0;
      const double s = col + row;
      while (col < g) {
        f *= radix;
        col *= radix * radix;
      }
      g = row * radix;
      while (col > g) {
        f /= radix;
        col /= radix * radix;
      }
      if ((col + row) / f < 0.95 * s) {
        converged = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

using GainFn = std::function<std::optional<std::vector<double>>(double)>;

StringStability evaluate_string_stability(std::size_t vehicles,
                                          const GainFn& gains,
                                          const OmegaGrid& grid, double tol) {
  StringStability out;
  const auto omegas = grid.values();
  out.sup_gain.assign(vehicles, -1.0);
  out.peak_omega.assign(vehicles, kNaN);
  std::vector<std::size_t> peak_index(vehicles, 0);

  auto fail = [&] {
    StringStability bad;
    bad.pole_on_axis = true;
    bad.sup_gain.assign(vehicles, std::numeric_limits<double>::infinity());
    bad.peak_omega.assign(vehicles, kNaN);
    bad.worst_vehicle = 1;
    bad.worst_gain = std::numeric_limits<double>::infinity();
    return bad;
  };

  for (std::size_t j = 0; j < omegas.size(); ++j) {
    const auto g = gains(omegas[j]);
    if (!g) return fail();
    for (std::size_t i = 0; i < vehicles; ++i) {
      if ((*g)[i] > out.sup_gain[i]) {
        out.sup_gain[i] = (*g)[i];
        out.peak_omega[i] = omegas[j];
        peak_index[i] = j;
      }
    }
  }

  if (grid.refine && omegas.size() >= 2) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (std::size_t i = 0; i < vehicles; ++i) {
      const std::size_t j = peak_index[i];
      if (j == 0) continue;  // monotone towards DC; sup sits at the low end
      const std::size_t hi_index = std::min(j + 1, omegas.size() - 1);
      double a = std::log(omegas[j - 1]);
      double b = std::log(omegas[hi_index]);
      auto gain_at = [&](double log_w) -> std::optional<double> {
        auto g = gains(std::exp(log_w));
        if (!g) return std::nullopt;
        return (*g)[i];
      };
      double x1 = b - inv_phi * (b - a);
      double x2 = a + inv_phi * (b - a);
      auto f1 = gain_at(x1);
      auto f2 = gain_at(x2);
      if (!f1 || !f2) return fail();
      for (int it = 0; it < 25; ++it) {
        if (*f1 > *f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - inv_phi * (b - a);
          f1 = gain_at(x1);
          if (!f1) return fail();
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + inv_phi * (b - a);
          f2 = gain_at(x2);
          if (!f2) return fail();
        }
      }
      const double best = std::max(*f1, *f2);
      if (best > out.sup_gain[i]) {
        out.sup_gain[i] = best;
        out.peak_omega[i] = std::exp(*f1 > *f2 ? x1 : x2);
      }
    }
  }

  out.stable = true;
  for (std::size_t i = 0; i < vehicles; ++i) {
    if (out.sup_gain[i] > 1.0 + tol) out.stable = false;
    if (i == 0 || out.sup_gain[i] > out.worst_gain) {
      out.worst_gain = out.sup_gain[i];
      out.worst_vehicle = i + 1;
    }
  }
  const std::size_t w = out.worst_vehicle - 1;
  out.boundary = peak_index[w] > 0 &&
                 std::abs(out.worst_gain - 1.0) <= kBoundaryBand;
  return out;
}

GainFn dense_gains(const LinearizedSystem& sys) {
  return [&sys](double omega) -> std::optional<std::vector<double>> {
    try {
      const auto g = freq_response(sys, omega);
      std::vector<double> mag(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) mag[i] = std::abs(g[i]);
      return mag;
    } catch (const PoleOnAxis&) {
      return std::nullopt;
    }
  };
}

// Tridiagonal elimination first; a dense solve settles the rare vanishing
// pivot.
GainFn chain_gains(const ChainStructure& chain,
                   std::function<const LinearizedSystem&()> dense) {
  return [&chain, dense = std::move(dense)](
             double omega) -> std::optional<std::vector<double>> {
    if (auto g = chain.transfer(cd(0.0, omega))) {
      std::vector<double> mag(g->size());
      for (std::size_t i = 0; i < g->size(); ++i) mag[i] = std::abs((*g)[i]);
      return mag;
    }
    return dense_gains(dense())(omega);
  };
}

}  // namespace

LinearizedSystem linearize(const std::vector<VehicleParams>& vehicles) {
  const std::size_t n = vehicles.size();
  if (n == 0) throw InvalidArgument("linearize: empty fleet");
  for (const auto& v : vehicles) v.validate();
  const auto dim = static_cast<Eigen::Index>(2 * n);
  LinearizedSystem sys;
  sys.a0 = Eigen::MatrixXd::Zero(dim, dim);
  sys.a_delayed.assign(n, Eigen::MatrixXd::Zero(dim, dim));
  sys.b_now = Eigen::VectorXd::Zero(dim);
  sys.b_delayed = Eigen::VectorXd::Zero(dim);
  sys.c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), dim);
  sys.delays.resize(n);

  sys.b_now(0) = 1.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    const VehicleParams& p = vehicles[idx];
    const Eigen::Index h = 2 * i;
    const Eigen::Index v = 2 * i + 1;
    sys.delays[idx] = p.tau;
    sys.c(i, v) = 1.0;

    // h~_{i-1,i}' = v~_{i-1} - v~_i
    sys.a0(h, v) = -1.0;
    if (i > 0) sys.a0(h, v - 2) = 1.0;

    Eigen::MatrixXd& ad = sys.a_delayed[idx];
    ad(v, h) = p.k / p.m;
    ad(v, v) = -(p.k * p.beta + p.c) / p.m;
    if (i > 0) {
      ad(v, v - 2) = p.c / p.m;
    } else {
      sys.b_delayed(v) = p.c / p.m;
    }
    if (idx + 1 < n) {
      const VehicleParams& rear = vehicles[idx + 1];
      ad(v, v) -= p.alpha * rear.c / p.m;
      ad(v, h + 2) = -p.alpha * rear.k / p.m;
      ad(v, v + 2) = p.alpha * (rear.k * rear.beta + rear.c) / p.m;
    }
  }
  return sys;
}

LinearizedSystem linearize(const FleetScenario& fleet) {
  fleet.validate();
  return linearize(fleet.vehicles);
}

std::vector<std::complex<double>> freq_response(const LinearizedSystem& sys,
                                                double omega) {
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    throw InvalidArgument("freq_response: omega must be finite and >= 0");
  }
  const auto dim = static_cast<Eigen::Index>(sys.states());
  const cd jw(0.0, omega);
  Eigen::MatrixXcd m = -sys.a0.cast<cd>();
  m.diagonal().array() += jw;
  for (std::size_t i = 0; i < sys.vehicles(); ++i) {
    m -= sys.a_delayed[i].cast<cd>() * std::exp(-jw * sys.delays[i]);
  }
  Eigen::VectorXcd rhs = sys.b_now.cast<cd>() +
                         sys.b_delayed.cast<cd>() * std::exp(-jw * sys.delays[0]);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  if (!(lu.rcond() > 1e-13)) {
    throw PoleOnAxis(fmt::format("characteristic root on the axis at w = {}",
                                 omega));
  }
  Eigen::VectorXcd y = sys.c.cast<cd>() * lu.solve(rhs);
  (void)dim;
  return {y.data(), y.data() + y.size()};
}

std::vector<double> OmegaGrid::values() const {
  validate();
  std::vector<double> w(points);
  if (points == 1) {
    w[0] = lo;
    return w;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t j = 0; j < points; ++j) {
    w[j] = std::pow(10.0, a + (b - a) * static_cast<double>(j) /
                                  static_cast<double>(points - 1));
  }
  return w;
}

void OmegaGrid::validate() const {
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi) || points == 0) {
    throw InvalidArgument("omega grid needs 0 < lo <= hi and points >= 1");
  }
}

StringStability string_stable(const LinearizedSystem& sys,
                              const OmegaGrid& grid, double tol) {
  if (auto chain = ChainStructure::from_system(sys)) {
    return evaluate_string_stability(
        sys.vehicles(),
        chain_gains(*chain, [&sys]() -> const LinearizedSystem& { return sys; }),
        grid, tol);
  }
  return evaluate_string_stability(sys.vehicles(), dense_gains(sys), grid, tol);
}

Eigen::MatrixXd augmented_matrix(const LinearizedSystem& sys, int pade_order) {
  if (pade_order < 1) throw InvalidArgument("pade order must be >= 1");
  const auto dim = static_cast<Eigen::Index>(sys.states());

  struct Channel {
    Eigen::Index row;
    Eigen::RowVectorXd gain;
    DelayRealization real;
  };
  Eigen::MatrixXd top = sys.a0;
  std::vector<Channel> channels;
  for (std::size_t i = 0; i < sys.vehicles(); ++i) {
    const Eigen::MatrixXd& ad = sys.a_delayed[i];
    if (sys.delays[i] == 0.0) {
      top += ad;
      continue;
    }
    const auto real = realize(pade(sys.delays[i], pade_order));
    for (Eigen::Index r = 0; r < dim; ++r) {
      if (ad.row(r).isZero(0.0)) continue;
      channels.push_back({r, ad.row(r), real});
    }
  }
  Eigen::Index total = dim;
  for (const auto& ch : channels) total += ch.real.states();

  Eigen::MatrixXd ae = Eigen::MatrixXd::Zero(total, total);
  ae.topLeftCorner(dim, dim) = top;
  Eigen::Index offset = dim;
  for (const auto& ch : channels) {
    const Eigen::Index q = ch.real.states();
    ae.block(ch.row, 0, 1, dim) += ch.real.d * ch.gain;
    ae.block(ch.row, offset, 1, q) = ch.real.c;
    ae.block(offset, 0, q, dim) = ch.real.b * ch.gain;
    ae.block(offset, offset, q, q) = ch.real.a;
    offset += q;
  }
  return ae;
}

PlantStability plant_stable(const LinearizedSystem& sys, int pade_order) {
  Eigen::MatrixXd ae = augmented_matrix(sys, pade_order);
  if (!ae.allFinite()) throw EigenSolverFailure("augmented matrix not finite");
  balance(ae);
  Eigen::EigenSolver<Eigen::MatrixXd> es(ae, false);
  if (es.info() != Eigen::Success) {
    throw EigenSolverFailure("eigenvalue iteration did not converge");
  }
  PlantStability out;
  out.spectral_abscissa = es.eigenvalues().real().maxCoeff();
  out.stable = out.spectral_abscissa < -kStabilityMargin;
  return out;
}

const char* to_string(CellClass c) {
  switch (c) {
    case CellClass::kPlantUnstable:
      return "PLANT_UNSTABLE";
    case CellClass::kPlantStableStringUnstable:
      return "PLANT_STABLE_STRING_UNSTABLE";
    case CellClass::kStringStable:
      return "STRING_STABLE";
    case CellClass::kUnknown:
      break;
  }
  return "UNKNOWN";
}

std::vector<double> GridAxis::values() const {
  if (!(step > 0.0) || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("grid axis needs lo < hi and step > 0");
  }
  const double eps = 1e-9 * step;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  for (long j = 0; j <= n; ++j) {
    double v = lo + static_cast<double>(j) * step;
    v = std::round(v * 1e12) / 1e12;
    if (open && (v <= lo + eps || v >= hi - eps)) continue;
    out.push_back(v);
  }
  return out;
}

void SweepSpec::validate(std::size_t vehicles) const {
  k_axis.values();
  c_axis.values();
  omega.validate();
  if (pade_order < 1) throw InvalidArgument("pade order must be >= 1");
  if (!(tol >= 0.0)) throw InvalidArgument("string tolerance must be >= 0");
  if (delays.size() != 1 && delays.size() != vehicles) {
    throw InvalidArgument(fmt::format(
        "sweep delays need 1 or {} entries (got {})", vehicles, delays.size()));
  }
  for (double d : delays) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw InvalidArgument("sweep delays must be finite and >= 0");
    }
  }
}

StabilityMap::StabilityMap(std::vector<double> k_axis, std::vector<double> c_axis)
    : k_axis_(std::move(k_axis)),
      c_axis_(std::move(c_axis)),
      cells_(k_axis_.size() * c_axis_.size()) {
  for (std::size_t ik = 0; ik < k_axis_.size(); ++ik) {
    for (std::size_t ic = 0; ic < c_axis_.size(); ++ic) {
      auto& cell = cells_[ik * c_axis_.size() + ic];
      cell.k_tilde = k_axis_[ik];
      cell.c_tilde = c_axis_[ic];
      cell.sup_gain = kNaN;
    }
  }
}

const StabilityCell& StabilityMap::at(std::size_t ik, std::size_t ic) const {
  return cells_.at(ik * c_axis_.size() + ic);
}

void StabilityMap::set(std::size_t ik, std::size_t ic, StabilityCell cell) {
  if (cell.cls == CellClass::kStringStable &&
      !(cell.sup_gain == cell.sup_gain)) {
    throw std::logic_error("STRING_STABLE cell without a string evaluation");
  }
  cells_.at(ik * c_axis_.size() + ic) = std::move(cell);
}

ClassCounts StabilityMap::counts() const {
  ClassCounts c;
  for (const auto& cell : cells_) {
    switch (cell.cls) {
      case CellClass::kPlantUnstable:
        ++c.plant_unstable;
        break;
      case CellClass::kPlantStableStringUnstable:
        ++c.string_unstable;
        break;
      case CellClass::kStringStable:
        ++c.string_stable;
        break;
      case CellClass::kUnknown:
        ++c.unknown;
        break;
    }
    if (cell.boundary) ++c.boundary;
  }
  return c;
}

std::vector<VehicleParams> with_delays(std::vector<VehicleParams> vehicles,
                                       const std::vector<double>& delays) {
  if (delays.size() == 1) {
    for (auto& v : vehicles) v.tau = delays[0];
  } else if (delays.size() == vehicles.size()) {
    for (std::size_t i = 0; i < vehicles.size(); ++i) vehicles[i].tau = delays[i];
  } else {
    throw InvalidArgument("delay list must have 1 or N entries");
  }
  return vehicles;
}

StabilityCell classify_cell(const std::vector<VehicleParams>& tmpl,
                            double k_tilde, double c_tilde,
                            const SweepSpec& spec) {
  StabilityCell cell;
  cell.k_tilde = k_tilde;
  cell.c_tilde = c_tilde;
  cell.sup_gain = kNaN;
  std::vector<VehicleParams> vehicles = tmpl;
  for (auto& v : vehicles) {
    v.k = k_tilde * v.m;
    v.c = c_tilde * v.m;
  }
  try {
    const ChainStructure chain = ChainStructure::from_vehicles(vehicles);
    std::optional<LinearizedSystem> dense;
    auto dense_system = [&]() -> const LinearizedSystem& {
      if (!dense) dense = linearize(vehicles);
      return *dense;
    };

    bool plant = false;
    std::optional<int> unstable_roots;
    if (spec.plant_method == PlantMethod::kArgumentPrinciple) {
      unstable_roots = chain.count_unstable_roots(spec.pade_order,
                                                  kStabilityMargin);
    }
    if (unstable_roots) {
      plant = *unstable_roots == 0;
    } else {
      plant = plant_stable(dense_system(), spec.pade_order).stable;
    }
    if (!plant) {
      cell.cls = CellClass::kPlantUnstable;
      return cell;
    }
    const auto ss = evaluate_string_stability(
        vehicles.size(), chain_gains(chain, dense_system), spec.omega, spec.tol);
    cell.sup_gain = ss.worst_gain;
    cell.worst_vehicle = ss.worst_vehicle;
    cell.boundary = ss.boundary;
    cell.cls = ss.stable ? CellClass::kStringStable
                         : CellClass::kPlantStableStringUnstable;
  } catch (const std::exception& e) {
    cell.cls = CellClass::kUnknown;
    cell.error = e.what();
  }
  return cell;
}

StabilityMap sweep(const FleetScenario& tmpl, const SweepSpec& spec) {
  if (tmpl.vehicles.empty()) throw InvalidArgument("sweep needs a template fleet");
  spec.validate(tmpl.size());
  const auto vehicles = with_delays(tmpl.vehicles, spec.delays);
  StabilityMap map(spec.k_axis.values(), spec.c_axis.values());
  const std::size_t nk = map.k_axis().size();
  const std::size_t nc = map.c_axis().size();
  std::vector<StabilityCell> cells(nk * nc);

  unsigned threads = spec.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < cells.size(); idx = next++) {
      cells[idx] = classify_cell(vehicles, map.k_axis()[idx / nc],
                                 map.c_axis()[idx % nc], spec);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    map.set(idx / nc, idx % nc, std::move(cells[idx]));
  }
  return map;
}

void write_stability_csv(std::ostream& os, const StabilityMap& map) {
  os << "k_tilde,c_tilde,class,worst_vehicle,sup_gain\n";
  for (const auto& cell : map.cells()) {
    fmt::print(os, "{},{},{},{},{}\n", cell.k_tilde, cell.c_tilde,
               to_string(cell.cls), cell.worst_vehicle, cell.sup_gain);
  }
}

}  // namespace msdc
