#pragma once

// Embedded Dormand-Prince 5(4) integrator with PI step control and the
// fourth-order continuous extension of Hairer & Wanner's DOPRI5.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "relorbit/errors.hpp"

namespace relorbit::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 2'000'000;
  /// Zero selects the starting step automatically.
  double initial_step = 0.0;
};

enum class Status { kCompleted, kStopped, kMaxSteps, kStepUnderflow };

/// Interpolant of one accepted step, valid on [t0, t0 + h] (h may be negative).
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  std::array<State<N>, 5> rcont{};

  double t1() const { return t0 + h; }

  State<N> eval(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    State<N> y;
    for (std::size_t i = 0; i < N; ++i) {
      y[i] = rcont[0][i] +
             s * (rcont[1][i] + s1 * (rcont[2][i] + s * (rcont[3][i] + s1 * rcont[4][i])));
    }
    return y;
  }

  State<N> derivative(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    State<N> dy;
    for (std::size_t i = 0; i < N; ++i) {
      const double a = rcont[3][i] + s1 * rcont[4][i];
      const double da = -rcont[4][i];
      const double b = rcont[2][i] + s * a;
      const double db = a + s * da;
      const double c = rcont[1][i] + s1 * b;
      const double dc = -b + s1 * db;
      dy[i] = (c + s * dc) / h;
    }
    return dy;
  }
};

/// Accepted samples plus the per-step interpolants joining them. Samples are
/// monotone in time (either direction); step i joins samples i and i+1.
template <std::size_t N>
class DenseSolution {
 public:
  std::vector<double> t;
  std::vector<State<N>> y;
  std::vector<DenseStep<N>> steps;

  bool empty() const { return t.empty(); }
  std::size_t size() const { return t.size(); }
  double t_front() const { return t.front(); }
  double t_back() const { return t.back(); }
  bool ascending() const { return t.size() < 2 || t.back() > t.front(); }

  bool covers(double time) const {
    if (t.empty()) return false;
    const double lo = std::min(t.front(), t.back());
    const double hi = std::max(t.front(), t.back());
    return time >= lo && time <= hi;
  }

  /// Index i of the step whose span contains `time`.
  std::size_t segment(double time) const {
    if (!covers(time) || steps.empty()) {
      throw Error(ErrorCode::kDomain, "dense output evaluated outside the solution span");
    }
    std::size_t i;
    if (ascending()) {
      i = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), time) - t.begin());
    } else {
      i = static_cast<std::size_t>(
          std::upper_bound(t.begin(), t.end(), time, std::greater<double>()) - t.begin());
    }
    if (i == 0) i = 1;
    if (i > steps.size()) i = steps.size();
    return i - 1;
  }

  State<N> eval(double time) const {
    if (t.size() == 1 && time == t.front()) return y.front();
    const std::size_t i = segment(time);
    if (time == t[i]) return y[i];
    if (time == t[i + 1]) return y[i + 1];
    return steps[i].eval(time);
  }

  State<N> derivative(double time) const { return steps[segment(time)].derivative(time); }

  /// Reorders samples so time increases; interpolants stay valid.
  void make_ascending() {
    if (ascending()) return;
    std::reverse(t.begin(), t.end());
    std::reverse(y.begin(), y.end());
    std::reverse(steps.begin(), steps.end());
  }
};

template <std::size_t N>
struct Result {
  DenseSolution<N> solution;
  Status status = Status::kCompleted;
};

namespace detail {

// Dormand-Prince tableau.
inline constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
inline constexpr double a21 = 0.2;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

template <std::size_t N>
double error_norm(const State<N>& err, const State<N>& y0, const State<N>& y1,
                  const Options& opt) {
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sk = opt.atol + opt.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double e = err[i] / sk;
    sum += e * e;
  }
  const double value = std::sqrt(sum / static_cast<double>(N));
  return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

template <std::size_t N>
bool finite(const State<N>& y) {
  for (double v : y) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <std::size_t N, class Rhs>
double initial_step(Rhs& f, double t0, const State<N>& y0, const State<N>& f0, double direction,
                    const Options& opt) {
  double dnf = 0.0, dny = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sk = opt.atol + opt.rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, opt.max_step);
  State<N> y1;
  for (std::size_t i = 0; i < N; ++i) y1[i] = y0[i] + direction * h * f0[i];
  State<N> f1;
  try {
    f1 = f(t0 + direction * h, y1);
  } catch (const Error&) {
    return h * 1e-3;
  }
  double der2 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sk = opt.atol + opt.rtol * std::abs(y0[i]);
    der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
  }
  der2 = std::sqrt(der2) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3)
                                   : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * std::abs(h), h1, opt.max_step});
}

}  // namespace detail

struct NoVeto {
  template <class... Args>
  bool operator()(Args&&...) const {
    return false;
  }
};

struct NoStop {
  template <class Step>
  std::optional<double> operator()(const Step&) const {
    return std::nullopt;
  }
};

/// Integrates y' = f(t, y) from t0 to t_end (either direction).
///
/// `veto(t0, y0, t1, y1)` may reject an otherwise acceptable step; the step is
/// then halved and retried. `stop(step)` inspects each accepted step and may
/// return a time inside it at which integration terminates.
template <std::size_t N, class Rhs, class Veto = NoVeto, class Stop = NoStop>
Result<N> dopri5(Rhs&& f, double t0, const State<N>& y0, double t_end, const Options& opt,
                 Veto&& veto = Veto{}, Stop&& stop = Stop{}) {
  using namespace detail;
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "integrator tolerances must be positive");
  }
  if (t_end == t0) throw Error(ErrorCode::kInvalidParameter, "degenerate time span");

  Result<N> result;
  auto& sol = result.solution;
  sol.t.push_back(t0);
  sol.y.push_back(y0);

  const double direction = t_end > t0 ? 1.0 : -1.0;
  constexpr double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
  constexpr double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;
  double facold = 1e-4;

  double t = t0;
  State<N> y = y0;
  State<N> k1 = f(t, y);
  double h = opt.initial_step > 0.0 ? opt.initial_step
                                    : initial_step<N>(f, t0, y0, k1, direction, opt);
  h = direction * std::min(h, opt.max_step);
  bool last_rejected = false;
  std::size_t steps = 0;

  while (true) {
    if (steps++ >= opt.max_steps) {
      result.status = Status::kMaxSteps;
      return result;
    }
    if (std::abs(h) <= 16.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(t), 1e-300)) {
      result.status = Status::kStepUnderflow;
      return result;
    }
    bool final_step = false;
    if ((t + 1.01 * h - t_end) * direction >= 0.0) {
      h = t_end - t;
      final_step = true;
    }

    State<N> yt{}, k2{}, k3{}, k4{}, k5{}, k6{}, y1{}, k7{}, err{};
    double errn;
    try {
      for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * a21 * k1[i];
      k2 = f(t + c2 * h, yt);
      for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      k3 = f(t + c3 * h, yt);
      for (std::size_t i = 0; i < N; ++i)
        yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = f(t + c4 * h, yt);
      for (std::size_t i = 0; i < N; ++i)
        yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = f(t + c5 * h, yt);
      for (std::size_t i = 0; i < N; ++i)
        yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      k6 = f(t + h, yt);
      for (std::size_t i = 0; i < N; ++i)
        y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      k7 = f(t + h, y1);
      for (std::size_t i = 0; i < N; ++i) {
        err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      }
      errn = finite(y1) && finite(k7) ? error_norm<N>(err, y, y1, opt)
                                      : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      errn = std::numeric_limits<double>::infinity();
    }

    const double fac11 = std::pow(errn, expo1);
    if (errn <= 1.0 && !veto(t, y, t + h, y1)) {
      DenseStep<N> step;
      step.t0 = t;
      step.h = h;
      for (std::size_t i = 0; i < N; ++i) {
        const double ydiff = y1[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        step.rcont[0][i] = y[i];
        step.rcont[1][i] = ydiff;
        step.rcont[2][i] = bspl;
        step.rcont[3][i] = ydiff - h * k7[i] - bspl;
        step.rcont[4][i] =
            h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      if (const std::optional<double> t_stop = stop(step)) {
        const State<N> y_stop = step.eval(*t_stop);
        if (*t_stop != t) {
          sol.steps.push_back(step);
          sol.t.push_back(*t_stop);
          sol.y.push_back(y_stop);
        }
        result.status = Status::kStopped;
        return result;
      }
      sol.steps.push_back(step);
      t += h;
      if (final_step) t = t_end;
      y = y1;
      k1 = k7;
      sol.t.push_back(t);
      sol.y.push_back(y);
      if (final_step) return result;

      facold = std::max(errn, 1e-4);
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      double hnew = std::abs(h) / fac;
      hnew = std::min(hnew, opt.max_step);
      if (last_rejected) hnew = std::min(hnew, std::abs(h));
      h = direction * hnew;
      last_rejected = false;
    } else {
      if (errn <= 1.0) {
        h *= 0.5;  // vetoed
      } else {
        h /= std::min(facc1, std::isfinite(fac11) ? fac11 / safe : facc1);
      }
      last_rejected = true;
    }
  }
}

}  // namespace relorbit::ode
