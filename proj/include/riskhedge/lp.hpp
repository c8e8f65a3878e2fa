#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "detail/linalg.hpp"
#include "errors.hpp"
#include "scalar.hpp"

namespace riskhedge {

enum class LpStatus { optimal, infeasible, unbounded };

/// Linear program in the form
///   minimize    objective . x
///   subject to  ineq_lhs[i] . x <= ineq_rhs[i]
///               eq_lhs[i] . x   == eq_rhs[i]
///               lower[j] <= x[j] <= upper[j]
/// Bound vectors may be left empty (all variables free on that side); an
/// unset optional means the variable is unbounded on that side.
template <class S>
struct LpProblem {
  int num_vars = 0;
  std::vector<S> objective;
  std::vector<std::vector<S>> ineq_lhs;
  std::vector<S> ineq_rhs;
  std::vector<std::vector<S>> eq_lhs;
  std::vector<S> eq_rhs;
  std::vector<std::optional<S>> lower;
  std::vector<std::optional<S>> upper;
};

template <class S>
struct LpOutcome {
  LpStatus status = LpStatus::optimal;
  std::vector<S> primal_point;  // present iff optimal
  S value{};                    // present iff optimal
  std::vector<S> ray;           // present iff unbounded: feasible descent direction
  std::vector<S> dual_point;    // present iff optimal: row multipliers, ineq rows then eq rows
  S dual_value{};               // Lagrangian bound from dual_point; equals value at optimum
  std::vector<S> farkas;        // best-effort row certificate iff infeasible
  bool degenerate = false;      // a different optimal basis may exist
  int iterations = 0;
};

template <class S>
struct LpOptions {
  S tol = scalar_traits<S>::default_tol();
  long max_iterations = 0;  // 0 = automatic cap
};

namespace detail {

template <class S>
class Simplex {
  enum State : signed char { basic = 0, at_lower = 1, at_upper = 2, at_zero = 3 };

 public:
  Simplex(const LpProblem<S>& p, const LpOptions<S>& opt) : p_(p) {
    dual_tol_ = opt.tol;
    if constexpr (scalar_traits<S>::exact) {
      pivot_tol_ = S(0);
    } else {
      pivot_tol_ = S(1e-9);
    }
    n_ = p.num_vars;
    mi_ = static_cast<int>(p.ineq_lhs.size());
    me_ = static_cast<int>(p.eq_lhs.size());
    rows_ = mi_ + me_;
    max_iter_ = opt.max_iterations > 0 ? opt.max_iterations : 5000L + 200L * (rows_ + n_);
  }

  LpOutcome<S> run() {
    build();
    if (!phase1()) return infeasible_outcome();
    set_phase2_costs();
    return phase2();
  }

 private:
  const LpProblem<S>& p_;
  S dual_tol_, pivot_tol_;
  int n_, mi_, me_, rows_;
  long max_iter_;
  long iters_ = 0;

  int ncols_ = 0;
  std::vector<std::vector<S>> col_;  // dense columns, length rows_
  std::vector<std::optional<S>> lo_, up_;
  std::vector<S> cost_;
  std::vector<char> art_;
  std::vector<S> b_;

  std::vector<int> basic_;          // one column index per row
  std::vector<signed char> state_;  // per column
  std::vector<S> x_;                // per column
  std::vector<std::vector<S>> binv_;
  std::vector<S> y_;
  bool in_phase1_ = false;
  bool fresh_inverse_ = true;       // no incremental update since the last rebuild

  static std::vector<S> unit_column(int rows, int i, const S& sign) {
    std::vector<S> c(rows, S(0));
    c[i] = sign;
    return c;
  }

  bool fixed(int j) const { return lo_[j] && up_[j] && *lo_[j] == *up_[j]; }

  void build() {
    b_.reserve(rows_);
    for (const S& v : p_.ineq_rhs) b_.push_back(v);
    for (const S& v : p_.eq_rhs) b_.push_back(v);

    ncols_ = n_ + mi_;
    col_.resize(ncols_);
    lo_.resize(ncols_);
    up_.resize(ncols_);
    art_.assign(ncols_, 0);
    for (int j = 0; j < n_; ++j) {
      col_[j].assign(rows_, S(0));
      for (int i = 0; i < mi_; ++i) col_[j][i] = p_.ineq_lhs[i][j];
      for (int i = 0; i < me_; ++i) col_[j][mi_ + i] = p_.eq_lhs[i][j];
      if (!p_.lower.empty()) lo_[j] = p_.lower[j];
      if (!p_.upper.empty()) up_[j] = p_.upper[j];
    }
    for (int i = 0; i < mi_; ++i) {
      col_[n_ + i] = unit_column(rows_, i, S(1));
      lo_[n_ + i] = S(0);
    }

    state_.assign(ncols_, at_zero);
    x_.assign(ncols_, S(0));
    for (int j = 0; j < n_ + mi_; ++j) {
      if (lo_[j]) {
        state_[j] = at_lower;
        x_[j] = *lo_[j];
      } else if (up_[j]) {
        state_[j] = at_upper;
        x_[j] = *up_[j];
      } else {
        state_[j] = at_zero;
        x_[j] = S(0);
      }
    }

    // Residuals of each row at the nonbasic point decide the starting basis:
    // an inequality row with nonnegative residual starts on its slack, any
    // other row gets an artificial of matching sign.
    std::vector<S> resid = b_;
    for (int j = 0; j < n_ + mi_; ++j) {
      if (x_[j] == S(0)) continue;
      for (int i = 0; i < rows_; ++i) resid[i] -= col_[j][i] * x_[j];
    }
    basic_.assign(rows_, -1);
    binv_.assign(rows_, std::vector<S>(rows_, S(0)));
    for (int i = 0; i < rows_; ++i) {
      const bool ineq_row = i < mi_;
      if (ineq_row && !(resid[i] < S(0))) {
        const int sj = n_ + i;
        // slack absorbs the residual (x currently holds its lower bound 0)
        x_[sj] = resid[i];
        basic_[i] = sj;
        state_[sj] = basic;
        binv_[i][i] = S(1);
      } else {
        const S sign = resid[i] < S(0) ? S(-1) : S(1);
        col_.push_back(unit_column(rows_, i, sign));
        lo_.push_back(S(0));
        up_.push_back(std::nullopt);
        art_.push_back(1);
        x_.push_back(abs_of(resid[i]));
        state_.push_back(basic);
        basic_[i] = ncols_;
        binv_[i][i] = sign;  // inverse of the +-1 diagonal basis entry
        ++ncols_;
      }
    }
    cost_.assign(ncols_, S(0));
  }

  void set_phase1_costs() {
    cost_.assign(ncols_, S(0));
    for (int j = 0; j < ncols_; ++j)
      if (art_[j]) cost_[j] = S(1);
    in_phase1_ = true;
  }

  void set_phase2_costs() {
    cost_.assign(ncols_, S(0));
    for (int j = 0; j < n_; ++j) cost_[j] = p_.objective[j];
    in_phase1_ = false;
  }

  void compute_y() {
    y_.assign(rows_, S(0));
    for (int r = 0; r < rows_; ++r) {
      const S& cb = cost_[basic_[r]];
      if (cb == S(0)) continue;
      for (int i = 0; i < rows_; ++i) y_[i] += cb * binv_[r][i];
    }
  }

  S reduced_cost(int j) const {
    S d = cost_[j];
    const std::vector<S>& a = col_[j];
    for (int i = 0; i < rows_; ++i) d -= y_[i] * a[i];
    return d;
  }

  enum class Step { moved, optimal, unbounded };

  // One Bland iteration: smallest eligible entering index, then the smallest
  // blocking basic column among minimal ratios.
  Step step(int& entering_out, int& dir_out) {
    compute_y();
    int enter = -1, dir = 0;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == basic || fixed(j)) continue;
      if (art_[j] && !in_phase1_) continue;
      const S d = reduced_cost(j);
      if (state_[j] == at_lower || state_[j] == at_zero) {
        if (d < -dual_tol_) {
          enter = j;
          dir = 1;
          break;
        }
      }
      if (state_[j] == at_upper || state_[j] == at_zero) {
        if (d > dual_tol_) {
          enter = j;
          dir = -1;
          break;
        }
      }
    }
    if (enter < 0) return Step::optimal;
    entering_out = enter;
    dir_out = dir;

    std::vector<S> w(rows_, S(0));
    for (int r = 0; r < rows_; ++r) {
      S acc(0);
      for (int i = 0; i < rows_; ++i) acc += binv_[r][i] * col_[enter][i];
      w[r] = acc;
    }
    // Pivot eligibility is relative to the column scale: absolute thresholds
    // let drift noise on degenerate rows masquerade as pivots, which wrecks
    // the basis.
    S wmax(1);
    for (int r = 0; r < rows_; ++r) wmax = max_of(wmax, abs_of(w[r]));
    const S peps = pivot_tol_ * wmax;

    bool have_t = false, leave_to_upper = false;
    S tbest(0);
    int leave = -1;
    for (int r = 0; r < rows_; ++r) {
      const int bc = basic_[r];
      const S rate = S(-dir) * w[r];
      S t(0);
      bool hit_upper = false;
      if (rate > peps) {
        if (!up_[bc]) continue;
        t = (*up_[bc] - x_[bc]) / rate;
        hit_upper = true;
      } else if (rate < -peps) {
        if (!lo_[bc]) continue;
        t = (x_[bc] - *lo_[bc]) / (-rate);
      } else {
        continue;
      }
      if (t < S(0)) t = S(0);
      if (!have_t || t < tbest || (t == tbest && bc < basic_[leave])) {
        have_t = true;
        tbest = t;
        leave = r;
        leave_to_upper = hit_upper;
      }
    }

    bool have_flip = false;
    S tflip(0);
    if (lo_[enter] && up_[enter]) {
      tflip = *up_[enter] - *lo_[enter];
      have_flip = true;
    }

    if (!have_t && !have_flip) return Step::unbounded;

    if (have_flip && (!have_t || !(tbest < tflip))) {
      for (int r = 0; r < rows_; ++r) x_[basic_[r]] -= S(dir) * tflip * w[r];
      x_[enter] = dir > 0 ? *up_[enter] : *lo_[enter];
      state_[enter] = dir > 0 ? at_upper : at_lower;
      return Step::moved;
    }

    for (int r = 0; r < rows_; ++r) x_[basic_[r]] -= S(dir) * tbest * w[r];
    x_[enter] += S(dir) * tbest;
    const int lc = basic_[leave];
    state_[lc] = leave_to_upper ? at_upper : at_lower;
    x_[lc] = leave_to_upper ? *up_[lc] : *lo_[lc];  // snap to the exact bound
    basic_[leave] = enter;
    state_[enter] = basic;

    const S piv = w[leave];
    std::vector<S>& prow = binv_[leave];
    for (int i = 0; i < rows_; ++i) prow[i] /= piv;
    for (int r = 0; r < rows_; ++r) {
      if (r == leave || w[r] == S(0)) continue;
      const S f = w[r];
      for (int i = 0; i < rows_; ++i) binv_[r][i] -= f * prow[i];
    }
    fresh_inverse_ = false;
    return Step::moved;
  }

  [[noreturn]] void exhausted() {
    fail(ErrorCode::numerical_failure, "simplex iteration cap exceeded");
  }

  // Rebuilds the basis inverse from the original columns. Incremental updates
  // drift over long degenerate runs; a drifted inverse can hide every blocking
  // row of the ratio test and fake an unbounded verdict.
  void refactorize() {
    std::vector<std::vector<S>> a(static_cast<std::size_t>(rows_),
                                  std::vector<S>(2 * static_cast<std::size_t>(rows_), S(0)));
    S scale(1);
    for (int r = 0; r < rows_; ++r) {
      for (int i = 0; i < rows_; ++i) {
        const S v = col_[static_cast<std::size_t>(basic_[r])][static_cast<std::size_t>(i)];
        a[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] = v;
        scale = max_of(scale, abs_of(v));
      }
      a[static_cast<std::size_t>(r)][static_cast<std::size_t>(rows_ + r)] = S(1);
    }
    S sing_tol(0);
    if constexpr (!scalar_traits<S>::exact) sing_tol = S(1e-13) * scale;
    for (int c = 0; c < rows_; ++c) {
      int piv = -1;
      S best(0);
      for (int r = c; r < rows_; ++r) {
        const S mag = abs_of(a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
        if (piv < 0 || mag > best) {
          best = mag;
          piv = r;
        }
      }
      if (!(best > sing_tol))
        fail(ErrorCode::numerical_failure, "singular basis during refactorization");
      std::swap(a[static_cast<std::size_t>(c)], a[static_cast<std::size_t>(piv)]);
      std::vector<S>& pr = a[static_cast<std::size_t>(c)];
      const S p = pr[static_cast<std::size_t>(c)];
      for (int k = c; k < 2 * rows_; ++k) pr[static_cast<std::size_t>(k)] /= p;
      for (int r = 0; r < rows_; ++r) {
        if (r == c) continue;
        const S f = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        if (f == S(0)) continue;
        for (int k = c; k < 2 * rows_; ++k)
          a[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] -=
              f * pr[static_cast<std::size_t>(k)];
      }
    }
    for (int r = 0; r < rows_; ++r)
      for (int i = 0; i < rows_; ++i)
        binv_[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
            a[static_cast<std::size_t>(r)][static_cast<std::size_t>(rows_ + i)];
    refresh_basics();
    fresh_inverse_ = true;
  }

  // An unbounded verdict is only trusted when the inverse is fresh; otherwise
  // refactorize and let the caller re-run the step.
  bool recover_from_unbounded() {
    if constexpr (scalar_traits<S>::exact) return false;
    if (fresh_inverse_) return false;
    refactorize();
    return true;
  }

  bool phase1() {
    bool any_art = false;
    for (int j = 0; j < ncols_; ++j) any_art = any_art || art_[j];
    if (!any_art) return true;
    set_phase1_costs();
    int e, d;
    for (;;) {
      if (++iters_ > max_iter_) exhausted();
      if constexpr (!scalar_traits<S>::exact)
        if (iters_ % 512 == 0) refactorize();
      const Step s = step(e, d);
      if (s == Step::unbounded) {
        if (recover_from_unbounded()) continue;
        fail(ErrorCode::numerical_failure, "phase-1 unbounded");
      }
      if (s == Step::optimal) break;
    }
    S infeas(0);
    for (int j = 0; j < ncols_; ++j)
      if (art_[j]) infeas += x_[j];
    S feas_tol(0);
    if constexpr (!scalar_traits<S>::exact) {
      S scale(1);
      for (const S& v : b_) scale = max_of(scale, abs_of(v));
      feas_tol = dual_tol_ * scale;
    }
    if (infeas > feas_tol) return false;

    // Drive leftover artificials out of the basis where a pivot exists;
    // a row that admits none is redundant and keeps its artificial at zero.
    for (int r = 0; r < rows_; ++r) {
      if (!art_[basic_[r]]) continue;
      for (int j = 0; j < ncols_; ++j) {
        if (art_[j] || state_[j] == basic || fixed(j)) continue;
        S wr(0);
        for (int i = 0; i < rows_; ++i) wr += binv_[r][i] * col_[j][i];
        S wtol = pivot_tol_;
        if constexpr (!scalar_traits<S>::exact) wtol = S(1e-9);
        if (abs_of(wr) > wtol) {
          pivot_at_zero(r, j, wr);
          break;
        }
      }
    }
    for (int j = 0; j < ncols_; ++j) {
      if (art_[j]) {
        lo_[j] = S(0);
        up_[j] = S(0);
        if (state_[j] != basic) {
          state_[j] = at_lower;
          x_[j] = S(0);
        }
      }
    }
    return true;
  }

  // Degenerate pivot used to expel a zero-valued artificial: the entering
  // column keeps its current value so no primal movement happens.
  void pivot_at_zero(int r, int j, const S& wr) {
    const int lc = basic_[r];
    state_[lc] = at_lower;
    x_[lc] = S(0);
    basic_[r] = j;
    state_[j] = basic;
    std::vector<S> w(rows_, S(0));
    for (int rr = 0; rr < rows_; ++rr) {
      S acc(0);
      for (int i = 0; i < rows_; ++i) acc += binv_[rr][i] * col_[j][i];
      w[rr] = acc;
    }
    (void)wr;
    std::vector<S>& prow = binv_[r];
    const S piv = w[r];
    for (int i = 0; i < rows_; ++i) prow[i] /= piv;
    for (int rr = 0; rr < rows_; ++rr) {
      if (rr == r || w[rr] == S(0)) continue;
      const S f = w[rr];
      for (int i = 0; i < rows_; ++i) binv_[rr][i] -= f * prow[i];
    }
    fresh_inverse_ = false;
  }

  LpOutcome<S> phase2() {
    LpOutcome<S> out;
    int e = -1, d = 0;
    for (;;) {
      if (++iters_ > max_iter_) exhausted();
      if constexpr (!scalar_traits<S>::exact)
        if (iters_ % 512 == 0) refactorize();
      const Step s = step(e, d);
      if (s == Step::moved) continue;
      if (s == Step::unbounded) {
        if (recover_from_unbounded()) continue;
        out.status = LpStatus::unbounded;
        out.ray = make_ray(e, d);
        out.iterations = static_cast<int>(iters_);
        return out;
      }
      break;
    }

    refresh_basics();
    out.status = LpStatus::optimal;
    out.primal_point.assign(x_.begin(), x_.begin() + n_);
    S val(0);
    for (int j = 0; j < n_; ++j) val += p_.objective[j] * x_[j];
    out.value = val;

    compute_y();
    out.dual_point = y_;
    S dv(0);
    for (int i = 0; i < rows_; ++i) dv += y_[i] * b_[i];
    bool degen = false;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == basic || art_[j]) continue;
      const S dj = reduced_cost(j);
      dv += dj * x_[j];
      if (!fixed(j) && abs_of(dj) <= dual_tol_) degen = true;
    }
    out.dual_value = dv;
    out.degenerate = degen;
    out.iterations = static_cast<int>(iters_);
    verify_primal(out);
    return out;
  }

  // Recompute basic values from the maintained inverse so reported points do
  // not carry incremental drift.
  void refresh_basics() {
    std::vector<S> rhs = b_;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == basic || x_[j] == S(0)) continue;
      for (int i = 0; i < rows_; ++i) rhs[i] -= col_[j][i] * x_[j];
    }
    for (int r = 0; r < rows_; ++r) {
      S acc(0);
      for (int i = 0; i < rows_; ++i) acc += binv_[r][i] * rhs[i];
      x_[basic_[r]] = acc;
    }
  }

  void verify_primal(const LpOutcome<S>& out) const {
    if constexpr (scalar_traits<S>::exact) return;
    S scale(1);
    for (const S& v : b_) scale = max_of(scale, abs_of(v));
    for (int j = 0; j < n_; ++j) scale = max_of(scale, abs_of(out.primal_point[j]));
    const S budget = S(1e-6) * scale;
    std::vector<S> resid = b_;
    for (int j = 0; j < ncols_; ++j) {
      if (x_[j] == S(0)) continue;
      for (int i = 0; i < rows_; ++i) resid[i] -= col_[j][i] * x_[j];
    }
    for (int i = 0; i < rows_; ++i) {
      if (abs_of(resid[i]) > budget)
        fail(ErrorCode::numerical_failure, "optimal basis fails row residual check");
    }
    for (int j = 0; j < ncols_; ++j) {
      if (lo_[j] && x_[j] < *lo_[j] - budget)
        fail(ErrorCode::numerical_failure, "optimal point violates a lower bound");
      if (up_[j] && x_[j] > *up_[j] + budget)
        fail(ErrorCode::numerical_failure, "optimal point violates an upper bound");
    }
  }

  std::vector<S> make_ray(int enter, int dir) {
    std::vector<S> w(rows_, S(0));
    for (int r = 0; r < rows_; ++r) {
      S acc(0);
      for (int i = 0; i < rows_; ++i) acc += binv_[r][i] * col_[enter][i];
      w[r] = acc;
    }
    std::vector<S> full(ncols_, S(0));
    full[enter] = S(dir);
    for (int r = 0; r < rows_; ++r) full[basic_[r]] += S(-dir) * w[r];
    return std::vector<S>(full.begin(), full.begin() + n_);
  }

  LpOutcome<S> infeasible_outcome() {
    LpOutcome<S> out;
    out.status = LpStatus::infeasible;
    compute_y();  // phase-1 multipliers certify the empty feasible set
    out.farkas = y_;
    out.iterations = static_cast<int>(iters_);
    return out;
  }
};

template <class S>
inline void check_problem(const LpProblem<S>& p) {
  const auto n = static_cast<std::size_t>(p.num_vars);
  if (p.num_vars < 0 || p.objective.size() != n)
    fail(ErrorCode::malformed_problem, "objective length does not match num_vars");
  if (p.ineq_lhs.size() != p.ineq_rhs.size())
    fail(ErrorCode::malformed_problem, "inequality sides disagree in count");
  if (p.eq_lhs.size() != p.eq_rhs.size())
    fail(ErrorCode::malformed_problem, "equality sides disagree in count");
  for (const auto& row : p.ineq_lhs)
    if (row.size() != n) fail(ErrorCode::malformed_problem, "inequality row of wrong length");
  for (const auto& row : p.eq_lhs)
    if (row.size() != n) fail(ErrorCode::malformed_problem, "equality row of wrong length");
  if (!p.lower.empty() && p.lower.size() != n)
    fail(ErrorCode::malformed_problem, "lower bound vector of wrong length");
  if (!p.upper.empty() && p.upper.size() != n)
    fail(ErrorCode::malformed_problem, "upper bound vector of wrong length");
  auto check_finite = [](const S& v) {
    if (!scalar_traits<S>::finite(v))
      fail(ErrorCode::malformed_problem, "non-finite coefficient");
  };
  for (const S& v : p.objective) check_finite(v);
  for (const auto& row : p.ineq_lhs)
    for (const S& v : row) check_finite(v);
  for (const auto& row : p.eq_lhs)
    for (const S& v : row) check_finite(v);
  for (const S& v : p.ineq_rhs) check_finite(v);
  for (const S& v : p.eq_rhs) check_finite(v);
  for (std::size_t j = 0; j < p.lower.size(); ++j) {
    if (p.lower[j]) check_finite(*p.lower[j]);
    if (j < p.upper.size() && p.upper[j]) check_finite(*p.upper[j]);
    if (p.lower[j] && !p.upper.empty() && p.upper[j] && *p.upper[j] < *p.lower[j])
      fail(ErrorCode::malformed_problem, "crossing variable bounds");
  }
}

}  // namespace detail

/// Bounded-variable primal simplex with Bland's rule in both phases. The
/// scalar type selects the arithmetic: double for the fast path, Rational for
/// the exact mode (where every tolerance collapses to zero).
template <class S>
LpOutcome<S> solve(const LpProblem<S>& p, LpOptions<S> opt = {}) {
  detail::check_problem(p);
  detail::Simplex<S> core(p, opt);
  return core.run();
}

}  // namespace riskhedge
