#pragma once

// Continuous linear programs and a dense bounded-variable primal simplex.
//
//   min  c'x + constant
//   s.t. E x  = e
//        G x >= g
//        lower <= x <= upper   (bounds may be infinite)

#include "ddls/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ddls::lp {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }

    /// Appends a zero row and returns its index.
    std::size_t add_row()
    {
        data_.resize(data_.size() + cols_, 0.0);
        return rows_++;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct LinearProgram {
    std::vector<double> objective;
    DenseMatrix eq;
    std::vector<double> eq_rhs;
    DenseMatrix ge;
    std::vector<double> ge_rhs;
    std::vector<double> lower;
    std::vector<double> upper;
    double objective_constant = 0.0;

    LinearProgram() = default;
    explicit LinearProgram(std::size_t n)
        : objective(n, 0.0), eq(0, n), ge(0, n), lower(n, 0.0), upper(n, inf)
    {
    }

    std::size_t variables() const noexcept { return objective.size(); }

    /// Adds sum coeffs[k] x[idx[k]] = rhs.
    void add_eq(std::span<const std::size_t> idx, std::span<const double> coeffs, double rhs)
    {
        const auto r = eq.add_row();
        for (std::size_t k = 0; k < idx.size(); ++k) eq(r, idx[k]) += coeffs[k];
        eq_rhs.push_back(rhs);
    }
    void add_ge(std::span<const std::size_t> idx, std::span<const double> coeffs, double rhs)
    {
        const auto r = ge.add_row();
        for (std::size_t k = 0; k < idx.size(); ++k) ge(r, idx[k]) += coeffs[k];
        ge_rhs.push_back(rhs);
    }

    void validate() const
    {
        const std::size_t n = variables();
        if (lower.size() != n || upper.size() != n) throw ConfigError("bounds do not match variable count");
        if (eq.cols() != n || ge.cols() != n) throw ConfigError("constraint matrix width does not match variable count");
        if (eq.rows() != eq_rhs.size() || ge.rows() != ge_rhs.size()) throw ConfigError("rhs length mismatch");
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(objective.begin(), objective.end(), finite) || !std::isfinite(objective_constant))
            throw ConfigError("objective has non-finite coefficients");
        if (!std::all_of(eq_rhs.begin(), eq_rhs.end(), finite) || !std::all_of(ge_rhs.begin(), ge_rhs.end(), finite))
            throw ConfigError("right-hand side has non-finite entries");
        for (std::size_t r = 0; r < eq.rows(); ++r)
            for (double v : eq.row(r))
                if (!std::isfinite(v)) throw ConfigError("equality matrix has non-finite entries");
        for (std::size_t r = 0; r < ge.rows(); ++r)
            for (double v : ge.row(r))
                if (!std::isfinite(v)) throw ConfigError("inequality matrix has non-finite entries");
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == inf || upper[j] == -inf)
                throw ConfigError("invalid bound on variable " + std::to_string(j));
            if (lower[j] > upper[j]) throw ConfigError("empty bound interval on variable " + std::to_string(j));
        }
    }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) noexcept
{
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> values;
    double objective = 0.0;
    std::size_t iterations = 0;

    bool optimal() const noexcept { return status == LpStatus::optimal; }
};

struct SimplexOptions {
    double feasibility_tol = 1e-7;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-9;
    /// 0 selects a size-dependent default.
    std::size_t max_iterations = 0;
    /// Consecutive degenerate pivots before switching to Bland's rule.
    std::size_t degenerate_limit = 50;
};

/// Largest violation of any constraint or bound at `x`.
inline double max_violation(const LinearProgram& p, std::span<const double> x)
{
    double worst = 0.0;
    for (std::size_t r = 0; r < p.eq.rows(); ++r) {
        double s = 0.0;
        const auto row = p.eq.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * x[j];
        worst = std::max(worst, std::abs(s - p.eq_rhs[r]));
    }
    for (std::size_t r = 0; r < p.ge.rows(); ++r) {
        double s = 0.0;
        const auto row = p.ge.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * x[j];
        worst = std::max(worst, p.ge_rhs[r] - s);
    }
    for (std::size_t j = 0; j < x.size(); ++j) worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
    return worst;
}

inline double evaluate_objective(const LinearProgram& p, std::span<const double> x)
{
    double obj = p.objective_constant;
    for (std::size_t j = 0; j < x.size(); ++j) obj += p.objective[j] * x[j];
    return obj;
}

namespace detail {

/// Tableau form of the bounded primal simplex. Columns are structural
/// variables, then one surplus per >= row, then phase-one artificials.
class BoundedSimplex {
public:
    BoundedSimplex(const LinearProgram& p, const SimplexOptions& opt) : p_(p), opt_(opt)
    {
        n_ = p.variables();
        me_ = p.eq.rows();
        m_ = me_ + p.ge.rows();
        build();
    }

    LpSolution run()
    {
        LpSolution sol;
        const std::size_t limit =
            opt_.max_iterations ? opt_.max_iterations : std::max<std::size_t>(20000, 50 * (m_ + cols_));

        if (n_art_ > 0) {
            std::vector<double> c1(cols_, 0.0);
            for (std::size_t j = n_ + p_.ge.rows(); j < cols_; ++j) c1[j] = 1.0;
            price_from(c1);
            const auto st = iterate(limit, sol.iterations);
            if (st == LpStatus::iteration_limit) return finish(sol, st);
            double infeas = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (is_artificial(basis_[i])) infeas += std::max(0.0, beta_[i]);
            if (infeas > opt_.feasibility_tol * static_cast<double>(std::max<std::size_t>(1, n_art_)))
                return finish(sol, LpStatus::infeasible);
            for (std::size_t j = n_ + p_.ge.rows(); j < cols_; ++j) hi_[j] = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (is_artificial(basis_[i])) beta_[i] = 0.0;
        }

        std::vector<double> c2(cols_, 0.0);
        std::copy(p_.objective.begin(), p_.objective.end(), c2.begin());
        price_from(c2);
        const auto st = iterate(limit, sol.iterations);
        return finish(sol, st);
    }

private:
    enum class At : std::uint8_t { basic, lower, upper, zero };

    bool is_artificial(std::size_t j) const noexcept { return j >= n_ + p_.ge.rows(); }
    double& tab(std::size_t i, std::size_t j) noexcept { return tab_[i * cols_ + j]; }

    double coef(std::size_t row, std::size_t j) const noexcept
    {
        return row < me_ ? p_.eq(row, j) : p_.ge(row - me_, j);
    }
    double rhs(std::size_t row) const noexcept { return row < me_ ? p_.eq_rhs[row] : p_.ge_rhs[row - me_]; }

    void build()
    {
        const std::size_t mg = p_.ge.rows();
        lo_.assign(p_.lower.begin(), p_.lower.end());
        hi_.assign(p_.upper.begin(), p_.upper.end());
        for (std::size_t j = 0; j < n_; ++j)
            if (lo_[j] > hi_[j]) {
                trivially_infeasible_ = true;
                hi_[j] = lo_[j];
            }
        lo_.resize(n_ + mg, 0.0);
        hi_.resize(n_ + mg, inf);

        // Start structurals at the bound favoured by their cost.
        x_.assign(n_ + mg, 0.0);
        at_.assign(n_ + mg, At::lower);
        for (std::size_t j = 0; j < n_; ++j) {
            const double c = p_.objective[j];
            if (c < 0.0 && std::isfinite(hi_[j])) {
                at_[j] = At::upper;
                x_[j] = hi_[j];
            } else if (std::isfinite(lo_[j])) {
                x_[j] = lo_[j];
            } else if (std::isfinite(hi_[j])) {
                at_[j] = At::upper;
                x_[j] = hi_[j];
            } else {
                at_[j] = At::zero;
            }
        }

        std::vector<std::size_t> nnz(n_, 0), owner(n_, 0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                if (coef(i, j) != 0.0) {
                    ++nnz[j];
                    owner[j] = i;
                }

        // Pick a basic column per row; every choice has a single nonzero in
        // its row, so the starting basis is diagonal.
        basis_.assign(m_, 0);
        beta_.assign(m_, 0.0);
        std::vector<double> diag(m_, 1.0);
        std::vector<double> art_sign;
        std::vector<std::size_t> art_row;
        std::vector<bool> taken(n_, false);
        for (std::size_t i = 0; i < m_; ++i) {
            double r = rhs(i);
            for (std::size_t j = 0; j < n_; ++j) r -= coef(i, j) * x_[j];
            if (i >= me_) {
                const std::size_t s = n_ + (i - me_);
                if (-r >= -opt_.feasibility_tol) {
                    basis_[i] = s;
                    diag[i] = -1.0;
                    beta_[i] = std::max(0.0, -r);
                    at_[s] = At::basic;
                    continue;
                }
            }
            bool placed = false;
            for (std::size_t j = 0; j < n_ && !placed; ++j) {
                if (nnz[j] != 1 || owner[j] != i || taken[j]) continue;
                const double a = coef(i, j);
                const double v = x_[j] + r / a;
                if (v >= lo_[j] - opt_.feasibility_tol && v <= hi_[j] + opt_.feasibility_tol) {
                    basis_[i] = j;
                    diag[i] = a;
                    beta_[i] = std::clamp(v, lo_[j], hi_[j]);
                    at_[j] = At::basic;
                    taken[j] = true;
                    placed = true;
                }
            }
            if (placed) continue;
            art_row.push_back(i);
            art_sign.push_back(r >= 0.0 ? 1.0 : -1.0);
            diag[i] = art_sign.back();
            beta_[i] = std::abs(r);
        }

        n_art_ = art_row.size();
        cols_ = n_ + mg + n_art_;
        lo_.resize(cols_, 0.0);
        hi_.resize(cols_, inf);
        x_.resize(cols_, 0.0);
        at_.resize(cols_, At::lower);
        for (std::size_t k = 0; k < n_art_; ++k) {
            const std::size_t j = n_ + mg + k;
            basis_[art_row[k]] = j;
            at_[j] = At::basic;
        }

        tab_.assign(m_ * cols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double inv = 1.0 / diag[i];
            for (std::size_t j = 0; j < n_; ++j) {
                const double a = coef(i, j);
                if (a != 0.0) tab(i, j) = a * inv;
            }
            if (i >= me_) tab(i, n_ + (i - me_)) = -inv;
        }
        for (std::size_t k = 0; k < n_art_; ++k) tab(art_row[k], n_ + mg + k) = art_sign[k] / diag[art_row[k]];
        d_.assign(cols_, 0.0);
    }

    void price_from(const std::vector<double>& c)
    {
        cost_ = c;
        d_ = c;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = c[basis_[i]];
            if (cb == 0.0) continue;
            const double* row = &tab_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) d_[j] -= cb * row[j];
        }
        for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
    }

    /// Entering column and direction (+1 increase, -1 decrease), or cols_ at optimality.
    std::pair<std::size_t, int> choose_entering(bool bland) const
    {
        std::size_t best = cols_;
        int dir = 0;
        double best_score = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            if (at_[j] == At::basic || lo_[j] == hi_[j]) continue;
            const double dj = d_[j];
            int cand = 0;
            if (at_[j] == At::lower && dj < -opt_.optimality_tol)
                cand = 1;
            else if (at_[j] == At::upper && dj > opt_.optimality_tol)
                cand = -1;
            else if (at_[j] == At::zero && std::abs(dj) > opt_.optimality_tol)
                cand = dj < 0.0 ? 1 : -1;
            if (cand == 0) continue;
            if (bland) return {j, cand};
            if (std::abs(dj) > best_score) {
                best_score = std::abs(dj);
                best = j;
                dir = cand;
            }
        }
        return {best, dir};
    }

    LpStatus iterate(std::size_t limit, std::size_t& iterations)
    {
        std::size_t degenerate = 0;
        std::vector<std::size_t> nz;
        nz.reserve(cols_);
        while (true) {
            if (iterations >= limit) return LpStatus::iteration_limit;
            const bool bland = degenerate >= opt_.degenerate_limit;
            const auto [j, dir] = choose_entering(bland);
            if (j == cols_) return LpStatus::optimal;
            ++iterations;

            // Ratio test.
            double t = inf;
            std::size_t leave = m_;
            double leave_alpha = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = tab_[i * cols_ + j];
                if (std::abs(a) <= opt_.pivot_tol) continue;
                const double delta = dir * a;
                const std::size_t b = basis_[i];
                double lim;
                if (delta > 0.0) {
                    if (!std::isfinite(lo_[b])) continue;
                    lim = (beta_[i] - lo_[b]) / delta;
                } else {
                    if (!std::isfinite(hi_[b])) continue;
                    lim = (hi_[b] - beta_[i]) / -delta;
                }
                lim = std::max(0.0, lim);
                bool better = lim < t;
                if (!better && lim == t && leave < m_) {
                    better = bland ? basis_[i] < basis_[leave] : std::abs(a) > std::abs(leave_alpha);
                }
                if (better) {
                    t = lim;
                    leave = i;
                    leave_alpha = a;
                }
            }
            const double span = hi_[j] - lo_[j];
            if (std::isfinite(span) && span <= t) {
                // Bound flip, basis unchanged.
                for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * span * tab_[i * cols_ + j];
                if (at_[j] == At::lower) {
                    at_[j] = At::upper;
                    x_[j] = hi_[j];
                } else {
                    at_[j] = At::lower;
                    x_[j] = lo_[j];
                }
                degenerate = 0;
                continue;
            }
            if (leave == m_) return LpStatus::unbounded;

            degenerate = t <= 1e-12 ? degenerate + 1 : 0;
            for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * t * tab_[i * cols_ + j];
            const std::size_t out = basis_[leave];
            const double entering_value = x_[j] + dir * t;
            if (dir * leave_alpha > 0.0) {
                at_[out] = At::lower;
                x_[out] = lo_[out];
            } else {
                at_[out] = At::upper;
                x_[out] = hi_[out];
            }
            basis_[leave] = j;
            at_[j] = At::basic;
            beta_[leave] = entering_value;
            pivot(leave, j, nz);
        }
    }

    void pivot(std::size_t r, std::size_t j, std::vector<std::size_t>& nz)
    {
        double* prow = &tab_[r * cols_];
        const double inv = 1.0 / prow[j];
        nz.clear();
        for (std::size_t k = 0; k < cols_; ++k) {
            if (prow[k] != 0.0) {
                prow[k] *= inv;
                nz.push_back(k);
            }
        }
        prow[j] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* row = &tab_[i * cols_];
            const double f = row[j];
            if (f == 0.0) continue;
            for (std::size_t k : nz) row[k] -= f * prow[k];
            row[j] = 0.0;
        }
        const double f = d_[j];
        if (f != 0.0) {
            for (std::size_t k : nz) d_[k] -= f * prow[k];
            d_[j] = 0.0;
        }
    }

    LpSolution& finish(LpSolution& sol, LpStatus st)
    {
        if (trivially_infeasible_ && st == LpStatus::optimal) st = LpStatus::infeasible;
        sol.status = st;
        sol.values.assign(n_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) sol.values[j] = at_[j] == At::basic ? 0.0 : x_[j];
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_) sol.values[basis_[i]] = beta_[i];
        if (st == LpStatus::optimal) {
            // Snap values that drifted past their bounds by rounding.
            for (std::size_t j = 0; j < n_; ++j) sol.values[j] = std::clamp(sol.values[j], p_.lower[j], p_.upper[j]);
        }
        sol.objective = evaluate_objective(p_, sol.values);
        return sol;
    }

    const LinearProgram& p_;
    SimplexOptions opt_;
    std::size_t n_ = 0, me_ = 0, m_ = 0, cols_ = 0, n_art_ = 0;
    bool trivially_infeasible_ = false;
    std::vector<double> tab_, beta_, d_, cost_, lo_, hi_, x_;
    std::vector<std::size_t> basis_;
    std::vector<At> at_;
};

} // namespace detail

/// Solves `program`. Infeasible, unbounded and iteration-limit outcomes are
/// reported through `status`; malformed programs throw ConfigError.
inline LpSolution solve(const LinearProgram& program, const SimplexOptions& opt = {})
{
    program.validate();
    detail::BoundedSimplex simplex(program, opt);
    return simplex.run();
}

namespace detail {
inline void write_number(std::ostream& os, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}
inline void write_row(std::ostream& os, std::span<const double> row)
{
    bool first = true;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] == 0.0) continue;
        os << (first ? " " : " + ");
        write_number(os, row[j]);
        os << " x" << j;
        first = false;
    }
    if (first) os << " 0";
}
} // namespace detail

/// Plain-text dump in a fixed order: objective, equalities, inequalities, bounds.
inline void write_lp(std::ostream& os, const LinearProgram& p)
{
    os << "minimize\n obj:";
    detail::write_row(os, p.objective);
    os << " + ";
    detail::write_number(os, p.objective_constant);
    os << "\nsubject to\n";
    for (std::size_t r = 0; r < p.eq.rows(); ++r) {
        os << " e" << r << ':';
        detail::write_row(os, p.eq.row(r));
        os << " = ";
        detail::write_number(os, p.eq_rhs[r]);
        os << '\n';
    }
    for (std::size_t r = 0; r < p.ge.rows(); ++r) {
        os << " g" << r << ':';
        detail::write_row(os, p.ge.row(r));
        os << " >= ";
        detail::write_number(os, p.ge_rhs[r]);
        os << '\n';
    }
    os << "bounds\n";
    for (std::size_t j = 0; j < p.variables(); ++j) {
        os << ' ';
        detail::write_number(os, p.lower[j]);
        os << " <= x" << j << " <= ";
        detail::write_number(os, p.upper[j]);
        os << '\n';
    }
    os << "end\n";
}

} // namespace ddls::lp
