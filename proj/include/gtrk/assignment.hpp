#pragma once

#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gtrk {

// Min-cost complete assignment of rows to columns (rows <= cols) via the
// Jonker-Volgenant style shortest augmenting path method, O(n^2 m).
// Returns row -> column indices.
inline std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n == 0) return {};
    if (n > m) throw std::invalid_argument("solve_assignment: rows must not exceed cols");

    const double INF = std::numeric_limits<double>::infinity();
    // 1-based potentials; way[j] = previous column on the augmenting path.
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(m) + 1, INF);
        std::vector<char> used(static_cast<size_t>(m) + 1, false);
        do {
            used[static_cast<size_t>(j0)] = true;
            const int i0 = p[static_cast<size_t>(j0)];
            double delta = INF;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                                   v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<size_t>(j)] != 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

struct MatchResult {
    std::vector<std::pair<int, int>> pairs;  // (row, col)
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
    double total_cost = 0.0;  // sum over matched pairs only
};

// One-to-one matching where pairs with cost > gate are forbidden.  Leaving a
// row or column unmatched is charged `gate`, so the optimum is the
// max-cardinality matching of minimum total cost among gated pairs.
inline MatchResult match_gated(const Eigen::MatrixXd& cost, double gate) {
    const int R = static_cast<int>(cost.rows());
    const int C = static_cast<int>(cost.cols());
    MatchResult out;
    if (R == 0 || C == 0) {
        for (int i = 0; i < R; ++i) out.unmatched_rows.push_back(i);
        for (int j = 0; j < C; ++j) out.unmatched_cols.push_back(j);
        return out;
    }

    const double BIG = 1e12;
    const int n = R + C;
    Eigen::MatrixXd sq = Eigen::MatrixXd::Constant(n, n, BIG);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) sq(i, j) = (cost(i, j) <= gate) ? cost(i, j) : BIG;
    for (int i = 0; i < R; ++i) sq(i, C + i) = gate;       // row i unmatched
    for (int j = 0; j < C; ++j) sq(R + j, j) = gate;       // col j unmatched
    sq.block(R, C, C, R).setZero();                        // dummy-dummy free

    const std::vector<int> asg = solve_assignment(sq);
    for (int i = 0; i < R; ++i) {
        const int j = asg[static_cast<size_t>(i)];
        if (j < C && cost(i, j) <= gate) {
            out.pairs.emplace_back(i, j);
            out.total_cost += cost(i, j);
        } else {
            out.unmatched_rows.push_back(i);
        }
    }
    std::vector<char> col_taken(static_cast<size_t>(C), false);
    for (const auto& [i, j] : out.pairs) col_taken[static_cast<size_t>(j)] = true;
    for (int j = 0; j < C; ++j)
        if (!col_taken[static_cast<size_t>(j)]) out.unmatched_cols.push_back(j);
    return out;
}

}  // namespace gtrk
