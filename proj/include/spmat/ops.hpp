#pragma once

#include "spmat/tape.hpp"

#include <span>
#include <vector>

/// Differentiable primitives. Every function records one node on the tape of
/// its first argument; shapes are checked and reported as ShapeMismatch.
/// Reductions accumulate in input order so results are bitwise reproducible.
namespace spmat::ops {

Var matmul(const Var &a, const Var &b);
Var transpose(const Var &a);

Var add(const Var &a, const Var &b);
Var sub(const Var &a, const Var &b);
Var mul(const Var &a, const Var &b);
Var div(const Var &a, const Var &b);

/// a + c and a * c for a constant scalar c.
Var shift(const Var &a, double c);
Var scale(const Var &a, double c);

/// Concatenation of rank-2 inputs along the last axis.
Var concat_cols(const std::vector<Var> &parts);

/// out[r] = a[index[r]]; the adjoint scatter-adds.
Var gather_rows(const Var &a, std::span<const int> index);
/// Same as gather_rows, reading rows of a trainable table.
Var embedding_lookup(const Var &table, std::span<const int> index);

/// out[s] = sum of rows r with segment[r] == s, for s < n_segments.
Var segment_sum(const Var &a, std::span<const int> segment, std::size_t n_segments);
/// Segment average; throws EmptySegment if any segment has no rows.
Var segment_mean(const Var &a, std::span<const int> segment, std::size_t n_segments);

Var exp(const Var &a);
Var log(const Var &a);
Var pow(const Var &a, double p);
Var sigmoid(const Var &a);
Var softplus(const Var &a);
Var relu(const Var &a);

/// Sum of all entries, as a rank-0 scalar.
Var sum(const Var &a);
Var mean(const Var &a);
/// Rank-2 reductions: axis 0 gives [1, cols], axis 1 gives [rows, 1].
Var sum_axis(const Var &a, int axis);
Var mean_axis(const Var &a, int axis);

inline constexpr double kNormFloor = 1e-12;
inline constexpr double kStandardizeEps = 1e-12;

/// Row-wise x / max(|x|, 1e-12); a zero row stays zero.
Var l2_normalize_rows(const Var &a);
/// Per column (x - mean) / sqrt(var + 1e-12) with population variance.
Var standardize_columns(const Var &a);

} // namespace spmat::ops
