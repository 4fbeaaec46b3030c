#include "spmat/losses.hpp"

#include "spmat/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace spmat {

std::string to_string(LossKind k) {
  switch (k) {
  case LossKind::NtXent: return "nt-xent";
  case LossKind::SupCon: return "supcon";
  case LossKind::BarlowTwins: return "bt";
  case LossKind::SupBt: return "sup-bt";
  }
  return "?";
}

std::string to_string(BtMode m) {
  switch (m) {
  case BtMode::Full: return "full";
  case BtMode::OnDiagOnly: return "on_diag_only";
  case BtMode::OffDiagOnly: return "off_diag_only";
  }
  return "?";
}

std::string to_string(SbtScale s) { return s == SbtScale::InvD ? "inv_d" : "none"; }

LossKind parse_loss_kind(std::string_view s) {
  for (auto k : {LossKind::NtXent, LossKind::SupCon, LossKind::BarlowTwins, LossKind::SupBt})
    if (s == to_string(k))
      return k;
  throw Error(ErrorCode::InvalidConfig,
              fmt::format("loss kind '{}' (expected nt-xent, supcon, bt, sup-bt)", s));
}

BtMode parse_bt_mode(std::string_view s) {
  for (auto m : {BtMode::Full, BtMode::OnDiagOnly, BtMode::OffDiagOnly})
    if (s == to_string(m))
      return m;
  throw Error(ErrorCode::InvalidConfig,
              fmt::format("bt mode '{}' (expected full, on_diag_only, off_diag_only)", s));
}

SbtScale parse_sbt_scale(std::string_view s) {
  if (s == "inv_d")
    return SbtScale::InvD;
  if (s == "none")
    return SbtScale::None;
  throw Error(ErrorCode::InvalidConfig, fmt::format("sbt scale '{}' (expected inv_d, none)", s));
}

void LossConfig::validate() const {
  if (!(temperature > 0) || !std::isfinite(temperature))
    throw Error(ErrorCode::InvalidConfig, fmt::format("loss.temperature must be > 0, got {}", temperature));
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw Error(ErrorCode::InvalidConfig, fmt::format("loss.lambda must be >= 0, got {}", lambda));
}

Tensor build_class_mask(std::span<const int> labels) {
  const std::size_t b = labels.size();
  Tensor m(Shape{b, b});
  for (std::size_t k = 0; k < b; ++k) {
    if (labels[k] < 0)
      throw Error(ErrorCode::InvalidStructure, fmt::format("negative label {} at row {}", labels[k], k));
    for (std::size_t l = 0; l < b; ++l)
      m.at(k, l) = labels[k] == labels[l] ? 1.0 : 0.0;
  }
  return m;
}

namespace {

void check_rows_nonzero(const Tensor &z, std::string_view what) {
  const std::size_t r = z.rows(), c = z.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < c; ++j)
      s += z.at(i, j) * z.at(i, j);
    if (std::sqrt(s) <= ops::kNormFloor)
      throw Error(ErrorCode::ZeroNormRow, fmt::format("{}: row {} has zero norm", what, i));
  }
}

void check_rank2(const Var &z, std::string_view what) {
  if (z.value().rank() != 2)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: expected a matrix, got {}", what, shape_string(z.shape())));
}

/// sum_i sum_p W_ip * -log softmax_{a != i}(S_i)_p, where each row of W sums to 1.
/// S is the cosine similarity table divided by tau.
Var contrastive(const Var &z, const Tensor &weights, double temperature, std::string_view what) {
  check_rank2(z, what);
  check_rows_nonzero(z.value(), what);
  Tape &tape = *z.tape();
  const std::size_t n = z.value().rows();
  const auto zn = ops::l2_normalize_rows(z);
  const auto s = ops::scale(ops::matmul(zn, ops::transpose(zn)), 1.0 / temperature);

  // Row max over a != i, held constant; the diagonal is shifted to 0 and then
  // masked out, so a tiny tau cannot overflow the excluded self term.
  const Tensor &sv = s.value();
  Tensor offset(Shape{n, n});
  Tensor off_diag(Shape{n, n}, 1.0);
  double max_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a)
      if (a != i)
        m = std::max(m, sv.at(i, a));
    max_total += m;
    for (std::size_t a = 0; a < n; ++a)
      offset.at(i, a) = a == i ? sv.at(i, i) : m;
    off_diag.at(i, i) = 0.0;
  }
  const auto e = ops::mul(ops::exp(ops::sub(s, tape.constant(std::move(offset)))),
                          tape.constant(std::move(off_diag)));
  const auto log_denom = ops::sum(ops::log(ops::sum_axis(e, 1)));
  const auto positive = ops::sum(ops::mul(s, tape.constant(weights)));
  return ops::shift(ops::sub(log_denom, positive), max_total);
}

void check_views(const Var &z, std::string_view what) {
  check_rank2(z, what);
  const std::size_t rows = z.value().rows();
  if (rows < 2 || rows % 2 != 0)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: expected an even number >= 2 of view rows, got {}", what, rows));
}

std::vector<int> row_labels(std::span<const int> labels, std::size_t rows, std::string_view what) {
  if (labels.size() == rows)
    return {labels.begin(), labels.end()};
  if (labels.size() * 2 == rows) {
    std::vector<int> out;
    for (int y : labels) {
      out.push_back(y);
      out.push_back(y);
    }
    return out;
  }
  throw Error(ErrorCode::ShapeMismatch,
              fmt::format("{}: {} labels for {} view rows", what, labels.size(), rows));
}

void check_pair(const Var &z1, const Var &z2, std::string_view what) {
  check_rank2(z1, what);
  check_rank2(z2, what);
  if (z1.shape() != z2.shape())
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{}: view shapes {} vs {}", what,
                                                      shape_string(z1.shape()),
                                                      shape_string(z2.shape())));
}

Tensor identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    t.at(i, i) = 1.0;
  return t;
}

Tensor complement(const Tensor &m) {
  Tensor out(m.shape());
  for (std::size_t i = 0; i < m.numel(); ++i)
    out[i] = 1.0 - m[i];
  return out;
}

Var combine(const Var &first, const Var &second, double lambda, BtMode mode) {
  switch (mode) {
  case BtMode::OnDiagOnly: return first;
  case BtMode::OffDiagOnly: return ops::scale(second, lambda);
  case BtMode::Full: break;
  }
  return ops::add(first, ops::scale(second, lambda));
}

} // namespace

Var nt_xent(const Var &z, double temperature) {
  check_views(z, "nt_xent");
  const std::size_t n = z.value().rows();
  Tensor w(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    w.at(i, i ^ 1U) = 1.0;
  return contrastive(z, w, temperature, "nt_xent");
}

Var supcon(const Var &z, std::span<const int> labels, double temperature) {
  check_views(z, "supcon");
  const std::size_t n = z.value().rows();
  const auto y = row_labels(labels, n, "supcon");
  Tensor w = build_class_mask(y);
  for (std::size_t i = 0; i < n; ++i) {
    w.at(i, i) = 0.0;
    double count = 0;
    for (std::size_t p = 0; p < n; ++p)
      count += w.at(i, p);
    if (count == 0)
      throw Error(ErrorCode::EmptyPositiveSet, fmt::format("supcon: anchor {} has no positives", i));
    for (std::size_t p = 0; p < n; ++p)
      w.at(i, p) /= count;
  }
  return contrastive(z, w, temperature, "supcon");
}

BtTerms barlow_twins_terms(const Var &z1, const Var &z2) {
  check_pair(z1, z2, "barlow_twins");
  const std::size_t b = z1.value().rows(), d = z1.value().cols();
  if (b < 2)
    throw Error(ErrorCode::DegenerateFeature,
                fmt::format("barlow_twins: batch of {} cannot be standardized", b));
  Tape &tape = *z1.tape();
  const auto c = ops::scale(
      ops::matmul(ops::transpose(ops::standardize_columns(z1)), ops::standardize_columns(z2)),
      1.0 / static_cast<double>(b));
  const Tensor eye = identity(d);
  const auto on = ops::sum(ops::mul(ops::pow(ops::shift(ops::scale(c, -1.0), 1.0), 2.0),
                                    tape.constant(eye)));
  const auto off = ops::sum(ops::mul(ops::pow(c, 2.0), tape.constant(complement(eye))));
  return {on, off};
}

Var barlow_twins(const Var &z1, const Var &z2, double lambda, BtMode mode) {
  const auto t = barlow_twins_terms(z1, z2);
  return combine(t.on_diag, t.off_diag, lambda, mode);
}

SupBtTerms sup_bt_terms(const Var &z1, const Var &z2, std::span<const int> labels,
                        SbtScale scale) {
  check_pair(z1, z2, "sup_bt");
  const std::size_t b = z1.value().rows(), d = z1.value().cols();
  if (labels.size() != b)
    throw Error(ErrorCode::ShapeMismatch, fmt::format("sup_bt: {} labels for {} rows", labels.size(), b));
  check_rows_nonzero(z1.value(), "sup_bt view 1");
  check_rows_nonzero(z2.value(), "sup_bt view 2");
  Tape &tape = *z1.tape();
  auto s = ops::matmul(ops::l2_normalize_rows(z1), ops::transpose(ops::l2_normalize_rows(z2)));
  if (scale == SbtScale::InvD)
    s = ops::scale(s, 1.0 / static_cast<double>(d));
  const Tensor m = build_class_mask(labels);
  const auto same =
      ops::sum(ops::mul(ops::pow(ops::shift(ops::scale(s, -1.0), 1.0), 2.0), tape.constant(m)));
  const auto diff = ops::sum(ops::mul(ops::pow(ops::shift(s, 1.0), 2.0), tape.constant(complement(m))));
  return {same, diff};
}

Var sup_bt(const Var &z1, const Var &z2, std::span<const int> labels, double lambda, BtMode mode,
           SbtScale scale) {
  const auto t = sup_bt_terms(z1, z2, labels, scale);
  return combine(t.same, t.diff, lambda, mode);
}

Var pretrain_loss(const Var &z, std::span<const int> labels, const LossConfig &cfg) {
  check_views(z, "pretrain_loss");
  const std::size_t n = z.value().rows() / 2;
  if (cfg.needs_labels() && labels.size() != n)
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("pretrain_loss: {} labels for {} origins", labels.size(), n));
  switch (cfg.kind) {
  case LossKind::NtXent: return nt_xent(z, cfg.temperature);
  case LossKind::SupCon: return supcon(z, labels, cfg.temperature);
  case LossKind::BarlowTwins:
  case LossKind::SupBt: break;
  }
  std::vector<int> even, odd;
  for (std::size_t k = 0; k < n; ++k) {
    even.push_back(static_cast<int>(2 * k));
    odd.push_back(static_cast<int>(2 * k + 1));
  }
  const auto z1 = ops::gather_rows(z, even);
  const auto z2 = ops::gather_rows(z, odd);
  if (cfg.kind == LossKind::BarlowTwins)
    return barlow_twins(z1, z2, cfg.lambda, cfg.bt_mode);
  return sup_bt(z1, z2, labels, cfg.lambda, cfg.bt_mode, cfg.sbt_scale);
}

} // namespace spmat
