#pragma once

#include "spmat/ops.hpp"
#include "spmat/tape.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spmat {

enum class LossKind { NtXent, SupCon, BarlowTwins, SupBt };
enum class BtMode { Full, OnDiagOnly, OffDiagOnly };
/// Sup-BT similarity scaling: divide by D as in the reference pseudocode, or not.
enum class SbtScale { InvD, None };

std::string to_string(LossKind k);
std::string to_string(BtMode m);
std::string to_string(SbtScale s);
LossKind parse_loss_kind(std::string_view s);
BtMode parse_bt_mode(std::string_view s);
SbtScale parse_sbt_scale(std::string_view s);

struct LossConfig {
  LossKind kind = LossKind::SupBt;
  double temperature = 0.03;
  /// Off-diagonal / different-class weight. Also known as alpha.
  double lambda = 0.0051;
  BtMode bt_mode = BtMode::Full;
  SbtScale sbt_scale = SbtScale::InvD;

  void validate() const;
  bool needs_labels() const { return kind == LossKind::SupCon || kind == LossKind::SupBt; }
};

/// B x B matrix, 1 where labels agree.
Tensor build_class_mask(std::span<const int> labels);

/// Rows are 2N views; rows 2k and 2k+1 come from the same origin.
Var nt_xent(const Var &z, double temperature);
/// `labels` has one entry per origin (N entries) or per row (2N entries).
Var supcon(const Var &z, std::span<const int> labels, double temperature);

struct BtTerms {
  Var on_diag;  ///< sum_d (1 - C_dd)^2
  Var off_diag; ///< sum_{d != d'} C_dd'^2, unweighted
};
BtTerms barlow_twins_terms(const Var &z1, const Var &z2);
Var barlow_twins(const Var &z1, const Var &z2, double lambda, BtMode mode = BtMode::Full);

struct SupBtTerms {
  Var same; ///< sum M (1 - S)^2
  Var diff; ///< sum (1 - M) (1 + S)^2, unweighted
};
SupBtTerms sup_bt_terms(const Var &z1, const Var &z2, std::span<const int> labels,
                        SbtScale scale = SbtScale::InvD);
Var sup_bt(const Var &z1, const Var &z2, std::span<const int> labels, double lambda,
           BtMode mode = BtMode::Full, SbtScale scale = SbtScale::InvD);

/// Configured loss on interleaved view embeddings (2N rows) with one label per
/// origin; labels may be empty for the unsupervised kinds.
Var pretrain_loss(const Var &z, std::span<const int> labels, const LossConfig &cfg);

} // namespace spmat
