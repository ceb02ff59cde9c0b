#pragma once

#include <array>
#include <string>
#include <string_view>

namespace mwd {

enum class StencilKind { k7ptConst, k7ptVar, k25ptConst, k25ptVar };

inline constexpr std::array<StencilKind, 4> kAllStencils = {
    StencilKind::k7ptConst, StencilKind::k7ptVar, StencilKind::k25ptConst,
    StencilKind::k25ptVar};

/// Static properties of one stencil operator.
///
/// `n_streams` counts every domain-sized array the operator touches: the two
/// grid copies plus one array per spatially varying coefficient.
/// `ideal_code_balance` is the minimum main-memory traffic per lattice
/// update in double precision (bytes/LUP).
struct StencilSpec {
  StencilKind kind;
  int radius;
  int n_streams;
  int n_coeff_arrays;
  int n_scalar_weights;
  double ideal_code_balance;
  int flops_per_lup;
  int time_order;

  /// Temporal blocking is only offered for first-order-in-time operators.
  bool wavefront_eligible() const { return time_order == 1; }
};

constexpr StencilSpec make_spec(StencilKind kind) {
  switch (kind) {
    case StencilKind::k7ptConst:
      return {kind, 1, 2, 0, 2, 24.0, 10, 1};
    case StencilKind::k7ptVar:
      return {kind, 1, 9, 7, 0, 80.0, 13, 1};
    case StencilKind::k25ptConst:
      return {kind, 4, 3, 1, 5, 32.0, 33, 2};
    case StencilKind::k25ptVar:
      return {kind, 4, 15, 13, 0, 128.0, 37, 1};
  }
  return {kind, 1, 2, 0, 2, 24.0, 10, 1};
}

std::string_view to_string(StencilKind kind);

/// Accepts the CLI spellings "7pt-const", "7pt-var", "25pt-const", "25pt-var".
StencilKind parse_stencil_kind(std::string_view name);

}  // namespace mwd
