// Generic staggered stencils for terms of the form d_outer( m * d_inner w ) evaluated
// at a velocity face, with m cell-centered. Aligned derivatives use the natural
// staggered differences; misaligned ones go through the 4-point interpolations of the
// velocity components (u*, v*) and of m at corners (m*). Entries are emitted with raw,
// possibly out-of-range indices; the assembly layer folds those through the boundary
// rules.
#pragma once

#include <memfsi/grid.hpp>

namespace memfsi {

enum class Comp { U, V };
enum class Axis { X, Y };

namespace detail {

// coefficients of the inner derivative d_inner(w) at a cell center, scaled by c
template <class Emit>
void inner_at_cell(const GridSpec& g, Axis inner, Comp w, int i, int j, double c, Emit&& emit) {
  if (inner == Axis::X) {
    if (w == Comp::U) {
      emit(Comp::U, i + 1, j, c / g.dx);
      emit(Comp::U, i, j, -c / g.dx);
    } else {
      const double q = c / (4 * g.dx);
      emit(Comp::V, i + 1, j, q);
      emit(Comp::V, i + 1, j + 1, q);
      emit(Comp::V, i - 1, j, -q);
      emit(Comp::V, i - 1, j + 1, -q);
    }
  } else {
    if (w == Comp::U) {
      const double q = c / (4 * g.dy);
      emit(Comp::U, i, j + 1, q);
      emit(Comp::U, i + 1, j + 1, q);
      emit(Comp::U, i, j - 1, -q);
      emit(Comp::U, i + 1, j - 1, -q);
    } else {
      emit(Comp::V, i, j + 1, c / g.dy);
      emit(Comp::V, i, j, -c / g.dy);
    }
  }
}

// coefficients of the inner derivative d_inner(w) at a corner, scaled by c
template <class Emit>
void inner_at_corner(const GridSpec& g, Axis inner, Comp w, int I, int J, double c, Emit&& emit) {
  if (inner == Axis::X) {
    if (w == Comp::U) {
      const double q = c / (4 * g.dx);
      emit(Comp::U, I + 1, J - 1, q);
      emit(Comp::U, I + 1, J, q);
      emit(Comp::U, I - 1, J - 1, -q);
      emit(Comp::U, I - 1, J, -q);
    } else {
      emit(Comp::V, I, J, c / g.dx);
      emit(Comp::V, I - 1, J, -c / g.dx);
    }
  } else {
    if (w == Comp::U) {
      emit(Comp::U, I, J, c / g.dy);
      emit(Comp::U, I, J - 1, -c / g.dy);
    } else {
      const double q = c / (4 * g.dy);
      emit(Comp::V, I - 1, J + 1, q);
      emit(Comp::V, I, J + 1, q);
      emit(Comp::V, I - 1, J - 1, -q);
      emit(Comp::V, I, J - 1, -q);
    }
  }
}

}  // namespace detail

// Row at the (row)-component face (a, b): u-faces are (I, j), v-faces (i, J).
// m is any cell-indexable callable; scale multiplies every coefficient.
template <class MField, class Emit>
void div_m_grad_stencil(const GridSpec& g, Comp row, int a, int b, Axis outer, Axis inner, Comp w,
                        const MField& m, double scale, Emit&& emit) {
  auto mstar = [&](int I, int J) {
    return 0.25 * (m(I - 1, J - 1) + m(I, J - 1) + m(I - 1, J) + m(I, J));
  };
  if (row == Comp::U) {
    const int I = a, j = b;
    if (outer == Axis::X) {
      detail::inner_at_cell(g, inner, w, I, j, scale * m(I, j) / g.dx, emit);
      detail::inner_at_cell(g, inner, w, I - 1, j, -scale * m(I - 1, j) / g.dx, emit);
    } else {
      detail::inner_at_corner(g, inner, w, I, j + 1, scale * mstar(I, j + 1) / g.dy, emit);
      detail::inner_at_corner(g, inner, w, I, j, -scale * mstar(I, j) / g.dy, emit);
    }
  } else {
    const int i = a, J = b;
    if (outer == Axis::Y) {
      detail::inner_at_cell(g, inner, w, i, J, scale * m(i, J) / g.dy, emit);
      detail::inner_at_cell(g, inner, w, i, J - 1, -scale * m(i, J - 1) / g.dy, emit);
    } else {
      detail::inner_at_corner(g, inner, w, i + 1, J, scale * mstar(i + 1, J) / g.dx, emit);
      detail::inner_at_corner(g, inner, w, i, J, -scale * mstar(i, J) / g.dx, emit);
    }
  }
}

}  // namespace memfsi
