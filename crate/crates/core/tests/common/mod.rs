//! Test-side oracles: brute-force and grid maximum-empty-rectangle
//! references, and an active-set enumeration reference for small QPs.
//! These stay independent of the implementation paths they check.

use corridor_core::annotation::{AxisRect, MerBoundary};
use corridor_core::geometry::Vec2;
use corridor_core::qp::QpProblem;
use nalgebra::{DMatrix, DVector};

/// Run one acceptance criterion, printing a pass/fail line either way.
#[allow(dead_code)]
pub fn criterion<F: FnOnce() + std::panic::UnwindSafe>(name: &str, body: F) {
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("ACCEPTANCE {name}: PASS"),
        Err(cause) => {
            println!("ACCEPTANCE {name}: FAIL");
            std::panic::resume_unwind(cause);
        }
    }
}

fn lex_better(area: f64, x_min: f64, y_min: f64, best: &Option<(f64, AxisRect)>) -> bool {
    match best {
        None => true,
        Some((best_area, r)) => {
            area > *best_area
                || (area == *best_area
                    && (x_min < r.x_min || (x_min == r.x_min && y_min < r.y_min)))
        }
    }
}

/// Enumerate every candidate edge 4-tuple drawn from obstacle coordinates
/// and the boundary edges; keep the valid rectangle of maximum area with
/// the lexicographic `(x_min, y_min)` tie-break.
#[allow(dead_code)]
pub fn mer_brute_force(points: &[Vec2], boundary: &MerBoundary, anchor: Vec2) -> AxisRect {
    let bx0 = anchor.x - 0.5 * boundary.l_max;
    let bx1 = anchor.x + 0.5 * boundary.l_max;
    let by0 = anchor.y - 0.5 * boundary.w_max;
    let by1 = anchor.y + 0.5 * boundary.w_max;
    let pts: Vec<Vec2> = points
        .iter()
        .copied()
        .filter(|p| p.x >= bx0 && p.x <= bx1 && p.y >= by0 && p.y <= by1)
        .collect();

    let mut xs_lo: Vec<f64> = pts.iter().map(|p| p.x).filter(|&x| x <= anchor.x).collect();
    xs_lo.push(bx0);
    xs_lo.sort_by(f64::total_cmp);
    xs_lo.dedup();
    let mut xs_hi: Vec<f64> = pts.iter().map(|p| p.x).filter(|&x| x >= anchor.x).collect();
    xs_hi.push(bx1);
    xs_hi.sort_by(f64::total_cmp);
    xs_hi.dedup();
    let mut ys_lo: Vec<f64> = pts.iter().map(|p| p.y).filter(|&y| y <= anchor.y).collect();
    ys_lo.push(by0);
    ys_lo.sort_by(f64::total_cmp);
    ys_lo.dedup();
    let mut ys_hi: Vec<f64> = pts.iter().map(|p| p.y).filter(|&y| y >= anchor.y).collect();
    ys_hi.push(by1);
    ys_hi.sort_by(f64::total_cmp);
    ys_hi.dedup();

    let mut best: Option<(f64, AxisRect)> = None;
    for &x1 in &xs_lo {
        for &x2 in &xs_hi {
            for &y1 in &ys_lo {
                'tuple: for &y2 in &ys_hi {
                    for p in &pts {
                        if p.x > x1 && p.x < x2 && p.y > y1 && p.y < y2 {
                            continue 'tuple;
                        }
                    }
                    let area = (x2 - x1) * (y2 - y1);
                    if lex_better(area, x1, y1, &best) {
                        best = Some((
                            area,
                            AxisRect {
                                x_min: x1,
                                x_max: x2,
                                y_min: y1,
                                y_max: y2,
                            },
                        ));
                    }
                }
            }
        }
    }
    best.expect("boundary tuple always valid").1
}

/// Dense grid search: rasterize the boundary at `res`, block every cell
/// containing an obstacle point, and take the largest all-free rectangle of
/// cells covering the anchor cell (maximal-rectangle sweep with per-row
/// histograms). Returns the area in square meters.
#[allow(dead_code)]
pub fn mer_grid_oracle(points: &[Vec2], boundary: &MerBoundary, anchor: Vec2, res: f64) -> f64 {
    let bx0 = anchor.x - 0.5 * boundary.l_max;
    let by0 = anchor.y - 0.5 * boundary.w_max;
    let w = (boundary.l_max / res).round() as usize;
    let h = (boundary.w_max / res).round() as usize;
    let mut blocked = vec![false; w * h];
    let clamp_cell = |v: f64, n: usize| -> Option<usize> {
        if v < 0.0 || v > n as f64 {
            return None;
        }
        Some((v.floor() as usize).min(n - 1))
    };
    for p in points {
        let (Some(col), Some(row)) = (
            clamp_cell((p.x - bx0) / res, w),
            clamp_cell((p.y - by0) / res, h),
        ) else {
            continue;
        };
        blocked[row * w + col] = true;
    }
    let anchor_col = ((anchor.x - bx0) / res).floor() as usize;
    let anchor_row = ((anchor.y - by0) / res).floor() as usize;

    let mut heights = vec![0usize; w];
    let mut best_cells = 0usize;
    for row in 0..h {
        for (col, height) in heights.iter_mut().enumerate() {
            *height = if blocked[row * w + col] { 0 } else { *height + 1 };
        }
        // histogram sweep: every maximal rectangle with bottom on this row
        // is reported when its height run ends
        let mut stack: Vec<(usize, usize)> = Vec::new(); // (start_col, height)
        let mut consider = |left: usize, right: usize, height: usize| {
            if height == 0 || right <= left {
                return;
            }
            let top = row + 1 - height;
            if anchor_row >= top
                && anchor_row <= row
                && anchor_col >= left
                && anchor_col < right
            {
                best_cells = best_cells.max((right - left) * height);
            }
        };
        #[allow(clippy::needless_range_loop)] // col w is the flush sentinel
        for col in 0..=w {
            let cur = if col < w { heights[col] } else { 0 };
            let mut start = col;
            while let Some(&(idx, hgt)) = stack.last() {
                if hgt <= cur {
                    break;
                }
                stack.pop();
                consider(idx, col, hgt);
                start = idx;
            }
            if cur > 0 && stack.last().is_none_or(|&(_, hgt)| hgt < cur) {
                stack.push((start, cur));
            }
        }
    }
    best_cells as f64 * res * res
}

/// Global optimum of a small QP by enumerating every active subset of the
/// inequality rows, solving the equality-constrained KKT system, and
/// keeping the feasible candidate with the lowest objective.
#[allow(dead_code)]
pub fn qp_active_set_oracle(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.num_vars();
    let me = p.num_eq();
    let mi = p.num_in();
    assert!(mi <= 16, "oracle is exponential in the row count");
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << mi) {
        let active: Vec<usize> = (0..mi).filter(|i| mask & (1 << i) != 0).collect();
        let ma = active.len();
        if me + ma > n + me {
            continue;
        }
        let dim = n + me + ma;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(2.0 * p.h.clone()));
        if me > 0 {
            kkt.view_mut((0, n), (n, me)).copy_from(&p.a_eq.transpose());
            kkt.view_mut((n, 0), (me, n)).copy_from(&p.a_eq);
        }
        for (k, &i) in active.iter().enumerate() {
            for a in 0..n {
                kkt[(a, n + me + k)] = p.a_in[(i, a)];
                kkt[(n + me + k, a)] = p.a_in[(i, a)];
            }
        }
        let mut rhs = DVector::zeros(dim);
        for a in 0..n {
            rhs[a] = -p.g[a];
        }
        for e in 0..me {
            rhs[n + e] = p.b_eq[e];
        }
        for (k, &i) in active.iter().enumerate() {
            rhs[n + me + k] = p.b_in[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if !sol.iter().all(|v| v.is_finite()) {
            continue;
        }
        let z: DVector<f64> = sol.rows(0, n).into();
        // primal feasibility over every row
        if mi > 0 && (&p.a_in * &z - &p.b_in).max() > 1e-9 {
            continue;
        }
        if me > 0 && (&p.a_eq * &z - &p.b_eq).amax() > 1e-9 {
            continue;
        }
        let obj = p.objective(&z);
        match &best {
            Some((_, best_obj)) if obj >= *best_obj => {}
            _ => best = Some((z, obj)),
        }
    }
    best
}
