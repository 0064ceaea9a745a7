//! Strict 8-neighborhood local maxima with plateau reduction.
//!
//! A connected (8-neighborhood) component of equal-valued pixels is a maximum
//! when every pixel adjacent to it inside the raster is strictly lower. Such a
//! component is reported once, at its integer centroid (halves round toward
//! the top-left); if the centroid falls outside a non-convex component, the
//! nearest member pixel is used instead. A component with no outside
//! neighbors at all (a constant raster) is not a maximum.

use std::collections::VecDeque;

use crate::geometry::{Extent, Location};
use crate::hos::ScoredLocation;

const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Local maxima of `values` sorted by value descending, then row-major.
pub fn local_maxima(values: &[f64], extent: Extent) -> Vec<ScoredLocation> {
    local_maxima_where(values, extent, |_| true)
}

/// Like [`local_maxima`] but only keeps maxima whose value satisfies `keep`.
pub fn local_maxima_where<F>(values: &[f64], extent: Extent, keep: F) -> Vec<ScoredLocation>
where
    F: Fn(f64) -> bool,
{
    assert_eq!(values.len(), extent.len(), "raster size mismatch");
    let (w, h) = (extent.width as i64, extent.height as i64);
    let mut visited = vec![false; values.len()];
    let mut peaks = Vec::new();
    let mut queue = VecDeque::new();
    let mut members = Vec::new();

    for start in 0..values.len() {
        if visited[start] {
            continue;
        }
        let v = values[start];
        if v.is_nan() || !keep(v) {
            continue;
        }
        let (sx, sy) = ((start % extent.width) as i64, (start / extent.width) as i64);

        let mut has_equal = false;
        let mut dominated = false;
        let mut has_outside = false;
        for (dx, dy) in NEIGHBORS {
            let (nx, ny) = (sx + dx, sy + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let n = values[(ny * w + nx) as usize];
            if n > v {
                dominated = true;
                break;
            } else if n == v {
                has_equal = true;
            } else {
                has_outside = true;
            }
        }
        if dominated {
            continue;
        }
        if !has_equal {
            visited[start] = true;
            if has_outside {
                peaks.push(ScoredLocation::new(sx as u32, sy as u32, v));
            }
            continue;
        }

        // Plateau: flood the equal-valued component.
        members.clear();
        queue.clear();
        visited[start] = true;
        queue.push_back(start);
        let mut is_max = true;
        has_outside = false;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = ((i % extent.width) as i64, (i / extent.width) as i64);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                let n = values[j];
                if n == v {
                    if !visited[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                } else {
                    has_outside = true;
                    if n > v || n.is_nan() {
                        is_max = false;
                    }
                }
            }
        }
        if is_max && has_outside {
            let at = plateau_representative(&members, extent);
            peaks.push(ScoredLocation::new(at.x, at.y, v));
        }
    }

    sort_by_confidence(&mut peaks);
    peaks
}

/// Sorts confidence-descending with row-major tie-break.
pub fn sort_by_confidence(locs: &mut [ScoredLocation]) {
    locs.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.location().row_major_key().cmp(&b.location().row_major_key()))
    });
}

/// Nearest integer to `sum / n`, exact halves rounding down.
fn round_half_down(sum: u64, n: u64) -> u64 {
    (2 * sum + n - 1) / (2 * n)
}

fn plateau_representative(members: &[usize], extent: Extent) -> Location {
    let n = members.len() as u64;
    let (sx, sy) = members.iter().fold((0u64, 0u64), |(sx, sy), &i| {
        (sx + (i % extent.width) as u64, sy + (i / extent.width) as u64)
    });
    let centroid = Location::new(round_half_down(sx, n) as u32, round_half_down(sy, n) as u32);
    let centroid_index = extent.index(centroid);
    if members.contains(&centroid_index) {
        return centroid;
    }
    members
        .iter()
        .map(|&i| extent.location(i))
        .min_by(|a, b| {
            a.distance_sq(centroid)
                .total_cmp(&b.distance_sq(centroid))
                .then_with(|| a.row_major_key().cmp(&b.row_major_key()))
        })
        .expect("plateau has members")
}
